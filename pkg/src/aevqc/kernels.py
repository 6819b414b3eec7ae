"""Backend selection for the state-vector kernels.

The compiled Cython module is used when it imports; otherwise the numpy
fallback is. Set ``AEVQC_KERNELS`` to ``python`` or ``cython`` to force a
choice (``cython`` raises if the extension is missing).
"""

from __future__ import annotations

import contextlib
import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

BACKENDS: dict[str, ModuleType] = {"python": _kernels_py}
if _kernels_c is not None:
    BACKENDS["cython"] = _kernels_c


def _initial() -> str:
    want = os.environ.get("AEVQC_KERNELS", "auto").lower()
    if want == "auto":
        return "cython" if "cython" in BACKENDS else "python"
    if want not in BACKENDS:
        raise ImportError(f"kernel backend {want!r} unavailable; have {sorted(BACKENDS)}")
    return want


active_name: str = _initial()
active: ModuleType = BACKENDS[active_name]


def set_num_threads(n: int) -> None:
    """Bound kernel parallelism (rows are split across threads; results do not change)."""
    for mod in BACKENDS.values():
        mod.set_num_threads(int(n))


def set_backend(name: str) -> None:
    global active, active_name
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}")
    active_name = name
    active = BACKENDS[name]


@contextlib.contextmanager
def using(name: str):
    """Temporarily switch the kernel backend."""
    previous = active_name
    set_backend(name)
    try:
        yield BACKENDS[name]
    finally:
        set_backend(previous)
