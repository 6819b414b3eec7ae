"""Dense state-vector simulation of n-qubit registers.

Basis index convention: the binary expansion of an amplitude's index is read
most-significant bit first, so qubit 0 (the top wire of a circuit diagram)
is the MSB. For two qubits, index 2 = ``10`` = qubit 0 in |1>, qubit 1 in |0>.

Gates are applied in place through the kernels in :mod:`aevqc.kernels`;
no 2^n x 2^n matrix is ever built here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import CapacityError, FormatError, ParameterError, QubitIndexError, ShapeError

MAX_QUBITS = 24

ROTATIONS = frozenset({"RX", "RY", "RZ"})
FIXED_1Q = frozenset({"X", "Y", "Z", "H"})
GATE_KINDS = ROTATIONS | FIXED_1Q | {"CNOT"}

_S2 = 1.0 / math.sqrt(2.0)
_FIXED = {
    "X": (0.0, 1.0, 1.0, 0.0),
    "Y": (0.0, -1j, 1j, 0.0),
    "Z": (1.0, 0.0, 0.0, -1.0),
    "H": (_S2, _S2, _S2, -_S2),
}


def gate_matrix(kind: str, theta: float = 0.0) -> tuple[complex, complex, complex, complex]:
    """Row-major entries (m00, m01, m10, m11) of a single-qubit gate."""
    if kind in _FIXED:
        return _FIXED[kind]
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RX":
        return (c, -1j * s, -1j * s, c)
    if kind == "RY":
        return (c, -s, s, c)
    if kind == "RZ":
        return (complex(c, -s), 0.0, 0.0, complex(c, s))
    raise ValueError(f"no single-qubit matrix for {kind!r}")


def gate_derivative(kind: str, theta: float) -> tuple[complex, complex, complex, complex]:
    """d/dtheta of a rotation matrix."""
    c, s = 0.5 * math.cos(theta / 2), 0.5 * math.sin(theta / 2)
    if kind == "RX":
        return (-s, -1j * c, -1j * c, -s)
    if kind == "RY":
        return (-s, -c, c, -s)
    if kind == "RZ":
        return (complex(-s, -c), 0.0, 0.0, complex(-s, c))
    raise ValueError(f"{kind!r} is not a rotation")


def dagger(m):
    m00, m01, m10, m11 = m
    return (complex(m00).conjugate(), complex(m10).conjugate(),
            complex(m01).conjugate(), complex(m11).conjugate())


@dataclass(frozen=True)
class Gate:
    """One gate of a circuit. ``targets`` is ``(control, target)`` for CNOT."""

    kind: str
    targets: tuple[int, ...]
    param_slot: int | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        want = 2 if kind == "CNOT" else 1
        if len(self.targets) != want:
            raise ValueError(f"{kind} takes {want} qubit index(es), got {self.targets}")
        if kind == "CNOT" and self.targets[0] == self.targets[1]:
            raise QubitIndexError("CNOT control and target must differ")
        if any(t < 0 for t in self.targets):
            raise QubitIndexError(f"negative qubit index in {self.targets}")
        if (kind in ROTATIONS) != (self.param_slot is not None):
            raise ParameterError(f"param_slot must be given exactly for rotations ({kind})")
        if self.param_slot is not None and self.param_slot < 0:
            raise ParameterError("param_slot must be non-negative")

    @property
    def parametric(self) -> bool:
        return self.param_slot is not None

    def check(self, n_qubits: int) -> None:
        for t in self.targets:
            if t >= n_qubits:
                raise QubitIndexError(f"{self.kind} on qubit {t} but register has {n_qubits}")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        for g in self.gates:
            g.check(self.n_qubits)
        slots = {g.param_slot for g in self.gates if g.parametric}
        if slots and slots != set(range(max(slots) + 1)):
            missing = sorted(set(range(max(slots) + 1)) - slots)
            raise ParameterError(f"parameter slots {missing} are never referenced")

    @property
    def n_params(self) -> int:
        slots = [g.param_slot for g in self.gates if g.parametric]
        return max(slots) + 1 if slots else 0

    def dump(self) -> str:
        lines = [f"qubits={self.n_qubits} params={self.n_params}"]
        for g in self.gates:
            line = f"{g.kind} {','.join(map(str, g.targets))}"
            if g.parametric:
                line += f" slot={g.param_slot}"
            lines.append(line)
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Circuit":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise FormatError("empty circuit dump")
        try:
            header = dict(tok.split("=", 1) for tok in lines[0].split())
            n, p = int(header["qubits"]), int(header["params"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad circuit header {lines[0]!r}") from exc
        gates = []
        for ln in lines[1:]:
            parts = ln.split()
            try:
                slot = None
                if len(parts) == 3 and parts[2].startswith("slot="):
                    slot = int(parts[2][5:])
                elif len(parts) != 2:
                    raise ValueError
                targets = tuple(int(t) for t in parts[1].split(","))
                gates.append(Gate(parts[0], targets, slot))
            except ValueError as exc:
                raise FormatError(f"bad gate line {ln!r}") from exc
        circuit = cls(n, tuple(gates))
        if circuit.n_params != p:
            raise FormatError(f"header says params={p}, gates reference {circuit.n_params}")
        return circuit


class StateVector:
    """Pure state of ``n_qubits`` qubits as a complex128 amplitude array."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes):
        _check_capacity(n_qubits)
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if amps.shape != (1 << n_qubits,):
            raise ShapeError(f"expected {1 << n_qubits} amplitudes, got shape {amps.shape}")
        self.n_qubits = n_qubits
        self.amplitudes = amps

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits}, amplitudes={self.amplitudes!r})"


def _check_capacity(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def zero_state(n_qubits: int) -> StateVector:
    _check_capacity(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def _param(params: Sequence[float], slot: int) -> float:
    if slot >= len(params):
        raise ParameterError(f"gate needs parameter slot {slot}, only {len(params)} supplied")
    return float(params[slot])


def apply_matrix_rows(psi: np.ndarray, n: int, gate: Gate, m) -> None:
    """Apply ``gate`` with explicit 2x2 entries ``m`` to every row of ``psi`` in place."""
    if gate.kind == "CNOT":
        kernels.active.apply_cnot(psi, n, gate.targets[0], gate.targets[1])
    else:
        kernels.active.apply_1q(psi, n, gate.targets[0], *m)


def evolve_rows(circuit: Circuit, psi: np.ndarray, angles: np.ndarray) -> None:
    """Run ``circuit`` on each row of the (rows, 2**n) array ``psi`` in place.

    ``angles`` holds one rotation angle per gate (ignored for fixed gates).
    """
    n = circuit.n_qubits
    for g, theta in zip(circuit.gates, angles):
        if g.kind == "CNOT":
            kernels.active.apply_cnot(psi, n, g.targets[0], g.targets[1])
        else:
            kernels.active.apply_1q(psi, n, g.targets[0], *gate_matrix(g.kind, theta))


def gate_angles(circuit: Circuit, params: Sequence[float]) -> np.ndarray:
    """Per-gate angle array resolved from the parameter vector."""
    params = np.asarray(params, dtype=np.float64).ravel()
    if params.shape[0] != circuit.n_params:
        raise ShapeError(f"circuit takes {circuit.n_params} params, got {params.shape[0]}")
    out = np.zeros(len(circuit.gates))
    for i, g in enumerate(circuit.gates):
        if g.parametric:
            out[i] = params[g.param_slot]
    return out


def apply_gate(state: StateVector, gate: Gate, params: Sequence[float] = ()) -> StateVector:
    """Return a new state with ``gate`` applied."""
    gate.check(state.n_qubits)
    theta = _param(params, gate.param_slot) if gate.parametric else 0.0
    psi = state.amplitudes.copy().reshape(1, -1)
    m = None if gate.kind == "CNOT" else gate_matrix(gate.kind, theta)
    apply_matrix_rows(psi, state.n_qubits, gate, m)
    return StateVector(state.n_qubits, psi.reshape(-1))


def run_circuit(circuit: Circuit, input_state: StateVector, params: Sequence[float] = ()) -> StateVector:
    if input_state.n_qubits != circuit.n_qubits:
        raise ShapeError(f"state has {input_state.n_qubits} qubits, circuit {circuit.n_qubits}")
    angles = gate_angles(circuit, params)
    psi = input_state.amplitudes.copy().reshape(1, -1)
    evolve_rows(circuit, psi, angles)
    return StateVector(circuit.n_qubits, psi.reshape(-1))


def z_expectations(state: StateVector) -> np.ndarray:
    """<Z_q> for every qubit q, in qubit order."""
    psi = state.amplitudes.reshape(1, -1)
    return kernels.active.z_expectations(psi, state.n_qubits)[0]


def z_expectations_rows(psi: np.ndarray, n: int) -> np.ndarray:
    return kernels.active.z_expectations(psi, n)


def random_circuit(n_qubits: int, n_gates: int, rng: np.random.Generator,
                   kinds: Iterable[str] = tuple(sorted(GATE_KINDS))) -> Circuit:
    """Random gate soup; each rotation gets its own fresh parameter slot."""
    kinds = [k for k in kinds if k != "CNOT" or n_qubits > 1]
    gates = []
    slot = 0
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        if kind == "CNOT":
            c, t = rng.choice(n_qubits, size=2, replace=False)
            gates.append(Gate("CNOT", (int(c), int(t))))
        elif kind in ROTATIONS:
            gates.append(Gate(kind, (int(rng.integers(n_qubits)),), slot))
            slot += 1
        else:
            gates.append(Gate(kind, (int(rng.integers(n_qubits)),)))
    return Circuit(n_qubits, tuple(gates))
