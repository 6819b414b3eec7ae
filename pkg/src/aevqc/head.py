"""Amplitude-encoded variational circuit head.

Raw backbone features are zero-padded, normalized into a ceil(log2 N)-qubit
state, transformed by a trainable ansatz and read out as one <Z> value per
qubit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import amplitude_encode, encode_rows, qubits_needed
from .errors import ConfigError, ShapeError
from .grad import head_vjp_rows
from .quantum import Circuit, Gate, _check_capacity, evolve_rows, gate_angles, z_expectations_rows

__all__ = [
    "AnsatzSpec", "QuantumHead", "PRESETS", "amplitude_encode", "build_ansatz",
    "count_head_params", "head_forward", "qubits_needed",
]

FAMILIES = ("a1", "a2")


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    n_qubits: int
    depth: int = 1

    def __post_init__(self):
        family = str(self.family).lower()
        object.__setattr__(self, "family", family)
        if family not in FAMILIES:
            raise ConfigError(f"ansatz must be one of {FAMILIES}, got {self.family!r}")
        if int(self.depth) < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        _check_capacity(self.n_qubits)

    @property
    def n_params(self) -> int:
        per_layer = self.n_qubits if self.family == "a1" else 2 * self.n_qubits
        return per_layer * self.depth


# Ansatz family and depth used per (dataset, backbone) in the reference experiments.
PRESETS = {
    ("croatian_fish", "resnet18"): ("a2", 1),
    ("croatian_fish", "maxvit_t"): ("a1", 1),
    ("aircraft", "resnet18"): ("a1", 1),
    ("aircraft", "maxvit_t"): ("a1", 1),
    ("busi", "resnet18"): ("a1", 1),
    ("busi", "maxvit_t"): ("a1", 1),
    ("aot", "resnet18"): ("a1", 1),
    ("aot", "maxvit_t"): ("a1", 3),
}


def build_ansatz(spec: AnsatzSpec) -> Circuit:
    """Compile a spec to a circuit; slots are numbered in gate order.

    a1: ``depth`` layers of RX on every qubit.
    a2: one H layer, then ``depth`` layers of RX on every qubit, RZ on every
    qubit and an open CNOT chain 0->1->...->n-1.
    """
    n = spec.n_qubits
    gates: list[Gate] = []
    slot = 0

    def rotations(kind):
        nonlocal slot
        for q in range(n):
            gates.append(Gate(kind, (q,), slot))
            slot += 1

    if spec.family == "a2":
        gates.extend(Gate("H", (q,)) for q in range(n))
    for _ in range(spec.depth):
        rotations("RX")
        if spec.family == "a2":
            rotations("RZ")
            gates.extend(Gate("CNOT", (q, q + 1)) for q in range(n - 1))
    return Circuit(n, tuple(gates))


def count_head_params(spec: AnsatzSpec, n_classes: int) -> tuple[int, int, int]:
    """(quantum, classical_fc, total) trainable counts after the backbone.

    The FC layer has no bias term.
    """
    if n_classes < 2:
        raise ConfigError(f"n_classes must be >= 2, got {n_classes}")
    quantum = spec.n_params
    fc = spec.n_qubits * n_classes
    return quantum, fc, quantum + fc


class QuantumHead:
    """Trainable circuit head for feature vectors of a fixed length."""

    def __init__(self, spec: AnsatzSpec, input_len: int, theta=None, rng: np.random.Generator | None = None):
        if qubits_needed(input_len) != spec.n_qubits:
            raise ConfigError(
                f"{input_len} features need {qubits_needed(input_len)} qubits, spec has {spec.n_qubits}")
        self.spec = spec
        self.input_len = int(input_len)
        self.circuit = build_ansatz(spec)
        if theta is None:
            rng = rng if rng is not None else np.random.default_rng()
            theta = rng.uniform(0.0, 2 * np.pi, size=spec.n_params)
        theta = np.array(theta, dtype=np.float64).ravel()
        if theta.shape[0] != spec.n_params:
            raise ShapeError(f"theta must have {spec.n_params} entries, got {theta.shape[0]}")
        self.theta = theta

    @classmethod
    def for_features(cls, family: str, depth: int, input_len: int, **kw) -> "QuantumHead":
        return cls(AnsatzSpec(family, qubits_needed(input_len), depth), input_len, **kw)

    @property
    def n_qubits(self) -> int:
        return self.spec.n_qubits

    def _check_rows(self, raw):
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2 or raw.shape[1] != self.input_len:
            raise ShapeError(f"expected (batch, {self.input_len}) features, got {raw.shape}")
        return raw

    def forward_rows(self, raw) -> np.ndarray:
        raw = self._check_rows(raw)
        psi, _ = encode_rows(raw, self.n_qubits)
        evolve_rows(self.circuit, psi, gate_angles(self.circuit, self.theta))
        return z_expectations_rows(psi, self.n_qubits)

    def vjp_rows(self, raw, upstream):
        """Per-sample (d_theta (B, P), d_features (B, N))."""
        return head_vjp_rows(self.circuit, self._check_rows(raw), self.theta, upstream)

    def __call__(self, raw) -> np.ndarray:
        return head_forward(self, raw)


def head_forward(head: QuantumHead, raw_features) -> np.ndarray:
    raw = np.asarray(raw_features, dtype=np.float64).ravel()
    return head.forward_rows(raw[None, :])[0]
