"""Amplitude encoding of real feature vectors."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DomainError, ShapeError
from .quantum import StateVector, _check_capacity

MIN_NORM = 1e-12


def qubits_needed(feature_len: int) -> int:
    """ceil(log2 N), at least one qubit."""
    if feature_len < 1:
        raise DomainError(f"feature length must be >= 1, got {feature_len}")
    return max(1, (int(feature_len) - 1).bit_length())


def encode_rows(raw: np.ndarray, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Encode each row of a (B, N) array; returns (states (B, 2**n), norms (B,))."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ShapeError(f"expected a (batch, features) array, got shape {raw.shape}")
    if raw.shape[1] > 1 << n_qubits:
        raise ShapeError(f"{raw.shape[1]} features do not fit in {n_qubits} qubits")
    norms = np.sqrt(np.sum(raw * raw, axis=1))
    if not np.all(norms >= MIN_NORM):
        bad = int(np.argmin(norms))
        raise DegenerateInputError(f"row {bad} has norm {norms[bad]:.3g} < {MIN_NORM}")
    psi = np.zeros((raw.shape[0], 1 << n_qubits), dtype=np.complex128)
    psi[:, : raw.shape[1]] = raw / norms[:, None]
    return psi, norms


def amplitude_encode(raw) -> StateVector:
    """Zero-pad to a power of two and divide by the L2 norm of ``raw``."""
    raw = np.asarray(raw, dtype=np.float64).ravel()
    n = qubits_needed(raw.shape[0])
    _check_capacity(n)
    psi, _ = encode_rows(raw[None, :], n)
    return StateVector(n, psi[0])
