"""Gradients of per-qubit <Z> outputs.

The adjoint sweep is the production path. Parameter-shift is kept as an
exact, independent oracle for rotation gates.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .encoding import encode_rows, qubits_needed
from .errors import ShapeError, UnsupportedGradientError
from .quantum import (
    ROTATIONS, Circuit, StateVector, dagger, evolve_rows, gate_angles,
    gate_derivative, gate_matrix, z_expectations_rows,
)


def _check_differentiable(circuit: Circuit) -> None:
    for g in circuit.gates:
        if g.parametric and g.kind not in ROTATIONS:
            raise UnsupportedGradientError(f"cannot differentiate parametric {g.kind}")


def adjoint_sweep(circuit: Circuit, angles: np.ndarray, phi: np.ndarray, lam: np.ndarray,
                  need_params: bool = True):
    """Reverse pass over ``circuit``.

    ``phi`` holds output states (1 or R rows), ``lam`` the rows O_r|phi>.
    Both are consumed in place. Returns (d_params (R, P), lam) where the
    returned ``lam`` equals U^dagger O U applied to the circuit input.
    """
    _check_differentiable(circuit)
    n = circuit.n_qubits
    k = kernels.active
    d = np.zeros((lam.shape[0], circuit.n_params))
    for g, theta in zip(reversed(circuit.gates), angles[::-1]):
        if g.kind == "CNOT":
            c, t = g.targets
            if need_params:
                k.apply_cnot(phi, n, c, t)
            k.apply_cnot(lam, n, c, t)
            continue
        q = g.targets[0]
        inv = dagger(gate_matrix(g.kind, theta))
        if need_params:
            k.apply_1q(phi, n, q, *inv)
            if g.parametric:
                mu = phi.copy()
                k.apply_1q(mu, n, q, *gate_derivative(g.kind, theta))
                d[:, g.param_slot] += 2.0 * k.re_inner_rows(lam, mu)
        k.apply_1q(lam, n, q, *inv)
    return d, lam


def _z_rows(psi: np.ndarray, n: int) -> np.ndarray:
    """Stack Z_q|psi> for q = 0..n-1 (psi is a single row)."""
    return kernels.active.apply_z_weighted(np.repeat(psi, n, axis=0), n, np.eye(n))


def _check_state(circuit: Circuit, state: StateVector) -> None:
    if state.n_qubits != circuit.n_qubits:
        raise ShapeError(f"state has {state.n_qubits} qubits, circuit {circuit.n_qubits}")


def grad_params_adjoint(circuit: Circuit, input_state: StateVector, params) -> np.ndarray:
    """Jacobian d<Z_q>/d theta_k, shape (n_qubits, n_params)."""
    _check_state(circuit, input_state)
    _check_differentiable(circuit)
    angles = gate_angles(circuit, params)
    phi = input_state.amplitudes.copy().reshape(1, -1)
    evolve_rows(circuit, phi, angles)
    lam = _z_rows(phi, circuit.n_qubits)
    d, _ = adjoint_sweep(circuit, angles, phi, lam)
    return d


def grad_params_shift(circuit: Circuit, input_state: StateVector, params) -> np.ndarray:
    """Same Jacobian by the two-term shift rule, one gate occurrence at a time."""
    _check_state(circuit, input_state)
    _check_differentiable(circuit)
    angles = gate_angles(circuit, params)
    n = circuit.n_qubits
    out = np.zeros((n, circuit.n_params))
    for i, g in enumerate(circuit.gates):
        if not g.parametric:
            continue
        shifted = np.repeat(input_state.amplitudes.reshape(1, -1), 2, axis=0)
        for row, sign in enumerate((1.0, -1.0)):
            a = angles.copy()
            a[i] += sign * math.pi / 2
            evolve_rows(circuit, shifted[row : row + 1], a)
        z = z_expectations_rows(shifted, n)
        out[:, g.param_slot] += 0.5 * (z[0] - z[1])
    return out


def _normalization_vjp(g: np.ndarray, raw: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Pull back gradients w.r.t. x/|x| to gradients w.r.t. x, row-wise."""
    xhat = raw / norms[:, None]
    proj = np.sum(xhat * g, axis=1)
    return (g - xhat * proj[:, None]) / norms[:, None]


def grad_input(circuit: Circuit, raw_input, params) -> np.ndarray:
    """Jacobian d<Z_q>/d x for the raw (unnormalized) input, shape (n_qubits, N)."""
    raw = np.asarray(raw_input, dtype=np.float64).ravel()
    n = circuit.n_qubits
    if qubits_needed(raw.shape[0]) != n:
        raise ShapeError(f"{raw.shape[0]} features need {qubits_needed(raw.shape[0])} qubits, circuit has {n}")
    _check_differentiable(circuit)
    angles = gate_angles(circuit, params)
    psi, norms = encode_rows(raw[None, :], n)
    evolve_rows(circuit, psi, angles)
    lam = _z_rows(psi, n)
    _, lam = adjoint_sweep(circuit, angles, psi, lam, need_params=False)
    g = 2.0 * lam.real[:, : raw.shape[0]]
    return _normalization_vjp(g, np.repeat(raw[None, :], n, axis=0), np.repeat(norms, n))


def head_vjp_rows(circuit: Circuit, raw: np.ndarray, params, upstream: np.ndarray):
    """Batched vector-Jacobian product.

    ``raw`` is (B, N), ``upstream`` is (B, n_qubits). Returns per-sample
    (d_params (B, P), d_input (B, N)); nothing is summed over the batch.
    """
    raw = np.asarray(raw, dtype=np.float64)
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    n = circuit.n_qubits
    if upstream.shape != (raw.shape[0], n):
        raise ShapeError(f"upstream must have shape {(raw.shape[0], n)}, got {upstream.shape}")
    if not np.all(np.isfinite(upstream)):
        raise ValueError("upstream gradient is not finite")
    angles = gate_angles(circuit, params)
    psi, norms = encode_rows(raw, n)
    evolve_rows(circuit, psi, angles)
    lam = kernels.active.apply_z_weighted(psi, n, upstream)
    d_params, lam = adjoint_sweep(circuit, angles, psi, lam)
    g = 2.0 * lam.real[:, : raw.shape[1]]
    return d_params, _normalization_vjp(g, raw, norms)


def head_vjp(circuit: Circuit, raw_input, params, upstream):
    """(upstream^T dZ/dtheta, upstream^T dZ/dx) for a single input vector."""
    raw = np.asarray(raw_input, dtype=np.float64).ravel()
    up = np.asarray(upstream, dtype=np.float64).ravel()
    if up.shape[0] != circuit.n_qubits:
        raise ShapeError(f"upstream must have length {circuit.n_qubits}, got {up.shape[0]}")
    if qubits_needed(raw.shape[0]) != circuit.n_qubits:
        raise ShapeError(f"{raw.shape[0]} features do not match a {circuit.n_qubits}-qubit circuit")
    d_params, d_input = head_vjp_rows(circuit, raw[None, :], params, up[None, :])
    return d_params[0], d_input[0]
