import math

import numpy as np
import pytest

from aevqc.encoding import amplitude_encode
from aevqc.errors import DegenerateInputError, ShapeError
from aevqc.grad import grad_input, grad_params_adjoint, grad_params_shift, head_vjp, head_vjp_rows
from aevqc.head import AnsatzSpec, build_ansatz
from aevqc.quantum import Circuit, Gate, StateVector, random_circuit, run_circuit, z_expectations, zero_state
from oracles import dense_unitary, dense_z, fd_params, random_state

RX1 = Circuit(1, (Gate("RX", (0,), 0),))


def forward_z(circuit, state):
    return lambda p: z_expectations(run_circuit(circuit, state, p))


@pytest.mark.parametrize("theta", [-2.0, 0.3, 1.0, math.pi / 2, 3.0])
def test_rx_gradient_closed_form(backend, theta):
    for fn in (grad_params_adjoint, grad_params_shift):
        g = fn(RX1, zero_state(1), [theta])
        assert g.shape == (1, 1)
        assert abs(g[0, 0] + math.sin(theta)) < 1e-14


def test_gradient_zero_at_zero():
    assert grad_params_adjoint(RX1, zero_state(1), [0.0])[0, 0] == 0.0


def test_shift_on_parameter_free_circuit():
    c = Circuit(2, (Gate("H", (0,)),))
    assert grad_params_shift(c, zero_state(2), []).shape == (2, 0)
    assert grad_params_adjoint(c, zero_state(2), []).shape == (2, 0)


def test_ansatz2_adjoint_matches_shift(backend, rng):
    c = build_ansatz(AnsatzSpec("a2", 8, 2))
    state = amplitude_encode(rng.normal(size=200))
    p = rng.uniform(0, 2 * np.pi, c.n_params)
    diff = grad_params_adjoint(c, state, p) - grad_params_shift(c, state, p)
    assert np.max(np.abs(diff)) < 1e-10


def test_shared_slot(rng):
    # two gates driven by one parameter: shift rule applied per occurrence
    c = Circuit(2, (Gate("RY", (0,), 0), Gate("CNOT", (0, 1)), Gate("RY", (1,), 0), Gate("RX", (0,), 1)))
    state = StateVector(2, random_state(rng, 2))
    p = np.array([0.7, -1.1])
    fd = fd_params(forward_z(c, state), p)
    np.testing.assert_allclose(grad_params_adjoint(c, state, p), fd, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(grad_params_shift(c, state, p), fd, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_random_circuit_vs_finite_differences(backend, seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(5, 60, rng)
    state = StateVector(5, random_state(rng, 5))
    p = rng.uniform(0, 2 * np.pi, c.n_params)
    fd = fd_params(forward_z(c, state), p)
    np.testing.assert_allclose(grad_params_adjoint(c, state, p), fd, rtol=1e-5, atol=1e-8)


def test_identity_circuit_input_gradient_at_basis_state():
    c = Circuit(1)
    np.testing.assert_allclose(grad_input(c, [1.0, 0.0], []), [[0.0, 0.0]], atol=1e-15)


def fd_input(circuit, raw, params, h=1e-5):
    raw = np.asarray(raw, dtype=float)
    cols = []
    for j in range(raw.size):
        up, dn = raw.copy(), raw.copy()
        up[j] += h
        dn[j] -= h
        f = lambda x: z_expectations(run_circuit(circuit, amplitude_encode(x), params))
        cols.append((f(up) - f(dn)) / (2 * h))
    return np.stack(cols, axis=1)


def test_identity_circuit_input_gradient_3_4():
    c = Circuit(1)
    g = grad_input(c, [3.0, 4.0], [])
    # <Z> = (x0^2 - x1^2) / (x0^2 + x1^2) -> analytic partials
    x0, x1 = 3.0, 4.0
    r2 = x0**2 + x1**2
    analytic = [[4 * x0 * x1**2 / r2**2, -4 * x1 * x0**2 / r2**2]]
    np.testing.assert_allclose(g, analytic, rtol=1e-14)
    np.testing.assert_allclose(g, fd_input(c, [3.0, 4.0], []), rtol=1e-5)


@pytest.mark.parametrize("seed", range(4))
def test_input_gradient_vs_finite_differences(backend, seed):
    rng = np.random.default_rng(100 + seed)
    c = build_ansatz(AnsatzSpec("a2" if seed % 2 else "a1", 4, 2))
    raw = rng.normal(size=13)
    p = rng.uniform(0, 2 * np.pi, c.n_params)
    np.testing.assert_allclose(grad_input(c, raw, p), fd_input(c, raw, p), rtol=1e-5, atol=1e-8)


def test_input_gradient_dense_oracle(rng):
    # d<Z_q>/dxhat = 2 Re(U^dag Z_q U xhat), projected through the normalization
    c = random_circuit(4, 30, rng)
    p = rng.uniform(0, 2 * np.pi, c.n_params)
    raw = rng.normal(size=11)
    U = dense_unitary(c, p)
    xhat = np.zeros(16)
    xhat[:11] = raw / np.linalg.norm(raw)
    r = np.linalg.norm(raw)
    J = (np.eye(11) - np.outer(xhat[:11], xhat[:11])) / r
    expected = np.stack([J @ (2 * (U.conj().T @ dense_z(4, q) @ U @ xhat).real[:11]) for q in range(4)])
    np.testing.assert_allclose(grad_input(c, raw, p), expected, atol=1e-13)


def test_input_gradient_orthogonal_to_input(rng):
    c = build_ansatz(AnsatzSpec("a2", 5, 1))
    raw = rng.normal(size=30)
    g = grad_input(c, raw, rng.uniform(0, 6, c.n_params))
    xhat = raw / np.linalg.norm(raw)
    assert np.max(np.abs(g @ xhat)) < 1e-10


def test_input_gradient_degenerate():
    with pytest.raises(DegenerateInputError):
        grad_input(Circuit(2), np.zeros(4), [])


def test_vjp_zero_and_one_hot(rng):
    c = build_ansatz(AnsatzSpec("a2", 3, 1))
    raw = rng.normal(size=7)
    p = rng.uniform(0, 6, c.n_params)
    dp, dx = head_vjp(c, raw, p, np.zeros(3))
    assert not dp.any() and not dx.any()
    Jp = grad_params_adjoint(c, amplitude_encode(raw), p)
    Jx = grad_input(c, raw, p)
    for q in range(3):
        dp, dx = head_vjp(c, raw, p, np.eye(3)[q])
        np.testing.assert_allclose(dp, Jp[q], atol=1e-14)
        np.testing.assert_allclose(dx, Jx[q], atol=1e-14)


def test_vjp_matches_jacobian_contraction(backend, rng):
    c = random_circuit(5, 50, rng)
    raw = rng.normal(size=25)
    p = rng.uniform(0, 6, c.n_params)
    u = rng.normal(size=5)
    dp, dx = head_vjp(c, raw, p, u)
    assert np.max(np.abs(dp - u @ grad_params_adjoint(c, amplitude_encode(raw), p))) < 1e-12
    assert np.max(np.abs(dx - u @ grad_input(c, raw, p))) < 1e-12


def test_vjp_is_linear(rng):
    c = build_ansatz(AnsatzSpec("a1", 4, 3))
    raw = rng.normal(size=16)
    p = rng.uniform(0, 6, c.n_params)
    u, v, a = rng.normal(size=4), rng.normal(size=4), 1.7
    left = head_vjp(c, raw, p, a * u + v)
    right = [a * x + y for x, y in zip(head_vjp(c, raw, p, u), head_vjp(c, raw, p, v))]
    for l, r in zip(left, right):
        assert np.max(np.abs(l - r)) < 1e-12


def test_vjp_rows_match_single(rng):
    c = build_ansatz(AnsatzSpec("a2", 3, 2))
    raw = rng.normal(size=(6, 8))
    up = rng.normal(size=(6, 3))
    p = rng.uniform(0, 6, c.n_params)
    dps, dxs = head_vjp_rows(c, raw, p, up)
    for b in range(6):
        dp, dx = head_vjp(c, raw[b], p, up[b])
        np.testing.assert_array_equal(dps[b], dp)
        np.testing.assert_array_equal(dxs[b], dx)


def test_vjp_shape_errors(rng):
    c = build_ansatz(AnsatzSpec("a1", 2, 1))
    with pytest.raises(ShapeError):
        head_vjp(c, rng.normal(size=4), [0.1, 0.2], np.ones(3))
    with pytest.raises(ShapeError):
        head_vjp(c, rng.normal(size=9), [0.1, 0.2], np.ones(2))
