import numpy as np
import pytest

from riqs.qops import (
    NumericalError,
    Superoperator,
    check_density,
    choi_min_eig,
    eig_general,
    gibbs,
    kron,
    partial_trace,
    propagator,
    random_density,
    random_hermitian,
    random_unitary,
    unitality_defect,
    unvec,
    vec,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def rng():
    return np.random.default_rng(1)


def test_kron_identity():
    assert np.abs(kron(np.eye(2), np.eye(2)) - np.eye(4)).max() == 0


def test_kron_hand_expansion():
    ref = np.zeros((4, 4))
    ref[2, 0] = ref[0, 2] = 1
    assert np.abs(kron(SX, np.diag([1.0, 0.0])) - ref).max() == 0


def test_kron_mixed_product():
    r = rng()
    A, B, C, D = (r.normal(size=(2, 2)) for _ in range(4))
    assert np.abs(kron(A, B) @ kron(C, D) - kron(A @ C, B @ D)).max() < 1e-13


def test_vec_column_stacking():
    x = np.arange(4.0).reshape(2, 2)
    assert list(vec(x)) == [0, 2, 1, 3]
    assert np.abs(unvec(vec(x)) - x).max() == 0


def test_partial_trace_product_state():
    r = rng()
    rho, sig = random_density(2, r), random_density(3, r)
    assert np.abs(partial_trace(kron(rho, sig), [2, 3], 0) - rho).max() < 1e-14
    assert np.abs(partial_trace(kron(rho, sig), [2, 3], 1) - sig).max() < 1e-14


def test_partial_trace_preserves_trace():
    m = random_hermitian(6, rng())
    assert abs(np.trace(partial_trace(m, [3, 2], 0)) - np.trace(m)) < 1e-13


def test_partial_trace_bell_state():
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.abs(partial_trace(np.outer(psi, psi), [2, 2], 0) - np.eye(2) / 2).max() < 1e-15


def test_propagator_zero():
    assert np.abs(propagator(np.zeros((3, 3)), 1.7) - np.eye(3)).max() < 1e-15


def test_propagator_pauli_z():
    u = propagator(SZ, np.pi)
    assert np.abs(u - np.diag([np.exp(-1j * np.pi), np.exp(1j * np.pi)])).max() < 1e-14
    assert np.abs(u.conj().T @ u - np.eye(2)).max() < 1e-14


def test_propagator_group_law():
    h = random_hermitian(4, rng())
    assert np.abs(propagator(h, 0.3) @ propagator(h, 0.9) - propagator(h, 1.2)).max() < 1e-13


def test_propagator_rejects_non_hermitian():
    with pytest.raises(ValueError):
        propagator(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


def test_eig_diagonal():
    w, _ = eig_general(np.diag([3.0, -1.0, 0.5]))
    assert np.abs(np.sort(w.real) - [-1.0, 0.5, 3.0]).max() < 1e-15


def test_eig_near_defective():
    m = np.array([[1.0, 1.0], [1e-9, 1.0]])
    w, v = eig_general(m)
    assert np.abs(m @ v - v * w).max() < 1e-10


def test_eig_unitary_on_circle():
    w, _ = eig_general(random_unitary(5, rng()))
    assert np.abs(np.abs(w) - 1).max() < 1e-10


def test_gibbs_limits():
    h = np.diag([0.0, 1.0, 2.5])
    assert np.abs(gibbs(h, 0.0) - np.eye(3) / 3).max() < 1e-15
    assert np.abs(gibbs(h, np.inf) - np.diag([1.0, 0, 0])).max() == 0
    g = gibbs(h, 0.7)
    ref = np.exp(-0.7 * np.diag(h)) / np.exp(-0.7 * np.diag(h)).sum()
    assert np.abs(np.diag(g) - ref).max() < 1e-15


def test_check_density():
    check_density(random_density(3, rng()))
    with pytest.raises(NumericalError):
        check_density(np.diag([1.2, -0.2]))


def test_superoperator_composition_order():
    a, b = random_unitary(2, rng()), random_unitary(2, rng())
    A, B = Superoperator.conjugation(a), Superoperator.conjugation(b)
    x = random_density(2, rng())
    # A @ B applies B first
    assert np.abs((A @ B)(x) - a @ b @ x @ (a @ b).conj().T).max() < 1e-14


def test_sandwich_and_dual_pairing():
    r = rng()
    a, b = r.normal(size=(3, 3)), r.normal(size=(3, 3))
    S = Superoperator.sandwich(a, b)
    X, rho = random_hermitian(3, r), random_density(3, r)
    assert np.abs(S(X) - a @ X @ b).max() < 1e-13
    lhs = np.trace(X.conj().T @ S(rho))
    rhs = np.trace(S.dual()(X).conj().T @ rho)
    assert abs(lhs - rhs) < 1e-13


def test_kraus_roundtrip():
    r = rng()
    u = random_unitary(4, r)
    ops = [u[:2, :2], u[2:, :2]]
    S = Superoperator.from_kraus(ops)
    T = Superoperator.from_kraus(S.kraus())
    assert np.abs(S.matrix - T.matrix).max() < 1e-13
    assert choi_min_eig(S) > -1e-12
    assert unitality_defect(S) < 1e-13
