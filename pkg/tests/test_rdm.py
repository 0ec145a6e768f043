import numpy as np

from riqs.qops import Superoperator, gibbs, propagator, random_density, random_hermitian
from riqs.rdm import RIModel, apply, brute_force_evolve, build_rdm, check_channel, dual
from riqs.spinmodel import SpinParams, build, closed_form_channel

# independent 40-digit evaluation: expm of the 4x4 Hamiltonian and partial trace
TOY_IMAGE = np.array(
    [
        [0.35170340915569277263, 0.13991627083656336133 + 0.35613765249634614377j],
        [0.13991627083656336133 - 0.35613765249634614377j, 0.64829659084430722737],
    ]
)
TOY_RHO = np.array([[0.3, 0.4 - 0.1j], [0.4 + 0.1j, 0.7]])


def random_model(seed=0, dS=2, dE=2):
    r = np.random.default_rng(seed)
    return RIModel(
        random_hermitian(dS, r), np.diag(np.linspace(0, 1.1, dE)), random_hermitian(dS * dE, r), 0.9, np.diag(r.dirichlet(np.ones(dE)))
    )


def test_uncoupled_is_unitary():
    m = random_model()
    free = RIModel(m.h_S, m.h_E, np.zeros_like(m.v), m.tau, m.rho_E)
    u = propagator(m.h_S, m.tau)
    assert np.abs(build_rdm(free).superop.matrix - Superoperator.conjugation(u).matrix).max() < 1e-13


def test_toy_frozen_image():
    p = SpinParams(E=1.3, E0=0.9, lam=0.7, tau=1.1, beta=0.8)
    assert np.abs(build_rdm(build(p))(TOY_RHO) - TOY_IMAGE).max() < 1e-14


def test_toy_matches_kraus_form():
    p = SpinParams(E=1.3, E0=0.9, lam=0.7, tau=1.1, beta=0.8)
    assert np.abs(build_rdm(build(p)).superop.matrix - closed_form_channel(p).matrix).max() < 1e-10


def test_dual_unital_and_involution():
    for s in range(5):
        L = build_rdm(random_model(s, 2, 3))
        D = dual(L)
        assert np.abs(D(np.eye(2)) - np.eye(2)).max() < 1e-13
        assert np.abs(D.dual().matrix - L.superop.matrix).max() == 0


def test_pairing_identity():
    r = np.random.default_rng(3)
    L = build_rdm(random_model(3))
    A, rho = random_hermitian(2, r), random_density(2, r)
    assert abs(np.trace(A @ L(rho)) - np.trace(dual(L)(A) @ rho)) < 1e-12


def test_identity_channel():
    rho = random_density(3, np.random.default_rng(0))
    assert np.abs(apply(Superoperator.identity(3), rho) - rho).max() < 1e-15


def test_population_transfer_zero_temperature():
    p = SpinParams(E=1.3, E0=0.9, lam=0.7, tau=1.1, beta=np.inf)
    out = build_rdm(build(p))(np.diag([0.0, 1.0]))
    # direct 4x4 diagonalization on the one-excitation block
    blk = np.array([[p.E, p.lam / 2], [p.lam / 2, p.E0]])
    w, v = np.linalg.eigh(blk)
    amp = (v @ np.diag(np.exp(-1j * p.tau * w)) @ v.T)[1, 0]
    assert abs(out[0, 0] - abs(amp) ** 2) < 1e-13
    assert abs(out[0, 0] - p.lam**2 / p.nu**2 * np.sin(p.nu * p.tau / 2) ** 2) < 1e-13


def test_trace_preserved():
    r = np.random.default_rng(5)
    L = build_rdm(random_model(5, 3, 2))
    for _ in range(5):
        assert abs(np.trace(L(random_density(3, r))) - 1) < 1e-13
    assert check_channel(L)["ok"]


def test_brute_force_two_steps():
    models = [random_model(s) for s in (7, 8)]
    rho = random_density(2, np.random.default_rng(9))
    ref = build_rdm(models[1])(build_rdm(models[0])(rho))
    assert np.abs(brute_force_evolve(models, rho) - ref).max() < 1e-13


def test_json_roundtrip():
    m = random_model(4)
    back = RIModel.from_json(m.to_json())
    assert np.abs(back.v - m.v).max() == 0 and back.tau == m.tau


def test_gibbs_probe():
    p = SpinParams(E=1.0, E0=0.5, lam=0.3, tau=1.0, beta=0.0)
    assert np.abs(build(p).rho_E - gibbs(np.diag([0.0, 0.5]), 0.0)).max() < 1e-15
