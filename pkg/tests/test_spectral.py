import numpy as np
import pytest

from riqs.qops import NumericalError, Superoperator, random_density, random_hermitian, random_unitary, trace_norm, vec
from riqs.rdm import build_rdm
from riqs.spectral import analyze, ergodic_mean, power_converge, riesz_projection, sharp
from riqs.spinmodel import SpinParams, build, gibbs_state

P = SpinParams(E=1.3, E0=0.9, lam=0.7, tau=1.1, beta=0.8)
# 40-digit eigenvalues of the toy superoperator (mpmath expm + partial trace)
TOY_SPECTRUM = np.array(
    [1.0, 0.86123876688481620977, 0.11972201814700429503 + 0.92027463577761643318j, 0.11972201814700429503 - 0.92027463577761643318j]
)


def toy():
    return build_rdm(build(P)).superop


def test_toy_frozen_spectrum():
    w = analyze(toy()).eigenvalues
    err = max(np.abs(w - z).min() for z in TOY_SPECTRUM)
    assert err < 1e-13


def test_toy_condition_E():
    rep = analyze(toy())
    assert rep.satisfies_E and rep.one_cluster_dim == 1
    assert np.abs(rep.peripheral - 1).max() < 1e-12
    assert trace_norm(rep.invariant_state - gibbs_state(P)) < 1e-12
    assert abs(rep.gap + np.log(np.abs(TOY_SPECTRUM[2]))) < 1e-12


def test_toy_resonant_fails_E():
    q = P.with_(tau=2 * np.pi / P.nu)
    assert abs(q.e0 - 1) < 1e-14
    assert not analyze(build_rdm(build(q)).superop).satisfies_E


def test_unitary_channel_not_ergodic():
    rep = analyze(Superoperator.conjugation(random_unitary(3, np.random.default_rng(0))))
    assert len(rep.peripheral) == 9 and not rep.satisfies_E


def test_fixed_point_start():
    conv = power_converge(toy(), gibbs_state(P), 30)
    assert conv.distances.max() < 1e-12


def test_contraction_and_rate():
    rho0 = np.array([[0.3, 0.4 - 0.1j], [0.4 + 0.1j, 0.7]])
    conv = power_converge(toy(), rho0, 200, window=(10, 200))
    assert np.all(np.diff(conv.distances) <= 1e-15)
    assert abs(conv.slope + P.gamma) / P.gamma < 0.05


def test_ergodic_mean_single_step():
    rho = random_density(2, np.random.default_rng(1))
    assert np.abs(ergodic_mean(toy(), rho, 1) - rho).max() == 0


def test_ergodic_mean_unitary_dephases():
    h = np.diag([0.0, 1.0, 2.7])
    u = np.diag(np.exp(-1j * np.diag(h)))
    rho = random_density(3, np.random.default_rng(2))
    m = ergodic_mean(Superoperator.conjugation(u), rho, 20000)
    # the time average of e^{-i n w} over n is O(1/(N |1 - e^{-iw}|))
    assert np.abs(m - np.diag(np.diag(rho))).max() < 1e-3


def test_ergodic_mean_order_one_over_n():
    rho0 = np.array([[0.9, 0.2], [0.2, 0.1]], dtype=complex)
    scaled = [N * trace_norm(ergodic_mean(toy(), rho0, N) - gibbs_state(P)) for N in (100, 1000, 10000)]
    assert max(scaled) / min(scaled) < 1.1


def test_riesz_all_and_nothing():
    L = toy()
    assert np.abs(riesz_projection(L, 0, 2.0).matrix - np.eye(4)).max() < 1e-9
    assert np.abs(riesz_projection(L, 5.0, 0.5).matrix).max() < 1e-9


def test_riesz_rank_one_at_one():
    L = toy()
    Pi = riesz_projection(L, 1.0, 0.05).matrix
    ref = np.outer(vec(gibbs_state(P)), vec(np.eye(2)).conj())
    assert np.abs(Pi - ref).max() < 1e-9


def test_riesz_contour_on_spectrum():
    with pytest.raises(NumericalError):
        riesz_projection(toy(), 0.0, 1.0)


def test_sharp_commuting_and_trivial():
    h0 = np.diag([0.0, 1.0])
    K = Superoperator.conjugation(np.diag(np.exp(-0.4j * np.array([0.0, 1.0]))))
    assert np.abs(sharp(K, h0, 1.0).matrix - K.matrix).max() < 1e-14
    R = Superoperator(random_hermitian(4, np.random.default_rng(4)))
    assert np.abs(sharp(R, np.eye(2), 1.0).matrix - R.matrix).max() < 1e-14


def test_sharp_contracts_norm():
    r = np.random.default_rng(5)
    h0 = np.diag([0.0, 0.7, 1.9])
    for _ in range(5):
        K = Superoperator(r.normal(size=(9, 9)) + 1j * r.normal(size=(9, 9)))
        assert np.linalg.norm(sharp(K, h0, 1.3).matrix, 2) <= np.linalg.norm(K.matrix, 2) + 1e-12
