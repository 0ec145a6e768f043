import numpy as np
import pytest

from riqs import dynamics as dy
from riqs import spinmodel as sm
from riqs import thermo as th
from riqs.qops import NumericalError
from riqs.rdm import RIModel

P = sm.SpinParams(E=1.3, E0=0.9, lam=0.7, tau=1.1, beta=0.8)
# 40-digit mean power of the full dipole coupling: mpmath invariant state of the
# numerically exponentiated model and Tr[(rho (x) rho_E)(v - U^* v U)] / tau
DIPOLE_POWER = 0.029525307444077998296
BETAS = [0.3, 0.8, 1.5]


def kbeam(betas):
    return dy.KBeam([sm.build(P.with_(beta=float(b))) for b in betas])


def test_work_step_uncoupled():
    m = sm.build(P.with_(lam=0.0))
    rho = np.diag([0.3, 0.7])
    assert th.work_step(rho, m, m) == 0.0


def test_exchange_no_work():
    assert abs(th.mean_work(dy.Ideal(sm.build(P)))) < 1e-12


def test_dipole_work_frozen():
    w = th.mean_work(dy.Ideal(sm.build(P, "dipole")))
    assert abs(w - DIPOLE_POWER) < 1e-14
    assert abs(sm.dipole_mean_work(P) - DIPOLE_POWER) < 1e-14


def test_dipole_published_form_differs_by_factor():
    ratio = sm.dipole_mean_work_literal(P) / sm.dipole_mean_work(P)
    assert abs(ratio - P.tau * P.E / P.E0) < 1e-14


def test_flux_form_matches_direct():
    s = dy.Ideal(sm.build(P, "dipole"))
    assert abs(th.mean_work(s, form="flux") - th.mean_work(s)) < 1e-10


def test_ideal_entropy_is_beta_work():
    s = dy.Ideal(sm.build(P, "dipole"))
    for form in ("flux", "energy"):
        assert abs(th.entropy_production(s, form=form) - P.beta * th.mean_work(s)) < 1e-10


def test_random_tau_no_entropy():
    mix = dy.FiniteMixture([sm.build(P.with_(tau=t)) for t in (0.9, 1.4)], [0.5, 0.5])
    assert abs(th.entropy_production(dy.Random(mix))) < 1e-12


def test_random_beta_entropy_closed_form():
    probs = [0.2, 0.5, 0.3]
    s = dy.Random(dy.FiniteMixture([sm.build(P.with_(beta=b)) for b in BETAS], probs))
    ref = sm.random_beta_entropy(P, BETAS, probs)
    assert ref > 0
    assert abs(th.entropy_production(s) - ref) < 1e-10
    assert abs(th.entropy_production(s, form="energy") - ref) < 1e-10


def test_trajectory_ledger_converges_to_mean_work():
    s = dy.Ideal(sm.build(P, "dipole"))
    traj = dy.run(s, np.eye(2) / 2, 3000)
    led = th.ledger(s, traj)
    assert abs(led.total_work[-1] / (3000 * P.tau) - th.mean_work(s)) < 1e-3
    again = th.ledger(s, traj)
    assert np.array_equal(led.work_steps, again.work_steps)


def test_ledger_rejects_foreign_trajectory():
    a = dy.Random(dy.FiniteMixture([sm.build(P.with_(beta=b)) for b in BETAS], [0.2, 0.5, 0.3]), seed=1)
    b = dy.Random(a.sampler, seed=2)
    with pytest.raises(ValueError):
        th.ledger(a, dy.run(b, np.eye(2) / 2, 30))


def test_probe_beta():
    assert abs(th.probe_beta(sm.build(P)) - P.beta) < 1e-12
    bad = RIModel(np.diag([0.0, 1.0]), np.diag([0.0, 1.0]), np.zeros((4, 4)), 1.0, np.diag([1.0, 0.0]))
    with pytest.raises(NumericalError):
        th.probe_beta(bad)


def test_equal_temperatures_no_flux():
    kb = kbeam([0.8, 0.8, 0.8])
    assert np.abs(th.beam_fluxes(kb)).max() < 1e-14
    assert np.abs(th.beam_fluxes(kb, "random")).max() < 1e-14


def test_kbeam_fluxes_closed_forms():
    kb = kbeam(BETAS)
    det, rnd = th.beam_fluxes(kb), th.beam_fluxes(kb, "random")
    assert np.abs(det - sm.kbeam_deterministic_fluxes(P, BETAS)).max() < 1e-10
    assert np.abs(rnd - sm.kbeam_random_fluxes(P, BETAS)).max() < 1e-10
    assert abs(th.kbeam_work(kb) + det.sum()) < 1e-10
    assert abs(th.kbeam_entropy(kb) + np.dot(BETAS, det)) < 1e-10
    assert abs(th.kbeam_entropy(kb, form="flux") + np.dot(BETAS, det)) < 1e-10


def test_kinetic_coefficients_random_uniform():
    kc = th.kinetic_coefficients(lambda b: sm.kbeam_random_fluxes(P, b), 0.8, 3)
    # phi_j = c sum_k (z(beta_k) - z(beta_j)), differentiated by hand
    K, e = 3, np.exp(-0.8 * P.E0)
    dz = P.E0 * e / (1 + e) ** 2
    ref = -P.E0 * (1 - P.e0) / (K**2 * P.tau) * dz * (np.ones((K, K)) - K * np.eye(K))
    assert np.abs(kc.L - ref).max() < 1e-9
    assert kc.asymmetry.max() < 1e-9


def test_kinetic_coefficients_deterministic():
    kc = th.kinetic_coefficients(lambda b: th.beam_fluxes(kbeam(b)), 0.8, 3)
    assert abs(kc.L[1, 0]) > abs(kc.L[0, 1])
    # a common shift of all temperatures keeps the beams in equilibrium
    assert np.abs(kc.L.sum(axis=1)).max() < 1e-8
