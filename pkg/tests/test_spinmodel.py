import numpy as np

from riqs.qops import eig_general, propagator
from riqs.rdm import build_rdm
from riqs.spectral import analyze
from riqs import spinmodel as sm

P = sm.SpinParams(E=1.3, E0=0.9, lam=0.7, tau=1.1, beta=0.8)
# 40-digit e0 of the toy model: the real non-unit eigenvalue of the numerically built superoperator
E0_FROZEN = 0.86123876688481620977


def test_excitation_number_conserved():
    p = sm.build(P)
    n_tot = np.kron(sm.NUMBER, np.eye(2)) + np.kron(np.eye(2), sm.NUMBER)
    assert np.abs(p.v @ n_tot - n_tot @ p.v).max() == 0


def test_uncoupled_and_infinite_temperature():
    m = sm.build(P.with_(lam=0.0))
    assert np.abs(m.v).max() == 0
    assert np.abs(sm.build(P.with_(beta=0.0)).rho_E - np.eye(2) / 2).max() < 1e-15


def test_kraus_form_matches_numeric_rdm():
    for q in [P, P.with_(beta=-0.4, tau=3.0), P.with_(E=0.9, lam=1.4)]:
        assert np.abs(sm.closed_form_channel(q).matrix - build_rdm(sm.build(q)).superop.matrix).max() < 1e-10


def test_kraus_completeness():
    V = sm.closed_form_kraus(P).values()
    assert np.abs(sum(v.conj().T @ v for v in V) - np.eye(2)).max() < 1e-14


def test_uncoupled_kraus_is_unitary():
    k = sm.closed_form_kraus(P.with_(lam=0.0))
    assert np.abs(k["10"]).max() == 0 and np.abs(k["01"]).max() == 0
    u = propagator(np.diag([0.0, P.E]), P.tau)
    ch = sm.closed_form_channel(P.with_(lam=0.0))
    rho = np.array([[0.4, 0.1j], [-0.1j, 0.6]])
    assert np.abs(ch(rho) - u @ rho @ u.conj().T).max() < 1e-14


def test_e0_frozen():
    assert abs(P.e0 - E0_FROZEN) < 1e-15


def test_e0_special_values():
    assert abs(sm.SpinParams(E=1.0, E0=1.0, lam=0.5, tau=2 * np.pi, beta=1.0).e0) < 1e-15
    q = P.with_(lam=0.0)
    sp = sm.closed_form_spectrum(q)
    assert abs(q.e0 - 1) == 0 and abs(abs(sp["e_plus"]) - 1) < 1e-15 and abs(abs(sp["e_minus"]) - 1) < 1e-15


def test_spectrum_matches_numeric():
    for q in [P, P.with_(beta=1.7, tau=2.5, E=1.0, E0=1.0, lam=0.4)]:
        w, _ = eig_general(build_rdm(sm.build(q)).superop.matrix)
        ref = np.array(list(sm.closed_form_spectrum(q).values()))
        assert max(np.abs(w - z).min() for z in ref) < 1e-9


def test_invariant_state_gibbs_at_beta_star():
    rep = analyze(sm.closed_form_channel(P))
    assert rep.satisfies_E == sm.satisfies_E(P)
    assert np.abs(rep.invariant_state - sm.gibbs_state(P)).max() < 1e-12


def test_beta_star():
    assert abs(P.beta_star - 0.9 / 1.3 * 0.8) < 1e-16
