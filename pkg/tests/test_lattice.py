import itertools

import numpy as np

from riqs import lattice as lat

P = lat.LatticeParams(E=1.0, F=1.0, lam=0.3, tau=1.0, beta=0.7)
# mpmath, 40 digits: p from the Rabi formula, moments by enumerating all 3^4 paths,
# I(0.05) by root-finding on the derivative of the log-moment generating function
P_JUMP = 0.08733219254516085138
MEAN_4 = 0.11750565522185542216
VAR_4 = 0.34587687542836401591
V_D = 0.029376413805463855541
D = 0.043234609428545501988
RATE_005 = 0.00240505077566265227


def test_frozen_transport():
    tr = lat.transport(P)
    assert abs(P.p - P_JUMP) < 1e-15
    assert abs(tr.v_d - V_D) < 1e-15
    assert abs(tr.D - D) < 1e-15


def test_frozen_small_n_moments():
    d = lat.exact_distribution(P, 4)
    assert abs(d.mean() - MEAN_4) < 1e-14
    assert abs(d.variance() - VAR_4) < 1e-14


def test_enumeration_small_n():
    pm, p0, pp = lat.transition_probs(P)
    probs = {-1: pm, 0: p0, 1: pp}
    ref = np.zeros(7)
    for path in itertools.product((-1, 0, 1), repeat=3):
        ref[sum(path) + 3] += np.prod([probs[s] for s in path])
    assert np.abs(lat.exact_distribution(P, 3).probs - ref).max() < 1e-15


def test_zero_steps():
    d = lat.exact_distribution(P, 0)
    assert d.offsets.tolist() == [0] and d.probs.tolist() == [1.0]


def test_trivial_dynamics():
    q = lat.LatticeParams(E=1.0, F=1.0, lam=np.pi, tau=1.0, beta=0.7)
    assert abs(q.omega0 * q.tau - 2 * np.pi) < 1e-15
    assert q.p < 1e-30


def test_transition_limits():
    pm, p0, pp = lat.transition_probs(lat.LatticeParams(1.0, 1.0, 0.3, 1.0, 0.0))
    assert abs(pm - pp) < 1e-17 and abs(pm + pp - P.p) < 1e-16
    pm, _, pp = lat.transition_probs(lat.LatticeParams(1.0, 1.0, 0.3, 1.0, np.inf))
    assert pm == 0 and pp == P.p


def test_exact_moments_large_n():
    for n in (10, 500, 5000):
        d = lat.exact_distribution(P, n)
        tr = lat.transport(P)
        assert abs(d.mean() / n - tr.v_d * P.tau) < 1e-12
        assert abs(d.variance() / n - 2 * tr.D * P.tau) < 1e-12


def test_zero_drift_and_deterministic_drift():
    assert lat.transport(lat.LatticeParams(1.0, 1.0, 0.3, 1.0, 0.0)).v_d == 0
    q = lat.LatticeParams(E=1.0, F=1.0, lam=np.pi / 2, tau=1.0, beta=np.inf)
    assert abs(q.p - 1) < 1e-15 and abs(lat.transport(q).D) < 1e-15


def test_einstein_relation():
    tr = lat.transport(lat.LatticeParams(E=1.0, F=1.0, lam=np.pi / 2, tau=1.0, beta=0.9))
    assert abs(tr.mobility - 0.9 / 2) < 1e-15
    ein = lat.einstein_limit(np.pi / 2, 1.0, 0.9)
    assert abs(ein.D_limit - ein.mu_over_beta) < 1e-6
    assert abs(ein.mobility_limit - 0.9 * ein.mu_over_beta) < 1e-6


def test_log_mgf():
    e = lat.log_mgf(P)
    assert abs(e(0.0)) < 1e-15
    a = np.random.default_rng(0).normal(size=8)
    assert np.abs(e(-P.beta * P.E - a) - e(a)).max() < 1e-14


def test_rate_frozen_and_routes():
    assert abs(lat.rate_legendre(P, 0.05) - RATE_005) < 1e-15
    assert abs(lat.rate_closed_form(P, 0.05) - RATE_005) < 1e-15
    for x in np.linspace(-0.95, 0.95, 21):
        assert abs(lat.rate_closed_form(P, x) - lat.rate_legendre(P, x)) < 1e-12


def test_published_rate_display_is_off():
    x = lat.transport(P).v_d * P.tau
    assert abs(lat.rate_closed_form(P, x)) < 1e-15
    assert abs(lat.rate_closed_form_literal(P, x)) > 1e-3


def test_rate_zero_only_at_drift():
    x0 = lat.transport(P).v_d * P.tau
    xs = np.linspace(-0.99, 0.99, 67)
    assert all(lat.rate_closed_form(P, x) > 0 for x in xs if abs(x - x0) > 1e-3)


def test_rate_symmetry():
    for x in np.linspace(-0.95, 0.95, 39):
        assert abs(lat.rate_closed_form(P, x) - (-P.beta * P.E * x + lat.rate_closed_form(P, -x))) < 1e-10


def test_monte_carlo_vs_exact():
    s = lat.simulate_walk(P, 40, 100_000, seed=0)
    assert s.ks_distance < 1.63 / np.sqrt(s.trials)


def test_clt_distance_shrinks():
    ds = [lat.clt_distance(lat.exact_distribution(P, n)) for n in (100, 1000, 5000)]
    assert ds[0] > ds[1] > ds[2] and ds[2] < 0.02


def test_ldp_tail():
    q = lat.LatticeParams(E=1.0, F=1.0, lam=0.03, tau=1.0, beta=1.0)
    n = 2000
    d = lat.exact_distribution(q, n)
    for x in np.linspace(lat.transport(q).v_d + 0.05, 0.9, 6):
        I = lat.rate_closed_form(q, x)
        assert abs(d.log_tail(n * x) / n + I) / I < 0.02
