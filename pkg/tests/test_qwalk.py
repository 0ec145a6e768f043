from fractions import Fraction

import numpy as np
import pytest

from riqs import qwalk as qw
from riqs.qops import NumericalError, random_unitary

UP = np.diag([1.0, 0.0])
PLUS_I = np.outer([1, 1j], [1, -1j]) / 2
# Hadamard walk from |+1> at the origin after 5 steps, exact rational arithmetic (sympy)
HADAMARD_5 = {-5: Fraction(1, 32), -3: Fraction(5, 32), -1: Fraction(1, 8), 1: Fraction(1, 8), 3: Fraction(17, 32), 5: Fraction(1, 32)}
HADAMARD_5_MEAN, HADAMARD_5_SECOND = Fraction(9, 8), Fraction(8)


def hadamard(rho0=UP):
    return qw.WalkSpec(1, qw.symmetric_jump(1), (qw.HADAMARD,), [1.0], rho0)


def random_law(rho0=PLUS_I):
    return qw.WalkSpec(1, qw.symmetric_jump(1), qw.random_phase_coins(qw.HADAMARD, [0.0, 2.0, 4.1]), [0.3, 0.3, 0.4], rho0)


def planar():
    coins = [random_unitary(4, np.random.default_rng(k)) for k in range(3)]
    rho0 = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
    return qw.WalkSpec(2, qw.symmetric_jump(2), coins, [0.2, 0.3, 0.5], rho0)


def test_coin_ordering_and_jumps():
    assert qw.taus(2) == (1, -1, 2, -2)
    assert qw.symmetric_jump(2).tolist() == [[1, 0], [-1, 0], [0, 1], [0, -1]]
    assert np.abs(random_law().r_bar).max() == 0


def test_spec_validation():
    with pytest.raises(ValueError):
        qw.WalkSpec(3, np.zeros((6, 3)), (np.eye(6),), [1.0], np.eye(6) / 6)
    with pytest.raises(ValueError):
        qw.WalkSpec(1, [[1], [0]], (qw.HADAMARD,), [1.0], UP)
    with pytest.raises(ValueError):
        qw.WalkSpec(1, qw.symmetric_jump(1), (2 * qw.HADAMARD,), [1.0], UP)
    with pytest.raises(ValueError):
        qw.WalkSpec(1, qw.symmetric_jump(1), (qw.HADAMARD,), [0.9], UP)


def test_zero_steps():
    J = qw.amplitudes(hadamard(), [])
    assert list(J) == [(0,)] and np.abs(J[(0,)] - np.eye(2)).max() == 0


def test_one_hadamard_step():
    J = qw.amplitudes(hadamard(), [qw.HADAMARD])
    assert sorted(J) == [(-1,), (1,)]
    psi = np.array([1.0, 0.0])
    probs = [np.linalg.norm(J[k] @ psi) ** 2 for k in [(-1,), (1,)]]
    assert abs(probs[0] - 0.5) < 1e-15 and abs(sum(probs) - 1) < 1e-15


def test_hadamard_frozen_distribution():
    J = qw.amplitudes(hadamard(), [qw.HADAMARD] * 5)
    for (k,), m in J.items():
        p = np.linalg.norm(m[:, 0]) ** 2
        assert abs(p - float(HADAMARD_5.get(k, 0))) < 1e-15
    t = qw.transfer_moments(hadamard(), 5)
    assert abs(t.mean[0] - float(HADAMARD_5_MEAN)) < 1e-9
    assert abs(t.second[0, 0] - float(HADAMARD_5_SECOND)) < 1e-8


def test_amplitude_unitarity():
    r = np.random.default_rng(0)
    for n in range(1, 9):
        J = qw.amplitudes(hadamard(), [random_unitary(2, r) for _ in range(n)])
        assert qw.amplitude_unitarity_defect(J) < 1e-10
    s = planar()
    assert qw.amplitude_unitarity_defect(qw.amplitudes(s, [s.coins[k] for k in (0, 2, 1, 1)])) < 1e-10


def test_characteristic_normalized():
    for s in (hadamard(), random_law(), planar()):
        assert abs(qw.characteristic(s, 6, np.zeros((1, s.d)))[0] - 1) < 1e-13


def test_transfer_vs_position_space():
    for s, n in ((hadamard(), 12), (random_law(), 20), (planar(), 5)):
        a, b = qw.averaged_density_moments(s, n), qw.transfer_moments(s, n)
        assert np.abs(a.mean - b.mean).max() < 1e-8
        assert np.abs(a.second - b.second).max() < 1e-6 * n**2


def test_symmetric_law_mean_exact():
    for n in (10, 50):
        assert np.abs(qw.transfer_moments(random_law(), n).mean - n * random_law().r_bar).max() < 1e-9


def test_finite_difference_guard():
    with pytest.raises(NumericalError):
        qw.transfer_moments(random_law(), 40, h=0.5, tol=1e-12)


def test_monte_carlo_vs_transfer():
    for s, n in ((random_law(), 12), (planar(), 4)):
        mc = qw.mc_moments(s, n, 4000, seed=1)
        ex = qw.transfer_moments(s, n)
        assert np.all(np.abs(mc.mean - ex.mean) <= 4 * mc.mean_se + 1e-12)
        assert np.all(np.abs(mc.second - ex.second) <= 4 * mc.second_se + 1e-12)


def test_monte_carlo_chunking_and_replay():
    a = qw.mc_moments(random_law(), 6, 300, seed=4, chunk=100)
    b = qw.mc_moments(random_law(), 6, 300, seed=4, chunk=100)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.second, b.second)


def test_symmetric_mean_small():
    s, n = random_law(), 30
    mc = qw.mc_moments(s, n, 3000, seed=2)
    assert abs(mc.mean[0] / n) < 4 * mc.mean_se[0] / n


def test_spectral_condition():
    vs = np.linspace(0, 2 * np.pi, 37)[:, None]
    assert qw.spectral_condition(random_law(), vs)
    assert not qw.spectral_condition(hadamard(), vs)


def test_transport_classes():
    ball = qw.classify_transport(hadamard())
    diff = qw.classify_transport(random_law())
    assert ball.kind == "ballistic" and min(ball.var_over_n2) > 0.05
    assert diff.kind == "diffusive"
    assert abs(diff.var_over_n[-1] - diff.var_over_n[-2]) / diff.var_over_n[-1] < 0.01


def test_moments_csv(tmp_path):
    m = qw.transfer_moments(planar(), 3)
    m.to_csv(tmp_path / "m.csv")
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0] == "quantity,i,j,value,stderr" and len(rows) == 1 + 2 + 4
