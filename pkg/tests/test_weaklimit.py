import numpy as np
from scipy.linalg import expm

from riqs import weaklimit as wl
from riqs.qops import Superoperator, choi_min_eig, random_hermitian
from riqs.spinmodel import SIGMA_MINUS, SpinParams, build

X = np.array([[0.2, 0.5 + 0.3j], [0.5 - 0.3j, -0.3]])
# lam^2 coefficient of the Heisenberg-picture RDM on X: symmetric second difference
# at lam = 1e-12 with 60-digit mpmath matrix exponentials
T_OVER_Z_X = np.array(
    [
        [-0.032399654425289074586, -0.061617050683153656542 + 0.038591919542271447399j],
        [-0.061617050683153656542 - 0.038591919542271447399j, 0.09166565355913864863],
    ]
)


def chain(beta=0.8, lam=1.0):
    return wl.ChainCoupling(h_S=np.diag([0.0, 1.0]), deltas=[1.3], Vs=[0.5 * SIGMA_MINUS], beta=beta, tau=1.0, lam=lam)


def chain2():
    r = np.random.default_rng(1)
    Vs = [r.normal(size=(3, 3)) + 1j * r.normal(size=(3, 3)) for _ in range(2)]
    return wl.ChainCoupling(random_hermitian(3, r), [0.4, 1.1], Vs, 0.9, 0.5, 0.2)


def test_uncoupled_transfer_is_free():
    c = chain()
    assert np.abs(wl.heisenberg_transfer(c, lam=0.0).matrix - wl.free_heisenberg(c.h_S, c.tau).matrix).max() < 1e-15


def test_transfer_is_contraction():
    r = np.random.default_rng(2)
    for c in (chain(lam=0.7), chain2()):
        U = wl.heisenberg_transfer(c)
        for _ in range(20):
            B = r.normal(size=(c.d, c.d)) + 1j * r.normal(size=(c.d, c.d))
            assert np.linalg.norm(U(B), 2) <= np.linalg.norm(B, 2) * (1 + 1e-10)


def test_transfer_matches_rdm_dual():
    for c in (chain(lam=0.3), chain2()):
        assert np.abs(wl.heisenberg_transfer(c).matrix - wl.rdm_dual(c).matrix).max() < 1e-10


def test_transfer_matches_spin_toy():
    p = SpinParams(E=1.0, E0=1.3, lam=0.6, tau=1.0, beta=0.8)
    c = wl.ChainCoupling(np.diag([0.0, 1.0]), [1.3], [0.3 * SIGMA_MINUS], 0.8, 1.0)
    from riqs.rdm import build_rdm

    assert np.abs(wl.heisenberg_transfer(c).matrix - build_rdm(build(p)).superop.dual().matrix).max() < 1e-10


def test_dyson_terms_block_exponential():
    c = chain2()
    H0, W = c.H0(), c.W()
    D = H0.shape[0]
    Z = np.zeros((D, D))
    E = expm(-1j * c.tau * np.block([[H0, W, Z], [Z, H0, W], [Z, Z, H0]]))
    F, G = wl.dyson_terms(H0, W, c.tau)
    assert np.abs(F - E[:D, D : 2 * D]).max() < 1e-12
    assert np.abs(G - E[:D, 2 * D :]).max() < 1e-12


def test_no_coupling_no_second_order():
    c = wl.ChainCoupling(np.diag([0.0, 1.0]), [1.3], [np.zeros((2, 2))], 0.8, 1.0)
    so = wl.second_order_terms(c)
    assert np.abs(so.F).max() == 0 and np.abs(so.G).max() == 0 and np.abs(so.T_beta.matrix).max() == 0


def test_T_beta_frozen():
    so = wl.second_order_terms(chain())
    assert np.abs(so.T_beta(X) / so.Z - T_OVER_Z_X).max() < 1e-13


def test_T_beta_finite_difference():
    for c in (chain(), chain2()):
        so = wl.second_order_terms(c)
        lam = 1e-4
        fd = (wl.heisenberg_transfer(c, lam=lam).matrix - wl.heisenberg_transfer(c, lam=0.0).matrix) / lam**2
        assert np.abs(fd - so.T_beta.matrix / so.Z).max() < 1e-6


def test_first_order_off_diagonal():
    c = chain2()
    so = wl.second_order_terms(c)
    m = c.n + 1
    P = np.kron(np.eye(c.d), np.diag([1.0] + [0.0] * c.n))
    assert np.abs(P @ so.F @ P).max() < 1e-14
    assert m == 3


def test_gamma_beta_kills_identity():
    for c in (chain(), chain2()):
        assert np.abs(wl.gamma_beta(c)(np.eye(c.d))).max() < 1e-14


def test_zero_temperature_limit():
    gi = wl.gamma_beta(chain(np.inf)).matrix
    assert np.abs(wl.gamma_beta(chain(40.0)).matrix - gi).max() < 1e-9


def test_gamma_weak_commutes_with_free_generator():
    c = chain()
    g = wl.gamma_weak(c).matrix
    comm = Superoperator.commutator(c.h_S).matrix
    assert np.abs(g @ comm - comm @ g).max() < 1e-12


def test_lindbladian_forms_agree():
    c = chain2()
    g = wl.generators(c)
    L = g.gamma_beta.matrix + 1j * Superoperator.commutator(c.h_S).matrix
    assert np.abs(L - g.lindbladian.matrix).max() < 1e-12


def test_expansion_tends_to_gamma_beta():
    c = chain()
    errs = [np.abs(wl.gamma_beta_from_expansion(c, t).matrix - wl.gamma_beta(c).matrix).max() for t in (0.1, 0.05)]
    assert errs[1] < errs[0] < 0.1


def test_semigroup_cp_and_unital():
    g = wl.lindbladian(chain())
    for t in (0.1, 1.0, 5.0):
        S = wl.semigroup(g, t)
        assert choi_min_eig(S.dual()) > -1e-10
        assert np.abs(S(np.eye(2)) - np.eye(2)).max() < 1e-12


def test_zero_coupling_row():
    tab = wl.scaling_study(chain(), wl.WeakCoupling([0.0, 0.1], 1.0))
    assert tab.errors[0] == 0


def test_weak_coupling_order():
    tab = wl.scaling_study(chain(), wl.WeakCoupling([0.2, 0.1, 0.05], 1.0))
    assert np.all(np.abs(tab.ratios - 4) < 0.3 * 4)
    assert abs(tab.fitted_order - 2) < 0.6


def test_critical_order():
    tab = wl.scaling_study(chain(), wl.Critical([0.1, 0.05, 0.025]))
    assert np.all(np.abs(tab.ratios - 2) < 0.3 * 2)
    assert abs(tab.fitted_order - 1) < 0.3
