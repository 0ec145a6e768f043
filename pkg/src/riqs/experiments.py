"""Named experiments, one per acceptance criterion.

Every experiment returns an :class:`ExperimentResult` holding named checks
and CSV-ready tables.  ``tol_scale`` multiplies every numerical bound.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import dynamics as dy
from . import lattice as lat
from . import maser as ms
from . import measure as mm
from . import qwalk as qw
from . import spinmodel as sm
from . import thermo as th
from . import weaklimit as wl
from .qops import (
    Superoperator,
    choi_min_eig,
    eig_general,
    random_density,
    random_hermitian,
    trace_norm,
    unitality_defect,
)
from .rdm import RIModel, brute_force_evolve, build_rdm
from .spectral import analyze, power_converge


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    bound: float | None = None

    def line(self) -> str:
        b = "" if self.bound is None else f" (bound {self.bound:.3g})"
        m = "" if np.isnan(self.measured) else f": {self.measured:.6g}"
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}{m}{b}"


@dataclass
class ExperimentResult:
    name: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    tol_scale: float = 1.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def at_most(self, name: str, value: float, bound: float) -> None:
        b = bound * self.tol_scale
        self.checks.append(Check(name, bool(value <= b), float(value), b))

    def at_least(self, name: str, value: float, bound: float) -> None:
        self.checks.append(Check(name, bool(value >= bound), float(value), bound))

    def holds(self, name: str, cond: bool, measured: float = float("nan")) -> None:
        self.checks.append(Check(name, bool(cond), float(measured)))

    def table(self, name: str, header: list, rows) -> None:
        self.tables[name] = (header, [list(r) for r in rows])

    def summary(self) -> dict:
        return {
            "experiment": self.name,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "measured": _num(c.measured), "bound": _num(c.bound)}
                for c in self.checks
            ],
        }

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        for name, (header, rows) in self.tables.items():
            (out / f"{name}.csv").write_text(to_csv(header, rows), newline="")


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else str(x)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, (complex, np.complexfloating)):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    return str(x)


def to_csv(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _toy(E=1.3, E0=0.9, lam=0.7, tau=1.1, beta=0.8) -> sm.SpinParams:
    return sm.SpinParams(E=E, E0=E0, lam=lam, tau=tau, beta=beta)


def _matched_distance(a: np.ndarray, b: np.ndarray) -> float:
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


# 1 ---------------------------------------------------------------------------


def toy_rdm(tol_scale: float = 1.0, seed: int = 0, points: int = 20) -> ExperimentResult:
    res = ExperimentResult("toy_rdm", tol_scale=tol_scale)
    rows = []
    worst = 0.0
    grid = zip(
        np.linspace(0.6, 2.0, points),
        np.linspace(1.4, 0.5, points),
        np.linspace(0.1, 1.5, points),
        np.geomspace(0.3, 4.0, points),
        np.linspace(-0.5, 3.0, points),
    )
    for E, E0, lam, tau, beta in grid:
        p = sm.SpinParams(E=E, E0=E0, lam=lam, tau=tau, beta=beta)
        err = float(np.abs(build_rdm(sm.build(p)).superop.matrix - sm.closed_form_channel(p).matrix).max())
        worst = max(worst, err)
        rows.append((E, E0, lam, tau, beta, err))
    res.table("rdm_vs_kraus", ["E", "E0", "lam", "tau", "beta", "max_abs_error"], rows)
    res.at_most("numeric RDM vs closed-form Kraus channel", worst, 1e-10)
    return res


# 2 ---------------------------------------------------------------------------


def toy_spectrum(tol_scale: float = 1.0, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("toy_spectrum", tol_scale=tol_scale)
    rows = []
    spec_err, state_err = 0.0, 0.0
    for E, E0, lam, tau, beta in [(1.3, 0.9, 0.7, 1.1, 0.8), (1.0, 1.0, 0.4, 2.5, 1.7), (0.8, 1.5, 1.2, 0.6, -0.4)]:
        p = sm.SpinParams(E=E, E0=E0, lam=lam, tau=tau, beta=beta)
        L = build_rdm(sm.build(p)).superop
        w, _ = eig_general(L.matrix)
        ref = np.array(list(sm.closed_form_spectrum(p).values()))
        err = _matched_distance(w, ref)
        spec_err = max(spec_err, err)
        nontrivial = abs(np.remainder(p.nu * tau, 2 * np.pi)) > 1e-6
        serr = trace_norm(analyze(L).invariant_state - sm.gibbs_state(p)) if nontrivial else float("nan")
        if nontrivial:
            state_err = max(state_err, serr)
        rows.append((E, E0, lam, tau, beta, err, serr))
    res.table("spectrum", ["E", "E0", "lam", "tau", "beta", "spectrum_error", "gibbs_error"], rows)
    res.at_most("eigenvalues equal {1, e+, e-, e0}", spec_err, 1e-9)
    res.at_most("invariant state equals Gibbs at beta*", state_err, 1e-10)
    return res


# 3 ---------------------------------------------------------------------------


def toy_convergence(tol_scale: float = 1.0, seed: int = 0, n: int = 200, start: int = 10) -> ExperimentResult:
    res = ExperimentResult("toy_convergence", tol_scale=tol_scale)
    p = _toy()
    L = build_rdm(sm.build(p)).superop
    rho0 = np.array([[0.3, 0.4 - 0.1j], [0.4 + 0.1j, 0.7]])
    conv = power_converge(L, rho0, n, rho_plus=sm.gibbs_state(p), window=(start, n))
    target = -p.gamma
    res.table("distances", ["n", "trace_distance"], enumerate(conv.distances))
    res.at_most("fitted slope vs -log sqrt(e0), relative", abs(conv.slope - target) / abs(target), 0.05)
    return res


# 4 ---------------------------------------------------------------------------


def random_ri(
    tol_scale: float = 1.0, seed: int = 0, seeds: int = 100, n: int = 500, N: int = 10_000, mixture_seeds: int = 5
) -> ExperimentResult:
    res = ExperimentResult("random_ri", tol_scale=tol_scale)
    p = _toy()
    grid = np.linspace(0.8, 1.6, 81)
    sampler = dy.TabulatedTau(lambda t: sm.build(p.with_(tau=t)), grid, np.ones_like(grid))
    rho0 = np.array([[0.9, 0.2], [0.2, 0.1]], dtype=complex)
    target = sm.gibbs_state(p)
    dists = []
    for s in range(seeds):
        traj = dy.run(dy.Random(sampler, seed=seed * 100_003 + s), rho0, n)
        dists.append(trace_norm(traj.states[-1] - target))
    res.table("random_tau", ["seed", "trace_distance"], enumerate(dists))
    res.at_most(f"random tau: max per-seed distance at n={n}", max(dists), 1e-6)

    betas, probs = [0.5, 0.6], [0.5, 0.5]
    mix = dy.FiniteMixture([sm.build(p.with_(beta=b)) for b in betas], probs)
    expected = sum(q * sm.gibbs_state(p.with_(beta=b)) for b, q in zip(betas, probs))
    ra = dy.random_asymptotics(mix, rho0, N, [seed * 100_003 + s for s in range(mixture_seeds)])
    errs = [trace_norm(m - expected) for m in ra.ergodic_means]
    res.table("random_beta", ["seed", "ergodic_mean_distance"], enumerate(errs))
    res.at_most(f"random beta: ergodic mean at N={N} vs E[rho_beta*], times N", max(errs) * N, 10.0)
    res.at_most("E[rho_beta*] vs invariant state of E[L]", trace_norm(ra.invariant_state - expected), 1e-10)
    return res


# 5 ---------------------------------------------------------------------------


def thermo_identities(tol_scale: float = 1.0, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("thermo_identities", tol_scale=tol_scale)
    p = _toy()
    ex = dy.Ideal(sm.build(p))
    dp = dy.Ideal(sm.build(p, "dipole"))
    w_dp = th.mean_work(dp)
    res.at_most("exchange coupling: mean work", abs(th.mean_work(ex)), 1e-12)
    res.at_most("full dipole: mean work vs published closed form", abs(w_dp - sm.dipole_mean_work_literal(p)), 1e-8)
    res.at_most("full dipole: mean work vs rate-balance closed form", abs(w_dp - sm.dipole_mean_work(p)), 1e-8)
    res.at_most("ideal: dS = beta dW", abs(th.entropy_production(dp) - p.beta * w_dp), 1e-10)
    betas, probs = [0.3, 0.8, 1.5], [0.2, 0.5, 0.3]
    rs = dy.Random(dy.FiniteMixture([sm.build(p.with_(beta=b)) for b in betas], probs))
    ref = sm.random_beta_entropy(p, betas, probs)
    res.at_most(
        "random beta: entropy production vs covariance formula",
        max(abs(th.entropy_production(rs) - ref), abs(th.entropy_production(rs, form="energy") - ref)),
        1e-10,
    )
    res.at_most("flux form vs direct form of mean work", abs(th.mean_work(dp, form="flux") - w_dp), 1e-10)
    res.table(
        "work",
        ["quantity", "value"],
        [
            ("dipole_mean_work", w_dp),
            ("dipole_published_form", sm.dipole_mean_work_literal(p)),
            ("dipole_rate_balance_form", sm.dipole_mean_work(p)),
            ("random_beta_entropy", ref),
        ],
    )
    return res


# 6 ---------------------------------------------------------------------------


def kbeam_fluxes(tol_scale: float = 1.0, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("kbeam_fluxes", tol_scale=tol_scale)
    p = _toy()
    betas = [0.3, 0.8, 1.5]

    def schedule(bs):
        return dy.KBeam([sm.build(p.with_(beta=float(b))) for b in bs])

    kb = schedule(betas)
    det = th.beam_fluxes(kb)
    rnd = th.beam_fluxes(kb, "random")
    res.at_most("deterministic fluxes vs closed form", np.abs(det - sm.kbeam_deterministic_fluxes(p, betas)).max(), 1e-10)
    res.at_most("random fluxes vs closed form", np.abs(rnd - sm.kbeam_random_fluxes(p, betas)).max(), 1e-10)
    res.at_most("dW = -sum phi_j", abs(th.kbeam_work(kb) + det.sum()), 1e-10)
    res.at_most("dS = -sum beta_j phi_j", abs(th.kbeam_entropy(kb) + np.dot(betas, det)), 1e-10)
    res.at_most("random beams: dW = -sum phi_j", abs(th.random_beam_work(kb) + rnd.sum()), 1e-10)
    res.at_most("random beams: dS = -sum beta_j phi_j", abs(th.random_beam_entropy(kb) + np.dot(betas, rnd)), 1e-10)
    kd = th.kinetic_coefficients(lambda b: th.beam_fluxes(schedule(b)), 0.8, 3)
    kr = th.kinetic_coefficients(lambda b: th.beam_fluxes(schedule(b), "random"), 0.8, 3)
    res.holds("deterministic K=3: |L21| > |L12|", abs(kd.L[1, 0]) > abs(kd.L[0, 1]), abs(kd.L[1, 0]) - abs(kd.L[0, 1]))
    res.at_most("random uniform: L symmetric", kr.asymmetry.max(), 1e-6)
    res.table("fluxes", ["beam", "beta", "deterministic", "random"], zip(range(1, 4), betas, det, rnd))
    res.table(
        "kinetic",
        ["mode", "j", "k", "L_jk"],
        [("deterministic", j + 1, k + 1, kd.L[j, k]) for j in range(3) for k in range(3)]
        + [("random", j + 1, k + 1, kr.L[j, k]) for j in range(3) for k in range(3)],
    )
    return res


# 7 ---------------------------------------------------------------------------


def maser_sectors(
    tol_scale: float = 1.0, seed: int = 0, eta: str = "1", xi: str = "3", n_trunc: int = 45, N: int = 200
) -> ExperimentResult:
    res = ExperimentResult("maser_sectors", tol_scale=tol_scale)
    eta_q, xi_q = Fraction(eta), Fraction(xi)
    p = ms.MaserParams.from_eta_xi(eta_q, xi_q, E=1.0, beta=0.7, n_trunc=n_trunc, detuning_sign=-1)
    exact = (xi_q, eta_q)
    st = ms.rabi_resonances(eta_q, xi_q, n_trunc)
    ns = np.arange(n_trunc + 1)
    D = ms.D_function(p, ns, exact)
    zeros = {int(n) for n in ns[D == 0.0]}
    res.holds("D(n) vanishes exactly on {0} u R", zeros == {0} | set(st.resonances), len(zeros))

    big = ms.rabi_resonances(1, 840, 60)
    res.holds("(eta, xi) = (1, 840) is degenerate", big.degenerate)
    res.holds("(eta, xi) = (1, 840) resonances contain {1, 2, 52, 53}", {1, 2, 52, 53} <= set(big.resonances))

    kraus = ms.closed_form_kraus(p, exact)
    states = ms.sector_invariant_states(p, st)
    fix = max(
        float(np.abs(ms.apply_kraus(kraus, s.state) - s.state).max())
        for s, closed in zip(states, st.closed)
        if closed
    )
    res.at_most("sector thermal states fixed by the closed-form channel", fix, 1e-14)

    closed_top = max(b for (a, b), c in zip(st.sectors, st.closed) if c)
    rng = dy.substream(seed, 7)
    rho0 = np.zeros((n_trunc + 1,) * 2, dtype=complex)
    rho0[:closed_top, :closed_top] = random_density(closed_top, rng)
    rel = ms.relax_in_mean(p, rho0, N, exact=exact, structure=st)
    res.at_most("sector weights conserved", float(np.abs(rel.weights - rel.weights[0]).max()), 1e-10)

    T = ms.diagonal_block(ms.jc_rdm(p, exact))
    worst, rows = 0.0, []
    for (a, b), closed in zip(st.sectors, st.closed):
        if not closed:
            continue
        w = np.linalg.eigvals(T[a:b, a:b])
        peri = w[np.abs(w) > 1 - 1e-8]
        dev = float(np.abs(peri - 1).max()) if peri.size == 1 else float("inf")
        worst = max(worst, dev)
        rows.append((a, b, peri.size, dev))
    res.at_most("peripheral spectrum of each finite diagonal block is {1}", worst, 1e-8)
    res.table("sectors", ["start", "stop", "peripheral_count", "deviation_from_1"], rows)
    res.table("D", ["n", "D"], zip(ns, D))
    res.table("weights", ["step"] + [f"sector_{k}" for k in range(len(st.sectors))], [(k, *w) for k, w in enumerate(rel.weights)])
    return res


# 8 ---------------------------------------------------------------------------


def lattice_ldp(tol_scale: float = 1.0, seed: int = 0, n_clt: int = 5000, n_ldp: int = 2000) -> ExperimentResult:
    res = ExperimentResult("lattice_ldp", tol_scale=tol_scale)
    pc = lat.LatticeParams(E=1.0, F=1.0, lam=0.3, tau=1.0, beta=1.0)
    tr = lat.transport(pc)
    d = lat.exact_distribution(pc, n_clt)
    res.at_most("mean/n vs v_d tau", abs(d.mean() / n_clt - tr.v_d * pc.tau), 1e-12)
    res.at_most("variance/n vs 2 D tau", abs(d.variance() / n_clt - 2 * tr.D * pc.tau), 1e-12)
    res.at_most(f"CLT sup distance at n={n_clt}", lat.clt_distance(d), 0.02)

    pl = lat.LatticeParams(E=1.0, F=1.0, lam=0.03, tau=1.0, beta=1.0)
    tl = lat.transport(pl)
    dl = lat.exact_distribution(pl, n_ldp)
    rows, worst = [], 0.0
    for x in np.linspace(tl.v_d * pl.tau + 0.05, 0.9, 18):
        lt = dl.log_tail(n_ldp * x) / n_ldp
        I = lat.rate_closed_form(pl, x)
        rel = abs(lt + I) / I
        worst = max(worst, rel)
        rows.append((x, lt, -I, rel))
    res.at_most(f"(1/n) log tail vs -I(x) at n={n_ldp}, relative", worst, 0.02)
    res.table("ldp", ["x", "log_tail_over_n", "minus_I", "relative_error"], rows)
    xs = np.linspace(-0.95, 0.95, 39)
    sym = max(abs(lat.rate_closed_form(pl, x) - (-pl.beta * pl.E * x + lat.rate_closed_form(pl, -x))) for x in xs)
    res.at_most("symmetry I(x) = -beta E x + I(-x)", sym, 1e-10)
    ein = lat.einstein_limit(0.3, 1.0, 1.0)
    res.at_most("Einstein relation: lim D vs mu/beta", abs(ein.D_limit - ein.mu_over_beta), 1e-6)
    res.table("transport", ["quantity", "value"], [("v_d", tr.v_d), ("D", tr.D), ("D_limit", ein.D_limit), ("mu_over_beta", ein.mu_over_beta)])
    return res


# 9 ---------------------------------------------------------------------------


def _chain(beta: float = 0.7) -> wl.ChainCoupling:
    return wl.ChainCoupling(h_S=np.diag([0.0, 1.0]), deltas=[1.3], Vs=[0.5 * sm.SIGMA_MINUS], beta=beta, tau=1.0)


def weak_coupling(tol_scale: float = 1.0, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("weak_coupling", tol_scale=tol_scale)
    c = _chain()
    weak = wl.scaling_study(c, wl.WeakCoupling([0.2, 0.1, 0.05], 1.0))
    crit = wl.scaling_study(c, wl.Critical([0.1, 0.05, 0.025]))
    res.at_most("weak coupling: |fitted order - 2|", abs(weak.fitted_order - 2), 0.6)
    res.at_most("Chernoff regime: |fitted order - 1|", abs(crit.fitted_order - 1), 0.3)
    g = wl.generators(c)
    res.at_most("Gamma_beta(I) = 0", float(np.abs(g.gamma_beta(np.eye(2))).max()), 1e-12)
    cp, contr = np.inf, 0.0
    rng = dy.substream(seed, 9)
    for t in [0.1, 1.0, 5.0]:
        S = wl.semigroup(g.lindbladian, t).dual()
        cp = min(cp, choi_min_eig(S))
        contr = max(contr, unitality_defect(S))
        a, b = random_density(2, rng), random_density(2, rng)
        contr = max(contr, trace_norm(S(a) - S(b)) - trace_norm(a - b))
    res.at_least("Lindblad semigroup: Choi min eigenvalue", cp, -1e-10)
    res.at_most("Lindblad semigroup: trace preservation and contraction", max(contr, 0.0), 1e-10)
    gi = wl.gamma_beta(_chain(np.inf)).matrix
    res.at_most("beta -> inf limit of Gamma_beta", float(np.abs(wl.gamma_beta(_chain(40.0)).matrix - gi).max()), 1e-9)
    res.table("weak", ["lam", "steps", "error"], zip(weak.params, weak.steps, weak.errors))
    res.table("critical", ["tau", "error"], zip(crit.params, crit.errors))
    return res


# 10 --------------------------------------------------------------------------


def measure_correlations(tol_scale: float = 1.0, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("measure_correlations", tol_scale=tol_scale)
    rng = dy.substream(seed, 10)
    worst = 0.0
    for trial in range(4):
        model = RIModel(
            random_hermitian(2, rng), np.diag([0.0, 0.9]), 0.7 * random_hermitian(4, rng), 1.2, np.diag([0.65, 0.35])
        )
        setup = mm.MeasurementSetup(model, random_hermitian(2, rng))
        inst = mm.build_instrument(setup)
        rho0 = random_density(2, rng)
        o = setup.outcomes
        for n in range(1, 6):
            sets = [[o[k % 2]] if (k + trial) % 3 else None for k in range(n)]
            p, state = mm.brute_force_probability(setup, rho0, sets)
            worst = max(worst, abs(mm.joint_probability(inst, rho0, sets) - p))
            worst = max(worst, float(np.abs(mm.post_measurement_state(inst, rho0, sets) - state).max()))
    res.at_most("joint probabilities vs brute force, n <= 5", worst, 1e-10)

    lam, tau = 0.4, 1.3
    exp_err, star = 0.0, 0.0
    for p in [1.0, 0.3]:
        for _ in range(3):
            X = random_hermitian(2, rng)
            M = mm.spin_spin_explicit(p, X, lam, tau)
            exp_err = max(exp_err, float(np.abs(M - mm.heisenberg_step_matrix(mm.spin_spin_model(p, lam, tau), X)).max()))
            if p == 1.0:
                c = np.cos(lam * tau)
                ref = X[0, 0] * np.array([1, np.exp(2j * tau) * c, np.exp(-2j * tau) * c, c * c])
                star = max(star, _matched_distance(np.linalg.eigvals(M), ref))
    res.at_most("explicit spin-spin matrix vs numeric channel", exp_err, 1e-10)
    res.at_most("p = 1 spectrum of the explicit matrix", star, 1e-9)

    model = mm.spin_spin_model(0.3, 0.9, 1.0)
    inst = mm.build_instrument(mm.MeasurementSetup(model, mm.spin_direction(0.6)))
    o = inst.outcomes
    cd = mm.correlation_decay(inst, np.diag([0.5, 0.5]), 2, range(4, 30), [o[0]], [o[1]])
    res.at_most("correlation decay rate vs spectral gap, relative", abs(cd.gamma - cd.spectral_gap) / cd.spectral_gap, 0.2)
    res.table("correlations", ["gap", "lhs"], zip(cd.gaps, cd.lhs))

    one = mm.spin_spin_model(1.0, 0.5, 1.0)
    Mx = mm.spin_direction(np.pi / 2)
    setup = mm.MeasurementSetup(one, Mx)
    stats = mm.asymptotic_statistics(setup)
    f_err = max(abs(stats.frequencies[m] - np.trace(one.rho_E @ E).real) for m, E in zip(setup.outcomes, setup.projectors))
    res.at_most("p = 1: f_m = omega_in(E_m)", f_err, 1e-9)
    res.at_most("p = 1: mu_inf = omega_in(M)", abs(stats.mean - np.trace(one.rho_E @ Mx).real), 1e-9)

    rho0 = np.diag([0.3, 0.7])
    up = mm.build_instrument(mm.MeasurementSetup(one, mm.SIGMA_Z))
    res.at_most("p = 1: P(X_n = up eventually) = 1", abs(mm.eventually_probability(up, rho0, [1.0]) - 1), 1e-9)
    worst = 0.0
    for theta in [0.3, 1.0, np.pi / 2]:
        inst_t = mm.build_instrument(mm.MeasurementSetup(one, mm.spin_direction(theta)))
        worst = max(worst, mm.eventually_probability(inst_t, rho0, [1.0]))
    res.at_most("p = 1: spin-theta eventual probability for theta != 0", worst, 1e-12)

    ts = mm.TiltedSpectrum(mm.build_instrument(setup))
    alphas = np.linspace(-2, 2, 41)
    lam_err = max(abs(ts.Lambda(a) - np.log(np.trace(one.rho_E @ _expm_h(a * Mx)).real)) for a in alphas)
    res.at_most("Lambda(alpha) = log omega_in(e^{alpha M}) on |alpha| <= 2", lam_err, 1e-8)
    mean = np.trace(one.rho_E @ Mx).real
    var = np.trace(one.rho_E @ Mx @ Mx).real - mean**2

    def q(h):
        return (ts.rate(mean + h) + ts.rate(mean - h) - 2 * ts.rate(mean)) / (2 * h * h)

    coeff = (4 * q(5e-3) - q(1e-2)) / 3
    res.at_most("Lambda* quadratic coefficient vs 1/(2 Var M)", abs(coeff - 1 / (2 * var)), 1e-6)
    res.table("ldp", ["alpha", "Lambda"], [(a, ts.Lambda(a)) for a in alphas])
    return res


def _expm_h(h: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(h)
    return (u * np.exp(w)) @ u.conj().T


# 11 --------------------------------------------------------------------------


PLUS_I = np.outer([1, 1j], [1, -1j]) / 2


def _diffusive_walk() -> qw.WalkSpec:
    coins = qw.random_phase_coins(qw.HADAMARD, [0.0, 2.0, 4.1])
    return qw.WalkSpec(1, qw.symmetric_jump(1), coins, [0.3, 0.3, 0.4], PLUS_I)


def quantum_walk(tol_scale: float = 1.0, seed: int = 0, n: int = 50, trials: int = 100_000) -> ExperimentResult:
    res = ExperimentResult("quantum_walk", tol_scale=tol_scale)
    spec = _diffusive_walk()
    rng = dy.substream(seed, 11)
    worst = 0.0
    for m in range(9):
        seq = [spec.coins[k] for k in rng.choice(len(spec.coins), size=m, p=spec.probs)]
        worst = max(worst, qw.amplitude_unitarity_defect(qw.amplitudes(spec, seq)))
    res.at_most("amplitude unitarity sum J^* J = I", worst, 1e-10)

    mc = qw.mc_moments(spec, n, trials, seed=seed)
    ex = qw.transfer_moments(spec, n)
    z_mean = float(np.abs(mc.mean - ex.mean).max() / mc.mean_se.max())
    z_second = float(np.abs(mc.second - ex.second).max() / mc.second_se.max())
    res.at_most(f"transfer vs Monte Carlo mean at n={n}, in sigmas", z_mean, 3.0)
    res.at_most(f"transfer vs Monte Carlo second moment at n={n}, in sigmas", z_second, 3.0)
    res.at_most("symmetric jump: |Monte Carlo mean/n| in sigmas", float(np.abs(mc.mean).max() / mc.mean_se.max()), 3.0)
    drift = max(float(np.abs(qw.transfer_moments(spec, k).mean - k * spec.r_bar).max()) for k in (10, 50))
    res.at_most("symmetric law: transfer-matrix mean = n r_bar", drift, 1e-9)

    ball = qw.classify_transport(qw.WalkSpec(1, qw.symmetric_jump(1), (qw.HADAMARD,), [1.0], np.diag([1.0, 0.0])))
    diff = qw.classify_transport(spec)
    res.holds("deterministic coin flagged ballistic", ball.kind == "ballistic", ball.var_over_n2[-1])
    res.at_least("deterministic coin: variance/n^2", min(ball.var_over_n2), 0.05)
    res.holds("random coins flagged diffusive", diff.kind == "diffusive", diff.var_over_n[-1])
    res.at_most(
        "random coins: relative change of variance/n",
        abs(diff.var_over_n[-1] - diff.var_over_n[-2]) / diff.var_over_n[-1],
        0.01,
    )
    vs = np.linspace(0, 2 * np.pi, 73)[:, None]
    res.holds("random coins: spectral condition on sampled v", qw.spectral_condition(spec, vs))
    res.table(
        "moments",
        ["source", "mean", "mean_se", "second", "second_se"],
        [
            ("monte_carlo", mc.mean[0], mc.mean_se[0], mc.second[0, 0], mc.second_se[0, 0]),
            ("transfer", ex.mean[0], "", ex.second[0, 0], ""),
        ],
    )
    res.table(
        "transport",
        ["coin", "n", "var_over_n", "var_over_n2"],
        [("deterministic", k, a, b) for k, a, b in zip(ball.ns, ball.var_over_n, ball.var_over_n2)]
        + [("random", k, a, b) for k, a, b in zip(diff.ns, diff.var_over_n, diff.var_over_n2)],
    )
    return res


# 12 --------------------------------------------------------------------------


def _channels(rng) -> dict[str, Superoperator]:
    p = _toy()
    out = {
        "toy_exchange": build_rdm(sm.build(p)).superop,
        "toy_dipole": build_rdm(sm.build(p, "dipole")).superop,
        "toy_closed_form": sm.closed_form_channel(p),
        "maser_numeric": ms.numeric_rdm(ms.MaserParams(1.0, 0.8, 0.6, 1.3, 0.7, 6)).superop,
        "chain": build_rdm(_chain().to_model()).superop,
        "spin_spin": build_rdm(mm.spin_spin_model(0.3, 0.5, 1.0)).superop,
    }
    model = RIModel(random_hermitian(3, rng), np.diag([0.0, 1.1]), random_hermitian(6, rng), 0.9, np.diag([0.7, 0.3]))
    out["random_3x2"] = build_rdm(model).superop
    inst = mm.build_instrument(mm.MeasurementSetup(model, np.diag([1.0, -1.0])))
    out["instrument_total"] = inst.total
    return out


def global_properties(tol_scale: float = 1.0, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("global_properties", tol_scale=tol_scale)
    rng = dy.substream(seed, 12)
    rows, cp, tp = [], np.inf, 0.0
    for name, ch in _channels(rng).items():
        c, t = choi_min_eig(ch), unitality_defect(ch)
        cp, tp = min(cp, c), max(tp, t)
        rows.append((name, c, t))
    res.table("channels", ["channel", "choi_min_eig", "dual_unitality_defect"], rows)
    res.at_least("every channel: Choi min eigenvalue", cp, -1e-10)
    res.at_most("every channel: dual unitality defect", tp, 1e-10)

    models = [
        RIModel(random_hermitian(2, rng), np.diag([0.0, 0.5 + k]), random_hermitian(4, rng), 0.7 + 0.2 * k, np.diag([0.6, 0.4]))
        for k in range(4)
    ]
    rho0 = random_density(2, rng)
    worst = 0.0
    for n in range(1, 5):
        rho = rho0
        for m in models[:n]:
            rho = build_rdm(m)(rho)
        worst = max(worst, float(np.abs(brute_force_evolve(models[:n], rho0) - rho).max()))
    res.at_most("n <= 4 full tensor evolution vs RDM iteration", worst, 1e-10)

    p = _toy()
    grid = np.linspace(0.8, 1.6, 9)
    sampler = dy.TabulatedTau(lambda t: sm.build(p.with_(tau=t)), grid, np.ones_like(grid))

    def replay():
        traj = dy.run(dy.Random(sampler, seed=seed, index=3), np.eye(2) / 2, 50)
        buf = io.StringIO()
        w = csv.writer(buf)
        for r in traj.states:
            w.writerow([f"{z.real:.17g},{z.imag:.17g}" for z in r.reshape(-1)])
        walk = qw.mc_moments(_diffusive_walk(), 8, 64, seed=seed)
        inst = mm.build_instrument(mm.MeasurementSetup(mm.spin_spin_model(0.3, 0.5, 1.0), mm.SIGMA_Z))
        outs = mm.sample_outcomes(inst, np.eye(2) / 2, 40, seed=seed)
        return buf.getvalue().encode() + walk.mean.tobytes() + walk.second.tobytes() + outs.tobytes()

    res.holds("deterministic replay is bit-identical", replay() == replay())
    return res


EXPERIMENTS: dict[str, tuple[Callable[..., ExperimentResult], str, str]] = {
    "toy_rdm": (toy_rdm, "numeric RDM of the spin toy model vs its Kraus form", "ex:toy-description-rdm"),
    "toy_spectrum": (toy_spectrum, "toy-model spectrum and Gibbs invariant state", "exo:toyideal"),
    "toy_convergence": (toy_convergence, "exponential relaxation rate -log sqrt(e0)", "thm:idealsmall"),
    "random_ri": (random_ri, "random interaction times and random probe temperatures", "thm:randomstatesmall"),
    "thermo_identities": (thermo_identities, "work and entropy production identities", "eq:hamworkexpect"),
    "kbeam_fluxes": (kbeam_fluxes, "K-beam energy fluxes and kinetic coefficients", "exo:toynoneq"),
    "maser_sectors": (maser_sectors, "Rabi resonances, sectors and sector thermal states", "thm:relax"),
    "lattice_ldp": (lattice_ldp, "lattice walk CLT, large deviations and Einstein relation", "thm:diffusion"),
    "weak_coupling": (weak_coupling, "weak-coupling and Chernoff-regime generators", "thm:mtb"),
    "measure_correlations": (measure_correlations, "repeated measurement statistics", "corrdeclemma'"),
    "quantum_walk": (quantum_walk, "random coined quantum walk moments", "thm:cf"),
    "global_properties": (global_properties, "CPTP checks, brute force and deterministic replay", "prop:rdmprop"),
}
