"""Work, entropy production and energy fluxes of repeated interaction systems.

Sign conventions: ``Delta W`` is the mean power delivered to the system by
the external agent; ``phi_j`` is the rate of energy lost by beam ``j``; the
entropy production rate is ``-lim Delta S(n) / t_n`` and is non-negative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    FiniteMixture,
    Ideal,
    KBeam,
    Random,
    Schedule,
    TabulatedTau,
    Trajectory,
    beam_label,
    kbeam_effective_maps,
    records,
    step_model,
    substream,
)
from .qops import NumericalError, Superoperator, dag, eigh_checked
from .rdm import RIModel, build_rdm
from .spectral import analyze


def _expect(rho: np.ndarray, model: RIModel, obs: np.ndarray) -> float:
    return float(np.real(np.trace(np.kron(rho, model.rho_E) @ obs)))


def heisenberg(model: RIModel, x: np.ndarray) -> np.ndarray:
    """``e^{i tau h} x e^{-i tau h}``."""
    u = model.unitary()
    return dag(u) @ x @ u


def flux_observable(model: RIModel) -> np.ndarray:
    """``Phi = [i v, 1 (x) h_E]``."""
    dS, _ = model.dims
    hE = np.kron(np.eye(dS), model.h_E)
    return 1j * (model.v @ hE - hE @ model.v)


def flux_integral(model: RIModel) -> np.ndarray:
    """``int_0^tau e^{ish} Phi e^{-ish} ds`` evaluated entrywise in the eigenbasis of ``h``."""
    e, u = eigh_checked(model.h)
    phi = dag(u) @ flux_observable(model) @ u
    w = e[:, None] - e[None, :]
    tau = model.tau
    weight = tau * np.exp(0.5j * tau * w) * np.sinc(tau * w / (2 * np.pi))
    return u @ (phi * weight) @ dag(u)


def probe_beta(model: RIModel, tol: float = 1e-8) -> float:
    """Inverse temperature of a Gibbs probe state; raises if ``rho_E`` is not Gibbs for ``h_E``."""
    e, u = eigh_checked(model.h_E)
    r = dag(u) @ model.rho_E @ u
    if np.abs(r - np.diag(np.diag(r))).max() > tol:
        raise NumericalError("probe state is not Gibbs: it does not commute with h_E")
    p = np.real(np.diag(r))
    if p.min() <= 0:
        raise NumericalError("probe state is not Gibbs: it is not faithful")
    if np.ptp(e) < 1e-14:
        return 0.0
    slope, icpt = np.polyfit(e, np.log(p), 1)
    resid = np.abs(np.log(p) - (slope * e + icpt)).max()
    if resid > tol:
        raise NumericalError(f"probe state is not Gibbs (log-population residual {resid:.2e})")
    return float(-slope)


def log_gibbs(h: np.ndarray, beta: float) -> np.ndarray:
    w = np.linalg.eigvalsh(h)
    log_z = -beta * w.min() + np.log(np.sum(np.exp(-beta * (w - w.min()))))
    return -beta * np.asarray(h, dtype=complex) - log_z * np.eye(h.shape[0])


def work_step(rho_prev: np.ndarray, model_n: RIModel, model_next: RIModel) -> float:
    rho = build_rdm(model_n)(rho_prev)
    return _expect(rho, model_next, model_next.v) - _expect(rho_prev, model_n, heisenberg(model_n, model_n.v))


def work_density(model: RIModel) -> np.ndarray:
    """``v - e^{i tau h} v e^{-i tau h}``."""
    return model.v - heisenberg(model, model.v)


@dataclass(frozen=True, eq=False)
class ThermoLedger:
    work_steps: np.ndarray
    entropy_steps: np.ndarray
    beam_steps: np.ndarray  # [step, beam] energy lost by each beam at each step
    system_energy: np.ndarray
    boundary: np.ndarray

    @property
    def total_work(self) -> np.ndarray:
        return np.cumsum(self.work_steps)

    @property
    def entropy(self) -> np.ndarray:
        return np.cumsum(self.entropy_steps)

    @property
    def per_beam_energy(self) -> np.ndarray:
        return np.cumsum(self.beam_steps, axis=0)

    def concat(self, other: "ThermoLedger") -> "ThermoLedger":
        K = max(self.beam_steps.shape[1], other.beam_steps.shape[1])

        def pad(b):
            return np.pad(b, ((0, 0), (0, K - b.shape[1])))

        return ThermoLedger(
            np.concatenate([self.work_steps, other.work_steps]),
            np.concatenate([self.entropy_steps, other.entropy_steps]),
            np.vstack([pad(self.beam_steps), pad(other.beam_steps)]),
            np.concatenate([self.system_energy, other.system_energy]),
            np.concatenate([self.boundary, other.boundary]),
        )

    def to_csv(self, path) -> None:
        K = self.beam_steps.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "dE", "dS"] + [f"beam_{j + 1}" for j in range(K)])
            for n in range(self.work_steps.size):
                row = [n + 1, f"{self.work_steps[n]:.17g}", f"{self.entropy_steps[n]:.17g}"]
                row += [f"{x:.17g}" for x in self.beam_steps[n]]
                w.writerow(row)


def _n_beams(schedule: Schedule) -> int:
    if isinstance(schedule, KBeam):
        return schedule.K
    if isinstance(schedule, Random) and isinstance(schedule.sampler, FiniteMixture):
        return len(schedule.sampler.models)
    return 1


def ledger(schedule: Schedule, traj: Trajectory, beta_S: float = 0.0, with_entropy: bool = True) -> ThermoLedger:
    """Replay a trajectory through the work, entropy and per-beam energy formulas.

    The reference state for the entropy is ``Gibbs(h_S, beta_S)``.
    """
    n = len(traj.states) - 1
    recs = records(schedule, n + 1)
    if recs[:n] != traj.step_records:
        raise ValueError("trajectory was not produced by this schedule")
    models = [step_model(schedule, r) for r in recs]
    h_S = models[0].h_S
    log_ref = log_gibbs(h_S, beta_S)
    K = _n_beams(schedule)
    work = np.empty(n)
    ent = np.empty(n)
    beams = np.zeros((n, K))
    sys_e = np.empty(n)
    bnd = np.empty(n)
    rho = traj.states
    for k in range(n):
        m, nxt = models[k], models[k + 1]
        work[k] = _expect(rho[k + 1], nxt, nxt.v) - _expect(rho[k], m, heisenberg(m, m.v))
        gained = _expect(rho[k], m, flux_integral(m))
        beams[k, beam_label(schedule, recs[k])] = -gained
        sys_e[k] = float(np.real(np.trace((rho[k + 1] - rho[k]) @ h_S)))
        bnd[k] = _expect(rho[k + 1], nxt, nxt.v) - _expect(rho[k], m, m.v)
        if with_entropy:
            ent[k] = float(np.real(np.trace((rho[k + 1] - rho[k]) @ log_ref))) - probe_beta(m) * gained
        else:
            ent[k] = np.nan
    return ThermoLedger(work, ent, beams, sys_e, bnd)


# --- asymptotic rates ---------------------------------------------------------


def _mixture(schedule: Schedule, samples: int = 4000) -> tuple[list[RIModel], np.ndarray]:
    """Models and weights of the single-step law (exact for finite supports)."""
    if isinstance(schedule, Ideal):
        return [schedule.model], np.ones(1)
    if isinstance(schedule, KBeam):
        raise TypeError("K-beam schedules have no single-step law; use beam_fluxes")
    s = schedule.sampler
    if isinstance(s, FiniteMixture):
        return s.models, s.probs
    rng = substream(schedule.seed, 7)
    return [s.model_for(s.draw(u)) for u in rng.random(samples)], np.full(samples, 1.0 / samples)


def invariant_state_of(schedule: Schedule) -> np.ndarray:
    if isinstance(schedule, Ideal):
        rep = analyze(schedule.superop)
    else:
        models, probs = _mixture(schedule)
        mean = sum(q * build_rdm(m).superop.matrix for m, q in zip(models, probs))
        rep = analyze(Superoperator(mean))
    if rep.invariant_state is None or not rep.satisfies_E:
        raise NumericalError("no unique invariant state: condition (E) fails")
    return rep.invariant_state


def mean_work(schedule: Schedule, rho_plus: np.ndarray | None = None, form: str = "direct") -> float:
    """Mean power delivered to the system.

    ``form="direct"`` uses ``v - e^{i tau h} v e^{-i tau h}``; ``form="flux"``
    uses the time integral of ``Phi = [iv, h_E]``.
    """
    if isinstance(schedule, KBeam):
        return kbeam_work(schedule, form=form)
    models, probs = _mixture(schedule)
    if rho_plus is None:
        rho_plus = invariant_state_of(schedule)
    obs = work_density if form == "direct" else flux_integral
    if form not in ("direct", "flux"):
        raise ValueError(f"unknown form {form!r}")
    num = sum(q * _expect(rho_plus, m, obs(m)) for m, q in zip(models, probs))
    return num / sum(q * m.tau for m, q in zip(models, probs))


def entropy_production(schedule: Schedule, rho_plus: np.ndarray | None = None, form: str = "flux") -> float:
    """Mean entropy production per unit time.

    ``form="flux"`` is ``E[beta Tr(rho_+ (x) rho_E int Phi)] / E[tau]``;
    ``form="energy"`` uses the system-energy and interaction-energy rewriting.
    """
    if isinstance(schedule, KBeam):
        return kbeam_entropy(schedule, form=form)
    models, probs = _mixture(schedule)
    if rho_plus is None:
        rho_plus = invariant_state_of(schedule)
    num = 0.0
    for m, q in zip(models, probs):
        beta = probe_beta(m)
        if form == "flux":
            num += q * beta * _expect(rho_plus, m, flux_integral(m))
        elif form == "energy":
            num += q * beta * _energy_form(rho_plus, m)
        else:
            raise ValueError(f"unknown form {form!r}")
    return num / sum(q * m.tau for m, q in zip(models, probs))


def _energy_form(rho_in: np.ndarray, m: RIModel) -> float:
    """Probe energy gain by conservation: ``Tr[(rho - L rho) h_S] + Tr[rho (x) rho_E (v - e^{i tau h} v e^{-i tau h})]``."""
    out = build_rdm(m)(rho_in)
    return float(np.real(np.trace((rho_in - out) @ m.h_S))) + _expect(rho_in, m, work_density(m))


# --- beams ------------------------------------------------------------------


def entering_states(schedule: KBeam) -> list[np.ndarray]:
    """Periodic state entering beam ``j``: the invariant state of ``L~_{j-1}``."""
    tilde = kbeam_effective_maps(list(schedule.superops))
    out = []
    K = schedule.K
    for j in range(K):
        rep = analyze(tilde[(j - 1) % K])
        if not rep.satisfies_E or rep.invariant_state is None:
            raise NumericalError(f"effective map {(j - 1) % K + 1} fails condition (E)")
        out.append(rep.invariant_state)
    return out


def beam_fluxes(schedule: KBeam, mode: str = "deterministic") -> np.ndarray:
    """Energy flux ``phi_j`` lost by each beam.

    ``mode="deterministic"`` cycles the beams in order; ``mode="random"``
    picks a beam uniformly at random at every step.
    """
    total_tau = sum(m.tau for m in schedule.models)
    if mode == "deterministic":
        states = entering_states(schedule)
        return np.array([-_expect(r, m, flux_integral(m)) for r, m in zip(states, schedule.models)]) / total_tau
    if mode == "random":
        mean = Superoperator(sum(s.matrix for s in schedule.superops) / schedule.K)
        rep = analyze(mean)
        if not rep.satisfies_E:
            raise NumericalError("E[L] fails condition (E)")
        return np.array([-_expect(rep.invariant_state, m, flux_integral(m)) for m in schedule.models]) / total_tau
    raise ValueError(f"unknown mode {mode!r}")


def kbeam_work(schedule: KBeam, form: str = "direct") -> float:
    """Mean power for the deterministic cycle, evaluated on the periodic states."""
    states = entering_states(schedule)
    obs = work_density if form == "direct" else flux_integral
    return sum(_expect(r, m, obs(m)) for r, m in zip(states, schedule.models)) / sum(m.tau for m in schedule.models)


def kbeam_entropy(schedule: KBeam, form: str = "energy") -> float:
    states = entering_states(schedule)
    tot = sum(m.tau for m in schedule.models)
    if form == "energy":
        return sum(probe_beta(m) * _energy_form(r, m) for r, m in zip(states, schedule.models)) / tot
    return sum(probe_beta(m) * _expect(r, m, flux_integral(m)) for r, m in zip(states, schedule.models)) / tot


def random_beam_work(schedule: KBeam) -> float:
    """Mean power when beams are drawn uniformly, from the direct work formula."""
    return mean_work(Random(FiniteMixture(list(schedule.models), np.full(schedule.K, 1.0 / schedule.K))))


def random_beam_entropy(schedule: KBeam) -> float:
    return entropy_production(
        Random(FiniteMixture(list(schedule.models), np.full(schedule.K, 1.0 / schedule.K))), form="energy"
    )


@dataclass(frozen=True, eq=False)
class KineticCoefficients:
    L: np.ndarray
    asymmetry: np.ndarray
    richardson_gap: float


def kinetic_coefficients(
    fluxes: Callable[[np.ndarray], np.ndarray], beta_ref: float, K: int, h: float = 1e-3
) -> KineticCoefficients:
    """``L_jk = d phi_j / d X_k`` at ``X = 0`` with ``X_k = beta_ref - beta_k``.

    Central differences at steps ``h`` and ``h/2`` combined by Richardson
    extrapolation; ``richardson_gap`` is the largest change from the finer
    raw estimate.
    """

    def central(step: float) -> np.ndarray:
        out = np.empty((K, K))
        for k in range(K):
            x = np.zeros(K)
            x[k] = step
            plus = np.asarray(fluxes(beta_ref - x))
            minus = np.asarray(fluxes(beta_ref + x))
            out[:, k] = (plus - minus) / (2 * step)
        return out

    coarse, fine = central(h), central(h / 2)
    L = (4 * fine - coarse) / 3
    return KineticCoefficients(L, np.abs(L - L.T), float(np.abs(L - fine).max()))
