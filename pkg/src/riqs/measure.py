"""Repeated measurements on outgoing probes.

Instruments act on system density matrices.  ``I_S(rho)`` is the
unnormalized system state after one interaction followed by a projective
measurement of the probe with outcome in ``S``.  Outcome ``S_1`` is applied
first in time.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dynamics import substream
from .qops import NumericalError, Superoperator, check_density, dag, eigh_checked, hermitize, kron
from .rdm import RIModel, build_rdm
from .spectral import analyze, riesz_projection

SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
LOWER = np.array([[0, 0], [1, 0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class MeasurementSetup:
    model: RIModel
    M: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        M = np.asarray(self.M, dtype=complex)
        if M.shape != self.model.h_E.shape:
            raise ValueError("measurement operator must act on the probe")
        w, u = eigh_checked(M)
        groups: list[list[int]] = []
        for k in range(w.size):
            if groups and abs(w[k] - w[groups[-1][0]]) < self.tol:
                groups[-1].append(k)
            else:
                groups.append([k])
        outcomes = tuple(float(np.mean(w[g])) for g in groups)
        projs = tuple(u[:, g] @ dag(u[:, g]) for g in groups)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "projectors", projs)

    def projector(self, S: Iterable[float] | None) -> np.ndarray:
        """``E_S``; ``None`` means the whole spectrum."""
        if S is None:
            return np.eye(self.M.shape[0], dtype=complex)
        idx = {self.index(m) for m in S}
        dE = self.M.shape[0]
        return sum((self.projectors[k] for k in idx), np.zeros((dE, dE), dtype=complex))

    def index(self, m: float) -> int:
        for k, o in enumerate(self.outcomes):
            if abs(o - m) < self.tol:
                return k
        raise ValueError(f"{m!r} is not an eigenvalue of the measurement operator")


@dataclass(frozen=True, eq=False)
class Instrument:
    setup: MeasurementSetup
    maps: tuple

    @property
    def outcomes(self) -> tuple:
        return self.setup.outcomes

    def of(self, S: Iterable[float] | None) -> Superoperator:
        if S is None:
            return self.total
        idx = sorted({self.setup.index(m) for m in S})
        if not idx:
            return Superoperator(np.zeros_like(self.maps[0].matrix))
        return Superoperator(sum(self.maps[k].matrix for k in idx))

    @property
    def total(self) -> Superoperator:
        return Superoperator(sum(m.matrix for m in self.maps))


def _kraus_for(model: RIModel, E: np.ndarray) -> list[np.ndarray]:
    dS, dE = model.dims
    U = model.unitary()
    w, v = np.linalg.eigh(hermitize(model.rho_E))
    PU = kron(np.eye(dS), E) @ U
    ops = []
    for k in range(dE):
        if w[k] <= 0:
            continue
        inp = kron(np.eye(dS), v[:, k].reshape(dE, 1))
        for j in range(dE):
            out = kron(np.eye(dS), np.eye(dE)[j].reshape(1, dE))
            ops.append(np.sqrt(w[k]) * out @ PU @ inp)
    return ops


def instrument_map(model: RIModel, E: np.ndarray) -> Superoperator:
    """``rho -> Tr_P[(1 (x) E) U (rho (x) omega_in) U^* (1 (x) E)]``."""
    return Superoperator.from_kraus(_kraus_for(model, E))


def build_instrument(setup: MeasurementSetup) -> Instrument:
    return Instrument(setup, tuple(instrument_map(setup.model, E) for E in setup.projectors))


def _compose(inst: Instrument, rho0: np.ndarray, sets: Sequence) -> np.ndarray:
    rho = np.asarray(rho0, dtype=complex)
    for S in sets:
        rho = inst.of(S)(rho)
    return rho


def joint_probability(inst: Instrument, rho0: np.ndarray, sets: Sequence) -> float:
    """``P(X_1 in S_1, ..., X_n in S_n)``; ``None`` in a slot means no constraint."""
    if len(sets) < 1:
        raise ValueError("need at least one outcome set")
    p = float(np.trace(_compose(inst, check_density(rho0), sets)).real)
    if p < -1e-10:
        raise NumericalError(f"negative probability {p:.3e}")
    return max(p, 0.0)


def post_measurement_state(inst: Instrument, rho0: np.ndarray, sets: Sequence) -> np.ndarray:
    out = _compose(inst, check_density(rho0), sets)
    p = np.trace(out).real
    if p <= 0:
        raise ValueError("outcome sequence has probability zero")
    return hermitize(out / p)


def _apply_local(state: np.ndarray, op: np.ndarray, dims: list[int], k: int) -> np.ndarray:
    """``O state O^*`` for ``O`` acting on factor 0 and factor ``k``."""
    N = len(dims)
    t = state.reshape(dims + dims)
    o = op.reshape(dims[0], dims[k], dims[0], dims[k])
    t = np.moveaxis(np.tensordot(o, t, axes=([2, 3], [0, k])), [0, 1], [0, k])
    od = dag(op).reshape(dims[0], dims[k], dims[0], dims[k])
    t = np.moveaxis(np.tensordot(t, od, axes=([N, N + k], [0, 1])), [2 * N - 2, 2 * N - 1], [N, N + k])
    D = int(np.prod(dims))
    return t.reshape(D, D)


def brute_force_probability(setup: MeasurementSetup, rho0: np.ndarray, sets: Sequence) -> tuple[float, np.ndarray]:
    """Full system-plus-probes evolution with projections; returns ``(P, system state)``."""
    m = setup.model
    dS, dE = m.dims
    n = len(sets)
    U = m.unitary()
    state = check_density(rho0)
    for _ in range(n):
        state = np.kron(state, m.rho_E)
    dims = [dS] + [dE] * n
    for k, S in enumerate(sets, start=1):
        op = kron(np.eye(dS), setup.projector(S)) @ U
        state = _apply_local(state, op, dims, k)
    p = float(np.trace(state).real)
    D = state.shape[0]
    red = state.reshape(dS, D // dS, dS, D // dS).trace(axis1=1, axis2=3)
    return p, red / p if p > 0 else red


def outcome_paths(inst: Instrument, rho0: np.ndarray, n: int):
    """Every outcome path of length n with its probability and conditional state."""
    for path in itertools.product(inst.outcomes, repeat=n):
        out = _compose(inst, rho0, [[m] for m in path])
        p = float(np.trace(out).real)
        yield path, p, (out / p if p > 1e-300 else out)


def sample_outcomes(inst: Instrument, rho0: np.ndarray, n: int, seed: int = 0, index: int = 0) -> np.ndarray:
    rng = substream(seed, index)
    rho = check_density(rho0)
    vals = np.array(inst.outcomes)
    out = np.empty(n)
    for k, u in enumerate(rng.random(n)):
        imgs = [mp(rho) for mp in inst.maps]
        probs = np.array([max(np.trace(x).real, 0.0) for x in imgs])
        cdf = np.cumsum(probs)
        j = min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(imgs) - 1)
        out[k] = vals[j]
        rho = hermitize(imgs[j] / probs[j])
    return out


def export_paths(path, samples: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "outcome"])
        for k, x in enumerate(samples, start=1):
            w.writerow([k, f"{x:.17g}"])


@dataclass(frozen=True)
class AsymptoticStatistics:
    frequencies: dict
    mean: float
    rho_plus: np.ndarray


def asymptotic_statistics(setup: MeasurementSetup) -> AsymptoticStatistics:
    """Limit frequencies ``f_m`` and mean ``mu_inf`` from the invariant state of the unmeasured channel."""
    rep = analyze(build_rdm(setup.model).superop)
    if not rep.satisfies_E:
        raise NumericalError("the unmeasured channel does not satisfy condition (E)")
    rho = rep.invariant_state
    U = setup.model.unitary()
    dS, _ = setup.model.dims
    joint = np.kron(rho, setup.model.rho_E)
    freqs = {}
    for m, E in zip(setup.outcomes, setup.projectors):
        obs = dag(U) @ kron(np.eye(dS), E) @ U
        freqs[m] = float(np.trace(joint @ obs).real)
    mean = sum(m * f for m, f in freqs.items())
    return AsymptoticStatistics(freqs, float(mean), rho)


def averaged_observable(h_P: np.ndarray, X: np.ndarray, tau: float) -> np.ndarray:
    """``(1/tau) int_0^tau e^{i s h_P} X e^{-i s h_P} ds``."""
    e, u = eigh_checked(h_P)
    w = e[:, None] - e[None, :]
    xt = dag(u) @ X @ u
    weight = np.exp(1j * tau * w / 2) * np.sinc(tau * w / (2 * np.pi))
    return u @ (xt * weight) @ dag(u)


def frequency_flux(model: RIModel, X: np.ndarray, omega_S: np.ndarray) -> float:
    """Linear coefficient ``omega_S (x) omega_in(i tau [V, X_bar(tau)])`` with ``V = model.v``."""
    dS, _ = model.dims
    xb = kron(np.eye(dS), averaged_observable(model.h_E, X, model.tau))
    comm = model.v @ xb - xb @ model.v
    return float(np.trace(np.kron(omega_S, model.rho_E) @ (1j * model.tau * comm)).real)


@dataclass(frozen=True, eq=False)
class CorrelationDecay:
    gaps: np.ndarray
    lhs: np.ndarray
    gamma: float
    spectral_gap: float


def correlation_decay(
    inst: Instrument, rho0: np.ndarray, l: int, ms: Sequence[int], A: Iterable[float], B: Iterable[float]
) -> CorrelationDecay:
    """``|P(X_l in A, X_m in B) - P(X_l in A) P(X_m in B)|`` over ``m`` with a log-linear fit."""
    if l < 1 or any(m <= l for m in ms):
        raise ValueError("need 1 <= l < m")
    A, B = list(A), list(B)
    phi = inst.total
    rho_l = inst.of(A)(phi.power(l - 1)(rho0))
    pA = np.trace(rho_l).real
    out = []
    for m in ms:
        gap = m - l - 1
        pAB = np.trace(inst.of(B)(phi.power(gap)(rho_l))).real
        pB = np.trace(inst.of(B)(phi.power(m - 1)(rho0))).real
        out.append(abs(pAB - pA * pB))
    out = np.array(out)
    gaps = np.array(ms) - l
    sel = out > 1e-14
    gamma = float(-np.polyfit(gaps[sel], np.log(out[sel]), 1)[0]) if sel.sum() >= 2 else float("inf")
    return CorrelationDecay(gaps, out, gamma, analyze(phi).gap)


def _projection_at_one(m: Superoperator, what: str) -> Superoperator | None:
    w = np.linalg.eigvals(m.matrix)
    if np.abs(w).max() < 1 - 1e-8:
        return None
    near = np.abs(w - 1) < 1e-9
    if not near.any():
        return None
    others = w[~near]
    sep = np.abs(others - 1).min() if others.size else 1.0
    if sep < 1e-6:
        raise NumericalError(f"eigenvalue 1 of {what} is not isolated (nearest {sep:.2e})")
    return riesz_projection(m, 1.0, sep / 2)


def eventually_probability(inst: Instrument, rho0: np.ndarray, S: Iterable[float]) -> float:
    """``P(X_n in S eventually)`` from the Riesz projections at 1 of the channel and of ``I_S``."""
    rho0 = check_density(rho0)
    pi_S = _projection_at_one(inst.of(list(S)), "I_S")
    if pi_S is None:
        return 0.0
    pi = _projection_at_one(inst.total, "the channel")
    if pi is None:
        raise NumericalError("the channel has no eigenvalue 1")
    return float(np.trace(pi_S(pi(rho0))).real)


@dataclass(frozen=True, eq=False)
class LDPTable:
    alphas: np.ndarray
    Lambda: np.ndarray
    skipped: list
    xs: np.ndarray
    rate: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "Lambda"])
            for a, v in zip(self.alphas, self.Lambda):
                w.writerow([f"{a:.17g}", f"{v:.17g}"])
            w.writerow([])
            w.writerow(["x", "rate"])
            for x, v in zip(self.xs, self.rate):
                w.writerow([f"{x:.17g}", f"{v:.17g}"])


class TiltedSpectrum:
    """Leading eigenvalue of ``Phi_alpha = sum_m e^{alpha m} I_m`` and its derivative."""

    def __init__(self, inst: Instrument):
        self.inst = inst
        self.values = np.array(inst.outcomes)
        self.mats = [m.matrix for m in inst.maps]

    def _tilted(self, alpha: float):
        e = np.exp(alpha * (self.values - self.values.mean()))
        return sum(c * m for c, m in zip(e, self.mats)), e

    def leading(self, alpha: float) -> tuple[float, float]:
        """``(Lambda(alpha), Lambda'(alpha))``; raises if the leading eigenvalue is not simple."""
        mat, e = self._tilted(alpha)
        w, vr = np.linalg.eig(mat)
        order = np.argsort(-np.abs(w))
        top = w[order[0]]
        if w.size > 1 and abs(w[order[1]]) > abs(top) * (1 - 1e-9):
            raise NumericalError(f"leading eigenvalue not simple at alpha={alpha}")
        wl, vl = np.linalg.eig(mat.conj().T)
        k = np.argmin(np.abs(wl - np.conj(top)))
        r, l = vr[:, order[0]], vl[:, k]
        dmat = sum(c * (m - self.values.mean()) * mm for c, m, mm in zip(e, self.values, self.mats))
        deriv = (np.conj(l) @ dmat @ r) / (np.conj(l) @ mat @ r)
        shift = alpha * self.values.mean()
        return float(np.log(abs(top)) + shift), float(deriv.real + self.values.mean())

    def Lambda(self, alpha: float) -> float:
        return self.leading(alpha)[0]

    def rate(self, x: float, tol: float = 1e-14) -> float:
        """Legendre transform by bisection on ``Lambda'(alpha) = x``."""
        lo_v, hi_v = self.values.min(), self.values.max()
        if x < lo_v or x > hi_v:
            return np.inf
        if x == lo_v or x == hi_v:
            return self._edge(x)
        lo, hi = -1.0, 1.0
        while self.leading(lo)[1] > x:
            lo *= 2
            if lo < -1e4:
                return np.inf
        while self.leading(hi)[1] < x:
            hi *= 2
            if hi > 1e4:
                return np.inf
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.leading(mid)[1] < x:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        a = 0.5 * (lo + hi)
        return float(a * x - self.Lambda(a))

    def _edge(self, x: float) -> float:
        # alpha x - Lambda(alpha) tends to -log of the spectral radius of I_x
        r = np.abs(np.linalg.eigvals(self.mats[int(np.argmin(np.abs(self.values - x)))])).max()
        return float(-np.log(r)) if r > 0 else np.inf


def ldp(inst: Instrument, alphas: Sequence[float], xs: Sequence[float] = ()) -> LDPTable:
    ts = TiltedSpectrum(inst)
    kept, vals, skipped = [], [], []
    for a in alphas:
        try:
            vals.append(ts.Lambda(a))
            kept.append(a)
        except NumericalError:
            skipped.append(a)
    rate = [ts.rate(x) for x in xs]
    return LDPTable(np.array(kept), np.array(vals), skipped, np.array(xs, dtype=float), np.array(rate))


# spin-spin model


def spin_spin_model(p: float, lam: float, tau: float) -> RIModel:
    """``h_S = h_P = sigma_z``, coupling ``lam (a^* (x) a + a (x) a^*)``, incoming ``diag(p, 1 - p)``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    v = lam * (np.kron(dag(LOWER), LOWER) + np.kron(LOWER, dag(LOWER)))
    return RIModel(h_S=SIGMA_Z, h_E=SIGMA_Z, v=v, tau=tau, rho_E=np.diag([p, 1 - p]).astype(complex))


def spin_spin_explicit(p: float, X: np.ndarray, lam: float, tau: float) -> np.ndarray:
    """Single-step operator for probe observable ``X`` in the basis ``phi_11, phi_12, phi_21, phi_22``."""
    X = np.asarray(X, dtype=complex)
    s, c = np.sin(lam * tau), np.cos(lam * tau)
    a, b = -(s**2), -1j * s * c
    om = p * X[0, 0] + (1 - p) * X[1, 1]
    e = np.exp(2j * tau)
    X11, X12, X21, X22 = X[0, 0], X[0, 1], X[1, 0], X[1, 1]
    q = 1 - p
    corr = np.array(
        [
            [q * X22 * a, q * X21 * b, -q * X12 * b, -q * X11 * a],
            [-p * X12 * e * 1j * s, e * (c - 1) * om, 0, q * X12 * e * 1j * s],
            [p * X21 / e * 1j * s, 0, (c - 1) * om / e, -q * X21 / e * 1j * s],
            [-p * X22 * a, -p * X21 * b, p * X12 * b, p * X11 * a],
        ]
    )
    return om * np.diag([1, e, 1 / e, 1]) + corr


def heisenberg_step_matrix(model: RIModel, X: np.ndarray) -> np.ndarray:
    """``A -> Tr_P[(1 (x) omega_in) e^{i tau H} (A (x) X) e^{-i tau H}]`` on row-major matrix entries."""
    dS, dE = model.dims
    U = model.unitary()
    cols = []
    for j in range(dS):
        for k in range(dS):
            A = np.zeros((dS, dS), dtype=complex)
            A[j, k] = 1.0
            big = dag(U) @ np.kron(A, X) @ U
            img = np.einsum("iajb,ba->ij", big.reshape(dS, dE, dS, dE), model.rho_E)
            cols.append(img.reshape(-1))
    return np.array(cols).T


def spin_direction(theta: float, phi: float = 0.0) -> np.ndarray:
    """``n . sigma`` in the ``sigma_z`` eigenbasis, eigenvalues ``+-1``."""
    return np.array(
        [[np.cos(theta), np.sin(theta) * np.exp(-1j * phi)], [np.sin(theta) * np.exp(1j * phi), -np.cos(theta)]]
    )
