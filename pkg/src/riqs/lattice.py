"""Electron on a lattice in a static field, kicked by repeated atom interactions.

The diagonal dynamics in the Wannier-Stark basis is a trinomial random walk
on the ladder index; everything here is exact for that walk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp
from scipy.stats import norm

from .dynamics import substream


@dataclass(frozen=True)
class LatticeParams:
    E: float
    F: float
    lam: float
    tau: float
    beta: float

    def __post_init__(self):
        if not self.F > 0:
            raise ValueError("F must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def omega0(self) -> float:
        return float(np.hypot(self.E - self.F, 2 * self.lam))

    @property
    def p(self) -> float:
        w = self.omega0
        if w == 0:
            return 0.0
        return float(4 * self.lam**2 / w**2 * np.sin(w * self.tau / 2) ** 2)

    @property
    def t(self) -> float:
        """``tanh(beta E / 2)``."""
        return float(np.tanh(self.beta * self.E / 2))


def transition_probs(p: LatticeParams) -> tuple[float, float, float]:
    """``(p_-, p_0, p_+)``."""
    q = p.p
    if np.isinf(p.beta):
        up = 1.0 if p.beta > 0 else 0.0
    else:
        up = 1.0 / (1.0 + np.exp(-p.beta * p.E))
    return q * (1 - up), 1 - q, q * up


@dataclass(frozen=True, eq=False)
class WalkDistribution:
    offsets: np.ndarray
    log_probs: np.ndarray
    n: int

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def mean(self) -> float:
        return float(np.sum(self.offsets * self.probs))

    def variance(self) -> float:
        m = self.mean()
        return float(np.sum((self.offsets - m) ** 2 * self.probs))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def log_tail(self, threshold: float) -> float:
        """``log P(k >= threshold)``."""
        sel = self.offsets >= threshold - 1e-12
        if not np.any(sel):
            return -np.inf
        return float(logsumexp(self.log_probs[sel]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["offset", "probability", "log_probability"])
            for k, lp in zip(self.offsets, self.log_probs):
                w.writerow([int(k), f"{np.exp(lp):.17g}", f"{lp:.17g}"])


def exact_distribution(p: LatticeParams, n: int) -> WalkDistribution:
    """n-fold convolution of the trinomial step, in log space."""
    if n < 0:
        raise ValueError("n must be non-negative")
    with np.errstate(divide="ignore"):
        lm, l0, lp = np.log(transition_probs(p))
    logp = np.array([0.0])
    for _ in range(n):
        new = np.full(logp.size + 2, -np.inf)
        new[:-2] = np.logaddexp(new[:-2], logp + lm)
        new[1:-1] = np.logaddexp(new[1:-1], logp + l0)
        new[2:] = np.logaddexp(new[2:], logp + lp)
        logp = new
    return WalkDistribution(np.arange(-n, n + 1), logp, n)


@dataclass(frozen=True)
class Transport:
    v_d: float
    D: float
    mobility: float


def transport(p: LatticeParams) -> Transport:
    """Drift, diffusion constant and the ``E = F`` mobility ``beta sin^2(lam tau) / (2 tau)``."""
    v = p.p / p.tau * p.t
    D = p.p / (2 * p.tau) * (1 - p.p * p.t**2)
    mu = p.beta * np.sin(p.lam * p.tau) ** 2 / (2 * p.tau)
    return Transport(float(v), float(D), float(mu))


@dataclass(frozen=True)
class EinsteinCheck:
    D_limit: float
    mobility_limit: float
    mu_over_beta: float
    richardson_gap: float


def einstein_limit(lam: float, tau: float, beta: float, F0: float = 0.02) -> EinsteinCheck:
    """Extrapolate ``D`` and ``v_d / F`` to ``F -> 0`` along ``E = F`` (both are even in ``F``)."""

    def at(F):
        tr = transport(LatticeParams(E=F, F=F, lam=lam, tau=tau, beta=beta))
        return tr.D, tr.v_d / F

    d1, m1 = at(F0)
    d2, m2 = at(F0 / 2)
    d4, m4 = at(F0 / 4)
    # two Richardson levels for an even expansion in F
    D_r1, D_r2 = (4 * d2 - d1) / 3, (4 * d4 - d2) / 3
    M_r1, M_r2 = (4 * m2 - m1) / 3, (4 * m4 - m2) / 3
    D_lim = (16 * D_r2 - D_r1) / 15
    M_lim = (16 * M_r2 - M_r1) / 15
    mu = beta * np.sin(lam * tau) ** 2 / (2 * tau)
    return EinsteinCheck(float(D_lim), float(M_lim), float(mu / beta), float(abs(D_lim - D_r2)))


def log_mgf(p: LatticeParams) -> Callable[[np.ndarray], np.ndarray]:
    """``e(alpha) = log((1 - p) + p cosh(beta E/2 + alpha) / cosh(beta E/2))``."""
    pm, p0, pp = transition_probs(p)

    def e(alpha):
        alpha = np.asarray(alpha, dtype=float)
        # same function written as log(p_- e^{-alpha} + p_0 + p_+ e^{alpha}) for stability
        terms = [np.log(pm) - alpha if pm > 0 else np.full_like(alpha, -np.inf)]
        terms.append(np.full_like(alpha, np.log(p0)) if p0 > 0 else np.full_like(alpha, -np.inf))
        terms.append(np.log(pp) + alpha if pp > 0 else np.full_like(alpha, -np.inf))
        return np.logaddexp(np.logaddexp(terms[0], terms[1]), terms[2])

    return e


def _e_prime(p: LatticeParams, alpha: float) -> float:
    pm, p0, pp = transition_probs(p)
    num = pp * np.exp(alpha) - pm * np.exp(-alpha)
    return num / (pm * np.exp(-alpha) + p0 + pp * np.exp(alpha))


def rate_legendre(p: LatticeParams, x: float) -> float:
    """``sup_alpha (alpha x - e(alpha))`` by solving ``e'(alpha) = x``."""
    pm, p0, pp = transition_probs(p)
    if abs(x) > 1:
        return np.inf
    if x == 1:
        return -np.log(pp) if pp > 0 else np.inf
    if x == -1:
        return -np.log(pm) if pm > 0 else np.inf
    if (x < 0 and pm == 0) or (x > 0 and pp == 0):
        return np.inf
    if pm == 0 and x == 0 or pp == 0 and x == 0:
        return -np.log(p0) if p0 > 0 else np.inf
    e = log_mgf(p)
    lo, hi = -1.0, 1.0
    while _e_prime(p, lo) > x:
        lo *= 2
    while _e_prime(p, hi) < x:
        hi *= 2
    a = brentq(lambda t: _e_prime(p, t) - x, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return float(a * x - e(a))


def _closed_form(p: LatticeParams, x: float, shift: int) -> float:
    bE = p.beta * p.E
    q = p.p
    a = q / ((1 - q) * np.cosh(bE / 2))
    R = np.sqrt(x**2 + a**2 * (1 - x**2))
    # R - x written cancellation-free for x > 0
    r_minus = (R - x) if x <= 0 else a**2 * (1 - x**2) / (R + x)
    return float(-x * (bE / 2 + np.log(r_minus / (a * (1 + shift * x)))) - np.log((1 - q) * (R + 1) / (1 - x**2)))


def rate_closed_form(p: LatticeParams, x: float) -> float:
    """Explicit rate function; ``x = +-1`` and ``p in {0, 1}`` fall back to the Legendre branch.

    The stationarity condition ``e'(alpha) = x`` gives
    ``alpha* = log(a (1 + x) / (R - x)) - beta E / 2``.
    """
    if abs(x) > 1:
        return np.inf
    if p.p >= 1 or p.p <= 0 or abs(x) == 1 or np.isinf(p.beta):
        return rate_legendre(p, x)
    return _closed_form(p, x, +1)


def rate_closed_form_literal(p: LatticeParams, x: float) -> float:
    """The published display, with ``a (1 - x)`` inside the first logarithm. Kept for comparison."""
    if abs(x) >= 1:
        return rate_legendre(p, x)
    return _closed_form(p, x, -1)


def rate_function(p: LatticeParams) -> tuple[Callable, Callable[[float], float]]:
    return log_mgf(p), lambda x: rate_closed_form(p, x)


@dataclass(frozen=True, eq=False)
class WalkSample:
    offsets: np.ndarray
    counts: np.ndarray
    ks_distance: float
    trials: int


def simulate_walk(p: LatticeParams, n: int, trials: int, seed: int = 0) -> WalkSample:
    """i.i.d. trinomial paths; reports the Kolmogorov-Smirnov distance to the exact law."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = substream(seed, 0)
    counts = rng.multinomial(n, transition_probs(p), size=trials)
    k = counts[:, 2] - counts[:, 0]
    hist = np.bincount(k + n, minlength=2 * n + 1)
    exact = exact_distribution(p, n)
    ks = float(np.abs(np.cumsum(hist) / trials - exact.cdf()).max())
    return WalkSample(np.arange(-n, n + 1), hist, ks, trials)


def clt_distance(dist: WalkDistribution) -> float:
    """Sup distance between the standardized CDF (both one-sided limits) and the normal CDF."""
    m, s = dist.mean(), np.sqrt(dist.variance())
    z = (dist.offsets - m) / s
    cdf = dist.cdf()
    left = np.concatenate([[0.0], cdf[:-1]])
    phi = norm.cdf(z)
    return float(max(np.abs(cdf - phi).max(), np.abs(left - phi).max()))
