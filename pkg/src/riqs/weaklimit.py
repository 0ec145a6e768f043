"""Weak-coupling and singular-coupling limits for a chain of (n+1)-level probes.

Probe basis is ``|0>, |1>, ..., |n>`` with energies ``0, delta_1, ..., delta_n``;
``a_i = |0><i|``.  The coupling is ``W = sum_i V_i^* (x) a_i + V_i (x) a_i^*``
and the block interaction is ``h_S + h_E + lam W``.  All superoperators here act
on system observables (Heisenberg picture).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .qops import Superoperator, dag, eigh_checked, gibbs, propagator
from .rdm import RIModel, build_rdm
from .spectral import fit_log_slope, sharp


@dataclass(frozen=True, eq=False)
class ChainCoupling:
    h_S: np.ndarray
    deltas: Sequence[float]
    Vs: Sequence[np.ndarray]
    beta: float
    tau: float
    lam: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h_S, dtype=complex)
        Vs = tuple(np.asarray(v, dtype=complex) for v in self.Vs)
        deltas = tuple(float(x) for x in self.deltas)
        if not Vs or len(Vs) != len(deltas):
            raise ValueError("need n >= 1 coupling operators, one per probe level")
        if any(v.shape != h.shape for v in Vs):
            raise ValueError("coupling operators must act on the system")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "h_S", h)
        object.__setattr__(self, "Vs", Vs)
        object.__setattr__(self, "deltas", deltas)

    @property
    def n(self) -> int:
        return len(self.Vs)

    @property
    def d(self) -> int:
        return self.h_S.shape[0]

    @property
    def levels(self) -> np.ndarray:
        return np.array((0.0,) + self.deltas)

    @property
    def weights(self) -> np.ndarray:
        """``exp(-beta delta_m)`` for ``m = 0..n``; at ``beta = inf`` only the ground level."""
        if np.isinf(self.beta):
            w = (self.levels == self.levels.min()).astype(float) if self.beta > 0 else None
            if w is None:
                raise ValueError("beta = -inf is not supported")
            return w
        return np.exp(-self.beta * self.levels)

    @property
    def Z(self) -> float:
        return float(self.weights.sum())

    def h_E(self) -> np.ndarray:
        return np.diag(self.levels).astype(complex)

    def W(self) -> np.ndarray:
        m = self.n + 1
        out = np.zeros((self.d * m, self.d * m), dtype=complex)
        for i, V in enumerate(self.Vs, start=1):
            a = np.zeros((m, m))
            a[0, i] = 1.0
            out += np.kron(dag(V), a) + np.kron(V, a.T)
        return out

    def H0(self) -> np.ndarray:
        m = self.n + 1
        return np.kron(self.h_S, np.eye(m)) + np.kron(np.eye(self.d), self.h_E())

    def with_(self, **kw) -> "ChainCoupling":
        args = dict(h_S=self.h_S, deltas=self.deltas, Vs=self.Vs, beta=self.beta, tau=self.tau, lam=self.lam)
        args.update(kw)
        return ChainCoupling(**args)

    def to_model(self) -> RIModel:
        rho_E = np.diag(self.weights / self.Z).astype(complex)
        if not np.isinf(self.beta):
            rho_E = gibbs(self.h_E(), self.beta)
        return RIModel(h_S=self.h_S, h_E=self.h_E(), v=self.lam * self.W(), tau=self.tau, rho_E=rho_E)


def _blocks(x: np.ndarray, d: int, m: int) -> np.ndarray:
    """``out[l, k] = <l| x |k>`` as a ``d x d`` system block (probe index outer)."""
    return x.reshape(d, m, d, m).transpose(1, 3, 0, 2)


def heisenberg_transfer(c: ChainCoupling, lam: float | None = None, tau: float | None = None) -> Superoperator:
    """``U_beta(lam, tau) = Z^{-1} sum_{l,m} e^{-beta delta_m} U_{l,m}^* . U_{l,m}``."""
    lam = c.lam if lam is None else lam
    tau = c.tau if tau is None else tau
    m = c.n + 1
    U = _blocks(propagator(c.H0() + lam * c.W(), tau), c.d, m)
    w = c.weights / c.Z
    mat = np.zeros((c.d**2, c.d**2), dtype=complex)
    for col in range(m):
        if w[col] == 0:
            continue
        for row in range(m):
            blk = U[row, col]
            mat += w[col] * Superoperator.sandwich(dag(blk), blk).matrix
    return Superoperator(mat)


def free_heisenberg(h: np.ndarray, t: float) -> Superoperator:
    """``B -> e^{i t h} B e^{-i t h}``."""
    return Superoperator.conjugation(propagator(h, -t))


# divided differences of g(x) = exp(-i tau x)

def _dd1(x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    mid, half = (x + y) / 2, (x - y) / 2
    return -1j * tau * np.exp(-1j * tau * mid) * np.sinc(tau * half / np.pi)


def _hom(k: int, a: float, b: float, c: float) -> float:
    """Complete homogeneous symmetric polynomial of degree k in (a, b, c)."""
    return sum(a**i * b**j * c ** (k - i - j) for i in range(k + 1) for j in range(k + 1 - i))


def _dd2(x: float, y: float, z: float, tau: float) -> complex:
    lo, mid, hi = sorted((x, y, z))
    if tau * (hi - lo) > 1e-2:
        return complex((_dd1(np.array(lo), np.array(mid), tau) - _dd1(np.array(mid), np.array(hi), tau)) / (lo - hi))
    c = (lo + mid + hi) / 3
    a, b, e = lo - c, mid - c, hi - c
    s = sum((-1j * tau) ** k / factorial(k) * _hom(k - 2, a, b, e) for k in range(2, 16))
    return complex(np.exp(-1j * tau * c) * s)


def dyson_terms(H0: np.ndarray, W: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second order Dyson terms ``F(tau), G(tau)`` of ``exp(-i tau (H0 + lam W))``.

    Entries in the eigenbasis of ``H0`` are ``W_ab g[e_a, e_b]`` and
    ``sum_b W_ab W_bc g[e_a, e_b, e_c]`` with ``g(x) = exp(-i tau x)``.
    """
    e, u = eigh_checked(H0)
    wt = dag(u) @ W @ u
    F = wt * _dd1(e[:, None], e[None, :], tau)
    D = len(e)
    dd = np.empty((D, D, D), dtype=complex)
    for a in range(D):
        for b in range(D):
            for cc in range(D):
                dd[a, b, cc] = _dd2(e[a], e[b], e[cc], tau)
    G = np.einsum("ab,bc,abc->ac", wt, wt, dd)
    return u @ F @ dag(u), u @ G @ dag(u)


@dataclass(frozen=True, eq=False)
class SecondOrder:
    F: np.ndarray
    G: np.ndarray
    F_minus: np.ndarray
    G_minus: np.ndarray
    T_beta: Superoperator
    U00: Superoperator
    Z: float


def second_order_terms(c: ChainCoupling, tau: float | None = None) -> SecondOrder:
    """``U_beta(lam, tau) = U00(0) + lam^2 T_beta / Z + O(lam^4 tau^4)``."""
    tau = c.tau if tau is None else tau
    m, d = c.n + 1, c.d
    H0, W = c.H0(), c.W()
    P = np.kron(np.eye(d), np.diag([1.0] + [0.0] * c.n))
    if np.linalg.norm(P @ W @ P) > 1e-12:
        raise ValueError("coupling is not off-diagonal with respect to the probe ground state")
    F, G = dyson_terms(H0, W, tau)
    Fm, Gm = dyson_terms(H0, W, -tau)
    Fb, Gb, Fmb, Gmb = (_blocks(x, d, m) for x in (F, G, Fm, Gm))
    w = c.weights
    T = np.zeros((d * d, d * d), dtype=complex)

    def sand(a, b):
        return Superoperator.sandwich(a, b).matrix

    for k in range(m):
        Hk = c.h_S + c.levels[k] * np.eye(d)
        second = sand(Gmb[k, k], propagator(Hk, tau)) + sand(propagator(Hk, -tau), Gb[k, k])
        T += w[k] * second
        if k == 0:
            continue
        T += w[k] * sand(Fmb[k, 0], Fb[0, k])
        T += w[0] * sand(Fmb[0, k], Fb[k, 0])
    return SecondOrder(F, G, Fm, Gm, Superoperator(T), free_heisenberg(c.h_S, tau), c.Z)


def second_order_residuals(c: ChainCoupling, lams: Sequence[float]) -> np.ndarray:
    so = second_order_terms(c)
    out = []
    for lam in lams:
        full = heisenberg_transfer(c, lam=lam)
        approx = so.U00.matrix + lam**2 * so.T_beta.matrix / so.Z
        out.append(np.linalg.norm(full.matrix - approx, 2))
    return np.array(out)


def gamma_weak(c: ChainCoupling, tol_cluster: float | None = None) -> Superoperator:
    """``Gamma^w = Z^{-1} (U00(0)^{-1} T_beta)^#``."""
    so = second_order_terms(c)
    k = free_heisenberg(c.h_S, -c.tau) @ so.T_beta
    return sharp(k, c.h_S, c.tau, tol_cluster) * (1.0 / so.Z)


def gamma_beta(c: ChainCoupling) -> Superoperator:
    """Dissipator written with the coupling operators directly."""
    d = c.d
    eye = np.eye(d)
    w = c.weights
    total = np.zeros((d * d, d * d), dtype=complex)
    for k, V in enumerate(c.Vs, start=1):
        Vd = dag(V)
        up = Superoperator.sandwich(V, Vd).matrix - 0.5 * (
            Superoperator.sandwich(V @ Vd, eye).matrix + Superoperator.sandwich(eye, V @ Vd).matrix
        )
        down = Superoperator.sandwich(Vd, V).matrix - 0.5 * (
            Superoperator.sandwich(Vd @ V, eye).matrix + Superoperator.sandwich(eye, Vd @ V).matrix
        )
        total += w[k] * up + w[0] * down
    return Superoperator(total / c.Z)


def lindblad_operators(c: ChainCoupling) -> list[np.ndarray]:
    w, Z = c.weights, c.Z
    ups = [np.sqrt(w[k] / Z) * V for k, V in enumerate(c.Vs, start=1)]
    downs = [np.sqrt(w[0] / Z) * dag(V) for V in c.Vs]
    return ups + downs


def lindblad_dissipator(ops: Sequence[np.ndarray]) -> Superoperator:
    """``B -> sum_j L_j B L_j^* - (L_j L_j^* B + B L_j L_j^*) / 2``."""
    d = ops[0].shape[0]
    eye = np.eye(d)
    mat = np.zeros((d * d, d * d), dtype=complex)
    for L in ops:
        LL = L @ dag(L)
        mat += Superoperator.sandwich(L, dag(L)).matrix
        mat -= 0.5 * (Superoperator.sandwich(LL, eye).matrix + Superoperator.sandwich(eye, LL).matrix)
    return Superoperator(mat)


def lindbladian(c: ChainCoupling) -> Superoperator:
    """``i[h_S, .] + Gamma_beta`` from the Lindblad operators."""
    return Superoperator.commutator(c.h_S) * 1j + lindblad_dissipator(lindblad_operators(c))


@dataclass(frozen=True)
class Generators:
    gamma_weak: Superoperator
    gamma_beta: Superoperator
    lindbladian: Superoperator


def generators(c: ChainCoupling, tol_cluster: float | None = None) -> Generators:
    return Generators(gamma_weak(c, tol_cluster), gamma_beta(c), lindbladian(c))


def gamma_beta_from_expansion(c: ChainCoupling, tau: float) -> Superoperator:
    """``Z^{-1} tau^{-2} U00(0)^{-1} T_beta(tau)``; tends to ``Gamma_beta`` as ``tau -> 0``."""
    so = second_order_terms(c, tau=tau)
    k = free_heisenberg(c.h_S, -tau) @ so.T_beta
    return k * (1.0 / (so.Z * tau**2))


@dataclass(frozen=True)
class WeakCoupling:
    lams: Sequence[float]
    t: float


@dataclass(frozen=True)
class Critical:
    taus: Sequence[float]
    t: float = 1.0


@dataclass(frozen=True, eq=False)
class ScalingTable:
    regime: str
    params: np.ndarray
    steps: np.ndarray
    rounding: np.ndarray
    errors: np.ndarray
    theoretical_order: float
    fitted_order: float = field(default=np.nan)

    @property
    def ratios(self) -> np.ndarray:
        return self.errors[:-1] / self.errors[1:]

    @property
    def ok(self) -> bool:
        decreasing = bool(np.all(np.diff(self.errors) < 0))
        return decreasing and self.fitted_order >= 0.8 * self.theoretical_order

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "steps", "rounding", "error", "fitted_order"])
            for p, k, r, e in zip(self.params, self.steps, self.rounding, self.errors):
                w.writerow([f"{p:.17g}", int(k), f"{r:.17g}", f"{e:.17g}", f"{self.fitted_order:.6g}"])


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def scaling_study(c: ChainCoupling, regime: WeakCoupling | Critical) -> ScalingTable:
    """Distance to the limiting semigroup along a parameter sweep.

    Weak coupling compares ``U00(0)^{-k} U_beta(lam, tau)^k`` with
    ``exp(k lam^2 Gamma^w)`` for ``k = round(t / lam^2)``; ``rounding`` records
    ``|t - k lam^2|``.  The critical regime compares the difference quotient
    ``(U_beta(tau^{-1/2}, tau) - Id) / tau`` with ``i[h_S, .] + Gamma_beta``.
    """
    d2 = c.d**2
    if isinstance(regime, WeakCoupling):
        gw = gamma_weak(c).matrix
        params = np.asarray(regime.lams, dtype=float)
        steps, rounding, errs = [], [], []
        for lam in params:
            if lam == 0:
                steps.append(0)
                rounding.append(0.0)
                errs.append(_opnorm(np.eye(d2) - expm(0 * gw)))
                continue
            k = int(round(regime.t / lam**2))
            t_eff = k * lam**2
            u = np.linalg.matrix_power(heisenberg_transfer(c, lam=lam).matrix, k)
            back = free_heisenberg(c.h_S, -k * c.tau).matrix
            errs.append(_opnorm(back @ u - expm(t_eff * gw)))
            steps.append(k)
            rounding.append(abs(regime.t - t_eff))
        order = 2.0
        label = "weak"
    else:
        target = lindbladian(c).matrix
        params = np.asarray(regime.taus, dtype=float)
        errs, steps, rounding = [], [], []
        for tau in params:
            u = heisenberg_transfer(c, lam=1 / np.sqrt(tau), tau=tau).matrix
            errs.append(_opnorm((u - np.eye(d2)) / tau - target))
            steps.append(int(round(regime.t / tau)))
            rounding.append(abs(regime.t / tau - round(regime.t / tau)))
        order = 1.0
        label = "critical"
    errs = np.array(errs)
    sel = (params > 0) & (errs > 0)
    fitted = fit_log_slope(np.log(params[sel]), errs[sel]) if sel.sum() >= 2 else np.nan
    return ScalingTable(label, params, np.array(steps), np.array(rounding), errs, order, float(fitted))


def chernoff_power(c: ChainCoupling, tau: float, t: float) -> Superoperator:
    """``U_beta(tau^{-1/2}, tau)^{t/tau}`` with ``t/tau`` rounded."""
    k = int(round(t / tau))
    return heisenberg_transfer(c, lam=1 / np.sqrt(tau), tau=tau).power(k)


def semigroup(gen: Superoperator, t: float) -> Superoperator:
    return Superoperator(expm(t * gen.matrix))


def rdm_dual(c: ChainCoupling) -> Superoperator:
    return build_rdm(c.to_model()).superop.dual()
