"""Coined quantum walks on Z^d with i.i.d. random coins.

The coin space has basis ``|tau>``, ``tau`` running over ``TAUS(d) = (+1, -1, +2, -2, ...)``.
One step is ``U(C) = sum_tau P_tau C (x) |x + r(tau)><x|``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import substream
from .qops import NumericalError, check_density, dag


def taus(d: int) -> tuple[int, ...]:
    return tuple(s * j for j in range(1, d + 1) for s in (1, -1))


def symmetric_jump(d: int) -> np.ndarray:
    """``r(tau) = sign(tau) e_|tau|``, one row per coin basis vector."""
    r = np.zeros((2 * d, d), dtype=int)
    for k, t in enumerate(taus(d)):
        r[k, abs(t) - 1] = np.sign(t)
    return r


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class WalkSpec:
    d: int
    jump: np.ndarray
    coins: tuple
    probs: np.ndarray
    rho0: np.ndarray

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("only d = 1 and d = 2 are supported")
        jump = np.asarray(self.jump, dtype=int)
        if jump.shape != (2 * self.d, self.d):
            raise ValueError(f"jump must have shape {(2 * self.d, self.d)}")
        if np.any(np.all(jump == 0, axis=1)):
            raise ValueError("r(tau) must be nonzero for every tau")
        coins = tuple(np.asarray(c, dtype=complex) for c in self.coins)
        probs = np.asarray(self.probs, dtype=float)
        if len(coins) != probs.size or len(coins) == 0:
            raise ValueError("need one probability per coin")
        if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("coin probabilities must be non-negative and sum to 1")
        D = 2 * self.d
        for c in coins:
            if c.shape != (D, D) or np.abs(dag(c) @ c - np.eye(D)).max() > 1e-12:
                raise ValueError("coins must be unitary 2d x 2d matrices")
        rho0 = check_density(self.rho0)
        if rho0.shape != (D, D):
            raise ValueError("initial coin state has the wrong dimension")
        object.__setattr__(self, "jump", jump)
        object.__setattr__(self, "coins", coins)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "rho0", rho0)

    @property
    def dim(self) -> int:
        return 2 * self.d

    @property
    def r_bar(self) -> np.ndarray:
        return self.jump.mean(axis=0)

    @property
    def reach(self) -> int:
        return int(np.abs(self.jump).max())

    def d_matrix(self, y: np.ndarray) -> np.ndarray:
        """``d(y) = sum_tau e^{i y . r(tau)} |tau><tau|``."""
        return np.diag(np.exp(1j * self.jump @ np.atleast_1d(y)))

    def transfer(self, y: np.ndarray, yp: np.ndarray) -> np.ndarray:
        """``M(y, y') = (d(y) (x) d(y')) E[C (x) conj C]``, acting on row-major vectorized coin matrices."""
        K = sum(p * np.kron(c, c.conj()) for c, p in zip(self.coins, self.probs))
        return np.kron(self.d_matrix(y), self.d_matrix(yp)) @ K


def amplitudes(spec: WalkSpec, coins: Sequence[np.ndarray]) -> dict[tuple, np.ndarray]:
    """``J_k(n)`` for the coin sequence ``C_1 .. C_n``, keyed by lattice site ``k``."""
    D = spec.dim
    J = {(0,) * spec.d: np.eye(D, dtype=complex)}
    P = [np.diag(np.eye(D)[t]) for t in range(D)]
    for C in coins:
        new: dict[tuple, np.ndarray] = {}
        for k, Jk in J.items():
            CJ = C @ Jk
            for t in range(D):
                key = tuple(np.add(k, spec.jump[t]))
                term = P[t] @ CJ
                new[key] = new[key] + term if key in new else term
        J = new
    return J


def amplitude_unitarity_defect(J: dict[tuple, np.ndarray]) -> float:
    D = next(iter(J.values())).shape[0]
    return float(np.abs(sum(dag(m) @ m for m in J.values()) - np.eye(D)).max())


@dataclass(frozen=True, eq=False)
class Moments:
    """Position moments at step ``n`` of the coin-averaged walk."""

    n: int
    mean: np.ndarray
    second: np.ndarray
    mean_se: np.ndarray | None = None
    second_se: np.ndarray | None = None

    @property
    def covariance(self) -> np.ndarray:
        return self.second - np.outer(self.mean, self.mean)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "i", "j", "value", "stderr"])
            d = self.mean.size
            for i in range(d):
                se = "" if self.mean_se is None else f"{self.mean_se[i]:.17g}"
                w.writerow(["mean", i, "", f"{self.mean[i]:.17g}", se])
            for i, j in itertools.product(range(d), repeat=2):
                se = "" if self.second_se is None else f"{self.second_se[i, j]:.17g}"
                w.writerow(["second", i, j, f"{self.second[i, j]:.17g}", se])


def _window(spec: WalkSpec, n: int) -> int:
    return n * spec.reach


def _step(psi: np.ndarray, C: np.ndarray, spec: WalkSpec) -> np.ndarray:
    """One step on a batch ``psi[b, tau, x_1, .., x_d]``; ``C`` has shape ``(b, D, D)``."""
    out = np.einsum("bst,bt...->bs...", C, psi)
    for t in range(spec.dim):
        out[:, t] = np.roll(out[:, t], tuple(spec.jump[t]), axis=tuple(range(1, spec.d + 1)))
    return out


def mc_moments(spec: WalkSpec, n: int, trials: int, seed: int = 0, chunk: int | None = None) -> Moments:
    """Monte Carlo over coin sequences; each sample is propagated exactly on ``[-n r_max, n r_max]^d``."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    D, d = spec.dim, spec.d
    R = _window(spec, n)
    L = 2 * R + 1
    if chunk is None:
        chunk = max(1, min(trials, 2_000_000 // (D * L**d)))
    w, v = np.linalg.eigh(spec.rho0)
    keep = w > 1e-15
    w, v = w[keep], v[:, keep]
    coins = np.array(spec.coins)
    grid = np.arange(-R, R + 1)
    axes = np.meshgrid(*([grid] * d), indexing="ij")
    s1 = np.zeros(d)
    s2 = np.zeros((d, d))
    q1 = np.zeros(d)
    q2 = np.zeros((d, d))
    done = 0
    for block in itertools.count():
        b = min(chunk, trials - done)
        if b <= 0:
            break
        rng = substream(seed, block)
        draws = rng.choice(len(coins), size=(n, b), p=spec.probs)
        dens = np.zeros((b,) + (L,) * d)
        for wk, vk in zip(w, v.T):
            psi = np.zeros((b, D) + (L,) * d, dtype=complex)
            psi[(slice(None), slice(None)) + (R,) * d] = vk
            for s in range(n):
                psi = _step(psi, coins[draws[s]], spec)
            dens += wk * (np.abs(psi) ** 2).sum(axis=1)
        flat = dens.reshape(b, -1)
        X = np.stack([a.reshape(-1) for a in axes], axis=1).astype(float)
        m1 = flat @ X
        m2 = np.einsum("bk,ki,kj->bij", flat, X, X)
        s1 += m1.sum(0)
        s2 += m2.sum(0)
        q1 += (m1**2).sum(0)
        q2 += (m2**2).sum(0)
        done += b
    mean = s1 / trials
    second = s2 / trials
    if trials > 1:
        mse = np.sqrt(np.maximum(q1 / trials - mean**2, 0) / (trials - 1))
        sse = np.sqrt(np.maximum(q2 / trials - second**2, 0) / (trials - 1))
    else:
        mse, sse = np.full(d, np.inf), np.full((d, d), np.inf)
    return Moments(n, mean, second, mse, sse)


def characteristic(spec: WalkSpec, n: int, ys: np.ndarray) -> np.ndarray:
    """Averaged characteristic function ``Phi_n(y)`` for each row of ``ys``.

    The integrand over ``v`` is a trigonometric polynomial of degree at most
    ``2 n r_max``, so a uniform grid with one more node integrates it exactly.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    D, d = spec.dim, spec.d
    N = 2 * n * spec.reach + 1
    nodes = 2 * np.pi * np.arange(N) / N
    vs = np.array(list(itertools.product(nodes, repeat=d)))
    K = sum(p * np.kron(c, c.conj()) for c, p in zip(spec.coins, spec.probs))
    start = spec.rho0.reshape(-1)
    trace = np.eye(D).reshape(-1)
    out = np.empty(len(ys), dtype=complex)
    phase_b = np.exp(-1j * vs @ spec.jump.T)
    for k, y in enumerate(ys):
        phase_a = np.exp(1j * (vs + y) @ spec.jump.T)
        diag = (phase_a[:, :, None] * phase_b[:, None, :]).reshape(len(vs), D * D)
        x = np.broadcast_to(start, (len(vs), D * D)).copy()
        for _ in range(n):
            x = diag * (x @ K.T)
        out[k] = (x @ trace).mean()
    return out


def transfer_moments(spec: WalkSpec, n: int, h: float | None = None, tol: float = 1e-6) -> Moments:
    """Exact moments from ``Phi_n`` by central differences in ``y`` with one Richardson level."""
    d = spec.d
    if h is None:
        h = 0.01 / max(n, 1)
    e = np.eye(d)

    def derivs(step):
        pts = [np.zeros(d)]
        for i in range(d):
            pts += [step * e[i], -step * e[i]]
        for i, j in itertools.combinations(range(d), 2):
            pts += [step * (e[i] + e[j]), step * (e[i] - e[j]), step * (-e[i] + e[j]), -step * (e[i] + e[j])]
        vals = characteristic(spec, n, np.array(pts))
        f0 = vals[0]
        g = np.empty(d, dtype=complex)
        H = np.empty((d, d), dtype=complex)
        for i in range(d):
            fp, fm = vals[1 + 2 * i], vals[2 + 2 * i]
            g[i] = (fp - fm) / (2 * step)
            H[i, i] = (fp + fm - 2 * f0) / step**2
        base = 1 + 2 * d
        for k, (i, j) in enumerate(itertools.combinations(range(d), 2)):
            a, b, c, dd = vals[base + 4 * k : base + 4 * k + 4]
            H[i, j] = H[j, i] = (a - b - c + dd) / (4 * step**2)
        return g, H

    g1, H1 = derivs(h)
    g2, H2 = derivs(h / 2)
    g = (4 * g2 - g1) / 3
    H = (4 * H2 - H1) / 3
    mean = (-1j * g).real
    second = (-H).real
    scale = max(1.0, float(n) ** 2)
    gap = max(np.abs(g - g2).max(), np.abs(H - H2).max())
    if gap > tol * scale:
        raise NumericalError(f"finite-difference step too large: Richardson disagreement {gap:.3e}")
    return Moments(n, mean, second)


def step_unitary(spec: WalkSpec, C: np.ndarray, n: int) -> np.ndarray:
    """Dense ``U(C)`` on coin (x) window ``[-n r_max, n r_max]^d``; exact for ``n`` steps from the origin."""
    R = _window(spec, n)
    L = 2 * R + 1
    S = np.zeros((spec.dim * L**spec.d,) * 2)
    sites = list(itertools.product(range(L), repeat=spec.d))
    index = {x: k for k, x in enumerate(sites)}
    for t in range(spec.dim):
        for x in sites:
            y = tuple(np.add(x, spec.jump[t]))
            if y in index:
                S[t * L**spec.d + index[y], t * L**spec.d + index[x]] = 1.0
    return S @ np.kron(C, np.eye(L**spec.d))


def averaged_density_moments(spec: WalkSpec, n: int) -> Moments:
    """Exact moments from the coin-averaged density matrix evolved in position space."""
    D, d = spec.dim, spec.d
    R = _window(spec, n)
    L = 2 * R + 1
    origin = np.zeros(L**d)
    origin[np.ravel_multi_index((R,) * d, (L,) * d)] = 1.0
    rho = np.kron(spec.rho0, np.outer(origin, origin))
    Us = [step_unitary(spec, C, n) for C in spec.coins]
    for _ in range(n):
        rho = sum(p * U @ rho @ dag(U) for U, p in zip(Us, spec.probs))
    pos = np.einsum("tktk->k", rho.reshape(D, L**d, D, L**d)).real
    grid = np.arange(-R, R + 1)
    X = np.stack([a.reshape(-1) for a in np.meshgrid(*([grid] * d), indexing="ij")], axis=1).astype(float)
    return Moments(n, pos @ X, np.einsum("k,ki,kj->ij", pos, X, X))


def spectral_condition(spec: WalkSpec, vs: np.ndarray, tol: float = 1e-9) -> bool:
    """Peripheral spectrum of ``M(v, -v)`` is the simple eigenvalue 1 at every sampled ``v``."""
    for v in np.atleast_2d(vs):
        w = np.linalg.eigvals(spec.transfer(v, -v))
        peri = w[np.abs(w) > 1 - tol]
        if peri.size != 1 or abs(peri[0] - 1) > tol:
            return False
    return True


@dataclass(frozen=True)
class TransportClass:
    ns: tuple
    var_over_n: tuple
    var_over_n2: tuple
    kind: str


def classify_transport(spec: WalkSpec, ns: Sequence[int] = (40, 80, 160)) -> TransportClass:
    """Ballistic if ``tr Cov / n`` keeps doubling with ``n``, diffusive if it settles."""
    vars_ = [float(np.trace(transfer_moments(spec, n).covariance)) for n in ns]
    v1 = tuple(v / n for v, n in zip(vars_, ns))
    v2 = tuple(v / n**2 for v, n in zip(vars_, ns))
    growth = v1[-1] / v1[-2]
    kind = "ballistic" if growth > 1.5 else "diffusive"
    return TransportClass(tuple(ns), v1, v2, kind)


def random_phase_coins(base: np.ndarray, phases: Sequence[float]) -> tuple:
    """``diag(e^{i phi}, 1, ..) base`` for each phase: a simple finite law of coins."""
    D = base.shape[0]
    out = []
    for ph in phases:
        g = np.eye(D, dtype=complex)
        g[0, 0] = np.exp(1j * ph)
        out.append(g @ base)
    return tuple(out)
