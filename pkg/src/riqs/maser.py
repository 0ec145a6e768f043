"""One-atom maser: Jaynes-Cummings probes on a truncated cavity.

The cavity lives on ``{0, ..., n_trunc}``; the creation operator is truncated
(``a^* |n_trunc> = 0``).  The closed-form channel is then exactly trace
preserving on states supported below ``n_trunc`` and leaks only through the
top level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .qops import NumericalError, Superoperator, dag, gibbs, hermitize, trace_norm
from .rdm import ReducedMap, RIModel, build_rdm
from .spectral import analyze


def annihilation(n_trunc: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_trunc + 1, dtype=float)), 1).astype(complex)


ATOM_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)


@dataclass(frozen=True)
class MaserParams:
    E: float
    E0: float
    lam: float
    tau: float
    beta: float
    n_trunc: int

    def __post_init__(self):
        if self.n_trunc < 2:
            raise ValueError("n_trunc must be at least 2")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def delta(self) -> float:
        return self.E - self.E0

    @property
    def eta(self) -> float:
        return (self.delta * self.tau / (2 * np.pi)) ** 2

    @property
    def xi(self) -> float:
        return (self.lam * self.tau / (2 * np.pi)) ** 2

    @property
    def Z(self) -> float:
        return 1.0 + np.exp(-self.beta * self.E0)

    @property
    def beta_star(self) -> float:
        return self.beta * self.E0 / self.E

    @classmethod
    def from_eta_xi(cls, eta, xi, E: float, beta: float, n_trunc: int, tau: float = 1.0, detuning_sign: int = 1):
        """Parameters realizing given ``(eta, xi)`` at interaction time ``tau``."""
        delta = detuning_sign * 2 * np.pi * math.sqrt(float(eta)) / tau
        lam = 2 * np.pi * math.sqrt(float(xi)) / tau
        return cls(E=E, E0=E - delta, lam=lam, tau=tau, beta=beta, n_trunc=n_trunc)

    def to_dict(self) -> dict:
        return dict(E=self.E, E0=self.E0, lam=self.lam, tau=self.tau, beta=self.beta, n_trunc=self.n_trunc)


# --- Rabi resonances ----------------------------------------------------------


def _exact(x) -> Fraction | None:
    if isinstance(x, (Rational, Fraction)):
        return Fraction(x)
    return None


def _is_square_exact(q: Fraction) -> bool:
    if q < 0 or q.denominator != 1:
        return False
    r = math.isqrt(q.numerator)
    return r * r == q.numerator


def _is_square_float(x: float, tol: float) -> bool:
    if x < 0:
        return False
    k = round(math.sqrt(x))
    return k >= 1 and abs(x - k * k) < tol


@dataclass(frozen=True)
class RabiStructure:
    resonances: tuple
    sectors: tuple  # tuples (start, stop) with stop exclusive
    closed: tuple  # whether each sector ends at a genuine resonance
    classification: str  # "NonResonant" | "SimplyResonant" | "FullyResonant"
    degenerate: bool
    approximate: bool
    n_max: int

    def projector(self, k: int) -> np.ndarray:
        start, stop = self.sectors[k]
        p = np.zeros(self.n_max + 1)
        p[start:stop] = 1.0
        return np.diag(p).astype(complex)

    def sector_of(self, n: int) -> int:
        for k, (a, b) in enumerate(self.sectors):
            if a <= n < b:
                return k
        raise ValueError(f"level {n} outside the truncated range")

    def to_json(self) -> str:
        return json.dumps(
            {
                "resonances": list(self.resonances),
                "sectors": [list(s) for s in self.sectors],
                "closed": list(self.closed),
                "classification": self.classification,
                "degenerate": self.degenerate,
                "approximate": self.approximate,
            }
        )


def rabi_resonances(eta, xi, n_max: int, tol: float = 1e-9) -> RabiStructure:
    """Resonances ``n`` in ``[1, n_max]`` with ``xi n + eta`` a perfect square.

    Exact arithmetic is used when both ``eta`` and ``xi`` are rational
    (``int`` or ``Fraction``); otherwise a float test with ``tol`` is used and
    the result is flagged approximate.
    """
    ex, ee = _exact(xi), _exact(eta)
    approximate = ex is None or ee is None
    if (ex if not approximate else float(xi)) <= 0:
        raise ValueError("xi must be positive")
    if approximate:
        res = [n for n in range(1, n_max + 2) if _is_square_float(float(xi) * n + float(eta), tol)]
    else:
        res = [n for n in range(1, n_max + 2) if _is_square_exact(ex * n + ee)]
    # one level beyond the range decides whether the last sector is closed
    beyond = n_max + 1 in res
    res = [n for n in res if n <= n_max]
    bounds = [0] + res + [n_max + 1]
    sectors = tuple((bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1))
    closed = tuple([True] * (len(sectors) - 1) + [beyond])
    if not res:
        cls = "NonResonant"
    elif len(res) == 1:
        cls = "SimplyResonant"
    else:
        cls = "FullyResonant"
    rs = set(res)
    starts = [n for n in [0] + res if n + 1 in rs]
    degenerate = any(m in rs and m > n for n in starts for m in starts)
    return RabiStructure(tuple(res), sectors, closed, cls, degenerate, approximate, n_max)


def pairs_set(structure: RabiStructure) -> list[int]:
    """``N(eta, xi)``: members ``n`` of ``{0} u R`` with ``n + 1`` in ``R``."""
    rs = set(structure.resonances)
    return [n for n in [0] + list(structure.resonances) if n + 1 in rs]


def degeneracy_differences(structure: RabiStructure) -> list[int]:
    ns = pairs_set(structure)
    return sorted({n - m for n in ns for m in ns if n != m})


# --- channel ------------------------------------------------------------------


def _rabi_angles(p: MaserParams, ns: np.ndarray, exact: tuple | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``cos``, ``sin`` of ``pi sqrt(xi n + eta)`` and ``sqrt(xi n + eta)``, exact at resonances."""
    arg = p.xi * ns + p.eta
    root = np.sqrt(arg)
    c = np.cos(np.pi * root)
    s = np.sin(np.pi * root)
    if exact is not None:
        xi, eta = exact
        for i, n in enumerate(ns):
            q = Fraction(xi) * int(n) + Fraction(eta)
            if _is_square_exact(q):
                k = math.isqrt(q.numerator)
                c[i], s[i], root[i] = (-1.0) ** k, 0.0, float(k)
    return c, s, root


def _C(p: MaserParams, ns: np.ndarray, exact=None) -> np.ndarray:
    c, s, root = _rabi_angles(p, ns, exact)
    ratio = np.where(root > 0, s / np.where(root > 0, root, 1.0), np.pi)
    return c + 1j * (p.delta * p.tau / (2 * np.pi)) * ratio


def _S(p: MaserParams, ns: np.ndarray, exact=None) -> np.ndarray:
    c, s, root = _rabi_angles(p, ns, exact)
    ratio = np.where(root > 0, s / np.where(root > 0, root, 1.0), np.pi)
    return np.sqrt(p.xi) * ratio


def closed_form_kraus(p: MaserParams, exact: tuple | None = None) -> dict[str, np.ndarray]:
    """``V_{s's}`` keyed ``"00"``, ``"10"``, ``"01"``, ``"11"``.

    ``exact=(xi, eta)`` with rational entries pins ``sin`` to zero at
    resonances so that sectors decouple to the last bit.
    """
    n = np.arange(p.n_trunc + 1, dtype=float)
    a = annihilation(p.n_trunc)
    free = np.diag(np.exp(-1j * p.tau * p.E * n))
    z = 1 / np.sqrt(p.Z)
    w = np.exp(-p.beta * p.E0 / 2) * z
    return {
        "00": z * free @ np.diag(np.conj(_C(p, n, exact))),
        "10": z * free @ np.diag(_S(p, n + 1, exact)) @ a,
        "01": w * free @ np.diag(_S(p, n, exact)) @ dag(a),
        "11": w * free @ np.diag(_C(p, n + 1, exact)),
    }


def apply_kraus(kraus: dict, rho: np.ndarray) -> np.ndarray:
    return sum(v @ rho @ dag(v) for v in kraus.values())


def jc_rdm(p: MaserParams, exact: tuple | None = None) -> ReducedMap:
    return ReducedMap(Superoperator.from_kraus(closed_form_kraus(p, exact).values()))


def jc_model(p: MaserParams) -> RIModel:
    """The truncated Jaynes-Cummings interaction block for the numerical RDM."""
    a = annihilation(p.n_trunc)
    b = ATOM_LOWER
    d = p.n_trunc + 1
    h_S = p.E * dag(a) @ a
    h_E = p.E0 * dag(b) @ b
    v = 0.5 * p.lam * (np.kron(dag(a), b) + np.kron(a, dag(b)))
    return RIModel(h_S=h_S, h_E=h_E, v=v, tau=p.tau, rho_E=gibbs(h_E, p.beta))


def numeric_rdm(p: MaserParams) -> ReducedMap:
    return build_rdm(jc_model(p))


def leakage(m: ReducedMap | Superoperator, below: int) -> float:
    """``|| P (L^*(1) - 1) P ||_max`` with ``P`` the projector on levels ``< below``."""
    sup = m.superop if isinstance(m, ReducedMap) else m
    d = sup.dim
    defect = sup.dual()(np.eye(d)) - np.eye(d)
    return float(np.abs(defect[:below, :below]).max())


def D_function(p: MaserParams, ns: np.ndarray, exact: tuple | None = None) -> np.ndarray:
    c, s, root = _rabi_angles(p, np.asarray(ns, dtype=float), exact)
    arg = p.xi * np.asarray(ns, dtype=float) + p.eta
    frac = np.where(arg > 0, p.xi * np.asarray(ns) / np.where(arg > 0, arg, 1.0), 0.0)
    return s**2 * frac / p.Z


def diagonal_generator_form(p: MaserParams, exact: tuple | None = None) -> np.ndarray:
    """``1 - nabla^* D(N) e^{-beta E0 N} nabla e^{beta E0 N}`` on populations ``0..n_trunc``."""
    d = p.n_trunc + 1
    n = np.arange(d)
    nabla = np.eye(d) - np.eye(d, k=-1)
    nabla_star = np.eye(d) - np.eye(d, k=1)
    D = np.diag(D_function(p, n, exact))
    g = np.diag(np.exp(-p.beta * p.E0 * n))
    ginv = np.diag(np.exp(p.beta * p.E0 * n))
    return np.eye(d) - nabla_star @ D @ g @ nabla @ ginv


def diagonal_block(m: ReducedMap | Superoperator) -> np.ndarray:
    """Action on populations: ``T[i, j] = <i| L(|j><j|) |i>``."""
    return gauge_block(m, 0)


# --- gauge structure ----------------------------------------------------------


def _block_indices(d: int, off: int) -> np.ndarray:
    """Column-stacking indices of the matrix units ``|n><n+off|``."""
    rows = np.arange(max(0, -off), d - max(0, off))
    return rows + (rows + off) * d


def gauge_part(x: np.ndarray, off: int) -> np.ndarray:
    """Keep only the entries ``x[n, n + off]``."""
    return np.triu(np.tril(x, off), off)


def gauge_block(m: ReducedMap | Superoperator, off: int, tol: float = 1e-12) -> np.ndarray:
    """Restriction of a channel to ``span{|n><n+off|}``; raises if the block is not invariant."""
    sup = m.superop if isinstance(m, ReducedMap) else m
    d = sup.dim
    if abs(off) > d - 1:
        raise ValueError("offset exceeds the truncated dimension")
    idx = _block_indices(d, off)
    cols = sup.matrix[:, idx]
    rest = np.delete(cols, idx, axis=0)
    if rest.size and np.abs(rest).max() > tol:
        raise NumericalError(f"gauge block {off} is not invariant ({np.abs(rest).max():.2e})")
    return cols[idx, :]


# --- invariant states and relaxation ------------------------------------------


@dataclass(frozen=True, eq=False)
class SectorState:
    sector: tuple
    state: np.ndarray
    tail_weight: float


def sector_invariant_states(p: MaserParams, structure: RabiStructure) -> list[SectorState]:
    """``e^{-beta E0 N} P_k / Tr(...)`` for every sector.

    Sectors that are cut by the truncation need ``beta > 0``; their reported
    tail weight is the mass an infinite geometric sector would carry beyond
    ``n_trunc``.
    """
    d = p.n_trunc + 1
    out = []
    for (start, stop), closed in zip(structure.sectors, structure.closed):
        if not closed and p.beta <= 0:
            raise ValueError("no invariant state: beta <= 0 on a sector cut by the truncation")
        n = np.arange(start, stop)
        w = np.exp(-p.beta * p.E0 * (n - start))
        diag = np.zeros(d)
        diag[start:stop] = w / w.sum()
        tail = 0.0 if closed else float(np.exp(-p.beta * p.E0 * (stop - start)))
        out.append(SectorState((start, stop), np.diag(diag).astype(complex), tail))
    return out


def check_relaxation_allowed(p: MaserParams, structure: RabiStructure, tol: float = 1e-9) -> None:
    if not structure.degenerate:
        return
    for dd in degeneracy_differences(structure):
        if abs(np.exp(1j * (p.tau * p.E + p.xi * np.pi) * dd) - 1) < tol:
            raise ValueError(
                f"degenerate resonances with e^(i(tau E + xi pi) d) = 1 at d = {dd}: "
                "eigenvectors at 1 need not be diagonal, so the relaxation formula does not apply"
            )


@dataclass(frozen=True, eq=False)
class Relaxation:
    weights: np.ndarray  # [step, sector]
    ergodic_mean: np.ndarray
    target: np.ndarray
    distances: np.ndarray  # trace distance of the running ergodic mean at each N
    step_distances: np.ndarray  # trace distance of rho(n) itself to the target


def relax_in_mean(p: MaserParams, rho0: np.ndarray, N: int, exact: tuple | None = None, structure: RabiStructure | None = None) -> Relaxation:
    if structure is None:
        structure = rabi_resonances(*(exact[::-1] if exact else (p.eta, p.xi)), p.n_trunc)
    check_relaxation_allowed(p, structure)
    kraus = closed_form_kraus(p, exact)
    states = sector_invariant_states(p, structure)
    projs = [structure.projector(k) for k in range(len(structure.sectors))]
    w0 = [np.trace(P @ rho0).real for P in projs]
    target = sum(w * s.state for w, s in zip(w0, states))
    rho = np.asarray(rho0, dtype=complex)
    acc = np.zeros_like(rho)
    weights, dist, step_dist = [], [], []
    for n in range(N):
        weights.append([np.trace(P @ rho).real for P in projs])
        acc += rho
        dist.append(trace_norm(acc / (n + 1) - target))
        step_dist.append(trace_norm(rho - target))
        rho = hermitize(apply_kraus(kraus, rho))
    weights.append([np.trace(P @ rho).real for P in projs])
    return Relaxation(np.array(weights), acc / N, target, np.array(dist), np.array(step_dist))
