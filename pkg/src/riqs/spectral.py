"""Peripheral spectrum of channels, invariant states, Riesz projections and the # average."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .qops import (
    NumericalError,
    Superoperator,
    dag,
    eig_general,
    eigh_checked,
    hermitize,
    trace_norm,
    unvec,
)


@dataclass(frozen=True, eq=False)
class SpectralReport:
    eigenvalues: np.ndarray
    peripheral: np.ndarray
    satisfies_E: bool
    gap: float
    invariant_state: np.ndarray | None
    one_cluster_dim: int

    def to_json(self) -> str:
        def pairs(z):
            return [[float(x.real), float(x.imag)] for x in np.asarray(z, dtype=complex)]

        doc = {
            "eigenvalues": pairs(self.eigenvalues),
            "peripheral": pairs(self.peripheral),
            "satisfies_E": self.satisfies_E,
            "gap": self.gap,
            "one_cluster_dim": self.one_cluster_dim,
            "invariant_state": None
            if self.invariant_state is None
            else [pairs(row) for row in self.invariant_state],
        }
        return json.dumps(doc)


def state_from_eigenvector(v: np.ndarray, d: int, repair: float = 1e-10, fail: float = 1e-8) -> np.ndarray:
    """Turn an eigenvector at 1 into a density matrix.

    Eigenvalues in ``[-repair, 0)`` are clipped; below ``-fail`` the input is
    not a channel and ``NumericalError`` is raised.
    """
    x = unvec(v, d)
    tr = np.trace(x)
    if abs(tr) < 1e-12:
        raise NumericalError("eigenvector at 1 is traceless")
    x = hermitize(x / tr)
    w, u = np.linalg.eigh(x)
    if w.min() < -fail:
        raise NumericalError(f"invariant vector has eigenvalue {w.min():.3e}")
    if w.min() < -repair:
        warnings.warn(f"invariant state negativity {w.min():.3e} left unrepaired", RuntimeWarning, stacklevel=2)
    else:
        w = np.where(w < 0, 0.0, w)
    rho = (u * w) @ dag(u)
    return rho / np.trace(rho).real


def invariant_state(m: Superoperator) -> np.ndarray:
    """Unique invariant state from the null space of ``M - 1``."""
    _, s, vh = np.linalg.svd(m.matrix - np.eye(m.matrix.shape[0]))
    return state_from_eigenvector(np.conj(vh[-1]), m.dim)


def analyze(m: Superoperator, tol_peripheral: float = 1e-8, tol: float = 1e-10) -> SpectralReport:
    w, vecs = eig_general(m.matrix)
    if np.abs(w).max() > 1 + tol:
        raise NumericalError(f"spectral radius {np.abs(w).max():.12f} exceeds 1")
    peripheral = w[1 - np.abs(w) < tol_peripheral]
    at_one = np.flatnonzero(np.abs(w - 1) < tol_peripheral)
    simple = len(at_one) == 1
    sat = simple and len(peripheral) == 1
    rest = np.delete(w, at_one[:1]) if len(at_one) else w
    gap = float(-np.log(np.abs(rest).max())) if rest.size and np.abs(rest).max() > 0 else float("inf")
    rho = None
    if simple:
        k = at_one[0]
        resid = np.linalg.norm(m.matrix @ vecs[:, k] - vecs[:, k])
        if resid > 1e-8:
            raise NumericalError(f"eigenvector at 1 has residual {resid:.3e}")
        rho = state_from_eigenvector(vecs[:, k], m.dim)
    return SpectralReport(w, peripheral, sat, gap, rho, len(at_one))


@dataclass(frozen=True, eq=False)
class Convergence:
    final: np.ndarray
    distances: np.ndarray
    slope: float
    window: tuple[int, int]


def fit_log_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(np.asarray(ns, dtype=float), y, 1)[0])


def power_converge(
    m: Superoperator,
    rho0: np.ndarray,
    n: int,
    rho_plus: np.ndarray | None = None,
    window: tuple[int, int] | None = None,
) -> Convergence:
    """Iterate ``m`` and record trace distances to the invariant state.

    The slope is a least-squares fit of ``log distance`` over ``window``
    (default: the second half of the run), skipping values at round-off level.
    """
    if rho_plus is None:
        rep = analyze(m)
        if not rep.satisfies_E:
            raise NumericalError("map does not satisfy condition (E)")
        rho_plus = rep.invariant_state
    rho = np.asarray(rho0, dtype=complex)
    dist = [trace_norm(rho - rho_plus)]
    for _ in range(n):
        rho = m(rho)
        dist.append(trace_norm(rho - rho_plus))
    dist = np.array(dist)
    lo, hi = window if window is not None else (n // 2, n)
    ks = [k for k in range(lo, hi + 1) if dist[k] > 1e-13]
    slope = fit_log_slope(ks, dist[ks]) if len(ks) >= 2 else float("nan")
    return Convergence(hermitize(rho), dist, slope, (lo, hi))


def ergodic_mean(step: Callable[[int, np.ndarray], np.ndarray] | Superoperator, rho0: np.ndarray, N: int) -> np.ndarray:
    """``(1/N) sum_{n=0}^{N-1} rho(n)``.

    ``step`` is either a superoperator or a callable ``(n, rho(n-1)) -> rho(n)``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if isinstance(step, Superoperator):
        m = step
        step = lambda _n, r: m(r)  # noqa: E731
    rho = np.asarray(rho0, dtype=complex)
    acc = np.zeros_like(rho)
    for n in range(N):
        acc += rho
        if n < N - 1:
            rho = step(n + 1, rho)
    return acc / N


def riesz_projection(
    m: Superoperator | np.ndarray,
    center: complex,
    radius: float,
    min_nodes: int = 64,
    max_nodes: int = 1 << 15,
    tol: float = 1e-9,
) -> Superoperator:
    """Spectral projection of the eigenvalues inside ``|z - center| < radius`` by contour quadrature."""
    mat = m.matrix if isinstance(m, Superoperator) else np.asarray(m, dtype=complex)
    w = np.linalg.eigvals(mat)
    sep = np.min(np.abs(np.abs(w - center) - radius))
    if sep < 1e-8:
        raise NumericalError(f"spectrum lies on the contour (distance {sep:.2e})")
    n_nodes = min_nodes
    eye = np.eye(mat.shape[0])
    prev = None
    while True:
        theta = 2 * np.pi * (np.arange(n_nodes) + 0.5) / n_nodes
        acc = np.zeros_like(mat, dtype=complex)
        for t in theta:
            z = center + radius * np.exp(1j * t)
            acc += radius * np.exp(1j * t) * np.linalg.solve(z * eye - mat, eye)
        pi = acc / n_nodes
        idem = np.abs(pi @ pi - pi).max()
        if idem < tol and prev is not None and np.abs(pi - prev).max() < tol:
            return Superoperator(pi)
        if n_nodes >= max_nodes:
            raise NumericalError(f"contour quadrature did not converge (residual {idem:.2e})")
        prev = pi
        n_nodes *= 2


def _cluster_phases(z: np.ndarray, tol: float) -> np.ndarray:
    """Single-linkage clusters of points on the unit circle; refuse chained clusters."""
    order = np.argsort(np.angle(z))
    labels = -np.ones(z.size, dtype=int)
    reps: list[int] = []
    for idx in order:
        for lab, r in enumerate(reps):
            if abs(z[idx] - z[r]) < tol:
                labels[idx] = lab
                break
        else:
            labels[idx] = len(reps)
            reps.append(idx)
    for lab in range(len(reps)):
        pts = z[labels == lab]
        diam = np.max(np.abs(pts[:, None] - pts[None, :]))
        if diam >= tol:
            raise NumericalError("ambiguous clustering of Bohr phases")
    # points assigned to one cluster must not also sit within tol of another
    for idx in range(z.size):
        close = {labels[r] for r in range(z.size) if abs(z[idx] - z[r]) < tol}
        if len(close) > 1:
            raise NumericalError("ambiguous clustering of Bohr phases")
    return labels


def bohr_basis(h0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-operators ``|a><b|`` of ``[h0, .]`` as columns, with their frequencies ``E_a - E_b``."""
    e, u = eigh_checked(h0)
    d = e.size
    cols, freqs = [], []
    for b in range(d):
        for a in range(d):
            cols.append(np.kron(np.conj(u[:, b]), u[:, a]))
            freqs.append(e[a] - e[b])
    return np.column_stack(cols), np.array(freqs)


def sharp(k: Superoperator, h0: np.ndarray, tau: float, tol_cluster: float | None = None) -> Superoperator:
    """``K# = sum_j P_j K P_j`` over the eigenprojections of ``exp(i tau [h0, .])``."""
    basis, freqs = bohr_basis(h0)
    if tol_cluster is None:
        spread = float(np.ptp(freqs)) if freqs.size else 0.0
        tol_cluster = 1e-9 * max(1.0, tau * spread)
    labels = _cluster_phases(np.exp(1j * tau * freqs), tol_cluster)
    kt = dag(basis) @ k.matrix @ basis
    kt = np.where(labels[:, None] == labels[None, :], kt, 0.0)
    return Superoperator(basis @ kt @ dag(basis))
