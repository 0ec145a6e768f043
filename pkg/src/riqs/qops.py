"""Dense complex linear-algebra kernel.

Conventions used everywhere in the package:

* operators are plain ``numpy`` complex arrays;
* vectorization is column stacking, ``vec(X) = X.reshape(-1, order="F")``,
  so the map ``X -> A X B`` is the matrix ``kron(B.T, A)``;
* superoperators are stored as ``d^2 x d^2`` matrices in that basis and the
  dual is the conjugate transpose (Hilbert-Schmidt pairing).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_POS = 1e-10
TOL_EIG = 1e-9


class NumericalError(ArithmeticError):
    """A numerical invariant was violated beyond its tolerance."""


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized {d}x{d} operator")
    return v.reshape(d, d, order="F")


def dag(x: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(x))


def hermitize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dag(x))


def is_hermitian(x: np.ndarray, tol: float = TOL_HERM) -> bool:
    x = np.asarray(x)
    return x.ndim == 2 and x.shape[0] == x.shape[1] and np.max(np.abs(x - dag(x)), initial=0.0) <= tol


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: int | Sequence[int]) -> np.ndarray:
    """Trace out every tensor factor of ``m`` except those listed in ``keep``."""
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ValueError(f"operator of shape {m.shape} does not match dims {dims}")
    keep = [keep] if np.isscalar(keep) else list(keep)
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep={keep} out of range for {len(dims)} factors")
    n = len(dims)
    t = m.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out_idx = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    kept = int(np.prod([dims[k] for k in keep]))
    return np.einsum("".join(row) + "".join(col) + "->" + out_idx, t).reshape(kept, kept)


def eigh_checked(h: np.ndarray, tol: float = TOL_HERM) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol):
        raise ValueError("operator is not Hermitian within tolerance")
    return np.linalg.eigh(hermitize(h))


def propagator(h: np.ndarray, t: float, tol: float = TOL_HERM) -> np.ndarray:
    """``exp(-i t h)`` through the Hermitian eigendecomposition of ``h``."""
    w, v = eigh_checked(h, tol)
    return (v * np.exp(-1j * t * w)) @ dag(v)


def hermitian_function(h: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    w, v = eigh_checked(h)
    return (v * f(w)) @ dag(v)


def eig_general(m: np.ndarray, tol: float = TOL_EIG) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a general square matrix, sorted by decreasing modulus.

    Raises ``NumericalError`` when a returned pair has residual above
    ``tol * ||m||``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("eig_general needs a square matrix")
    w, v = np.linalg.eig(m)
    order = np.lexsort((np.round(np.angle(w), 12), -np.round(np.abs(w), 12)))
    w, v = w[order], v[:, order]
    scale = max(np.linalg.norm(m, 2), 1.0)
    res = np.linalg.norm(m @ v - v * w, axis=0)
    if res.size and res.max() > tol * scale:
        raise NumericalError(f"eigenpair residual {res.max():.3e} exceeds {tol * scale:.3e}")
    return w, v


def gibbs(h: np.ndarray, beta: float) -> np.ndarray:
    """Gibbs state ``exp(-beta h)/Z``; ``beta=inf`` gives the normalized ground projector."""
    w, v = eigh_checked(h)
    if np.isinf(beta):
        p = (np.abs(w - w.min()) < 1e-12).astype(float) if beta > 0 else (np.abs(w - w.max()) < 1e-12).astype(float)
    else:
        p = np.exp(-beta * (w - w.min()))
    p = p / p.sum()
    return (v * p) @ dag(v)


def trace_norm(x: np.ndarray) -> float:
    x = np.asarray(x)
    if is_hermitian(x, 1e-13):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(x)))))
    return float(np.sum(np.linalg.svd(x, compute_uv=False)))


def check_density(
    rho: np.ndarray,
    tol_herm: float = TOL_HERM,
    tol_trace: float = TOL_TRACE,
    tol_pos: float = TOL_POS,
) -> np.ndarray:
    """Validate a density matrix and return its Hermitized copy."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if not is_hermitian(rho, tol_herm):
        raise NumericalError("density matrix is not Hermitian")
    rho = hermitize(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol_trace:
        raise NumericalError(f"density matrix trace {tr!r} differs from 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -tol_pos:
        raise NumericalError(f"density matrix has eigenvalue {lo:.3e}")
    return rho


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return hermitize(g)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map on ``d x d`` operators in the column-stacking basis."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("superoperator matrix must be square")
        d = int(round(np.sqrt(m.shape[0])))
        if d * d != m.shape[0]:
            raise ValueError(f"size {m.shape[0]} is not a square dimension")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.dim, self.dim):
            raise ValueError(f"operator of shape {x.shape} does not act on dimension {self.dim}")
        return unvec(self.matrix @ vec(x), self.dim)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        """Composition ``self o other`` (``other`` acts first)."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in composition")
        return Superoperator(self.matrix @ other.matrix)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix + other.matrix)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix - other.matrix)

    def __mul__(self, c: complex) -> "Superoperator":
        return Superoperator(c * self.matrix)

    __rmul__ = __mul__

    def dual(self) -> "Superoperator":
        return Superoperator(dag(self.matrix))

    def power(self, n: int) -> "Superoperator":
        return Superoperator(np.linalg.matrix_power(self.matrix, n))

    def choi(self) -> np.ndarray:
        """``sum_kl |k><l| (x) L(|k><l|)``."""
        d = self.dim
        t = self.matrix.reshape(d, d, d, d)  # [j, i, l, k] for <i|L(|k><l|)|j>
        return t.transpose(3, 1, 2, 0).reshape(d * d, d * d)

    def kraus(self, tol: float = 1e-12) -> list[np.ndarray]:
        w, v = np.linalg.eigh(hermitize(self.choi()))
        d = self.dim
        return [np.sqrt(x) * v[:, k].reshape(d, d).T for k, x in enumerate(w) if x > tol]

    @classmethod
    def identity(cls, d: int) -> "Superoperator":
        return cls(np.eye(d * d, dtype=complex))

    @classmethod
    def from_kraus(cls, ops: Iterable[np.ndarray]) -> "Superoperator":
        ops = [np.asarray(a, dtype=complex) for a in ops]
        return cls(sum(np.kron(np.conj(a), a) for a in ops))

    @classmethod
    def sandwich(cls, a: np.ndarray, b: np.ndarray) -> "Superoperator":
        """The map ``X -> a X b``."""
        return cls(np.kron(np.transpose(b), a))

    @classmethod
    def conjugation(cls, u: np.ndarray) -> "Superoperator":
        """The map ``X -> u X u^*``."""
        return cls.sandwich(u, dag(u))

    @classmethod
    def commutator(cls, h: np.ndarray) -> "Superoperator":
        """The map ``X -> [h, X]``."""
        h = np.asarray(h, dtype=complex)
        eye = np.eye(h.shape[0])
        return cls(np.kron(eye, h) - np.kron(h.T, eye))

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], d: int) -> "Superoperator":
        cols = []
        for k in range(d * d):
            e = np.zeros(d * d, dtype=complex)
            e[k] = 1.0
            cols.append(vec(f(unvec(e, d))))
        return cls(np.column_stack(cols))


def choi_min_eig(m: Superoperator) -> float:
    return float(np.linalg.eigvalsh(hermitize(m.choi())).min())


def unitality_defect(m: Superoperator) -> float:
    """``||L^*(I) - I||_max``; zero for trace-preserving ``L``."""
    d = m.dim
    return float(np.max(np.abs(m.dual()(np.eye(d)) - np.eye(d))))


def is_cptp(m: Superoperator, tol_cp: float = 1e-10, tol_tp: float = 1e-10) -> bool:
    return choi_min_eig(m) >= -tol_cp and unitality_defect(m) <= tol_tp


def spectral_radius(m: Superoperator | np.ndarray) -> float:
    mat = m.matrix if isinstance(m, Superoperator) else np.asarray(m)
    return float(np.max(np.abs(np.linalg.eigvals(mat))))
