"""Reduced dynamics maps of a single system-probe interaction."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .qops import (
    NumericalError,
    Superoperator,
    check_density,
    choi_min_eig,
    dag,
    hermitize,
    is_hermitian,
    partial_trace,
    propagator,
    unitality_defect,
)


class InvarianceWarning(UserWarning):
    """The probe state does not commute with the probe Hamiltonian."""


def _matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _matrix_from_json(data: Any, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{name}: expected a row-major array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True, eq=False)
class RIModel:
    """One interaction block: ``h = h_S (x) 1 + 1 (x) h_E + v`` acting for a time ``tau``."""

    h_S: np.ndarray
    h_E: np.ndarray
    v: np.ndarray
    tau: float
    rho_E: np.ndarray

    def __post_init__(self) -> None:
        h_S = np.array(self.h_S, dtype=complex)
        h_E = np.array(self.h_E, dtype=complex)
        v = np.array(self.v, dtype=complex)
        dS, dE = h_S.shape[0], h_E.shape[0]
        if not (is_hermitian(h_S) and is_hermitian(h_E)):
            raise ValueError("h_S and h_E must be Hermitian")
        if v.shape != (dS * dE, dS * dE) or not is_hermitian(v):
            raise ValueError(f"v must be a Hermitian {dS * dE}x{dS * dE} matrix")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        rho_E = check_density(self.rho_E)
        if rho_E.shape != h_E.shape:
            raise ValueError("rho_E and h_E dimensions differ")
        comm = float(np.linalg.norm(h_E @ rho_E - rho_E @ h_E))
        if comm > 1e-10:
            warnings.warn(f"probe state is not invariant: ||[h_E, rho_E]|| = {comm:.3e}", InvarianceWarning, stacklevel=3)
        for name, val in (("h_S", h_S), ("h_E", h_E), ("v", v), ("rho_E", rho_E)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def dims(self) -> tuple[int, int]:
        return self.h_S.shape[0], self.h_E.shape[0]

    @property
    def h(self) -> np.ndarray:
        dS, dE = self.dims
        return np.kron(self.h_S, np.eye(dE)) + np.kron(np.eye(dS), self.h_E) + self.v

    def unitary(self) -> np.ndarray:
        return propagator(self.h, self.tau)

    def to_dict(self) -> dict:
        return {
            "h_S": _matrix_to_json(self.h_S),
            "h_E": _matrix_to_json(self.h_E),
            "v": _matrix_to_json(self.v),
            "tau": self.tau,
            "rho_E": _matrix_to_json(self.rho_E),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "RIModel":
        missing = {"h_S", "h_E", "v", "tau", "rho_E"} - set(data)
        if missing:
            raise ValueError(f"RIModel document lacks {sorted(missing)}")
        return cls(
            h_S=_matrix_from_json(data["h_S"], "h_S"),
            h_E=_matrix_from_json(data["h_E"], "h_E"),
            v=_matrix_from_json(data["v"], "v"),
            tau=float(data["tau"]),
            rho_E=_matrix_from_json(data["rho_E"], "rho_E"),
        )

    @classmethod
    def from_json(cls, text: str) -> "RIModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ReducedMap:
    superop: Superoperator
    model: RIModel | None = None

    @property
    def dim(self) -> int:
        return self.superop.dim

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return self.superop(rho)


def build_rdm(model: RIModel) -> ReducedMap:
    """``L(rho) = Tr_E[U (rho (x) rho_E) U^*]`` with ``U = exp(-i tau h)``.

    Every matrix unit ``|k><l|`` is pushed through the formula at once by a
    tensor contraction, giving the column ``vec L(|k><l|)``.
    """
    dS, dE = model.dims
    u = model.unitary().reshape(dS, dE, dS, dE)
    # images[i, j, k, l] = <i| L(|k><l|) |j>
    images = np.einsum("iekf,fg,jelg->ijkl", u, model.rho_E, np.conj(u), optimize=True)
    mat = images.transpose(1, 0, 3, 2).reshape(dS * dS, dS * dS)
    return ReducedMap(Superoperator(mat), model)


def apply(m: ReducedMap | Superoperator, rho: np.ndarray, tol_pos: float = 1e-8) -> np.ndarray:
    """One step ``rho -> L(rho)``, Hermitized and validated."""
    out = hermitize(m(rho))
    lo = np.linalg.eigvalsh(out).min()
    if lo < -tol_pos:
        raise NumericalError(f"output has eigenvalue {lo:.3e}; the map is not positive")
    tr = np.trace(out).real
    if abs(tr - 1.0) > 1e-8:
        raise NumericalError(f"output trace {tr!r} differs from 1")
    return out


def dual(m: ReducedMap | Superoperator) -> Superoperator:
    sup = m.superop if isinstance(m, ReducedMap) else m
    return sup.dual()


def check_channel(m: ReducedMap | Superoperator, tol: float = 1e-10) -> dict:
    sup = m.superop if isinstance(m, ReducedMap) else m
    report = {"choi_min_eig": choi_min_eig(sup), "unitality_defect": unitality_defect(sup)}
    report["ok"] = report["choi_min_eig"] >= -tol and report["unitality_defect"] <= tol
    return report


def brute_force_evolve(models: Sequence[RIModel], rho: np.ndarray) -> np.ndarray:
    """Evolve ``rho (x) rho_E1 (x) ... (x) rho_En`` with the full propagators, then trace the probes."""
    if not models:
        return np.asarray(rho, dtype=complex)
    dS = models[0].dims[0]
    probe_dims = [mdl.dims[1] for mdl in models]
    dims = [dS] + probe_dims
    state = np.asarray(rho, dtype=complex)
    for mdl in models:
        state = np.kron(state, mdl.rho_E)
    total = int(np.prod(dims))
    for k, mdl in enumerate(models):
        u = mdl.unitary()
        before = int(np.prod(probe_dims[:k]))
        after = int(np.prod(probe_dims[k + 1 :]))
        # reorder so that the k-th probe sits next to the system
        t = state.reshape([dS, before, probe_dims[k], after] * 2)
        t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(total, total)
        full = np.kron(u, np.eye(before * after))
        t = full @ t @ dag(full)
        t = t.reshape([dS, probe_dims[k], before, after] * 2)
        state = t.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(total, total)
    return partial_trace(state, dims, 0)
