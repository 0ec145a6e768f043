"""Trajectory engines: ideal repetition, i.i.d. random interactions and K-beam cycles.

Randomness comes from numpy's Philox4x64 counter-based generator.  A trajectory
with ``(seed, index)`` uses ``Philox(key=seed, counter=[0, 0, 0, index])``, so
trajectories are independent substreams and reproducible on any Philox
implementation.  One uniform draw per step selects the interaction by inverse
CDF.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .qops import NumericalError, Superoperator, check_density, hermitize
from .rdm import RIModel, apply, build_rdm
from .spectral import analyze, ergodic_mean

MASK64 = (1 << 64) - 1


def substream(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64, counter=[0, 0, 0, int(index) & MASK64]))


class FiniteMixture:
    """``models[k]`` drawn with probability ``probs[k]``; maps are built once."""

    def __init__(self, models: Sequence[RIModel], probs: Sequence[float]):
        if len(models) != len(probs) or not models:
            raise ValueError("models and probs must be non-empty and of equal length")
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("probabilities must be non-negative and sum to 1")
        self.models = list(models)
        self.probs = p
        self._cdf = np.cumsum(p)
        self._maps = [build_rdm(m).superop for m in self.models]

    def draw(self, u: float) -> dict:
        k = int(np.searchsorted(self._cdf, u * self._cdf[-1], side="right"))
        return {"atom": min(k, len(self.models) - 1)}

    def model_for(self, record: dict) -> RIModel:
        return self.models[record["atom"]]

    def map_for(self, record: dict) -> Superoperator:
        return self._maps[record["atom"]]

    def label(self, record: dict) -> int:
        return record["atom"]

    def mean_map(self, **_) -> Superoperator:
        return Superoperator(sum(q * m.matrix for q, m in zip(self.probs, self._maps)))

    def sampled_maps(self) -> list[Superoperator]:
        return list(self._maps)


class TabulatedTau:
    """Continuous interaction times drawn by inverse CDF of a tabulated density.

    ``factory(tau)`` returns the model for a given time; ``grid`` and
    ``density`` tabulate the (unnormalized) law of ``tau``.
    """

    def __init__(self, factory: Callable[[float], RIModel], grid: Sequence[float], density: Sequence[float]):
        g = np.asarray(grid, dtype=float)
        f = np.asarray(density, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0) or np.any(f < 0):
            raise ValueError("grid must be increasing and density non-negative")
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(g))])
        if cdf[-1] <= 0:
            raise ValueError("density has zero mass")
        self.factory = factory
        self.grid = g
        self.cdf = cdf / cdf[-1]

    def draw(self, u: float) -> dict:
        return {"tau": float(np.interp(u, self.cdf, self.grid))}

    def model_for(self, record: dict) -> RIModel:
        return self.factory(record["tau"])

    def map_for(self, record: dict) -> Superoperator:
        return build_rdm(self.model_for(record)).superop

    def label(self, record: dict) -> int:
        return 0

    def mean_map(self, samples: int = 4000, seed: int = 0) -> Superoperator:
        """Monte Carlo estimate of ``E[L]``."""
        rng = substream(seed, 0)
        acc = None
        for u in rng.random(samples):
            m = self.map_for(self.draw(u)).matrix
            acc = m if acc is None else acc + m
        return Superoperator(acc / samples)

    def sampled_maps(self, samples: int = 64, seed: int = 0) -> list[Superoperator]:
        rng = substream(seed, 1)
        return [self.map_for(self.draw(u)) for u in rng.random(samples)]


@dataclass(frozen=True, eq=False)
class Ideal:
    model: RIModel
    superop: Superoperator = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "superop", build_rdm(self.model).superop)

    @property
    def models(self) -> list[RIModel]:
        return [self.model]


@dataclass(frozen=True, eq=False)
class KBeam:
    models: tuple
    superops: tuple = field(init=False)

    def __post_init__(self):
        if len(self.models) < 1:
            raise ValueError("K must be at least 1")
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "superops", tuple(build_rdm(m).superop for m in self.models))

    @property
    def K(self) -> int:
        return len(self.models)


@dataclass(frozen=True, eq=False)
class Random:
    sampler: FiniteMixture | TabulatedTau
    seed: int = 0
    index: int = 0


Schedule = Ideal | KBeam | Random


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: list
    step_records: list

    def __len__(self) -> int:
        return len(self.states)

    def to_csv(self, path) -> None:
        d = self.states[0].shape[0]
        header = ["step"]
        for i in range(d):
            for j in range(d):
                header += [f"rho_{i}_{j}_re", f"rho_{i}_{j}_im"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n, rho in enumerate(self.states):
                row = [n]
                for z in rho.reshape(-1):
                    row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
                w.writerow(row)


def step_model(schedule: Schedule, record: dict) -> RIModel:
    if isinstance(schedule, Ideal):
        return schedule.model
    if isinstance(schedule, KBeam):
        return schedule.models[record["beam"]]
    return schedule.sampler.model_for(record)


def step_map(schedule: Schedule, record: dict) -> Superoperator:
    if isinstance(schedule, Ideal):
        return schedule.superop
    if isinstance(schedule, KBeam):
        return schedule.superops[record["beam"]]
    return schedule.sampler.map_for(record)


def beam_label(schedule: Schedule, record: dict) -> int:
    if isinstance(schedule, Ideal):
        return 0
    if isinstance(schedule, KBeam):
        return record["beam"]
    return schedule.sampler.label(record)


def records(schedule: Schedule, n: int) -> list[dict]:
    """The per-step parameters for steps ``1..n``."""
    if isinstance(schedule, Ideal):
        return [{} for _ in range(n)]
    if isinstance(schedule, KBeam):
        return [{"beam": k % schedule.K} for k in range(n)]
    rng = substream(schedule.seed, schedule.index)
    return [schedule.sampler.draw(u) for u in rng.random(n)]


def run(schedule: Schedule, rho0: np.ndarray, n: int) -> Trajectory:
    if n < 0:
        raise ValueError("n must be non-negative")
    rho = check_density(rho0)
    recs = records(schedule, n)
    states = [rho]
    for rec in recs:
        try:
            rho = apply(step_map(schedule, rec), rho)
        except NumericalError as exc:
            raise NumericalError(f"step record {rec}: {exc}") from exc
        states.append(rho)
    return Trajectory(states, recs)


def kbeam_effective_maps(maps: Sequence[Superoperator]) -> list[Superoperator]:
    """``L~_j = L_j o ... o L_1 o L_K o ... o L_{j+1}`` for ``j = 1..K`` (returned 0-based)."""
    K = len(maps)
    if K < 1:
        raise ValueError("K must be at least 1")
    out = []
    for j in range(K):
        m = Superoperator.identity(maps[0].dim)
        # apply L_{j+1}, ..., L_K, L_1, ..., L_j in that order
        for k in range(j + 1, j + 1 + K):
            m = maps[k % K] @ m
        out.append(m)
    return out


@dataclass(frozen=True, eq=False)
class RandomAsymptotics:
    ergodic_means: list
    mean_map: Superoperator
    invariant_state: np.ndarray
    ergodic_fraction: float


def random_asymptotics(
    sampler: FiniteMixture | TabulatedTau,
    rho0: np.ndarray,
    N: int,
    seeds: Sequence[int],
    mc_samples: int = 4000,
) -> RandomAsymptotics:
    """Per-seed ergodic means plus the invariant state of ``E[L]``."""
    maps = sampler.sampled_maps()
    frac = float(np.mean([analyze(m).satisfies_E for m in maps]))
    if frac == 0.0:
        raise NumericalError("no sampled map satisfies condition (E)")
    mean = sampler.mean_map() if isinstance(sampler, FiniteMixture) else sampler.mean_map(samples=mc_samples)
    rep = analyze(mean)
    if not rep.satisfies_E:
        raise NumericalError("E[L] does not satisfy condition (E)")
    means = []
    for s in seeds:
        sched = Random(sampler, seed=s)
        recs = records(sched, N)
        means.append(ergodic_mean(lambda n, r: hermitize(step_map(sched, recs[n - 1])(r)), rho0, N))
    return RandomAsymptotics(means, mean, rep.invariant_state, frac)
