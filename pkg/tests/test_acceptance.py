"""The twelve acceptance criteria, one experiment each, at the stated tolerances.

Run under pytest for a PASS/FAIL line per criterion in the terminal summary,
or directly with ``python tests/test_acceptance.py``.
"""

import sys

import pytest

from riqs.experiments import EXPERIMENTS

CRITERIA = [
    (1, "toy_rdm"),
    (2, "toy_spectrum"),
    (3, "toy_convergence"),
    (4, "random_ri"),
    (5, "thermo_identities"),
    (6, "kbeam_fluxes"),
    (7, "maser_sectors"),
    (8, "lattice_ldp"),
    (9, "weak_coupling"),
    (10, "measure_correlations"),
    (11, "quantum_walk"),
    (12, "global_properties"),
]

RESULTS: dict[int, tuple[str, bool, list[str]]] = {}


def run_criterion(number: int, name: str):
    res = EXPERIMENTS[name][0]()
    lines = [c.line() for c in res.checks]
    RESULTS[number] = (name, res.passed, lines)
    return res


def criterion_lines(number: int) -> list[str]:
    name, passed, lines = RESULTS[number]
    out = [f"criterion {number:2d} {name}: {'PASS' if passed else 'FAIL'}"]
    return out + [f"    {line}" for line in lines if line.startswith("FAIL")]


def summary_lines() -> list[str]:
    return [line for number in sorted(RESULTS) for line in criterion_lines(number)]


@pytest.mark.parametrize("number, name", CRITERIA, ids=[f"criterion_{n:02d}_{name}" for n, name in CRITERIA])
def test_criterion(number, name):
    res = run_criterion(number, name)
    for c in res.checks:
        print(c.line())
    failed = [c.line() for c in res.checks if not c.passed]
    assert not failed, "\n".join(failed)


if __name__ == "__main__":
    for number, name in CRITERIA:
        run_criterion(number, name)
        print("\n".join(criterion_lines(number)), flush=True)
    sys.exit(0 if all(p for _, p, _ in RESULTS.values()) else 1)
