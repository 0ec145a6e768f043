"""Command-line runner: ``riqs list`` and ``riqs run <config.json>``.

Exit codes: 0 all checks pass, 1 a numerical check failed, 2 the config is invalid.
"""

from __future__ import annotations

import argparse
import inspect
import json
import sys
from pathlib import Path

import jsonschema

from .experiments import EXPERIMENTS

MATRIX_SCHEMA = {
    "description": "dense complex matrix, row-major, each entry a [re, im] pair",
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "minItems": 1,
        "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}

RIMODEL_SCHEMA = {
    "type": "object",
    "required": ["h_S", "h_E", "v", "tau", "rho_E"],
    "properties": {
        "h_S": MATRIX_SCHEMA,
        "h_E": MATRIX_SCHEMA,
        "v": MATRIX_SCHEMA,
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "rho_E": MATRIX_SCHEMA,
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": sorted(EXPERIMENTS)},
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "tolerances": {
            "type": "object",
            "properties": {"scale": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def list_experiments() -> list[tuple[str, str, str]]:
    """``(name, description, anchor)`` sorted by name."""
    return [(name, desc, anchor) for name, (_, desc, anchor) in sorted(EXPERIMENTS.items())]


def load_config(path: Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/" + "/".join(str(p) for p in e.absolute_path)
        raise ConfigError(f"{path}: at {where}: {e.message}")
    fn = EXPERIMENTS[cfg["experiment"]][0]
    allowed = set(inspect.signature(fn).parameters) - {"tol_scale", "seed"}
    unknown = sorted(set(cfg.get("params", {})) - allowed)
    if unknown:
        raise ConfigError(f"{path}: at /params/{unknown[0]}: unknown parameter (allowed: {sorted(allowed)})")
    return cfg


def run_experiment(cfg: dict, seed: int | None = None, out: str | None = None, tol_scale: float | None = None) -> int:
    name = cfg["experiment"]
    fn = EXPERIMENTS[name][0]
    seed = cfg.get("seed", 0) if seed is None else seed
    scale = cfg.get("tolerances", {}).get("scale", 1.0) if tol_scale is None else tol_scale
    out_dir = Path(out or cfg.get("out") or f"results/{name}")
    result = fn(tol_scale=scale, seed=seed, **cfg.get("params", {}))
    result.write(out_dir)
    summary = result.summary() | {"seed": seed, "tol_scale": scale}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for c in result.checks:
        print(c.line())
    print(f"{name}: {'PASS' if result.passed else 'FAIL'} -> {out_dir}")
    return 0 if result.passed else 1


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="riqs", description="repeated interaction quantum systems experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("list", help="list experiments")
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--tol-scale", type=float)
    args = ap.parse_args(argv)

    if args.cmd == "list":
        for name, desc, anchor in list_experiments():
            print(f"{name:22s} {desc} [{anchor}]")
        return 0
    if args.tol_scale is not None and not args.tol_scale > 0:
        print("error: --tol-scale must be positive", file=sys.stderr)
        return 2
    try:
        cfg = load_config(Path(args.config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(cfg, args.seed, args.out, args.tol_scale)


if __name__ == "__main__":
    sys.exit(main())
