"""Command-line interface: simulate, localize, maximal, select, degiorgi, report, verify."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .acceptance import SUITES, verify
from .config import ExperimentConfig
from .pipeline import run_experiment

STAGES = ("simulate", "localize", "maximal", "select", "degiorgi", "report")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.default()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vortexlab",
        description="Desk-scale diagnostics for 3D incompressible Navier-Stokes fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in STAGES + ("run",):
        p = sub.add_parser(
            stage,
            help=(
                "run the full pipeline" if stage == "run"
                else f"run the pipeline through the {stage} stage"
            ),
        )
        p.add_argument("--config", type=Path, default=None, help="experiment config file")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="random seed override")

    pv = sub.add_parser("verify", help="run acceptance suites")
    pv.add_argument("suite", choices=sorted(SUITES), help="suite name")
    pv.add_argument("--out", type=Path, default=None, help="write JSON verdicts here")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--config", type=Path, default=None, help="unused; accepted for symmetry")
    pv.add_argument(
        "--inject-fault", type=int, default=None, metavar="CRITERION",
        help="test mode: tamper the named criterion's tolerances so it must fail",
    )

    args = parser.parse_args(argv)

    if args.command == "verify":
        results = verify(args.suite, seed=args.seed, inject_fault=args.inject_fault)
        verdicts = [
            {
                "criterion": r.criterion,
                "name": r.name,
                "passed": r.passed,
                "seconds": round(r.seconds, 3),
                "details": _jsonable(r.details),
            }
            for r in results
        ]
        if args.out:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(json.dumps(verdicts, indent=2) + "\n", encoding="utf-8")
        return 0 if all(r.passed for r in results) else 1

    cfg = _load_config(args)
    through = None if args.command == "run" else args.command
    result = run_experiment(cfg, args.out, through=through)
    if not result.ok:
        print(f"stage {result.failed_stage!r} failed; see manifest", file=sys.stderr)
        return 1
    done = through or "report"
    print(f"pipeline complete through stage {done!r}; manifest at {result.out_dir / 'manifest.json'}")
    return 0


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


if __name__ == "__main__":
    sys.exit(main())
