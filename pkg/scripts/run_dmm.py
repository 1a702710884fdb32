#!/usr/bin/env python3
"""Reproduce the mixture-model comparison at matched likelihood-evaluation
budgets, for the fixed-variance gaussian and the full student-t variants."""
import sys
from pathlib import Path

from infmc.cli import main

OUT = Path(__file__).resolve().parent.parent / "results"


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    seed = sys.argv[1] if len(sys.argv) > 1 else "42"
    for experiment in ("dmm-gauss", "dmm-t"):
        code = main([
            "dmm", "--seed", seed, "--experiment", experiment,
            "--budgets", "2000", "--replications", "25",
            "--output", str(OUT / f"{experiment}.csv"),
            "--traces", str(OUT / f"{experiment}_traces.json"),
        ])
        if code:
            raise SystemExit(code)
