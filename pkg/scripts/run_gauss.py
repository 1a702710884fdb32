#!/usr/bin/env python3
"""Reproduce the Gaussian-target comparison: centered and off-center
proposals, plain vs inflated, over seeded replications."""
import sys
from pathlib import Path

from infmc.cli import main

OUT = Path(__file__).resolve().parent.parent / "results"


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    seed = sys.argv[1] if len(sys.argv) > 1 else "42"
    for experiment in ("gauss-centered", "gauss-offcenter"):
        code = main([
            "gauss", "--seed", seed, "--experiment", experiment,
            "--budgets", "200,2000,20000", "--replications", "50",
            "--output", str(OUT / f"{experiment}.csv"),
        ])
        if code:
            raise SystemExit(code)
