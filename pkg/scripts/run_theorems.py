#!/usr/bin/env python3
"""Run the estimator property suite on randomized instances and write the
machine-readable report; exits nonzero if any check fails."""
import sys
from pathlib import Path

from infmc.cli import main

OUT = Path(__file__).resolve().parent.parent / "results"


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    seed = sys.argv[1] if len(sys.argv) > 1 else "42"
    raise SystemExit(main([
        "theorems", "--seed", seed, "--instances", "500",
        "--output", str(OUT / "property_report.json"),
    ]))
