"""Run every sample configuration through the command-line front end.

Usage: python3 scripts/run_experiments.py [OUTDIR]

Each run writes report.json and its tables into OUTDIR/<name>. The exit
status of each command is printed next to its summary line; certify on the
violators is expected to exit with 2 (FAIL, certificate written).
"""
import sys
from pathlib import Path

from hessianlab.cli import main

HERE = Path(__file__).resolve().parent
RUNS = [
    ("barriers", "barriers", "barriers.json", 0),
    ("sharp-n3", "audit-flatset", "sharp_n3.json", 0),
    ("sharp-n4", "audit-flatset", "sharp_n4.json", 0),
    ("x3-squared", "certify", "x3_squared.json", 2),
    ("abs-x3", "certify", "abs_x3.json", 2),
    ("solve-kink", "solve", "solve_kink.json", 0),
    ("pogorelov", "pogorelov", "pogorelov.json", 0),
    ("modulus", "modulus", "modulus.json", 0),
    ("c2", "c2", "c2.json", 0),
]


def run_all(outdir):
    unexpected = []
    for name, command, config, expected in RUNS:
        code = main([command, "--config", str(HERE / "configs" / config), "--out", str(outdir / name)])
        print(f"  exit {code} (expected {expected})")
        if code != expected:
            unexpected.append(name)
    return unexpected


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "experiments-out")
    bad = run_all(out)
    if bad:
        print("unexpected exit status:", ", ".join(bad))
    sys.exit(1 if bad else 0)
