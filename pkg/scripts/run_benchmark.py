#!/usr/bin/env python3
"""Run a benchmark suite on generated synthetic data and print the table.

By default runs a fast four-row suite on distribution-kind data; --full
switches to the complete default suite with the published grids (slow).
Example:

    python scripts/run_benchmark.py --kind distribution --seed 0 --out runs/d0
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from milkit.cli import main as milkit_main

FAST_SUITE = [
    {"name": "mean-inst-svm", "grid": [{"degree": 1, "C": 1.0}]},
    {"name": "simplemil-logistic", "rule": "average", "grid": [{"C": 1.0}]},
    {"name": "milboost", "grid": [{"rounds": 20}]},
    {"name": "citation-knn", "grid": [{"kR": 5, "kC": 5}]},
]

GENERATORS = {
    "concept": {"kind": "concept", "d": 20, "bags_per_class": 20,
                "instances_per_bag": 20, "witness_rate": 0.2,
                "concept_distance": 4.0},
    "distribution": {"kind": "distribution", "d": 20, "bags_per_class": 20,
                     "instances_per_bag": 20, "shift": 0.5},
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=sorted(GENERATORS), default="distribution")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/latest"))
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--full", action="store_true",
                    help="run the complete default suite with full grids (slow)")
    args = ap.parse_args()

    config = {
        "seed": args.seed,
        "output_dir": str(args.out),
        "workers": args.workers,
        "dataset": {"generator": GENERATORS[args.kind]},
        "classifiers": "default" if args.full else FAST_SUITE,
        "comparisons": [] if args.full else [["mean-inst-svm", "milboost"]],
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        cfg_path = fh.name
    code = milkit_main(["run", cfg_path])
    print(f"artifacts in {args.out} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
