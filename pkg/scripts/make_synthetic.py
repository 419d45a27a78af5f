#!/usr/bin/env python3
"""Generate the three synthetic MIL benchmark families to disk.

Writes train/validation/test CSVs plus ground-truth instance-label
sidecars for each family, ready for `milkit run` configs that use
dataset.files. Example:

    python scripts/make_synthetic.py --out data/ --seed 0
"""

import argparse
from pathlib import Path

from milkit.bags import save_dataset
from milkit.synth import BINS_PER_BLOCK, GeneratorSpec, generate_splits, save_instance_labels

FAMILIES = {
    "concept": dict(kind="concept", d=20, bags_per_class=50, instances_per_bag=30,
                    witness_rate=0.2, concept_distance=4.0),
    "distribution": dict(kind="distribution", d=20, bags_per_class=50,
                         instances_per_bag=30, shift=0.5),
    "histogram": dict(kind="histogram", d=2 * BINS_PER_BLOCK, bags_per_class=50,
                      instances_per_bag=30, shift=4.0),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("data"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--family", choices=sorted(FAMILIES), action="append",
                    help="restrict to one family (repeatable); default: all")
    args = ap.parse_args()

    for name in args.family or sorted(FAMILIES):
        spec = GeneratorSpec(seed=args.seed, **FAMILIES[name])
        train, val, test, truths = generate_splits(spec)
        out = args.out / name
        out.mkdir(parents=True, exist_ok=True)
        for ds, tag in ((train, "train"), (val, "validation"), (test, "test")):
            save_dataset(ds, out / f"{tag}.csv")
            save_instance_labels(truths[tag], ds, out / f"instance_labels_{tag}.csv")
        print(f"{name}: {len(train.bags)}/{len(val.bags)}/{len(test.bags)} bags -> {out}")


if __name__ == "__main__":
    main()
