#!/usr/bin/env python3
"""Compare noisy-or vs average fusion across data regimes.

Trains instance-space classifiers once per seed, scores the test split
under both fusion rules, and prints the mean test-AUC gain of the
average rule. On diffuse (distribution-kind) data every instance carries
signal and averaging tends to win; on concept-kind data only a few
witnesses matter and noisy-or catches up.

    python scripts/compare_fusion_rules.py --seeds 10
"""

import argparse
import dataclasses

import numpy as np

from milkit.concept import train_misvm
from milkit.evaluation import compute_auc
from milkit.fusion import FusionRule, train_simplemil
from milkit.synth import GeneratorSpec, generate_splits

REGIMES = {
    "distribution": dict(kind="distribution", d=20, bags_per_class=10,
                         instances_per_bag=5, shift=0.5),
    "concept": dict(kind="concept", d=10, bags_per_class=10,
                    instances_per_bag=10, witness_rate=0.2, concept_distance=4.0),
}


def rule_gap(model, test) -> float:
    aucs = {}
    for rule in ("noisy_or", "average"):
        scored = dataclasses.replace(model, rule=FusionRule(rule))
        aucs[rule] = compute_auc(scored.score_dataset(test), test.labels()).auc
    return aucs["average"] - aucs["noisy_or"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    for regime, params in REGIMES.items():
        gaps = {"simplemil-logistic": [], "misvm": []}
        for seed in range(args.seeds):
            train, _, test, _ = generate_splits(GeneratorSpec(seed=seed, **params))
            m = train_simplemil(train, base="logistic",
                                rule=FusionRule("noisy_or"), hyper={"C": 1.0})
            gaps["simplemil-logistic"].append(rule_gap(m, test))
            m = train_misvm(train, C=0.1)
            gaps["misvm"].append(rule_gap(m, test))
        print(f"{regime}:")
        for name, g in gaps.items():
            print(f"  {name:<20} mean AUC gain of average rule: "
                  f"{np.mean(g):+.3f} (over {args.seeds} seeds)")


if __name__ == "__main__":
    main()
