"""Classifier registry: canonical names, default hyperparameter grids,
and trainer factories with the uniform signature
``trainer(train_ds, hyper, seed) -> TrainedModel``.

Grid values are the benchmark defaults; configs may override them.
Families with a fusion-rule choice expand into one row per rule.
"""

from __future__ import annotations

from dataclasses import dataclass

from .concept import train_emdd, train_milboost, train_misvm
from .distances import train_citation_knn
from .embed import train_embed_classifier
from .fusion import FusionRule, train_simplemil
from .learners import PolyKernel

C_GRID = (0.01, 0.1, 1, 10)
K_INSTANCE_GRID = (25, 35, 45)
DEGREE_GRID = (1, 2)
WORDS_GRID = (50, 100, 200)
KR_GRID = (1, 5, 10)
KC_GRID = (1, 5, 10)
K_BAG_GRID = (1, 5, 10)

RULE_NAMES = ("noisy_or", "average")
RULE_SUFFIX = {"noisy_or": "noisy", "average": "avg"}


def _svm_grid():
    return tuple({"degree": p, "C": c} for p in DEGREE_GRID for c in C_GRID)


@dataclass(frozen=True)
class ClassifierDef:
    family: str
    grid_text: str
    default_grid: tuple
    has_rule: bool
    in_default_suite: bool
    make_trainer: object  # callable(rule: str | None) -> trainer


def _simplemil(base):
    def make(rule):
        fr = FusionRule(rule)

        def trainer(ds, hyper, seed):
            return train_simplemil(ds, base, fr, hyper)

        return trainer

    return make


def _emdd_make(rule):
    def trainer(ds, hyper, seed):
        kwargs = {k: v for k, v in hyper.items() if k != "init_fraction"}
        return train_emdd(
            ds, init_fraction=float(hyper.get("init_fraction", 0.1)), seed=seed, **kwargs
        )

    return trainer


def _misvm_make(rule):
    fr = FusionRule(rule)

    def trainer(ds, hyper, seed):
        kernel = PolyKernel(degree=int(hyper.get("degree", 1)))
        return train_misvm(ds, kernel=kernel, C=float(hyper.get("C", 1.0)), rule=fr)

    return trainer


def _milboost_make(rule):
    def trainer(ds, hyper, seed):
        return train_milboost(ds, rounds=int(hyper.get("rounds", 100)))

    return trainer


def _citation_make(rule):
    def trainer(ds, hyper, seed):
        return train_citation_knn(ds, kR=int(hyper["kR"]), kC=int(hyper["kC"]))

    return trainer


def _embed_make(embedding, head):
    def make(rule):
        def trainer(ds, hyper, seed):
            return train_embed_classifier(ds, embedding, head, hyper, seed=seed)

        return trainer

    return make


CLASSIFIERS = (
    ClassifierDef(
        "simplemil-logistic",
        "C in {0.01,0.1,1,10} rule in {noisy_or,average}",
        tuple({"C": c} for c in C_GRID),
        True,
        True,
        _simplemil("logistic"),
    ),
    ClassifierDef(
        "simplemil-knn",
        "k in {25,35,45} rule in {noisy_or,average}",
        tuple({"k": k} for k in K_INSTANCE_GRID),
        True,
        True,
        _simplemil("knn"),
    ),
    ClassifierDef(
        "emdd",
        "init_fraction 0.1 (opt-in: requires time_budget_s)",
        ({"init_fraction": 0.1},),
        False,
        False,
        _emdd_make,
    ),
    ClassifierDef(
        "misvm",
        "p in {1,2} C in {0.01,0.1,1,10} rule in {noisy_or,average}",
        _svm_grid(),
        True,
        True,
        _misvm_make,
    ),
    ClassifierDef(
        "milboost",
        "rounds 100",
        ({"rounds": 100},),
        False,
        True,
        _milboost_make,
    ),
    ClassifierDef(
        "citation-knn",
        "kR in {1,5,10} kC in {1,5,10}",
        tuple({"kR": r, "kC": c} for r in KR_GRID for c in KC_GRID),
        False,
        True,
        _citation_make,
    ),
    ClassifierDef(
        "mean-inst-svm",
        "p in {1,2} C in {0.01,0.1,1,10}",
        _svm_grid(),
        False,
        True,
        _embed_make("mean_inst", "svm"),
    ),
    ClassifierDef(
        "extremes-svm",
        "p in {1,2} C in {0.01,0.1,1,10}",
        _svm_grid(),
        False,
        True,
        _embed_make("extremes", "svm"),
    ),
    ClassifierDef(
        "bow",
        "words in {50,100,200} p in {1,2} C in {0.01,0.1,1,10}",
        tuple(
            {"words": w, "degree": p, "C": c}
            for w in WORDS_GRID
            for p in DEGREE_GRID
            for c in C_GRID
        ),
        False,
        True,
        _embed_make("bow", "svm"),
    ),
    ClassifierDef(
        "miles",
        "p in {1,2} C in {0.01,0.1,1,10}",
        _svm_grid(),
        False,
        True,
        _embed_make("miles", "svm"),
    ),
    ClassifierDef(
        "dissim-meanmin-svm",
        "p in {1,2} C in {0.01,0.1,1,10}",
        _svm_grid(),
        False,
        True,
        _embed_make("dissim_meanmin", "svm"),
    ),
    ClassifierDef(
        "dissim-meanmin-knn",
        "k in {1,5,10}",
        tuple({"k": k} for k in K_BAG_GRID),
        False,
        True,
        _embed_make("dissim_meanmin", "knn"),
    ),
    ClassifierDef(
        "dissim-emd-svm",
        "p in {1,2} C in {0.01,0.1,1,10}",
        _svm_grid(),
        False,
        True,
        _embed_make("dissim_emd", "svm"),
    ),
    ClassifierDef(
        "dissim-emd-knn",
        "k in {1,5,10}",
        tuple({"k": k} for k in K_BAG_GRID),
        False,
        True,
        _embed_make("dissim_emd", "knn"),
    ),
)

FAMILIES = {c.family: c for c in CLASSIFIERS}


def get_classifier(family: str) -> ClassifierDef:
    if family not in FAMILIES:
        known = ", ".join(FAMILIES)
        raise KeyError(f"unknown classifier {family!r}; known: {known}")
    return FAMILIES[family]


def make_trainer(family: str, rule: str | None = None):
    """Resolve (trainer, default_grid, row_label) for a classifier row."""
    cdef = get_classifier(family)
    if cdef.has_rule:
        if rule is None:
            raise ValueError(f"{family} needs a fusion rule ({RULE_NAMES})")
        if rule not in RULE_NAMES:
            raise ValueError(f"unknown fusion rule {rule!r}; choose from {RULE_NAMES}")
        label = f"{family} {RULE_SUFFIX[rule]}"
        return cdef.make_trainer(rule), cdef.default_grid, label
    if rule is not None:
        raise ValueError(f"{family} does not take a fusion rule")
    return cdef.make_trainer(None), cdef.default_grid, family


def list_classifiers() -> str:
    """One line per classifier family with its default grid."""
    lines = []
    for c in CLASSIFIERS:
        lines.append(f"{c.family} {c.grid_text}")
    return "\n".join(lines)


def default_suite() -> list[dict]:
    """Config entries for the standard benchmark rows, in table order."""
    entries = []
    for c in CLASSIFIERS:
        if not c.in_default_suite:
            continue
        if c.has_rule:
            for rule in RULE_NAMES:
                entries.append({"name": c.family, "rule": rule})
        else:
            entries.append({"name": c.family})
    return entries
