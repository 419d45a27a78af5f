"""milkit: a multiple-instance learning benchmark kit.

Bags of instances with weak labels, instance-level and bag-level MIL
classifiers, exact bag distances, an evaluation protocol with paired
significance tests, synthetic problem generators, and a config-driven
benchmark CLI.
"""

from .bags import (
    Bag,
    DatasetFormatError,
    MILDataset,
    datasets_equal,
    load_dataset,
    save_dataset,
    split_subsample,
)
from .concept import (
    ConceptPoint,
    EmddModel,
    MilboostModel,
    MisvmModel,
    Stump,
    diverse_density,
    milboost_log_likelihood,
    milboost_weights,
    train_emdd,
    train_milboost,
    train_misvm,
)
from .distances import (
    CitationKnnModel,
    DistanceMatrix,
    TransportPlan,
    dist_emd,
    dist_hausdorff,
    dist_meanmin,
    pairwise_matrix,
    train_citation_knn,
)
from .embed import (
    Codebook,
    EmbedModel,
    PrototypeSet,
    build_codebook,
    embed_bow,
    embed_dissimilarity,
    embed_extremes,
    embed_mean_inst,
    embed_miles,
    median_instance_distance,
    train_embed_classifier,
)
from .evaluation import (
    ProtocolReport,
    RocResult,
    SignificanceResult,
    compute_auc,
    delong_test,
    dependent_ttest,
    run_protocol,
    save_roc_csv,
)
from .fusion import (
    FusionRule,
    SimpleMILModel,
    fuse_average,
    fuse_noisy_or,
    propagate_labels,
    train_simplemil,
)
from .learners import (
    KnnModel,
    LogisticModel,
    PolyKernel,
    Standardizer,
    SvmModel,
    train_knn,
    train_logistic,
    train_svm,
)
from .registry import ClassifierDef, default_suite, list_classifiers, make_trainer
from .scoring import MAX_ODDS, TrainedModel, clamp_posterior, log_odds, posterior_to_odds
from .synth import (
    GeneratorSpec,
    GroundTruth,
    generate,
    generate_splits,
    save_instance_labels,
)

__version__ = "0.1.0"

__all__ = [
    "Bag",
    "CitationKnnModel",
    "ClassifierDef",
    "Codebook",
    "ConceptPoint",
    "DatasetFormatError",
    "DistanceMatrix",
    "EmbedModel",
    "EmddModel",
    "FusionRule",
    "GeneratorSpec",
    "GroundTruth",
    "KnnModel",
    "LogisticModel",
    "MAX_ODDS",
    "MILDataset",
    "MilboostModel",
    "MisvmModel",
    "PolyKernel",
    "PrototypeSet",
    "ProtocolReport",
    "RocResult",
    "SignificanceResult",
    "SimpleMILModel",
    "Standardizer",
    "Stump",
    "SvmModel",
    "TrainedModel",
    "TransportPlan",
    "build_codebook",
    "clamp_posterior",
    "compute_auc",
    "datasets_equal",
    "default_suite",
    "delong_test",
    "dependent_ttest",
    "dist_emd",
    "dist_hausdorff",
    "dist_meanmin",
    "diverse_density",
    "embed_bow",
    "embed_dissimilarity",
    "embed_extremes",
    "embed_mean_inst",
    "embed_miles",
    "fuse_average",
    "fuse_noisy_or",
    "generate",
    "generate_splits",
    "list_classifiers",
    "load_dataset",
    "log_odds",
    "make_trainer",
    "median_instance_distance",
    "milboost_log_likelihood",
    "milboost_weights",
    "pairwise_matrix",
    "posterior_to_odds",
    "propagate_labels",
    "run_protocol",
    "save_dataset",
    "save_instance_labels",
    "save_roc_csv",
    "split_subsample",
    "train_citation_knn",
    "train_embed_classifier",
    "train_emdd",
    "train_knn",
    "train_logistic",
    "train_milboost",
    "train_misvm",
    "train_simplemil",
    "train_svm",
]
