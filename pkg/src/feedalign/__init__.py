"""MLP training with interchangeable backward passes, plus the comparison tooling.

The package splits into layers that build on each other:

  tensor      float64 Matrix/Vector wrappers and the primitive ops
  rng         one seed, many named deterministic substreams
  network     architecture specs, init, forward pass, loss
  trainers    the five backward strategies, Adam, the training loop
  datasets    IDX/CIFAR readers, checksums, synthetic blobs
  experiment  run orchestration and on-disk artifacts
  analysis    accuracy/stability/similarity tables
  figures     PNG rendering of the tables
  cli         `feedalign` command
"""

from .analysis import (
    AccuracyReport,
    SimilarityReport,
    StabilityReport,
    accuracy_table,
    cosine,
    cross_algorithm_table,
    layer_similarity_table,
    prediction_similarity,
    prediction_vector,
    stability_table,
)
from .datasets import (
    DataFormatError,
    Dataset,
    Split,
    SyntheticSpec,
    load_cifar10,
    load_cifar10_batch,
    load_idx_images,
    load_idx_labels,
    load_mnist,
    make_synthetic,
)
from .experiment import (
    RunArtifact,
    SuiteResults,
    evaluate,
    load_artifact,
    run_single,
    run_suite,
    save_artifact,
)
from .network import (
    Activation,
    ForwardCache,
    LayerSpec,
    NetworkSpec,
    NetworkState,
    cifar10_spec,
    forward,
    init_network,
    loss_and_output_delta,
    mnist_spec,
    predict_class,
)
from .rng import substream
from .tensor import Matrix, ShapeError, Vector
from .trainers import (
    Algorithm,
    FeedbackState,
    LayerDeltas,
    OptimizerKind,
    OptimizerState,
    TrainConfig,
    apply_update,
    backward,
    bp_backward,
    dfa_backward,
    fa_backward,
    init_feedback,
    train_epoch,
    train_network,
    usfa_sync_feedback,
    wdfa_lr_factors,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Activation",
    "AccuracyReport",
    "Algorithm",
    "DataFormatError",
    "Dataset",
    "FeedbackState",
    "ForwardCache",
    "LayerDeltas",
    "LayerSpec",
    "Matrix",
    "NetworkSpec",
    "NetworkState",
    "OptimizerKind",
    "OptimizerState",
    "RunArtifact",
    "ShapeError",
    "SimilarityReport",
    "Split",
    "StabilityReport",
    "SuiteResults",
    "SyntheticSpec",
    "TrainConfig",
    "Vector",
    "accuracy_table",
    "apply_update",
    "backward",
    "bp_backward",
    "cifar10_spec",
    "cosine",
    "cross_algorithm_table",
    "dfa_backward",
    "evaluate",
    "fa_backward",
    "forward",
    "init_feedback",
    "init_network",
    "layer_similarity_table",
    "load_artifact",
    "load_cifar10",
    "load_cifar10_batch",
    "load_idx_images",
    "load_idx_labels",
    "load_mnist",
    "loss_and_output_delta",
    "make_synthetic",
    "mnist_spec",
    "predict_class",
    "prediction_similarity",
    "prediction_vector",
    "run_single",
    "run_suite",
    "save_artifact",
    "stability_table",
    "substream",
    "train_epoch",
    "train_network",
    "usfa_sync_feedback",
    "wdfa_lr_factors",
]
