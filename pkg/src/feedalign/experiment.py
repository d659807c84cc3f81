"""Run orchestration and on-disk artifacts.

A run is (dataset, algorithm, seed): initialize, train, evaluate on the
test split, and optionally persist. Artifacts are laid out as

    <out_dir>/<dataset>/<algorithm>/seed_<seed>/
        manifest.json       run metadata, config, accuracy, loss curve
        weights.faw         final weights and biases
        feedback.fab        final feedback matrices (empty list for BP)
        predictions.json    predicted test labels

and are byte-identical across reruns of the same configuration: JSON is
written with sorted keys and no timestamps, tensors in a fixed little-endian
layout.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .datasets import Dataset
from .network import NetworkSpec, NetworkState, cifar10_spec, forward_batch, init_network, mnist_spec
from .tensor import Matrix, Vector
from .trainers import (
    Algorithm,
    FeedbackState,
    OptimizerKind,
    OptimizerState,
    TrainConfig,
    init_feedback,
    train_network,
)

__all__ = [
    "RunArtifact",
    "SuiteResults",
    "network_spec_for",
    "evaluate",
    "run_single",
    "run_suite",
    "save_artifact",
    "load_artifact",
    "run_dir_for",
]

MANIFEST_VERSION = 1

WEIGHTS_MAGIC = b"FAW1"
FEEDBACK_MAGIC = b"FAB1"


def _write_tensor_file(path: Path, magic: bytes, tensors: list[np.ndarray]) -> None:
    """Container layout: magic, u32 tensor count, then per tensor u32 rows,
    u32 cols, rows*cols little-endian float64 values in row-major order."""
    parts = [magic, struct.pack("<I", len(tensors))]
    for t in tensors:
        rows, cols = (1, t.shape[0]) if t.ndim == 1 else t.shape
        parts.append(struct.pack("<II", rows, cols))
        parts.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    path.write_bytes(b"".join(parts))


def _read_tensor_file(path: Path, magic: bytes) -> list[np.ndarray]:
    raw = path.read_bytes()
    if raw[:4] != magic:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {magic!r}")
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated header")
    (count,) = struct.unpack_from("<I", raw, 4)
    offset = 8
    tensors = []
    for i in range(count):
        if offset + 8 > len(raw):
            raise ValueError(f"{path}: tensor {i} header truncated at offset {offset}")
        rows, cols = struct.unpack_from("<II", raw, offset)
        offset += 8
        nbytes = rows * cols * 8
        if offset + nbytes > len(raw):
            raise ValueError(f"{path}: tensor {i} payload truncated at offset {offset}")
        tensors.append(
            np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=offset)
            .reshape(rows, cols)
            .astype(np.float64)
        )
        offset += nbytes
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes after tensor {count - 1}")
    return tensors


@dataclass
class RunArtifact:
    dataset_name: str
    config: TrainConfig
    final_state: NetworkState
    feedback: FeedbackState
    predictions: np.ndarray
    test_accuracy: float
    train_loss_curve: list[float]
    initial_weights_sha256: str

    @property
    def algorithm(self) -> Algorithm:
        return self.config.algorithm

    @property
    def seed(self) -> int:
        return self.config.seed


def network_spec_for(input_dim: int, n_classes: int) -> NetworkSpec:
    """The fixed architecture for each known input width.

    784 and 3072 inputs with 10 classes get the image architectures
    (hidden widths 768, 256, 128); anything else gets a small default of
    hidden widths 64 and 32, sized by the data.
    """
    if n_classes == 10:
        if input_dim == 784:
            return mnist_spec()
        if input_dim == 3072:
            return cifar10_spec()
    return NetworkSpec.from_dims([input_dim, 64, 32, n_classes])


def evaluate(state: NetworkState, dataset: Dataset) -> tuple[float, np.ndarray]:
    """(accuracy, predicted labels) on the dataset. Argmax ties break low."""
    _, acts = forward_batch(state, dataset.inputs)
    predictions = np.argmax(acts[-1], axis=1).astype(np.int64)
    accuracy = float(np.mean(predictions == dataset.labels))
    return accuracy, predictions


def run_single(
    dataset_name: str,
    train: Dataset,
    test: Dataset,
    config: TrainConfig,
) -> RunArtifact:
    """Train one network from scratch and evaluate the final weights.

    The initial weights depend only on the architecture and the seed, never
    on the algorithm; their digest is recorded so runs can be compared.
    """
    if train.input_dim != test.input_dim or train.n_classes != test.n_classes:
        raise ValueError(
            f"train split is {train.input_dim}-d/{train.n_classes} classes, "
            f"test split is {test.input_dim}-d/{test.n_classes} classes"
        )
    spec = network_spec_for(train.input_dim, train.n_classes)
    state = init_network(spec, config.seed)
    initial_digest = hashlib.sha256(state.weight_bytes()).hexdigest()
    feedback = init_feedback(spec, config.algorithm, config.seed)
    optimizer = OptimizerState.fresh(config.optimizer, spec)
    state, feedback, optimizer, curve = train_network(state, feedback, optimizer, train, config)
    accuracy, predictions = evaluate(state, test)
    return RunArtifact(
        dataset_name=dataset_name,
        config=config,
        final_state=state,
        feedback=feedback,
        predictions=predictions,
        test_accuracy=accuracy,
        train_loss_curve=curve,
        initial_weights_sha256=initial_digest,
    )


def run_dir_for(out_dir: str | Path, dataset_name: str, algorithm: Algorithm, seed: int) -> Path:
    return Path(out_dir) / dataset_name / algorithm.value / f"seed_{seed}"


def run_suite(
    dataset_name: str,
    train: Dataset,
    test: Dataset,
    base_config: TrainConfig,
    algorithms: list[Algorithm],
    seeds: list[int],
    out_dir: str | Path | None = None,
    threads: int = 1,
    on_complete: Callable[[RunArtifact], None] | None = None,
) -> dict[tuple[Algorithm, int], RunArtifact]:
    """All (algorithm, seed) runs for one dataset.

    base_config supplies the shared hyperparameters; its algorithm and seed
    fields are replaced per run. threads > 1 runs whole trainings in
    parallel; parallelism decides only scheduling, never numerics, since
    each run is self-contained. When out_dir is given every artifact is
    saved as it completes, and on_complete (if any) is called with it.
    """
    if not algorithms or not seeds:
        raise ValueError("need at least one algorithm and one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"duplicate seeds in {seeds}")
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")

    jobs = [(seed, algo) for seed in seeds for algo in algorithms]

    def execute(job: tuple[int, Algorithm]) -> RunArtifact:
        seed, algo = job
        config = dataclasses.replace(base_config, algorithm=algo, seed=seed)
        try:
            return run_single(dataset_name, train, test, config)
        except Exception as exc:
            raise RuntimeError(f"run {dataset_name}/{algo.value}/seed_{seed} failed: {exc}") from exc

    def finish(artifact: RunArtifact) -> None:
        if out_dir is not None:
            save_artifact(artifact, run_dir_for(out_dir, dataset_name, artifact.algorithm, artifact.seed))
        if on_complete is not None:
            on_complete(artifact)

    results: dict[tuple[Algorithm, int], RunArtifact] = {}
    if threads == 1:
        for job in jobs:
            artifact = execute(job)
            finish(artifact)
            results[(artifact.algorithm, artifact.seed)] = artifact
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(execute, job) for job in jobs]
            for future in as_completed(futures):
                artifact = future.result()
                finish(artifact)
                results[(artifact.algorithm, artifact.seed)] = artifact
    return results


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def save_artifact(artifact: RunArtifact, run_dir: str | Path) -> Path:
    """Persist one run; returns the directory written."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    state = artifact.final_state
    config = artifact.config
    manifest = {
        "format_version": MANIFEST_VERSION,
        "dataset": artifact.dataset_name,
        "algorithm": config.algorithm.value,
        "seed": config.seed,
        "dims": [state.spec.input_dim] + [layer.out_dim for layer in state.spec.layers],
        "config": {
            "learning_rate": config.learning_rate,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "weight_decay": config.weight_decay,
            "optimizer": config.optimizer.value,
        },
        "test_accuracy": artifact.test_accuracy,
        "n_test_predictions": int(artifact.predictions.shape[0]),
        "train_loss_curve": artifact.train_loss_curve,
        "initial_weights_sha256": artifact.initial_weights_sha256,
    }
    _dump_json(run_dir / "manifest.json", manifest)
    # Weights file interleaves each layer's matrix with its bias row:
    # W0, b0, W1, b1, ...
    tensors: list[np.ndarray] = []
    for w, b in zip(state.weights, state.biases):
        tensors.append(w.data)
        tensors.append(b.data)
    _write_tensor_file(run_dir / "weights.faw", WEIGHTS_MAGIC, tensors)
    _write_tensor_file(
        run_dir / "feedback.fab", FEEDBACK_MAGIC, [m.data for m in artifact.feedback.matrices]
    )
    _dump_json(run_dir / "predictions.json", {"labels": artifact.predictions.tolist()})
    return run_dir


def load_artifact(run_dir: str | Path) -> RunArtifact:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise ValueError(
            f"{run_dir}: manifest format {manifest.get('format_version')}, "
            f"this reader understands {MANIFEST_VERSION}"
        )
    spec = NetworkSpec.from_dims(manifest["dims"])
    config = TrainConfig(
        algorithm=Algorithm(manifest["algorithm"]),
        seed=manifest["seed"],
        learning_rate=manifest["config"]["learning_rate"],
        epochs=manifest["config"]["epochs"],
        batch_size=manifest["config"]["batch_size"],
        weight_decay=manifest["config"]["weight_decay"],
        optimizer=OptimizerKind(manifest["config"]["optimizer"]),
    )
    tensors = _read_tensor_file(run_dir / "weights.faw", WEIGHTS_MAGIC)
    if len(tensors) != 2 * spec.n_layers:
        raise ValueError(
            f"{run_dir}: weights file holds {len(tensors)} tensors, "
            f"expected {2 * spec.n_layers}"
        )
    weights = [Matrix(tensors[2 * i]) for i in range(spec.n_layers)]
    biases = [Vector(tensors[2 * i + 1].reshape(-1)) for i in range(spec.n_layers)]
    state = NetworkState(spec, weights, biases)
    feedback = FeedbackState(
        [Matrix(t) for t in _read_tensor_file(run_dir / "feedback.fab", FEEDBACK_MAGIC)]
    )
    predictions = np.asarray(
        json.loads((run_dir / "predictions.json").read_text(encoding="utf-8"))["labels"],
        dtype=np.int64,
    )
    if predictions.shape[0] != manifest["n_test_predictions"]:
        raise ValueError(
            f"{run_dir}: {predictions.shape[0]} predictions, "
            f"manifest says {manifest['n_test_predictions']}"
        )
    return RunArtifact(
        dataset_name=manifest["dataset"],
        config=config,
        final_state=state,
        feedback=feedback,
        predictions=predictions,
        test_accuracy=manifest["test_accuracy"],
        train_loss_curve=list(manifest["train_loss_curve"]),
        initial_weights_sha256=manifest["initial_weights_sha256"],
    )


@dataclass
class SuiteResults:
    """Every stored run for one dataset, keyed by (algorithm, seed)."""

    dataset_name: str
    runs: dict[tuple[Algorithm, int], RunArtifact]

    @classmethod
    def load(cls, out_dir: str | Path, dataset_name: str) -> "SuiteResults":
        root = Path(out_dir) / dataset_name
        if not root.is_dir():
            raise FileNotFoundError(f"no stored runs under {root}")
        runs = {}
        for algo_dir in sorted(root.iterdir()):
            if not algo_dir.is_dir():
                continue
            algo = Algorithm(algo_dir.name)
            for seed_dir in sorted(algo_dir.iterdir()):
                if not seed_dir.is_dir() or not seed_dir.name.startswith("seed_"):
                    continue
                artifact = load_artifact(seed_dir)
                runs[(algo, artifact.seed)] = artifact
        if not runs:
            raise FileNotFoundError(f"no stored runs under {root}")
        return cls(dataset_name, runs)

    def algorithms(self) -> list[Algorithm]:
        present = {algo for algo, _ in self.runs}
        return [a for a in Algorithm if a in present]

    def seeds(self) -> list[int]:
        return sorted({seed for _, seed in self.runs})

    def artifact(self, algorithm: Algorithm, seed: int) -> RunArtifact:
        try:
            return self.runs[(algorithm, seed)]
        except KeyError:
            raise KeyError(f"no stored run for {algorithm.value} seed {seed}") from None
