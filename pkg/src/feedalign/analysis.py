"""Tables computed from stored runs.

Four reports: mean test accuracy, within-algorithm prediction stability,
cross-algorithm prediction similarity, and per-layer weight similarity.

"Prediction similarity" is the cosine between concatenated one-hot vectors
of the argmax predictions, which is identical to the plain agreement rate:
the dot product counts agreeing positions and each vector has norm sqrt(N).
The cosine framing is kept because the weight comparisons use the same
operation on non-binary vectors.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .experiment import RunArtifact
from .tensor import ShapeError, Vector
from .trainers import Algorithm

__all__ = [
    "SimilarityReport",
    "AccuracyReport",
    "StabilityReport",
    "cosine",
    "prediction_vector",
    "prediction_similarity",
    "accuracy_table",
    "stability_table",
    "cross_algorithm_table",
    "layer_similarity_table",
    "write_similarity_csv",
    "write_similarity_json",
    "write_grid_csv",
    "write_accuracy_json",
    "write_stability_json",
]


def cosine(u: Vector, v: Vector) -> float:
    """u.v / (|u||v|), rejecting zero vectors.

    Computed as dot / sqrt(dot(u,u) * dot(v,v)): for one-hot vectors every
    intermediate value is an exactly-representable integer, so the result
    is the exactly-rounded agreement fraction.
    """
    if len(u) != len(v):
        raise ShapeError(f"cosine of vectors with lengths {len(u)} and {len(v)}")
    uu = float(np.dot(u.data, u.data))
    vv = float(np.dot(v.data, v.data))
    if uu == 0.0 or vv == 0.0:
        raise ValueError("cosine is undefined for a zero vector")
    return float(np.dot(u.data, v.data)) / math.sqrt(uu * vv)


def prediction_vector(predictions: Sequence[int] | np.ndarray, n_classes: int) -> Vector:
    """Concatenated one-hot encoding of a prediction list, length N * n_classes."""
    labels = np.asarray(predictions, dtype=np.int64)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError(f"predictions must be a non-empty 1-d sequence, got shape {labels.shape}")
    if n_classes < 2:
        raise ValueError(f"n_classes must be at least 2, got {n_classes}")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(
            f"prediction outside [0, {n_classes - 1}]: range [{labels.min()}, {labels.max()}]"
        )
    one_hot = np.zeros((labels.size, n_classes))
    one_hot[np.arange(labels.size), labels] = 1.0
    return Vector(one_hot.reshape(-1))


def prediction_similarity(
    p: Sequence[int] | np.ndarray, q: Sequence[int] | np.ndarray, n_classes: int
) -> float:
    return cosine(prediction_vector(p, n_classes), prediction_vector(q, n_classes))


@dataclass
class SimilarityReport:
    """Square matrix of averaged cosines; the diagonal is absent (NaN)."""

    row_keys: list[str]
    col_keys: list[str]
    values: np.ndarray
    dataset: str
    aggregation: str
    layer_index: int | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        n = len(self.row_keys)
        if self.col_keys != self.row_keys:
            raise ValueError("row and column keys must match")
        if self.values.shape != (n, n):
            raise ValueError(f"{n} keys but value matrix of shape {self.values.shape}")

    def entry(self, a: str, b: str) -> float:
        return float(self.values[self.row_keys.index(a), self.col_keys.index(b)])


@dataclass
class AccuracyReport:
    """Mean test accuracy per (algorithm, dataset), with the per-seed detail."""

    algorithms: list[str]
    datasets: list[str]
    mean: dict[str, dict[str, float]]
    per_seed: dict[str, dict[str, dict[int, float]]] = field(repr=False)


@dataclass
class StabilityReport:
    """Mean pairwise prediction similarity across seeds, per (algorithm, dataset)."""

    algorithms: list[str]
    datasets: list[str]
    values: dict[str, dict[str, float]]
    n_pairs: dict[str, dict[str, int]]


def _algorithm_order(present: set[str]) -> list[str]:
    return [a.value for a in Algorithm if a.value in present]


def _group_runs(
    artifacts: Sequence[RunArtifact], dataset: str | None
) -> dict[str, dict[int, RunArtifact]]:
    """algorithm -> seed -> artifact, restricted to one dataset when given."""
    groups: dict[str, dict[int, RunArtifact]] = {}
    for art in artifacts:
        if dataset is not None and art.dataset_name != dataset:
            continue
        seeds = groups.setdefault(art.algorithm.value, {})
        if art.seed in seeds:
            raise ValueError(
                f"duplicate run for {art.algorithm.value} seed {art.seed}"
                + (f" on {dataset}" if dataset else "")
            )
        seeds[art.seed] = art
    if not groups:
        raise ValueError(
            f"no runs for dataset {dataset!r}" if dataset else "no runs supplied"
        )
    return groups


def _require_matching_seeds(groups: dict[str, dict[int, RunArtifact]]) -> list[int]:
    seed_sets = {algo: tuple(sorted(runs)) for algo, runs in groups.items()}
    distinct = set(seed_sets.values())
    if len(distinct) != 1:
        detail = ", ".join(f"{a}: {list(s)}" for a, s in sorted(seed_sets.items()))
        raise ValueError(f"seed sets differ across algorithms ({detail})")
    return list(distinct.pop())


def accuracy_table(artifacts: Sequence[RunArtifact]) -> AccuracyReport:
    """Mean test accuracy over seeds for every (algorithm, dataset) present."""
    if not artifacts:
        raise ValueError("no runs supplied")
    datasets = sorted({a.dataset_name for a in artifacts})
    mean: dict[str, dict[str, float]] = {}
    per_seed: dict[str, dict[str, dict[int, float]]] = {}
    for dataset in datasets:
        for algo, runs in _group_runs(artifacts, dataset).items():
            accs = {seed: runs[seed].test_accuracy for seed in sorted(runs)}
            per_seed.setdefault(algo, {})[dataset] = accs
            mean.setdefault(algo, {})[dataset] = sum(accs.values()) / len(accs)
    return AccuracyReport(_algorithm_order(set(mean)), datasets, mean, per_seed)


def _prediction_vectors(runs: dict[int, RunArtifact]) -> dict[int, Vector]:
    lengths = {runs[s].predictions.shape[0] for s in runs}
    if len(lengths) != 1:
        raise ValueError(f"prediction lists differ in length: {sorted(lengths)}")
    vectors = {}
    for seed, art in runs.items():
        vectors[seed] = prediction_vector(art.predictions, art.final_state.spec.output_dim)
    return vectors


def stability_table(artifacts: Sequence[RunArtifact]) -> StabilityReport:
    """Per algorithm: mean prediction similarity over all unordered seed pairs.

    Ten seeds give 45 pairs. Needs at least two runs per algorithm.
    """
    if not artifacts:
        raise ValueError("no runs supplied")
    datasets = sorted({a.dataset_name for a in artifacts})
    values: dict[str, dict[str, float]] = {}
    n_pairs: dict[str, dict[str, int]] = {}
    for dataset in datasets:
        for algo, runs in _group_runs(artifacts, dataset).items():
            if len(runs) < 2:
                raise ValueError(
                    f"stability of {algo} on {dataset} needs at least 2 runs, have {len(runs)}"
                )
            vectors = _prediction_vectors(runs)
            pairs = list(itertools.combinations(sorted(vectors), 2))
            sims = [cosine(vectors[a], vectors[b]) for a, b in pairs]
            values.setdefault(algo, {})[dataset] = sum(sims) / len(sims)
            n_pairs.setdefault(algo, {})[dataset] = len(pairs)
    return StabilityReport(_algorithm_order(set(values)), datasets, values, n_pairs)


def cross_algorithm_table(
    artifacts: Sequence[RunArtifact], dataset: str, seed_matched: bool = False
) -> SimilarityReport:
    """Prediction similarity between algorithms on one dataset.

    Entry (A, B) averages cosine over every (seed of A, seed of B) pair by
    default; with seed_matched=True only same-seed pairs are averaged. All
    algorithms must cover the same seed set; the diagonal is left absent.
    """
    groups = _group_runs(artifacts, dataset)
    if len(groups) < 2:
        raise ValueError(f"cross-algorithm table needs at least 2 algorithms, have {len(groups)}")
    seeds = _require_matching_seeds(groups)
    keys = _algorithm_order(set(groups))
    vectors = {algo: _prediction_vectors(groups[algo]) for algo in keys}
    lengths = {len(vectors[a][s]) for a in keys for s in seeds}
    if len(lengths) != 1:
        raise ValueError(f"prediction vectors differ in length across algorithms: {sorted(lengths)}")

    n = len(keys)
    values = np.full((n, n), np.nan)
    for i, j in itertools.combinations(range(n), 2):
        va, vb = vectors[keys[i]], vectors[keys[j]]
        if seed_matched:
            sims = [cosine(va[s], vb[s]) for s in seeds]
        else:
            sims = [cosine(va[s], vb[t]) for s in seeds for t in seeds]
        values[i, j] = values[j, i] = sum(sims) / len(sims)
    aggregation = "seed-matched pair mean" if seed_matched else "all-pairs mean"
    return SimilarityReport(keys, list(keys), values, dataset, aggregation)


def layer_similarity_table(
    artifacts: Sequence[RunArtifact], dataset: str, layer_index: int
) -> SimilarityReport:
    """Cosine between flattened weight matrices at one layer, averaged over seeds.

    Pairing is seed-matched: for each seed the two algorithms' runs started
    from bit-identical weights, so the comparison isolates what training
    did. Biases are excluded.
    """
    groups = _group_runs(artifacts, dataset)
    seeds = _require_matching_seeds(groups)
    keys = _algorithm_order(set(groups))

    shapes = {
        tuple(w.shape for w in groups[a][s].final_state.weights) for a in keys for s in seeds
    }
    if len(shapes) != 1:
        raise ValueError(f"runs disagree on architecture: {sorted(shapes)}")
    n_layers = len(next(iter(shapes)))
    if not 0 <= layer_index < n_layers:
        raise ValueError(f"layer index {layer_index} outside [0, {n_layers - 1}]")

    flat = {
        algo: {
            seed: Vector(groups[algo][seed].final_state.weights[layer_index].data.reshape(-1))
            for seed in seeds
        }
        for algo in keys
    }
    n = len(keys)
    values = np.full((n, n), np.nan)
    for i, j in itertools.combinations(range(n), 2):
        sims = [cosine(flat[keys[i]][s], flat[keys[j]][s]) for s in seeds]
        values[i, j] = values[j, i] = sum(sims) / len(sims)
    return SimilarityReport(
        keys, list(keys), values, dataset, "seed-matched mean over seeds", layer_index
    )


# --- report serialization ------------------------------------------------
#
# CSV and JSON writers share formatting rules so reruns are byte-identical:
# sorted keys, no timestamps, floats via repr.


def _write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_similarity_csv(report: SimilarityReport, path: str | Path) -> None:
    """Square matrix with empty cells on the absent diagonal."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + report.col_keys)
        for i, key in enumerate(report.row_keys):
            cells = [
                "" if math.isnan(report.values[i, j]) else repr(float(report.values[i, j]))
                for j in range(len(report.col_keys))
            ]
            writer.writerow([key] + cells)


def write_similarity_json(report: SimilarityReport, path: str | Path) -> None:
    entries = {}
    for i, a in enumerate(report.row_keys):
        for j, b in enumerate(report.col_keys):
            if not math.isnan(report.values[i, j]):
                entries.setdefault(a, {})[b] = float(report.values[i, j])
    payload = {
        "keys": report.row_keys,
        "values": entries,
        "dataset": report.dataset,
        "aggregation": report.aggregation,
    }
    if report.layer_index is not None:
        payload["layer_index"] = report.layer_index
    _write_json(path, payload)


def write_grid_csv(
    algorithms: list[str],
    datasets: list[str],
    cells: dict[str, dict[str, float]],
    path: str | Path,
) -> None:
    """Rows are algorithms, columns datasets: the shape of the printed tables."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm"] + datasets)
        for algo in algorithms:
            writer.writerow([algo] + [repr(float(cells[algo][d])) for d in datasets])


def write_accuracy_json(report: AccuracyReport, path: str | Path) -> None:
    per_seed = {
        algo: {
            dataset: [
                {"seed": seed, "accuracy": acc}
                for seed, acc in sorted(report.per_seed[algo][dataset].items())
            ]
            for dataset in report.per_seed[algo]
        }
        for algo in report.per_seed
    }
    _write_json(
        path,
        {
            "algorithms": report.algorithms,
            "datasets": report.datasets,
            "mean_accuracy": report.mean,
            "per_seed": per_seed,
        },
    )


def write_stability_json(report: StabilityReport, path: str | Path) -> None:
    _write_json(
        path,
        {
            "algorithms": report.algorithms,
            "datasets": report.datasets,
            "mean_pairwise_similarity": report.values,
            "n_pairs": report.n_pairs,
        },
    )
