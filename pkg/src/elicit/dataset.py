"""Document-keyword datasets: ingestion, train/test splits, heatmap aggregation.

Samples are documents, features are binary keyword-presence indicators, and
the target is a real citation-style score that gets z-scored on the training
split. The heatmap aggregation backs the category x feature view served to
the UI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, NotFoundError, ValidationError

RECORD_FIELDS = ("id", "keywords", "target", "category")


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with targets and per-sample category labels.

    `X` is N x K with entries in {0, 1}; `y` holds the (possibly standardized)
    targets. `target_scale` is (mean, sd) of the raw training targets when the
    dataset came out of :func:`split`, else None.
    """

    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    categories: tuple[str, ...]
    target_scale: tuple[float, float] | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise ValidationError("X must be a 2-d matrix")
        n, k = X.shape
        if n == 0 or k == 0:
            raise ValidationError("dataset must have positive N and K")
        if len(self.feature_names) != k:
            raise ValidationError("feature_names length does not match X columns")
        if len(set(self.feature_names)) != k:
            raise ValidationError("feature_names must be unique")
        if y.shape != (n,) or len(self.categories) != n:
            raise ValidationError("y/categories length does not match X rows")
        if not np.all((X == 0) | (X == 1)):
            raise ValidationError("X entries must be 0 or 1")
        if not np.all(np.isfinite(y)):
            raise ValidationError("targets must be finite")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "categories", tuple(self.categories))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def feature_index(self, name: str) -> int:
        try:
            return self._name_to_index[name]
        except KeyError:
            raise NotFoundError(f"unknown feature name: {name!r}") from None

    @cached_property
    def _name_to_index(self) -> dict[str, int]:
        return {name: j for j, name in enumerate(self.feature_names)}


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/test partition: same (dataset, spec) -> same split."""

    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class HeatmapData:
    """Category x feature aggregation for the elicitation view.

    `cell_mean[c, j]` is the mean target among row-category samples containing
    the column feature; cells with zero support are NaN (serialized as null,
    never 0 -- the UI must tell "no data" from "mean zero"). `total_count[j]`
    counts training samples containing the feature at all.
    """

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cell_mean: np.ndarray
    total_count: np.ndarray

    def to_payload(self) -> dict:
        cells = [
            [None if math.isnan(v) else v for v in row] for row in self.cell_mean.tolist()
        ]
        return {
            "rows": list(self.rows),
            "cols": list(self.cols),
            "cell_mean": cells,
            "total_count": [int(c) for c in self.total_count],
        }


def ingest(document_records: Iterable[Mapping]) -> Dataset:
    """Encode keyword presence into a binary feature matrix.

    Column order follows first appearance of each keyword; repeated keywords
    within one record still yield a single 1 (presence, not counts).
    """
    ids: set[str] = set()
    feature_order: dict[str, int] = {}
    rows: list[list[str]] = []
    targets: list[float] = []
    categories: list[str] = []
    for record in document_records:
        rec_id, keywords, target, category = _parse_record(record)
        if rec_id in ids:
            raise DataError(f"duplicate record id: {rec_id!r}")
        ids.add(rec_id)
        for kw in keywords:
            if kw not in feature_order:
                feature_order[kw] = len(feature_order)
        rows.append(keywords)
        targets.append(target)
        categories.append(category)
    if not rows:
        raise DataError("no records to ingest")
    if not feature_order:
        raise DataError("empty keyword universe: no record carries any keyword")
    X = np.zeros((len(rows), len(feature_order)))
    for i, keywords in enumerate(rows):
        for kw in keywords:
            X[i, feature_order[kw]] = 1.0
    return Dataset(
        feature_names=tuple(feature_order),
        X=X,
        y=np.asarray(targets),
        categories=tuple(categories),
    )


def _parse_record(record: Mapping) -> tuple[str, list[str], float, str]:
    missing = [f for f in RECORD_FIELDS if f not in record]
    if missing:
        raise DataError(f"record missing fields: {', '.join(missing)}")
    rec_id = record["id"]
    keywords = record["keywords"]
    target = record["target"]
    category = record["category"]
    if not isinstance(rec_id, str) or not rec_id:
        raise DataError("record id must be a non-empty string")
    if not isinstance(keywords, (list, tuple)) or not all(
        isinstance(k, str) for k in keywords
    ):
        raise DataError(f"record {rec_id!r}: keywords must be a list of strings")
    if isinstance(target, bool) or not isinstance(target, (int, float)):
        raise DataError(f"record {rec_id!r}: target must be a number")
    target = float(target)
    if not math.isfinite(target):
        raise DataError(f"record {rec_id!r}: non-finite target")
    if not isinstance(category, str):
        raise DataError(f"record {rec_id!r}: category must be a string")
    return rec_id, list(keywords), target, category


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition samples and z-score targets using training statistics only.

    The split is a deterministic shuffle under `spec.seed`; both partitions
    get targets standardized by the train mean/sd (population sd), so train
    targets come out with mean 0 and sd 1 exactly.
    """
    n = dataset.n_samples
    n_train = int(n * spec.train_fraction)
    if n_train == 0 or n_train == n:
        raise ValidationError(
            f"train_fraction={spec.train_fraction} yields an empty partition for N={n}"
        )
    order = np.random.default_rng(spec.seed).permutation(n)
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:])
    mu = float(np.mean(dataset.y[train_idx]))
    sd = float(np.std(dataset.y[train_idx]))
    if sd == 0.0:
        raise DataError("cannot standardize: training targets are constant")
    scale = (mu, sd)

    def take(idx: np.ndarray) -> Dataset:
        return Dataset(
            feature_names=dataset.feature_names,
            X=dataset.X[idx],
            y=(dataset.y[idx] - mu) / sd,
            categories=tuple(dataset.categories[i] for i in idx),
            target_scale=scale,
        )

    return take(train_idx), take(test_idx)


def destandardize(dataset: Dataset) -> np.ndarray:
    """Map standardized targets back to the raw scale recorded at split time."""
    if dataset.target_scale is None:
        raise ValidationError("dataset has no standardization record")
    mu, sd = dataset.target_scale
    return dataset.y * sd + mu


def heatmap_summary(train: Dataset, feature_ids: Sequence[int]) -> HeatmapData:
    """Aggregate mean target per (category, feature) cell over the training set."""
    k = train.n_features
    ids = list(feature_ids)
    for j in ids:
        if not 0 <= j < k:
            raise NotFoundError(f"unknown feature id: {j}")
    rows = tuple(sorted(set(train.categories)))
    cat_index = {c: i for i, c in enumerate(rows)}
    sub = train.X[:, ids]
    cell_sum = np.zeros((len(rows), len(ids)))
    cell_count = np.zeros((len(rows), len(ids)))
    for i in range(train.n_samples):
        c = cat_index[train.categories[i]]
        cell_sum[c] += sub[i] * train.y[i]
        cell_count[c] += sub[i]
    with np.errstate(invalid="ignore"):
        cell_mean = np.where(cell_count > 0, cell_sum / np.where(cell_count > 0, cell_count, 1), np.nan)
    return HeatmapData(
        rows=rows,
        cols=tuple(train.feature_names[j] for j in ids),
        cell_mean=cell_mean,
        total_count=cell_count.sum(axis=0).astype(np.int64),
    )


def load_records(path) -> list[dict]:
    """Read line-delimited JSON records, skipping blank lines."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: record must be a JSON object")
            records.append(obj)
    return records


DATASET_FORMAT = "elicit-dataset/1"


def save_dataset(dataset: Dataset, path, truth: Sequence[str] | None = None) -> None:
    """Persist an (unstandardized) dataset, optionally with oracle truth names."""
    payload = {
        "format": DATASET_FORMAT,
        "feature_names": list(dataset.feature_names),
        "X": dataset.X.astype(int).tolist(),
        "y": [float(v) for v in dataset.y],
        "categories": list(dataset.categories),
    }
    if truth is not None:
        payload["truth"] = list(truth)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> tuple[Dataset, list[str] | None]:
    """Load a dataset written by :func:`save_dataset`; returns (dataset, truth)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid dataset file ({exc.msg})") from exc
    if not isinstance(payload, dict) or payload.get("format") != DATASET_FORMAT:
        raise DataError(f"{path}: not a {DATASET_FORMAT} file")
    try:
        dataset = Dataset(
            feature_names=tuple(payload["feature_names"]),
            X=np.asarray(payload["X"], dtype=np.float64),
            y=np.asarray(payload["y"], dtype=np.float64),
            categories=tuple(payload["categories"]),
        )
    except KeyError as exc:
        raise DataError(f"{path}: dataset file missing field {exc}") from exc
    truth = payload.get("truth")
    if truth is not None:
        truth = [str(t) for t in truth]
    return dataset, truth
