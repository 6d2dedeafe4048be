"""Feature descriptors from an auxiliary keyword corpus.

Documents are clustered by cosine distance on raw keyword-multiplicity
vectors (agglomerative, average linkage) on a seeded subsample; the rest are
assigned to the nearest centroid. Each prediction feature then gets a
descriptor row of cluster-wise tf times document-wise idf, so features that
live in similar documents end up with correlated descriptors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.sparse import csr_matrix
from scipy.spatial.distance import squareform

from .errors import DataError, ValidationError


@dataclass(frozen=True)
class AuxCorpus:
    """Keyword documents used only to describe features, never to fit targets."""

    docs: tuple[tuple[str, ...], ...]
    vocabulary: tuple[str, ...]

    def __post_init__(self):
        if not self.docs:
            raise DataError("auxiliary corpus is empty")
        if any(len(d) == 0 for d in self.docs):
            raise DataError("auxiliary corpus contains an empty document")
        union = sorted({kw for doc in self.docs for kw in doc})
        if list(self.vocabulary) != union:
            raise ValidationError("vocabulary must be the sorted union of doc keywords")

    @classmethod
    def from_docs(cls, docs: Iterable[Sequence[str]]) -> "AuxCorpus":
        docs = tuple(tuple(d) for d in docs)
        vocab = tuple(sorted({kw for doc in docs for kw in doc}))
        return cls(docs=docs, vocabulary=vocab)

    def count_matrix(self) -> csr_matrix:
        """Docs x vocabulary keyword-multiplicity matrix (sparse)."""
        index = {kw: j for j, kw in enumerate(self.vocabulary)}
        rows, cols, data = [], [], []
        for i, doc in enumerate(self.docs):
            seen: dict[int, int] = {}
            for kw in doc:
                j = index[kw]
                seen[j] = seen.get(j, 0) + 1
            for j, count in sorted(seen.items()):
                rows.append(i)
                cols.append(j)
                data.append(float(count))
        return csr_matrix(
            (data, (rows, cols)), shape=(len(self.docs), len(self.vocabulary))
        )


@dataclass(frozen=True)
class ClusterModel:
    """Document clustering: centroids in keyword space plus a full assignment."""

    n_clusters: int
    vocabulary: tuple[str, ...]
    centroids: np.ndarray
    assignment: np.ndarray

    def __post_init__(self):
        if self.centroids.shape != (self.n_clusters, len(self.vocabulary)):
            raise ValidationError("centroid matrix shape mismatch")
        labels = np.asarray(self.assignment)
        if labels.ndim != 1 or not np.all((labels >= 0) & (labels < self.n_clusters)):
            raise ValidationError("assignment labels must lie in [0, n_clusters)")


@dataclass(frozen=True)
class DescriptorMatrix:
    """K x N_Z matrix of per-feature tf-idf descriptors over document clusters."""

    Z: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        Z = np.ascontiguousarray(self.Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[0] != len(self.feature_names):
            raise ValidationError("Z must be K x N_Z with one row per feature")
        if not np.all(np.isfinite(Z)):
            raise DataError("descriptor matrix contains non-finite entries")
        if np.any(Z < 0):
            raise DataError("descriptor matrix contains negative entries")
        Z.flags.writeable = False
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_features(self) -> int:
        return self.Z.shape[0]

    @property
    def n_descriptors(self) -> int:
        return self.Z.shape[1]


def filter_corpus(aux: AuxCorpus, prediction_features: Sequence[str]) -> AuxCorpus:
    """Keep only documents sharing at least one keyword with the prediction data."""
    wanted = set(prediction_features)
    if not wanted:
        raise ValidationError("prediction_features must be nonempty")
    kept = tuple(doc for doc in aux.docs if wanted.intersection(doc))
    if not kept:
        raise DataError("no auxiliary document overlaps the prediction features")
    return AuxCorpus.from_docs(kept)


def cluster(
    aux: AuxCorpus, n_clusters: int, train_sample_size: int, seed: int
) -> ClusterModel:
    """Agglomerative clustering (average linkage, cosine) on a seeded subsample.

    Documents outside the subsample are assigned to the nearest centroid by
    cosine distance; centroids are means in raw multiplicity space.
    """
    n_docs = len(aux.docs)
    if train_sample_size > n_docs:
        raise ValidationError("train_sample_size exceeds corpus size")
    if not 1 <= n_clusters <= train_sample_size:
        raise ValidationError("need 1 <= n_clusters <= train_sample_size")
    counts = aux.count_matrix()
    rng = np.random.default_rng(seed)
    sample_idx = np.sort(rng.choice(n_docs, size=train_sample_size, replace=False))
    sample = counts[sample_idx].toarray()

    norms = np.linalg.norm(sample, axis=1)
    sample_unit = sample / norms[:, None]
    if train_sample_size > 1:
        sim = np.clip(sample_unit @ sample_unit.T, -1.0, 1.0)
        dist = 1.0 - sim
        np.fill_diagonal(dist, 0.0)
        condensed = squareform(dist, checks=False)
        labels = fcluster(linkage(condensed, method="average"), t=n_clusters, criterion="maxclust") - 1
    else:
        labels = np.zeros(1, dtype=np.int64)
    if len(np.unique(labels)) < n_clusters:
        raise DataError(
            "degenerate corpus: hierarchical clustering cannot produce "
            f"{n_clusters} distinct clusters"
        )

    centroids = np.vstack([sample[labels == c].mean(axis=0) for c in range(n_clusters)])
    assignment = np.empty(n_docs, dtype=np.int64)
    assignment[sample_idx] = labels
    rest = np.setdiff1d(np.arange(n_docs), sample_idx)
    if rest.size:
        rest_counts = counts[rest].toarray()
        rest_unit = rest_counts / np.linalg.norm(rest_counts, axis=1)[:, None]
        centroid_unit = centroids / np.linalg.norm(centroids, axis=1)[:, None]
        # argmax similarity = nearest in cosine distance; ties go to the lowest id
        assignment[rest] = np.argmax(rest_unit @ centroid_unit.T, axis=1)
    return ClusterModel(
        n_clusters=n_clusters,
        vocabulary=aux.vocabulary,
        centroids=centroids,
        assignment=assignment,
    )


def build_tfidf(
    aux: AuxCorpus, model: ClusterModel, features: Sequence[str]
) -> DescriptorMatrix:
    """Cluster-wise tf times document-wise idf for each prediction feature.

    tf(j, c) = occurrences of j in cluster c / total occurrences in cluster c;
    idf(j) = ln(D / df(j)). Features absent from the corpus get a zero row.
    """
    if model.vocabulary != aux.vocabulary:
        raise ValidationError("cluster model was built on a different corpus")
    if len(model.assignment) != len(aux.docs):
        raise ValidationError("cluster model does not cover all documents")
    counts = aux.count_matrix()
    n_docs = len(aux.docs)
    df = np.asarray((counts > 0).sum(axis=0)).ravel()

    onehot = csr_matrix(
        (
            np.ones(n_docs),
            (np.arange(n_docs), np.asarray(model.assignment)),
        ),
        shape=(n_docs, model.n_clusters),
    )
    occ = np.asarray((counts.T @ onehot).todense())  # vocab x clusters
    cluster_total = occ.sum(axis=0)
    if np.any(cluster_total == 0):
        raise DataError("a cluster contains no keyword occurrences")
    tf = occ / cluster_total

    vocab_index = {kw: j for j, kw in enumerate(aux.vocabulary)}
    Z = np.zeros((len(features), model.n_clusters))
    for i, name in enumerate(features):
        j = vocab_index.get(name)
        if j is None or df[j] == 0:
            continue
        Z[i] = tf[j] * math.log(n_docs / df[j])
    return DescriptorMatrix(Z=Z, feature_names=tuple(features))


def load_corpus(path) -> AuxCorpus:
    """Read an auxiliary corpus from line-delimited JSON records.

    Each line must be an object with a "keywords" array of strings; other
    fields are ignored. Blank lines are skipped.
    """
    path = str(path)
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict) or "keywords" not in rec:
                raise DataError(f"{path}:{lineno}: record lacks a 'keywords' field")
            kws = rec["keywords"]
            if not isinstance(kws, list) or not all(isinstance(k, str) for k in kws):
                raise DataError(f"{path}:{lineno}: 'keywords' must be a string array")
            docs.append(tuple(kws))
    if not docs:
        raise DataError(f"{path}: corpus is empty")
    return AuxCorpus.from_docs(docs)


def save_corpus(aux: AuxCorpus, path) -> None:
    """Write a corpus as line-delimited JSON, one document per line."""
    with open(str(path), "w", encoding="utf-8") as fh:
        for i, doc in enumerate(aux.docs):
            fh.write(json.dumps({"id": i, "keywords": list(doc)}, sort_keys=True))
            fh.write("\n")


def save_descriptors(matrix: DescriptorMatrix, path) -> None:
    """Write the descriptor matrix as TSV with a header row of cluster ids."""
    with open(path, "w", encoding="utf-8") as fh:
        header = ["feature"] + [str(c) for c in range(matrix.n_descriptors)]
        fh.write("\t".join(header) + "\n")
        for name, row in zip(matrix.feature_names, matrix.Z):
            fh.write("\t".join([name] + [repr(float(v)) for v in row]) + "\n")


def load_descriptors(path) -> DescriptorMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty descriptor file")
    header = lines[0].split("\t")
    if header[0] != "feature" or header[1:] != [str(c) for c in range(len(header) - 1)]:
        raise DataError(f"{path}: malformed descriptor header")
    names, rows = [], []
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != len(header):
            raise DataError(f"{path}: row width does not match header")
        names.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return DescriptorMatrix(Z=np.asarray(rows), feature_names=tuple(names))
