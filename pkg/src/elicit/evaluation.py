"""Simulated-expert benchmark: condition comparison and permutation testing.

A synthetic world stands in for the citation study: features belong to topic
blocks, documents activate the features of their topic, and an auxiliary
corpus shares the same topic process so the descriptor pipeline can discover
the block structure. An oracle expert answers relevance queries from the
ground truth, optionally flipping each answer with a fixed probability. The
comparison statistics are pointwise-average MSE curves, the max-distance
statistic between them, and a permutation test over run labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.stats

from . import session as session_mod
from .dataset import Dataset, SplitSpec, split
from .descriptors import (
    AuxCorpus,
    DescriptorMatrix,
    build_tfidf,
    cluster,
    filter_corpus,
)
from .errors import DataError, ValidationError
from .session import Condition, SessionConfig

_ORACLE_TAG = 3
_PERM_TAG = 4
_SYNTH_TAG = 5
_CORPUS_TAG = 6

N_TOPICS = 20
# Activation is mostly topic-independent: a mild in-topic boost keeps the
# block flavor without making target variance hostage to how the few
# same-topic documents fall across the train/test split. The rates give each
# feature roughly 20 supporting training documents at the benchmark scale.
P_ACTIVE_IN = 0.45
P_ACTIVE_OUT = 0.25
NOISE_SD = 1.15
DISTRACTOR_SD = 0.05  # non-relevant weight spread, as a fraction of effect_size
RELEVANT_PER_TOPIC = 10  # spread truth over ceil(n_relevant / 10) topics
AUX_ACTIVE_IN = 0.5
AUX_ACTIVE_OUT = 0.005

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _feature_names(k: int) -> tuple[str, ...]:
    return tuple(f"kw{j:04d}" for j in range(k))


def _topic_of(k: int, n_topics: int) -> np.ndarray:
    return np.arange(k) % n_topics


@dataclass(frozen=True)
class OracleExpert:
    """Deterministic stand-in for a participant: truth plus per-feature flips."""

    true_relevance: np.ndarray
    noise_eps: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.true_relevance, dtype=np.int64)
        if r.ndim != 1 or not np.all((r == 0) | (r == 1)):
            raise ValidationError("true_relevance must be a binary vector")
        if not 0.0 <= self.noise_eps < 0.5:
            raise ValidationError("noise_eps must lie in [0, 0.5)")
        r.flags.writeable = False
        object.__setattr__(self, "true_relevance", r)

    def respond(self, feature_ids: Sequence[int], seed: int) -> dict[int, int]:
        """Answer a query batch; each flip depends only on (seed, feature id)."""
        out = {}
        for fid in feature_ids:
            fid = int(fid)
            ans = int(self.true_relevance[fid])
            if self.noise_eps > 0.0:
                rng = np.random.default_rng(
                    np.random.SeedSequence((seed, _ORACLE_TAG, fid))
                )
                if rng.random() < self.noise_eps:
                    ans = 1 - ans
            out[fid] = ans
        return out


@dataclass(frozen=True)
class RunResult:
    """One simulated session: the condition, its seed, and the MSE curve."""

    condition: str
    seed: int
    mse_curve: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "condition", Condition.parse(self.condition).value)
        object.__setattr__(
            self, "mse_curve", tuple(float(v) for v in self.mse_curve)
        )
        if not self.mse_curve:
            raise ValidationError("mse_curve must be nonempty")


@dataclass(frozen=True)
class PermutationTestResult:
    observed_stat: float
    p_value: float
    n_permutations: int
    distribution: np.ndarray | None = None


@dataclass(frozen=True)
class BenchmarkConfig:
    """Everything a simulated run needs besides condition, oracle, and seed."""

    train: Dataset
    test: Dataset
    descriptors: DescriptorMatrix
    session: SessionConfig


def generate_synthetic_full(
    K: int,
    N: int,
    n_relevant: int,
    effect_size: float,
    seed: int,
    n_topics: int = N_TOPICS,
) -> tuple[Dataset, tuple[int, ...], int]:
    """Unsplit topic-blocked design; returns (dataset, truth ids, split seed).

    Features are assigned to topic blocks round-robin; each document draws a
    topic and activates same-topic features at a much higher rate than the
    rest. Relevant features occupy as few topics as possible, so relevance
    generalizes along the block structure the descriptors can see.
    """
    if n_relevant > K:
        raise ValidationError("n_relevant cannot exceed the feature count")
    if N < 4:
        raise ValidationError("need at least 4 documents to split")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _SYNTH_TAG)))
    n_topics = min(n_topics, K)
    topics = _topic_of(K, n_topics)

    relevant: list[int] = []
    topic_order = rng.permutation(n_topics)
    pools = {
        int(topic): list(
            np.flatnonzero(topics == topic)[
                rng.permutation(np.count_nonzero(topics == topic))
            ]
        )
        for topic in topic_order
    }
    quota = RELEVANT_PER_TOPIC
    while len(relevant) < n_relevant:
        took_any = False
        for topic in topic_order:
            pool = pools[int(topic)]
            take = min(quota, n_relevant - len(relevant), len(pool))
            for _ in range(take):
                relevant.append(int(pool.pop()))
                took_any = True
            if len(relevant) >= n_relevant:
                break
        if not took_any:
            break

    # Center distractor weights so E[x'w] = 0 under uniform activation: the
    # regression has no intercept, and a one-sided weight bulk would otherwise
    # push every prediction off the standardized target's zero mean.
    mu_d = n_relevant * effect_size / max(K - n_relevant, 1)
    w = rng.normal(-mu_d, DISTRACTOR_SD * abs(effect_size), size=K)
    w[relevant] = effect_size

    doc_topics = rng.integers(0, n_topics, size=N)
    p = np.where(topics[None, :] == doc_topics[:, None], P_ACTIVE_IN, P_ACTIVE_OUT)
    X = (rng.random((N, K)) < p).astype(np.float64)
    if not X.any():
        raise DataError("degenerate synthetic design: all-zero activation matrix")
    y = X @ w + rng.normal(0.0, NOISE_SD, size=N)

    full = Dataset(
        feature_names=_feature_names(K),
        X=X,
        y=y,
        categories=tuple(f"topic-{t:02d}" for t in doc_topics),
    )
    split_seed = int(rng.integers(2**31))
    return full, tuple(sorted(relevant)), split_seed


def generate_synthetic(
    K: int,
    N: int,
    n_relevant: int,
    effect_size: float,
    seed: int,
    n_topics: int = N_TOPICS,
) -> tuple[Dataset, Dataset, tuple[int, ...]]:
    """Standardized train/test halves of a synthetic design, plus truth ids."""
    full, truth, split_seed = generate_synthetic_full(
        K, N, n_relevant, effect_size, seed, n_topics
    )
    train, test = split(full, SplitSpec(train_fraction=0.5, seed=split_seed))
    return train, test, truth


def synthetic_corpus(
    k: int, n_docs: int, seed: int, n_topics: int = N_TOPICS
) -> AuxCorpus:
    """Auxiliary documents drawn from the same topic process as the design."""
    if n_docs < 1:
        raise ValidationError("n_docs must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _CORPUS_TAG)))
    n_topics = min(n_topics, k)
    topics = _topic_of(k, n_topics)
    names = np.array(_feature_names(k))
    docs = []
    for _ in range(n_docs):
        topic = int(rng.integers(n_topics))
        p = np.where(topics == topic, AUX_ACTIVE_IN, AUX_ACTIVE_OUT)
        mask = rng.random(k) < p
        while not mask.any():
            mask = rng.random(k) < p
        docs.append(tuple(names[mask]))
    return AuxCorpus.from_docs(docs)


@dataclass(frozen=True)
class SyntheticWorld:
    train: Dataset
    test: Dataset
    descriptors: DescriptorMatrix
    truth: tuple[int, ...]


def synthetic_world(
    K: int,
    N: int,
    n_relevant: int,
    effect_size: float,
    seed: int,
    aux_docs: int = 1000,
    n_clusters: int = N_TOPICS,
    cluster_sample: int = 1000,
) -> SyntheticWorld:
    """Full benchmark fixture: data, truth, and descriptors built end to end."""
    train, test, truth = generate_synthetic(K, N, n_relevant, effect_size, seed)
    aux = synthetic_corpus(K, aux_docs, seed)
    aux = filter_corpus(aux, train.feature_names)
    sample = min(cluster_sample, len(aux.docs))
    model = cluster(aux, min(n_clusters, sample), sample, seed)
    Z = build_tfidf(aux, model, train.feature_names)
    return SyntheticWorld(train=train, test=test, descriptors=Z, truth=truth)


def simulate_run(
    condition, oracle: OracleExpert, config: BenchmarkConfig, seed: int
) -> RunResult:
    """Drive one full session, answering every query with the oracle."""
    condition = Condition.parse(condition)
    sess = session_mod.create(
        config.train,
        config.test,
        config.descriptors,
        condition,
        config.session,
        seed=seed,
    )
    while not sess.terminal:
        ids = session_mod.next_query(sess)
        session_mod.submit_feedback(sess, oracle.respond(ids, seed))
    return RunResult(
        condition=condition.value, seed=seed, mse_curve=tuple(sess.mse_history)
    )


def max_distance_statistic(curve_a, curve_b) -> float:
    """max_t |a_t - b_t|, the distance the permutation test ranks."""
    a = np.asarray(curve_a, dtype=np.float64)
    b = np.asarray(curve_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("curves must be 1-d and of equal length")
    return float(np.max(np.abs(a - b)))


def _curve_matrix(runs: Sequence) -> np.ndarray:
    curves = [r.mse_curve if isinstance(r, RunResult) else tuple(r) for r in runs]
    if not curves:
        raise ValidationError("group must be nonempty")
    length = len(curves[0])
    if any(len(c) != length for c in curves):
        raise ValidationError("curves within a group must have equal length")
    return np.asarray(curves, dtype=np.float64)


def permutation_test(
    group_a_runs: Sequence,
    group_b_runs: Sequence,
    n_perm: int = 10_000,
    seed: int = 0,
    keep_distribution: bool = False,
) -> PermutationTestResult:
    """Relabel whole runs between groups and compare max-distance statistics.

    p = (1 + #{permuted stat >= observed}) / (1 + n_perm), so p is never 0
    and the identity labeling counts itself.
    """
    if n_perm < 1:
        raise ValidationError("n_perm must be >= 1")
    a = _curve_matrix(group_a_runs)
    b = _curve_matrix(group_b_runs)
    if a.shape[1] != b.shape[1]:
        raise ValidationError("groups must share curve length")
    observed = float(np.max(np.abs(a.mean(axis=0) - b.mean(axis=0))))

    pooled = np.vstack([a, b])
    n, t_len = pooled.shape
    na = a.shape[0]
    nb = b.shape[0]
    total = pooled.sum(axis=0)

    rng = np.random.default_rng(np.random.SeedSequence((seed, _PERM_TAG)))
    count = 0
    dist = np.empty(n_perm) if keep_distribution else None
    done = 0
    chunk_rows = max(1, min(n_perm, 20_000_000 // (max(n * t_len, 1) * 8)))
    while done < n_perm:
        m = min(chunk_rows, n_perm - done)
        order = np.argsort(rng.random((m, n)), axis=1)
        idx_a = order[:, :na]
        sum_a = pooled[idx_a].sum(axis=1)
        mean_a = sum_a / na
        mean_b = (total[None, :] - sum_a) / nb
        stats = np.max(np.abs(mean_a - mean_b), axis=1)
        count += int(np.count_nonzero(stats >= observed))
        if dist is not None:
            dist[done : done + m] = stats
        done += m
    return PermutationTestResult(
        observed_stat=observed,
        p_value=(1 + count) / (1 + n_perm),
        n_permutations=n_perm,
        distribution=dist,
    )


def wilcoxon_final(group_a_runs: Sequence, group_b_runs: Sequence) -> float:
    """Paired Wilcoxon signed-rank p-value on final MSEs, pairing by position."""
    a = _curve_matrix(group_a_runs)[:, -1]
    b = _curve_matrix(group_b_runs)[:, -1]
    if a.size != b.size:
        raise ValidationError("paired groups must have equal size")
    return float(scipy.stats.wilcoxon(a, b).pvalue)


def mean_curve(runs: Sequence) -> np.ndarray:
    return _curve_matrix(runs).mean(axis=0)


def curve_auc(curve) -> float:
    """Area under an MSE curve by the trapezoid rule over iteration index."""
    return float(_trapezoid(np.asarray(curve, dtype=np.float64)))


def summarize_runs(runs: Sequence[RunResult]) -> list[dict]:
    """Per-condition aggregates: run count, initial/final means, mean AUC."""
    by_cond: dict[str, list[RunResult]] = {}
    for run in runs:
        by_cond.setdefault(run.condition, []).append(run)
    out = []
    for cond in sorted(by_cond):
        group = by_cond[cond]
        curves = _curve_matrix(group)
        out.append(
            {
                "condition": cond,
                "n_runs": len(group),
                "mse_initial_mean": float(curves[:, 0].mean()),
                "mse_final_mean": float(curves[:, -1].mean()),
                "auc_mean": float(
                    np.mean([curve_auc(c) for c in curves])
                ),
            }
        )
    return out


RUNS_HEADER = ("condition", "seed", "t", "mse")


def save_runs(runs: Sequence[RunResult], path) -> None:
    """One row per run per iteration, tab-delimited, ordered by (condition, seed, t)."""
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write("\t".join(RUNS_HEADER) + "\n")
        for run in sorted(runs, key=lambda r: (r.condition, r.seed)):
            for t, mse in enumerate(run.mse_curve):
                fh.write(f"{run.condition}\t{run.seed}\t{t}\t{repr(mse)}\n")


def load_runs(path) -> list[RunResult]:
    path = str(path)
    rows: dict[tuple[str, int], list[tuple[int, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != RUNS_HEADER:
            raise DataError(f"{path}: expected header {'/'.join(RUNS_HEADER)}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns")
            cond, seed_s, t_s, mse_s = parts
            try:
                rows.setdefault((cond, int(seed_s)), []).append(
                    (int(t_s), float(mse_s))
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    runs = []
    for (cond, seed), entries in sorted(rows.items()):
        entries.sort()
        if [t for t, _ in entries] != list(range(len(entries))):
            raise DataError(
                f"{path}: run ({cond}, seed {seed}) has non-contiguous iterations"
            )
        runs.append(
            RunResult(condition=cond, seed=seed, mse_curve=tuple(m for _, m in entries))
        )
    return runs
