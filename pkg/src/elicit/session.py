"""Orchestration of the elicitation loop: select, ask, update, re-predict.

A session owns one train/test pair, one descriptor matrix, and one condition:
NonInteractive fits the model once and stops; RandomOrder asks about features
in seeded random order; UserModelGuided lets the bandit pick. Every chain and
every random query batch gets a seed derived from (session seed, role tag,
iteration), so a transcript replays bit-identically.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import usermodel
from .dataset import Dataset
from .descriptors import DescriptorMatrix
from .errors import SnapshotError, StateConflictError, ValidationError
from .prediction import PosteriorChain, SamplerConfig, sample_posterior

_CHAIN_TAG = 1
_QUERY_TAG = 2

SNAPSHOT_FORMAT = "elicit-session/1"


class Condition(enum.Enum):
    """The three study arms; fixed at session creation."""

    NON_INTERACTIVE = "c1"
    RANDOM_ORDER = "c2"
    USER_MODEL_GUIDED = "c3"

    @classmethod
    def parse(cls, value) -> "Condition":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(
                f"unknown condition {value!r}; expected one of c1, c2, c3"
            ) from None


@dataclass(frozen=True)
class SessionConfig:
    max_iterations: int = 20
    batch_size: int = 10
    b: float = 0.5
    lam: float = 1e-3
    alpha: float = 0.5
    delta: float = 0.05
    beta: float = 0.01
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "batch_size": self.batch_size,
            "b": self.b,
            "lam": self.lam,
            "alpha": self.alpha,
            "delta": self.delta,
            "beta": self.beta,
            "sampler": self.sampler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = dict(d)
        d["sampler"] = SamplerConfig(**d["sampler"])
        return cls(**d)


@dataclass(frozen=True)
class IterationResult:
    """What one completed feedback round produced."""

    iteration: int
    mse: float
    n_positive: int
    n_negative: int
    mean_relevance: float
    predictions_digest: str


def _chain_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence((seed, _CHAIN_TAG, t)).generate_state(1)[0])


def _query_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _QUERY_TAG, t)))


def _predictions_digest(chain: PosteriorChain, test: Dataset) -> str:
    preds = np.ascontiguousarray(test.X @ chain.w_mean, dtype=np.float64)
    return hashlib.sha256(preds.tobytes()).hexdigest()[:16]


@dataclass
class Session:
    id: str
    condition: Condition
    train: Dataset
    test: Dataset
    descriptors: DescriptorMatrix
    config: SessionConfig
    seed: int
    t: int = 0
    r: np.ndarray = field(default=None)  # type: ignore[assignment]
    um: usermodel.UserModelState = field(default=None)  # type: ignore[assignment]
    chain: PosteriorChain = field(default=None)  # type: ignore[assignment]
    mse_history: list[float] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return (
            self.condition is Condition.NON_INTERACTIVE
            or self.t >= self.config.max_iterations
        )

    @property
    def pending_query(self) -> tuple[int, ...] | None:
        return self.um.pending if self.um is not None else None

    @property
    def n_features(self) -> int:
        return self.train.n_features


def create(
    train: Dataset,
    test: Dataset,
    descriptors: DescriptorMatrix,
    condition,
    config: SessionConfig | None = None,
    seed: int = 0,
    session_id: str | None = None,
) -> Session:
    """Fit the no-feedback model, warm-start the user model, record MSE 0."""
    condition = Condition.parse(condition)
    config = config or SessionConfig()
    if train.n_features != test.n_features:
        raise ValidationError("train and test disagree on feature count")
    if descriptors.n_features != train.n_features:
        raise ValidationError("descriptor matrix does not match the feature count")
    if train.feature_names != test.feature_names:
        raise ValidationError("train and test disagree on feature names")

    k = train.n_features
    r = np.zeros(k, dtype=np.int64)
    chain = sample_posterior(train, r, config.sampler, seed=_chain_seed(seed, 0))
    preds = test.X @ chain.w_mean
    mse0 = float(np.mean((test.y - preds) ** 2))

    w_pseudo = (
        chain.w_mean
        if condition is Condition.USER_MODEL_GUIDED
        else np.zeros(k)
    )
    um = usermodel.init_with_pseudo(
        descriptors,
        w_pseudo,
        beta=config.beta,
        b=config.b,
        lam=config.lam,
        alpha=config.alpha,
        delta=config.delta,
    )
    return Session(
        id=session_id or f"session-{condition.value}-{seed}",
        condition=condition,
        train=train,
        test=test,
        descriptors=descriptors,
        config=config,
        seed=seed,
        r=r,
        um=um,
        chain=chain,
        mse_history=[mse0],
    )


def next_query(session: Session) -> tuple[int, ...]:
    """Issue the next batch of feature ids; exactly one batch may be open."""
    if session.terminal:
        raise StateConflictError("session is terminal; no further queries")
    if session.pending_query is not None:
        raise StateConflictError("a pending query is already outstanding")
    t_next = session.t + 1
    if session.condition is Condition.USER_MODEL_GUIDED:
        est = usermodel.estimate(session.um, t_next)
        ids = usermodel.select(session.um, est, session.config.batch_size)
    else:
        unqueried = sorted(set(range(session.n_features)) - session.um.queried)
        if not unqueried:
            ids = ()
        else:
            rng = _query_rng(session.seed, t_next)
            n = min(session.config.batch_size, len(unqueried))
            picked = rng.choice(len(unqueried), size=n, replace=False)
            ids = tuple(unqueried[i] for i in picked)
    if not ids:
        raise StateConflictError("all features have been queried")
    session.um = usermodel.with_query(session.um, ids)
    return ids


def submit_feedback(session: Session, responses) -> IterationResult:
    """Record one batch of binary responses and refresh the model.

    Positive responses flip the feature's prior to the half-normal branch
    and stay flipped; negative responses inform only the user model. The
    chain is re-sampled from scratch under an iteration-indexed seed.
    """
    if session.terminal:
        raise StateConflictError("session is terminal; feedback not accepted")
    if session.pending_query is None:
        raise StateConflictError("no pending query to answer")
    issued = session.pending_query
    responses = {int(k): int(v) for k, v in dict(responses).items()}
    session.um = usermodel.record(session.um, responses)

    t_new = session.t + 1
    for fid, resp in responses.items():
        if resp == 1:
            session.r[fid] = 1
    session.chain = sample_posterior(
        session.train, session.r, session.config.sampler,
        seed=_chain_seed(session.seed, t_new),
    )
    preds = session.test.X @ session.chain.w_mean
    mse = float(np.mean((session.test.y - preds) ** 2))
    session.t = t_new
    session.mse_history.append(mse)
    session.transcript.append(
        {
            "query": [int(j) for j in issued],
            "responses": {str(j): responses[j] for j in sorted(responses)},
        }
    )

    est = usermodel.estimate(session.um, max(t_new, 1))
    return IterationResult(
        iteration=t_new,
        mse=mse,
        n_positive=int(session.r.sum()),
        n_negative=sum(1 for _, resp, _ in session.um.feedback if resp == 0),
        mean_relevance=float(np.mean(est.r_hat_unit)),
        predictions_digest=_predictions_digest(session.chain, session.test),
    )


def snapshot(session: Session) -> dict:
    """Versioned, JSON-ready record: config, seeds, transcript, metrics.

    Datasets and descriptors are deliberately not embedded; restore() takes
    them as arguments and replays the transcript against them.
    """
    return {
        "format": SNAPSHOT_FORMAT,
        "id": session.id,
        "condition": session.condition.value,
        "seed": session.seed,
        "config": session.config.to_dict(),
        "transcript": [dict(step) for step in session.transcript],
        "pending": list(session.pending_query) if session.pending_query else None,
        "mse_history": list(session.mse_history),
    }


def restore(
    record: dict,
    train: Dataset,
    test: Dataset,
    descriptors: DescriptorMatrix,
) -> Session:
    """Rebuild a session by replaying its transcript; verify the metrics match.

    Any divergence between the replay and the recorded history (different
    queries, different MSEs) means the record does not describe these inputs
    and raises instead of returning a half-right session.
    """
    if not isinstance(record, dict) or record.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"not a {SNAPSHOT_FORMAT} record")
    required = {"id", "condition", "seed", "config", "transcript", "mse_history"}
    missing = required - set(record)
    if missing:
        raise SnapshotError(f"snapshot record is missing field {sorted(missing)[0]!r}")
    try:
        config = SessionConfig.from_dict(record["config"])
    except (TypeError, KeyError) as exc:
        raise SnapshotError(f"snapshot config is malformed: {exc}") from None
    session = create(
        train,
        test,
        descriptors,
        record["condition"],
        config,
        seed=record["seed"],
        session_id=record["id"],
    )
    for step in record["transcript"]:
        ids = next_query(session)
        recorded = tuple(int(j) for j in step["query"])
        if tuple(sorted(ids)) != tuple(sorted(recorded)):
            raise SnapshotError(
                "replayed query does not match the recorded transcript"
            )
        submit_feedback(
            session, {int(k): int(v) for k, v in step["responses"].items()}
        )
    if record.get("pending"):
        ids = next_query(session)
        if tuple(sorted(ids)) != tuple(sorted(int(j) for j in record["pending"])):
            raise SnapshotError("replayed pending query does not match the record")
    replayed = [float(v) for v in session.mse_history]
    recorded_hist = [float(v) for v in record["mse_history"]]
    if replayed != recorded_hist:
        raise SnapshotError("replayed metric history does not match the record")
    return session


def snapshot_json(session: Session) -> str:
    return json.dumps(snapshot(session), sort_keys=True)


def restore_json(
    text: str, train: Dataset, test: Dataset, descriptors: DescriptorMatrix
) -> Session:
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from None
    return restore(record, train, test, descriptors)
