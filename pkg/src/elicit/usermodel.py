"""Bandit model of the expert: which features are worth asking about next.

Feature relevance is regressed on tf-idf descriptors by regularized least
squares, so feedback on one feature informs estimates for features with
similar descriptor profiles. Selection is UCB: estimate plus a
high-probability confidence width from the regularized Gram matrix, in the
SupLinUCB style. A pseudo-input derived from the prediction model's
coefficients warm-starts the regression before any human feedback exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .descriptors import DescriptorMatrix
from .errors import ValidationError


@dataclass(frozen=True)
class UserModelState:
    """Descriptors plus the full feedback log; estimates are derived, not stored.

    `queried` is computed from the log and the pending batch, so the
    "never ask twice" rule cannot drift out of sync with recorded feedback.
    """

    Z: DescriptorMatrix
    feedback: tuple[tuple[int, int, int], ...] = ()  # (feature id, response, iteration)
    b: float = 0.5
    lam: float = 1e-3
    alpha: float = 0.5
    delta: float = 0.05
    beta: float = 0.01
    r0: np.ndarray | None = None
    pending: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValidationError("lambda must be > 0")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValidationError("alpha and beta must be >= 0")
        if not 0.0 < self.delta < 1.0:
            raise ValidationError("delta must lie in (0, 1)")
        if not 0.0 < self.b < 1.0:
            raise ValidationError("default relevance b must lie in (0, 1)")
        r0 = self.r0
        if r0 is None:
            r0 = np.full(self.Z.n_features, self.b)
        r0 = np.asarray(r0, dtype=np.float64)
        if r0.shape != (self.Z.n_features,):
            raise ValidationError("r0 must have one entry per feature")
        r0.flags.writeable = False
        object.__setattr__(self, "r0", r0)
        for fid, resp, _ in self.feedback:
            if resp not in (0, 1):
                raise ValidationError("feedback responses must be 0 or 1")
            if not 0 <= fid < self.Z.n_features:
                raise ValidationError(f"feedback feature id {fid} out of range")

    @property
    def n_features(self) -> int:
        return self.Z.n_features

    @property
    def queried(self) -> frozenset[int]:
        ids = {fid for fid, _, _ in self.feedback}
        if self.pending is not None:
            ids.update(self.pending)
        return frozenset(ids)

    @property
    def next_iteration(self) -> int:
        return max((it for _, _, it in self.feedback), default=0) + 1


@dataclass(frozen=True)
class RelevanceEstimate:
    """Per-feature relevance estimates with confidence widths and UCB scores."""

    v_hat: np.ndarray
    r_hat: np.ndarray
    r_hat_unit: np.ndarray
    c: np.ndarray
    ucb: np.ndarray
    rho: float


def logistic(x):
    """1 / (1 + exp(-x)), elementwise on arrays."""
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def logit(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValidationError("logit requires p in (0, 1)")
    return math.log(p / (1.0 - p))


def init_with_pseudo(
    Z: DescriptorMatrix,
    w_hat,
    beta: float = 0.01,
    b: float = 0.5,
    lam: float = 1e-3,
    alpha: float = 0.5,
    delta: float = 0.05,
) -> UserModelState:
    """Build a fresh state whose pseudo-targets come from model coefficients.

    r0_j = b + 0.5 * w_hat_j / max_k |w_hat_k|, which maps the coefficients
    into [b - 0.5, b + 0.5]; an all-zero w_hat leaves r0 at b, making the
    pseudo-input inert.
    """
    w_hat = np.asarray(w_hat, dtype=np.float64)
    if w_hat.shape != (Z.n_features,):
        raise ValidationError("w_hat must have one entry per feature")
    scale = np.max(np.abs(w_hat))
    r0 = np.full(Z.n_features, b) if scale == 0.0 else b + 0.5 * w_hat / scale
    return UserModelState(
        Z=Z, b=b, lam=lam, alpha=alpha, delta=delta, beta=beta, r0=r0
    )


def _gram_and_rhs(state: UserModelState) -> tuple[np.ndarray, np.ndarray]:
    Z = state.Z.Z
    n_z = state.Z.n_descriptors
    A = state.lam * np.eye(n_z)
    rhs = np.zeros(n_z)
    if state.beta > 0.0:
        A += state.beta * (Z.T @ Z)
        rhs += state.beta * (Z.T @ (state.r0 - state.b))
    if state.feedback:
        idx = np.array([fid for fid, _, _ in state.feedback], dtype=np.int64)
        resp = np.array([r for _, r, _ in state.feedback], dtype=np.float64)
        Zt = Z[idx]
        A += Zt.T @ Zt
        rhs += Zt.T @ (resp - state.b)
    return A, rhs


def estimate(state: UserModelState, t: int) -> RelevanceEstimate:
    """Closed-form ridge estimates, widths, and UCB scores at round t.

    v_hat solves (Zt'Zt + beta Z'Z + lam I) v = Zt'(r - b) + beta Z'(r0 - b);
    widths are rho_t * sqrt(Z_j' G^-1 Z_j) over the same regularized Gram,
    with rho_t = sqrt(alpha * ln(2 t K / delta)). UCB ranking happens on the
    linear scale; the logistic-mapped estimates are for reporting only and
    send zero signal to b exactly.
    """
    if t < 1:
        raise ValidationError("t must be >= 1")
    Z = state.Z.Z
    A, rhs = _gram_and_rhs(state)
    v_hat = np.linalg.solve(A, rhs)
    r_hat = Z @ v_hat + state.b
    rho = math.sqrt(state.alpha * math.log(2.0 * t * state.n_features / state.delta))
    m = np.linalg.solve(A, Z.T)
    quad = np.einsum("jn,nj->j", Z, m)
    c = rho * np.sqrt(np.maximum(quad, 0.0))
    r_hat_unit = logistic(r_hat - state.b + logit(state.b))
    return RelevanceEstimate(
        v_hat=v_hat, r_hat=r_hat, r_hat_unit=r_hat_unit, c=c, ucb=r_hat + c, rho=rho
    )


def select(state: UserModelState, est: RelevanceEstimate, n: int) -> tuple[int, ...]:
    """The n unqueried features with the largest UCB, ties to the lower id.

    Returns fewer than n only when unqueried features run out; never repeats
    a feature that was already shown or is pending.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    queried = state.queried
    candidates = [j for j in range(state.n_features) if j not in queried]
    candidates.sort(key=lambda j: (-est.ucb[j], j))
    return tuple(candidates[:n])


def with_query(state: UserModelState, ids: Sequence[int]) -> UserModelState:
    """Mark a batch as pending; responses must cover it exactly."""
    if state.pending is not None:
        raise ValidationError("a pending query is already outstanding")
    ids = tuple(int(j) for j in ids)
    seen = {fid for fid, _, _ in state.feedback}
    for j in ids:
        if not 0 <= j < state.n_features:
            raise ValidationError(f"feature id {j} out of range")
        if j in seen:
            raise ValidationError(f"feature id {j} was already queried")
    if len(set(ids)) != len(ids):
        raise ValidationError("query contains duplicate feature ids")
    return replace(state, pending=ids)


def record(state: UserModelState, responses: Mapping[int, int]) -> UserModelState:
    """Append responses for exactly the pending batch and clear it.

    Responses for unqueried features, missing features, or features that
    already have feedback are contract violations, not silently dropped.
    """
    if state.pending is None:
        raise ValidationError("no pending query to record responses for")
    pending = set(state.pending)
    got = {int(k): int(v) for k, v in responses.items()}
    extra = sorted(set(got) - pending)
    if extra:
        raise ValidationError(f"response for unqueried feature id {extra[0]}")
    missing = sorted(pending - set(got))
    if missing:
        raise ValidationError(f"missing response for feature id {missing[0]}")
    for fid, resp in got.items():
        if resp not in (0, 1):
            raise ValidationError(f"response for feature id {fid} must be 0 or 1")
    it = state.next_iteration
    new_rows = tuple((fid, got[fid], it) for fid in state.pending)
    return replace(state, feedback=state.feedback + new_rows, pending=None)
