"""Relevance regression and UCB selection over feature descriptors."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elicit.descriptors import DescriptorMatrix
from elicit.errors import ValidationError
from elicit.usermodel import (
    RelevanceEstimate,
    UserModelState,
    estimate,
    init_with_pseudo,
    logistic,
    logit,
    record,
    select,
    with_query,
)


def _descriptors(Z):
    Z = np.asarray(Z, dtype=np.float64)
    return DescriptorMatrix(Z=Z, feature_names=tuple(f"f{j}" for j in range(len(Z))))


@pytest.fixture
def rich_state():
    rng = np.random.default_rng(12)
    Z = rng.random((9, 4))
    return UserModelState(Z=_descriptors(Z), beta=0.0)


def test_logistic_and_logit_known_values():
    assert logistic(0.0) == 0.5
    assert logistic(math.log(3.0)) == pytest.approx(0.75)
    assert logit(0.5) == 0.0
    with pytest.raises(ValidationError):
        logit(1.0)


@given(st.floats(min_value=1e-6, max_value=1.0 - 1e-6))
def test_logit_inverts_logistic(p):
    assert logistic(logit(p)) == pytest.approx(p, rel=1e-9)


def test_scalar_ridge_hand_value():
    # one feature, one positive answer: v = (1 + lam)^-1 (1 - b)
    state = UserModelState(Z=_descriptors([[1.0]]), feedback=((0, 1, 1),), beta=0.0)
    est = estimate(state, t=1)
    assert est.v_hat[0] == pytest.approx(0.5 / 1.001)
    assert est.r_hat[0] == pytest.approx(0.5 + 0.5 / 1.001)


def test_width_scale_hand_value():
    state = UserModelState(Z=_descriptors([[1.0]] * 457), beta=0.0)
    est = estimate(state, t=1)
    want = math.sqrt(0.5 * math.log(2.0 * 457 / 0.05))
    assert est.rho == pytest.approx(want, abs=1e-12)
    assert est.rho == pytest.approx(2.2151, abs=1e-3)


def test_estimates_solve_the_normal_equations(rich_state):
    state = with_query(rich_state, (0, 3))
    state = record(state, {0: 1, 3: 0})
    est = estimate(state, t=2)
    Z = state.Z.Z
    Zt = Z[[0, 3]]
    A = state.lam * np.eye(4) + Zt.T @ Zt
    rhs = Zt.T @ (np.array([1.0, 0.0]) - state.b)
    np.testing.assert_allclose(A @ est.v_hat, rhs, atol=1e-12)
    np.testing.assert_allclose(est.r_hat, Z @ est.v_hat + state.b, atol=1e-12)
    np.testing.assert_allclose(est.ucb, est.r_hat + est.c, atol=1e-12)


def test_zero_signal_maps_to_baseline(rich_state):
    est = estimate(rich_state, t=1)
    np.testing.assert_allclose(est.v_hat, 0.0, atol=1e-15)
    np.testing.assert_allclose(est.r_hat, rich_state.b, atol=1e-15)
    np.testing.assert_allclose(est.r_hat_unit, rich_state.b, atol=1e-12)


def test_unit_estimates_stay_in_the_open_interval(rich_state):
    state = with_query(rich_state, (0, 1, 2))
    state = record(state, {0: 1, 1: 1, 2: 0})
    est = estimate(state, t=2)
    assert ((est.r_hat_unit > 0.0) & (est.r_hat_unit < 1.0)).all()
    assert (est.c >= 0.0).all()


def test_feedback_shrinks_confidence_widths(rich_state):
    before = estimate(rich_state, t=1)
    state = with_query(rich_state, (0, 1))
    state = record(state, {0: 1, 1: 0})
    after = estimate(state, t=1)
    assert (after.c <= before.c + 1e-12).all()
    assert after.c[0] < before.c[0]


def test_pseudo_input_maps_coefficients(rich_state):
    Z = _descriptors(np.eye(3))
    state = init_with_pseudo(Z, np.array([2.0, -2.0, 0.0]))
    np.testing.assert_allclose(state.r0, [1.0, 0.0, 0.5])
    inert = init_with_pseudo(Z, np.zeros(3))
    np.testing.assert_allclose(inert.r0, 0.5)
    with pytest.raises(ValidationError):
        init_with_pseudo(Z, np.zeros(5))


def test_pseudo_input_biases_unqueried_estimates():
    # features 0 and 1 share a descriptor direction; 0 has a large coefficient
    Z = _descriptors([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    state = init_with_pseudo(Z, np.array([3.0, 0.0, 0.0]), beta=0.5)
    est = estimate(state, t=1)
    assert est.r_hat[1] > est.r_hat[2]


def test_select_ranks_by_ucb_with_id_tiebreak():
    Z = _descriptors(np.eye(4))
    state = UserModelState(Z=Z, beta=0.0)
    est = RelevanceEstimate(
        v_hat=np.zeros(4),
        r_hat=np.zeros(4),
        r_hat_unit=np.full(4, 0.5),
        c=np.zeros(4),
        ucb=np.array([0.3, 0.9, 0.3, 0.1]),
        rho=1.0,
    )
    assert select(state, est, 3) == (1, 0, 2)  # tie at 0.3 goes to the lower id
    assert select(state, est, 10) == (1, 0, 2, 3)
    with pytest.raises(ValidationError):
        select(state, est, 0)


def test_select_skips_queried_and_pending(rich_state):
    state = with_query(rich_state, (2, 5))
    state = record(state, {2: 1, 5: 0})
    state = with_query(state, (1,))
    est = estimate(state, t=2)
    picked = select(state, est, 9)
    assert set(picked).isdisjoint({1, 2, 5})
    assert len(picked) == 6


def test_query_lifecycle_contracts(rich_state):
    state = with_query(rich_state, (0, 1))
    with pytest.raises(ValidationError, match="already outstanding"):
        with_query(state, (2,))
    with pytest.raises(ValidationError, match="unqueried feature"):
        record(state, {0: 1, 7: 0})
    with pytest.raises(ValidationError, match="missing response"):
        record(state, {0: 1})
    with pytest.raises(ValidationError, match="0 or 1"):
        record(state, {0: 1, 1: 5})
    done = record(state, {0: 1, 1: 0})
    assert done.pending is None
    assert done.feedback == ((0, 1, 1), (1, 0, 1))
    with pytest.raises(ValidationError, match="no pending"):
        record(done, {0: 1})
    with pytest.raises(ValidationError, match="already queried"):
        with_query(done, (0,))


def test_query_validation(rich_state):
    with pytest.raises(ValidationError, match="out of range"):
        with_query(rich_state, (99,))
    with pytest.raises(ValidationError, match="duplicate"):
        with_query(rich_state, (1, 1))


def test_iteration_numbering(rich_state):
    assert rich_state.next_iteration == 1
    state = record(with_query(rich_state, (0,)), {0: 1})
    assert state.next_iteration == 2
    state = record(with_query(state, (1,)), {1: 0})
    assert state.feedback[-1] == (1, 0, 2)
    assert state.queried == frozenset({0, 1})


def test_state_parameter_validation():
    Z = _descriptors(np.eye(2))
    with pytest.raises(ValidationError):
        UserModelState(Z=Z, lam=0.0)
    with pytest.raises(ValidationError):
        UserModelState(Z=Z, delta=1.5)
    with pytest.raises(ValidationError):
        UserModelState(Z=Z, b=0.0)
    with pytest.raises(ValidationError):
        UserModelState(Z=Z, feedback=((0, 2, 1),))
    with pytest.raises(ValidationError):
        UserModelState(Z=Z, r0=np.zeros(5))
    with pytest.raises(ValidationError):
        estimate(UserModelState(Z=Z), t=0)
