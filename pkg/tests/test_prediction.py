"""Sampler correctness: density, support, moments, and the ridge closed form."""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, strategies as st

from elicit.dataset import Dataset
from elicit.errors import DataError, ValidationError
from elicit.prediction import (
    A_PRIOR_VARIANCE,
    ModelParams,
    PosteriorChain,
    RelevanceVector,
    SamplerConfig,
    as_relevance,
    evaluate_mse,
    load_chain,
    log_posterior,
    mcmc_se,
    predict,
    ridge_oracle,
    sample_posterior,
    save_chain,
    sigma0_sq,
)


def _toy_train(n=16, k=5, seed=2):
    rng = np.random.default_rng(seed)
    X = (rng.random((n, k)) < 0.5).astype(float)
    y = X @ rng.normal(0.0, 1.0, k) + rng.normal(0.0, 0.3, n)
    return Dataset(
        feature_names=tuple(f"f{j}" for j in range(k)),
        X=X,
        y=y,
        categories=("c",) * n,
    )


class TestRelevanceVector:
    def test_counts(self):
        rv = RelevanceVector(np.array([0, 1, 1, 0, 1]))
        assert rv.n_plus == 3 and rv.n_minus == 2

    def test_rejects_non_binary(self):
        with pytest.raises(ValidationError):
            RelevanceVector(np.array([0, 2]))
        with pytest.raises(ValidationError):
            RelevanceVector(np.zeros((2, 2)))
        with pytest.raises(ValidationError):
            RelevanceVector(np.array([], dtype=int))

    def test_does_not_freeze_the_callers_array(self):
        mine = np.zeros(4, dtype=np.int64)
        rv = RelevanceVector(mine)
        mine[1] = 1  # the vector copied; my array stays writable
        assert rv.values[1] == 0
        with pytest.raises(ValueError):
            rv.values[0] = 1

    def test_as_relevance_length_check(self):
        with pytest.raises(ValidationError, match="length"):
            as_relevance([0, 1], k=3)
        assert as_relevance([0, 1], k=2).n_plus == 1


class TestHyperparameterSupport:
    def test_sigma0_sq_value(self):
        assert sigma0_sq(0.5, 2.0, 3, 2) == 0.5 / 7.0

    def test_sigma0_sq_validation(self):
        with pytest.raises(ValidationError):
            sigma0_sq(0.0, 2.0, 1, 0)
        with pytest.raises(ValidationError):
            sigma0_sq(0.5, 0.5, 1, 0)
        with pytest.raises(ValidationError):
            sigma0_sq(0.5, 2.0, 0, 0)

    @given(
        xi=st.floats(min_value=1e-6, max_value=1.0),
        a=st.floats(min_value=1.0, max_value=50.0),
        n_minus=st.integers(min_value=0, max_value=500),
        n_plus=st.integers(min_value=0, max_value=500),
    )
    def test_sigma0_sq_positive_and_monotone(self, xi, a, n_minus, n_plus):
        if n_minus + n_plus < 1:
            return
        v = sigma0_sq(xi, a, n_minus, n_plus)
        assert v > 0
        # growing a can only shrink the baseline variance
        assert sigma0_sq(xi, a + 1.0, n_minus, n_plus) <= v

    def test_model_params_validation(self):
        with pytest.raises(ValidationError):
            ModelParams(np.zeros(2), a=1.0, xi=0.1, sigma=1.0)
        with pytest.raises(ValidationError):
            ModelParams(np.zeros(2), a=2.0, xi=1.0, sigma=1.0)
        with pytest.raises(ValidationError):
            ModelParams(np.zeros(2), a=2.0, xi=0.1, sigma=0.0)

    def test_in_support(self):
        r = RelevanceVector(np.array([1, 0]))
        good = ModelParams(np.array([0.5, -3.0]), 2.0, 0.1, 1.0)
        bad = ModelParams(np.array([-0.5, -3.0]), 2.0, 0.1, 1.0)
        assert good.in_support(r)
        assert not bad.in_support(r)


def test_sampler_config_validation():
    with pytest.raises(ValidationError):
        SamplerConfig(n_iter=100, burn_in=100)
    with pytest.raises(ValidationError):
        SamplerConfig(thin=0)
    with pytest.raises(ValidationError):
        SamplerConfig(fix_a=1.0)
    with pytest.raises(ValidationError):
        SamplerConfig(fix_xi=1.0)
    with pytest.raises(ValidationError):
        SamplerConfig(fix_sigma=0.0)
    with pytest.raises(ValidationError):
        SamplerConfig(scalar_refreshes=0)


def _reference_log_density(params, train, r):
    """Factor-by-factor density via scipy, independent of the implementation."""
    rv = np.asarray(r)
    s0sq = params.xi / ((rv == 0).sum() + params.a * (rv == 1).sum())
    lp = 0.0
    for wj, rj in zip(params.w, rv):
        if rj == 1:
            lp += math.log(2.0) + scipy.stats.norm.logpdf(
                wj, 0.0, math.sqrt(params.a * s0sq)
            )
        else:
            lp += scipy.stats.norm.logpdf(wj, 0.0, math.sqrt(s0sq))
    lp += math.log(2.0) + scipy.stats.norm.logpdf(
        params.a - 1.0, 0.0, math.sqrt(A_PRIOR_VARIANCE)
    )
    lp += scipy.stats.beta.logpdf(params.xi, 1.0, 9.0)
    lp += math.log(2.0) + scipy.stats.norm.logpdf(params.sigma, 0.0, 1.0)
    if train is not None:
        mu = train.X @ params.w
        lp += float(scipy.stats.norm.logpdf(train.y, mu, params.sigma).sum())
    return lp


def test_log_posterior_matches_reference_density():
    train = _toy_train()
    r = np.array([0, 1, 0, 1, 0])
    rng = np.random.default_rng(8)
    for _ in range(20):
        w = rng.normal(0.0, 0.5, 5)
        w[r == 1] = np.abs(w[r == 1])
        params = ModelParams(
            w=w,
            a=float(rng.uniform(1.1, 10.0)),
            xi=float(rng.uniform(0.01, 0.9)),
            sigma=float(rng.uniform(0.2, 2.0)),
        )
        got = log_posterior(params, train, r)
        want = _reference_log_density(params, train, r)
        assert got == pytest.approx(want, rel=1e-10)
        # prior-only path drops exactly the likelihood factor
        got_prior = log_posterior(params, None, r)
        want_prior = _reference_log_density(params, None, r)
        assert got_prior == pytest.approx(want_prior, rel=1e-10)


def test_log_posterior_is_minus_inf_outside_support():
    r = np.array([1, 0])
    params = ModelParams(np.array([-0.1, 0.0]), 2.0, 0.1, 1.0)
    assert log_posterior(params, None, r) == -math.inf


def test_log_posterior_rejects_non_finite_data():
    train = _toy_train()
    params = ModelParams(np.zeros(5), 2.0, 0.1, 1.0)
    bad = Dataset(
        feature_names=train.feature_names,
        X=train.X,
        y=np.where(np.arange(16) == 0, 1e200, 1.0),
        categories=train.categories,
    )
    # finite in storage, but the quadratic overflows: refuse to sample
    with pytest.raises(DataError, match="finite posterior density"):
        sample_posterior(bad, np.zeros(5, dtype=int), SamplerConfig(n_iter=10, burn_in=1))


def test_prior_only_moments():
    cfg = SamplerConfig(n_iter=12000, burn_in=2000)
    chain = sample_posterior(None, np.array([0, 0, 1]), cfg, seed=1)
    # hyperprior means: E a = 6, E xi = 0.1, E sigma = sqrt(2/pi)
    assert abs(chain.a.mean() - 6.0) < 4 * mcmc_se(chain.a)
    assert abs(chain.xi.mean() - 0.1) < 4 * mcmc_se(chain.xi)
    assert abs(chain.sigma.mean() - math.sqrt(2.0 / math.pi)) < 4 * mcmc_se(chain.sigma)


def test_chain_support_invariants():
    train = _toy_train()
    r = np.array([1, 0, 1, 0, 0])
    chain = sample_posterior(train, r, SamplerConfig(n_iter=3000, burn_in=500), seed=3)
    assert (chain.w[:, [0, 2]] >= 0.0).all()
    assert (chain.a > 1.0).all()
    assert ((chain.xi > 0.0) & (chain.xi < 1.0)).all()
    assert (chain.sigma > 0.0).all()


def test_sampling_is_seed_deterministic():
    train = _toy_train()
    cfg = SamplerConfig(n_iter=500, burn_in=100)
    c1 = sample_posterior(train, np.zeros(5, dtype=int), cfg, seed=9)
    c2 = sample_posterior(train, np.zeros(5, dtype=int), cfg, seed=9)
    np.testing.assert_array_equal(c1.samples, c2.samples)
    c3 = sample_posterior(train, np.zeros(5, dtype=int), cfg, seed=10)
    assert not np.array_equal(c1.samples, c3.samples)


def test_pinned_parameters_stay_pinned():
    train = _toy_train()
    cfg = SamplerConfig(n_iter=400, burn_in=100, fix_a=3.0, fix_xi=0.2, fix_sigma=0.7)
    chain = sample_posterior(train, np.zeros(5, dtype=int), cfg, seed=0)
    assert (chain.a == 3.0).all()
    assert (chain.xi == 0.2).all()
    assert (chain.sigma == 0.7).all()


def test_thinning_controls_retained_count():
    chain = sample_posterior(
        None, np.array([0]), SamplerConfig(n_iter=1000, burn_in=200, thin=4), seed=0
    )
    assert len(chain) == 200
    full = sample_posterior(
        None, np.array([0]), SamplerConfig(n_iter=1000, burn_in=200), seed=0
    )
    # thinned rows are a subsequence of the unthinned chain
    np.testing.assert_array_equal(chain.samples, full.samples[::4])


def test_predict_and_mse_agree_with_posterior_mean():
    train = _toy_train()
    chain = sample_posterior(
        train, np.zeros(5, dtype=int), SamplerConfig(n_iter=600, burn_in=100), seed=4
    )
    x = train.X[0]
    assert predict(chain, x) == pytest.approx(float(x @ chain.w_mean))
    want = float(np.mean((train.y - train.X @ chain.w_mean) ** 2))
    assert evaluate_mse(chain, train) == pytest.approx(want)
    with pytest.raises(ValidationError):
        predict(chain, np.zeros(7))


def test_ridge_oracle_closed_form():
    train = _toy_train()
    s0, s2 = 0.04, 0.25
    w = ridge_oracle(train, s0, s2)
    lhs = train.X.T @ train.X + (s2 / s0) * np.eye(5)
    np.testing.assert_allclose(lhs @ w, train.X.T @ train.y, atol=1e-10)
    with pytest.raises(ValidationError):
        ridge_oracle(train, 0.0, 1.0)


def test_mcmc_se_batch_means():
    rng = np.random.default_rng(0)
    values = rng.normal(0.0, 1.0, 400)
    means = values.reshape(20, 20).mean(axis=1)
    want = float(np.std(means, ddof=1) / math.sqrt(20))
    assert mcmc_se(values) == pytest.approx(want)
    with pytest.raises(ValidationError, match="too short"):
        mcmc_se(values[:30])


def test_chain_roundtrip(tmp_path):
    train = _toy_train()
    cfg = SamplerConfig(n_iter=300, burn_in=100, thin=2)
    chain = sample_posterior(train, np.array([1, 0, 0, 0, 1]), cfg, seed=6)
    path = tmp_path / "chain.csv"
    save_chain(chain, path)
    loaded = load_chain(path)
    np.testing.assert_array_equal(loaded.samples, chain.samples)
    assert loaded.n_features == 5
    assert loaded.config == cfg
    assert loaded.seed == chain.seed


def test_load_chain_rejects_foreign_meta(tmp_path):
    train = _toy_train()
    chain = sample_posterior(
        train, np.zeros(5, dtype=int), SamplerConfig(n_iter=60, burn_in=10), seed=0
    )
    path = tmp_path / "chain.csv"
    save_chain(chain, path)
    meta = tmp_path / "chain.csv.meta.json"
    meta.write_text(meta.read_text().replace("elicit-chain/1", "other/9"))
    with pytest.raises(DataError, match="not a"):
        load_chain(path)


def test_posterior_chain_shape_validation():
    with pytest.raises(ValidationError, match="K \\+ 3"):
        PosteriorChain(
            samples=np.zeros((4, 5)),
            n_features=5,
            burn_in=0,
            seed=0,
            config=SamplerConfig(n_iter=10, burn_in=0),
        )
