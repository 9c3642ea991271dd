import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalbridge.autodiff import Tensor, backward, numerical_gradient
from causalbridge.errors import ConfigError, DegenerateError, NumericalError
from causalbridge.survival import (HazardRatio, PropensityModel, bucket_proxies, concordance_index,
                                   cox_loss, cox_partial_loglik, fit_coxph,
                                   fit_coxph_treatment_only, fit_propensity, hazard_ratio,
                                   kaplan_meier, log_hr_contrast, quantile_ci, scheme_weights)

from oracles.compute import cox_brute


@st.composite
def survival_data(draw, min_n=2, max_n=25):
    n = draw(st.integers(min_n, max_n))
    rho = draw(st.lists(st.floats(-3, 3), min_size=n, max_size=n))
    # integer times make ties common
    t = draw(st.lists(st.integers(1, 6), min_size=n, max_size=n))
    e = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    e[0] = 1
    w = draw(st.lists(st.floats(0.1, 3.0), min_size=n, max_size=n))
    return np.array(rho), np.array(t, dtype=float), np.array(e, dtype=float), np.array(w)


# -- partial likelihood ------------------------------------------------------------

def test_two_events_zero_scores():
    assert cox_partial_loglik([0.0, 0.0], [1.0, 2.0], [1, 1]) == pytest.approx(-math.log(2))


def test_singleton_risk_set():
    assert cox_partial_loglik([1.7], [3.0], [1]) == 0.0


def test_fixed_example_and_late_censored_subject():
    rho, t, e = [0.2, -0.5, 1.1, 0.0, 0.4], [2.0, 1.0, 3.0, 0.5, 2.5], [1, 1, 0, 1, 1]
    # oracle: cox_examples (explicit double loop)
    base = cox_partial_loglik(rho, t, e)
    assert base == pytest.approx(-6.9821852576367665, rel=1e-13)
    more = cox_partial_loglik(rho + [0.7], t + [10.0], e + [0])
    assert more == pytest.approx(-8.17339928476228, rel=1e-13)
    # the new subject sits in every risk set, so each denominator gains exp(0.7)
    by_hand = sum(rho[i] - math.log(sum(math.exp(rho[j]) for j in range(5) if t[j] >= t[i])
                                    + math.exp(0.7)) for i in range(5) if e[i])
    assert more == pytest.approx(by_hand, rel=1e-13)


def test_weighted_ties():
    ll = cox_partial_loglik([0.1, 0.3, -0.2, 0.5], [1.0, 1.0, 2.0, 2.0], [1, 1, 1, 0],
                            [1.0, 2.0, 0.5, 1.5])
    assert ll == pytest.approx(-5.629966525151049, rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(survival_data())
def test_loglik_matches_brute_force(data):
    rho, t, e, w = data
    assert cox_partial_loglik(rho, t, e, w) == pytest.approx(cox_brute(rho, t, e, w),
                                                             rel=1e-10, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(survival_data(), st.floats(-20, 20))
def test_shift_invariance(data, c):
    rho, t, e, w = data
    assert cox_partial_loglik(rho + c, t, e, w) == pytest.approx(cox_partial_loglik(rho, t, e, w),
                                                                 rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(survival_data(), st.floats(0.1, 10))
def test_weight_scaling(data, c):
    rho, t, e, w = data
    ll, llc = cox_partial_loglik(rho, t, e, w), cox_partial_loglik(rho, t, e, c * w)
    assert llc == pytest.approx(c * ll - c * math.log(c) * np.sum(w * e), rel=1e-9, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(survival_data(min_n=3))
def test_loss_gradient_matches_finite_differences(data):
    rho, t, e, w = data
    r = Tensor(rho[:, None].copy(), requires_grad=True)
    backward(cox_loss(r, t, e, w))
    num = numerical_gradient(lambda: float(cox_loss(Tensor(r.value), t, e, w).value), [r])[0]
    np.testing.assert_allclose(r.grad, num, rtol=1e-5, atol=1e-8)


def test_constant_scores_give_uniform_risk_constant():
    t, e = np.array([1.0, 2.0, 3.0, 4.0]), np.array([1, 0, 1, 1.0])
    # risk-set sizes 4, 2, 1 at the events
    assert cox_partial_loglik(np.zeros(4), t, e) == pytest.approx(-math.log(4) - math.log(2))


def test_loglik_input_errors():
    with pytest.raises(ConfigError):
        cox_partial_loglik([0.0], [0.0], [1])
    with pytest.raises(ConfigError):
        cox_partial_loglik([0.0, 1.0], [1.0], [1])
    with pytest.raises(ConfigError):
        cox_partial_loglik([0.0], [1.0], [1], [-1.0])
    with pytest.raises(DegenerateError):
        cox_partial_loglik([0.0, 1.0], [1.0, 2.0], [0, 0])
    with pytest.raises(NumericalError):
        cox_partial_loglik([np.nan], [1.0], [1])


# -- CoxPH -------------------------------------------------------------------------------

def _tied_dataset():
    rng = np.random.default_rng(108)
    n = 400
    X = rng.standard_normal((n, 2))
    t = np.ceil(rng.exponential(1.0 / np.exp(X @ [0.5, -0.3])) * 4) / 4 + 0.25
    c = rng.uniform(0.5, 3.0, n)
    return X, np.minimum(t, c), (t <= c).astype(float)


def test_coxph_matches_statsmodels_breslow():
    f = fit_coxph(*_tied_dataset())
    # oracle: statsmodels_phreg
    np.testing.assert_allclose(f.beta, [0.3868500635743567, -0.19463548496058491], rtol=1e-8)
    np.testing.assert_allclose(f.se, [0.058657792343843745, 0.06345694820513793], rtol=1e-6)
    np.testing.assert_allclose(f.se_robust, [0.04620210766938967, 0.055056612788260864], rtol=1e-6)
    assert f.loglik == pytest.approx(-1404.544878298556, rel=1e-10)


def test_integer_weights_equal_duplicated_rows():
    X, t, e = _tied_dataset()
    w = np.random.default_rng(0).integers(1, 4, t.size).astype(float)
    fw = fit_coxph(X, t, e, w)
    rep = np.repeat(np.arange(t.size), w.astype(int))
    fd = fit_coxph(X[rep], t[rep], e[rep])
    np.testing.assert_allclose(fw.beta, fd.beta, rtol=1e-9)
    np.testing.assert_allclose(fw.se_model, fd.se_model, rtol=1e-9)


def test_weighted_fit_reports_robust_se():
    X, t, e = _tied_dataset()
    w = np.random.default_rng(1).uniform(0.5, 2.0, t.size)
    f = fit_coxph(X, t, e, w)
    np.testing.assert_array_equal(f.se, f.se_robust)


def test_permuted_treatment_has_no_effect():
    X, t, e = _tied_dataset()
    x = np.random.default_rng(3).permutation(X[:, 0])
    f = fit_coxph_treatment_only(t, e, (x > 0).astype(float))
    lo, hi = f.ci()
    assert lo < 1.0 < hi


def test_unconfounded_treatment_only_ci_coverage():
    from causalbridge.datagen import SurvivalConfig, generate_survival
    cfg = SurvivalConfig().unconfounded()
    hits = 0
    for seed in range(50):
        ds = generate_survival(100_000, 500 + seed, cfg)
        lo, hi = fit_coxph_treatment_only(ds.time, ds.event, ds.x).ci()
        hits += lo <= 0.75 <= hi
    assert hits >= 45


def test_treatment_only_needs_events_in_both_arms():
    with pytest.raises(DegenerateError):
        fit_coxph_treatment_only([1.0, 2.0, 3.0], [1, 1, 0], [0, 0, 1])


# -- propensity weights -----------------------------------------------------------------

def test_weight_formulas():
    assert scheme_weights([1.0], [0.25], "ipw")[0] == pytest.approx(4.0)
    assert scheme_weights([1.0], [0.25], "ow")[0] == pytest.approx(0.75)
    assert scheme_weights([0.0], [0.25], "ipw")[0] == pytest.approx(4 / 3)
    np.testing.assert_array_equal(scheme_weights([0.0, 1.0], [0.3, 0.9], "uniform"), 1.0)
    with pytest.raises(ConfigError):
        scheme_weights([1.0], [0.5], "att")


def test_propensity_clip_bounds_weights():
    assert scheme_weights([1.0], [0.0], "ipw")[0] == pytest.approx(1e3)
    assert PropensityModel(np.array([100.0]), 0.0).predict(np.array([[1.0]]))[0] == 1 - 1e-3


def test_propensity_recovers_logistic_coefficients():
    rng = np.random.default_rng(5)
    c = rng.standard_normal((50_000, 2))
    x = (rng.random(50_000) < 1 / (1 + np.exp(-(0.3 + c @ [1.0, -0.5])))).astype(float)
    m = fit_propensity(c, x)
    np.testing.assert_allclose(m.coef, [1.0, -0.5], atol=0.05)
    assert m.intercept == pytest.approx(0.3, abs=0.05)


def test_propensity_needs_both_classes():
    with pytest.raises(DegenerateError):
        fit_propensity(np.ones((5, 1)), np.ones(5))


# -- hazard ratio ------------------------------------------------------------------------

class _Stub:
    """Stands in for a trained bridge with a closed-form ``b(w, x)``."""

    def __init__(self, f):
        self.f, self.w_pool = f, np.random.default_rng(0).standard_normal((50, 2))

    def bridge_value(self, w, x, k_eps=None, seed=0):
        return self.f(w, x)


def test_hr_of_treatment_free_bridge_is_one():
    m = _Stub(lambda w, x: w.sum(axis=1) ** 2)
    assert log_hr_contrast(m, None) == 0.0


def test_hr_of_linear_bridge_is_exp_beta():
    m = _Stub(lambda w, x: 0.4 * w[:, 0] - 0.7 * x)
    hr = hazard_ratio(m, seeds=range(12), k_w=20)
    assert hr.hr == pytest.approx(math.exp(-0.7))
    assert hr.ci_lo == pytest.approx(math.exp(-0.7)) and hr.has_ci


def test_quantile_ci_needs_ten_runs():
    assert quantile_ci(np.zeros(9)) == (None, None)
    lo, hi = quantile_ci(np.linspace(-1, 1, 101))
    assert lo == pytest.approx(math.exp(-0.95)) and hi == pytest.approx(math.exp(0.95))
    with pytest.warns(UserWarning):
        hr = hazard_ratio(_Stub(lambda w, x: x), seeds=(0, 1))
    assert isinstance(hr, HazardRatio) and not hr.has_ci


# -- bucketing ----------------------------------------------------------------------------------

def _planted(n=20_000, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((n, 4))
    x = (rng.random(n) < 1 / (1 + np.exp(-(1.5 * c[:, 2] + 0.6 * c[:, 3])))).astype(float)
    rate = 0.1 * np.exp(1.2 * c[:, 0] + 0.5 * c[:, 1] - 0.3 * x)
    t = rng.exponential(1 / rate)
    cens = rng.uniform(0, 20, n)
    return c, x, np.minimum(t, cens), (t < cens).astype(float)


def test_planted_strengths_split_two_and_two():
    c, x, t, e = _planted()
    assert bucket_proxies(c, x, t, e) == ([0, 1], [2, 3])
    # column order must not matter
    perm = [3, 0, 2, 1]
    w, z = bucket_proxies(c[:, perm], x, t, e)
    assert sorted(perm[j] for j in w) == [0, 1] and sorted(perm[j] for j in z) == [2, 3]


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 7), st.integers(0, 100))
def test_bucketing_partitions_covariates(k, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((300, k))
    x = (rng.random(300) < 0.5).astype(float)
    t = rng.exponential(1, 300)
    w, z = bucket_proxies(c, x, t, np.ones(300))
    assert sorted(w + z) == list(range(k)) and len(w) - len(z) in (0, 1)


# -- concordance -------------------------------------------------------------------------------

def test_concordance_extremes_and_ties():
    t = np.arange(1.0, 11.0)
    assert concordance_index(-t, t, np.ones(10)) == 1.0
    assert concordance_index(t, t, np.ones(10)) == 0.0
    assert concordance_index(np.zeros(10), t, np.ones(10)) == 0.5


def test_concordance_under_null_matches_independent_count():
    rng = np.random.default_rng(109)
    n = 10 ** 4
    t = rng.exponential(1.0, n)
    e = (rng.random(n) < 0.7).astype(float)
    rho = rng.standard_normal(n)
    # oracle: concordance_null (per-event loop)
    assert concordance_index(rho, t, e) == pytest.approx(0.49903333275694123, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(survival_data(min_n=3))
def test_concordance_antisymmetric(data):
    rho, t, e, _ = data
    if not np.any((e[:, None] > 0) & (t[:, None] < t[None, :])):
        with pytest.raises(DegenerateError):
            concordance_index(rho, t, e)
        return
    assert concordance_index(rho, t, e) + concordance_index(-rho, t, e) == pytest.approx(1.0)


# -- Kaplan-Meier -------------------------------------------------------------------------

def test_classic_five_subject_example():
    s = kaplan_meier([1, 2, 3, 4, 5], [1, 0, 1, 0, 1])[0]
    np.testing.assert_allclose(s([0.5, 1, 2, 3, 4.5, 5, 6]),
                               [1, 0.8, 0.8, 0.8 * 2 / 3, 0.8 * 2 / 3, 0, 0])


def test_km_without_censoring_drops_by_one_over_n():
    s = kaplan_meier(np.arange(1.0, 6.0), np.ones(5))[0]
    np.testing.assert_allclose(s.value, [1, 0.8, 0.6, 0.4, 0.2, 0.0], atol=1e-15)


def test_km_all_censored_is_flat():
    s = kaplan_meier([1.0, 2.0], [0, 0])[0]
    np.testing.assert_array_equal(s([0.5, 3.0]), [1.0, 1.0])


def test_km_groups():
    curves = kaplan_meier([1, 2, 3, 4], [1, 1, 1, 1], group=[0, 1, 0, 1])
    assert set(curves) == {0, 1}
    np.testing.assert_allclose(curves[1]([2, 4]), [0.5, 0.0])


@settings(max_examples=50, deadline=None)
@given(survival_data(min_n=1))
def test_km_monotone_in_unit_interval(data):
    _, t, e, _ = data
    v = kaplan_meier(t, e)[0].value
    assert np.all(np.diff(v) <= 1e-15) and v[0] == 1.0 and np.all((v >= 0) & (v <= 1))
