import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest

from conftest import means
from emaxcli.core.mle import (
    interpolation_check, mle, mle_direct, mle_fit, mle_tilde, pooled_sigma, sigma2_mle,
)
from emaxcli.core.model import eta, to_tilde
from emaxcli.core.shape import classify, shape_stats, weighted_sse
from emaxcli.errors import InputError, ShapeError
from emaxcli.models import EmaxParams, ExactMLE, Line, NoMLE, ShapeCase, SufficientStats


def test_recovers_the_true_curve(exact_stats, truth):
    p = mle(exact_stats)
    npt.assert_allclose(p.as_array(), truth.as_array(), rtol=1e-8)
    assert interpolation_check(exact_stats, p) < 1e-12
    assert weighted_sse(exact_stats, p) < 1e-20


def test_shifted_frame_solution(exact_stats, truth):
    t = mle_tilde(exact_stats)
    assert t.t0 == exact_stats.ybar[0]
    npt.assert_allclose(t.as_array(), to_tilde(truth, exact_stats.x[0]).as_array(), rtol=1e-8)
    assert t.is_admissible()


@pytest.mark.slow
def test_two_routes_agree_on_random_concave_triples(rng):
    checked = 0
    while checked < 10_000:
        x = np.sort(rng.uniform(0.0, 100.0, 3))
        if np.min(np.diff(x)) < 1.0:
            continue
        n = tuple(int(k) for k in rng.integers(1, 10, 3))
        p = EmaxParams(theta0=rng.normal(), theta1=rng.uniform(0.1, 5.0), theta2=rng.uniform(0.5, 200.0))
        s = SufficientStats(x=tuple(x), n=n, ybar=tuple(float(v) for v in eta(x, p)))
        if classify(s)[0].case is not ShapeCase.INCREASING_CONCAVE:
            continue
        st = shape_stats(s)
        if st.m1 - st.m2 < 1e-2 * st.m1:
            continue                        # nearly a straight line
        a, b = mle(s), mle_direct(s)
        npt.assert_allclose(a.as_array(), b.as_array(), rtol=1e-10, atol=1e-10)
        assert interpolation_check(s, a) < 1e-10 * max(1.0, np.abs(s.ybar).max())
        checked += 1


def test_zero_lowest_dose(truth):
    x = np.array([0.0, 20.0, 150.0])
    s = SufficientStats(x=tuple(x), n=(2, 2, 2), ybar=tuple(float(v) for v in eta(x, truth)))
    npt.assert_allclose(mle(s).as_array(), truth.as_array(), rtol=1e-8)


@pytest.mark.parametrize("ybar", [(2.0, 2.3, 2.2), (2.0, 2.05, 2.467), (2.5, 2.0, 2.2)])
def test_no_mle_outside_increasing_concave(design, ybar):
    s = means(design, ybar)
    with pytest.raises(ShapeError):
        mle(s)
    with pytest.raises(ShapeError):
        mle_direct(s)


def _replicates():
    return pd.DataFrame({
        "dose": [0.0, 0.0, 1.0, 1.0, 2.0, 2.0],
        "response": [1.0, 3.0, 2.0, 4.0, 5.0, 7.0],
    })


def test_sigma_estimates():
    df = _replicates()
    assert sigma2_mle(df) == pytest.approx(1.0)
    assert pooled_sigma(df) == pytest.approx(np.sqrt(2.0))


def test_pooled_sigma_needs_replicates():
    df = pd.DataFrame({"dose": [0.0, 1.0, 2.0], "response": [1.0, 2.0, 3.0]})
    with pytest.raises(InputError):
        pooled_sigma(df)
    flat = pd.DataFrame({"dose": [0.0, 0.0, 1.0, 2.0], "response": [1.0, 1.0, 2.0, 3.0]})
    with pytest.raises(InputError):
        pooled_sigma(flat)


# ──────────────────────────────────────────────────────────────────────────────
# Result values
# ──────────────────────────────────────────────────────────────────────────────
def test_fit_wraps_the_exact_mle(exact_stats, truth):
    fit = mle_fit(exact_stats)
    assert isinstance(fit, ExactMLE)
    assert fit.admissible
    npt.assert_allclose(fit.params.as_array(), truth.as_array(), rtol=1e-8)


def test_fit_reports_the_limit_without_an_mle(design):
    fit = mle_fit(means(design, (2.0, 2.3, 2.2)))
    assert isinstance(fit, NoMLE)
    assert fit.shape.case is ShapeCase.CASE1A


def test_collinear_increasing_means_get_the_line():
    s = SufficientStats(x=(0.0, 1.0, 2.0), n=(1, 1, 1), ybar=(0.0, 1.0000000000000002, 2.0))
    assert classify(s)[0].case is ShapeCase.INCREASING_CONCAVE
    with pytest.raises(ShapeError):
        mle(s)
    fit = mle_fit(s)
    assert isinstance(fit, NoMLE)
    assert fit.shape.case is ShapeCase.INCREASING_CONCAVE
    assert fit.shape.boundary
    assert "m1~m2" in fit.shape.ties
    assert isinstance(fit.limit, Line)
    assert fit.limit.slope == pytest.approx(1.0)
    assert fit.limit.intercept == pytest.approx(0.0, abs=1e-12)


def test_pole_below_the_lowest_dose_is_flagged():
    # shifted-frame t2 falls short of the lowest dose
    s = SufficientStats(x=(1.0, 2.0, 3.0), n=(2, 2, 2), ybar=(0.0, 2 / 3, 0.8))
    fit = mle_fit(s)
    assert isinstance(fit, ExactMLE)
    assert 0.0 < fit.tilde.t2 < s.x[0]
    assert -s.x[0] < fit.params.theta2 < 0.0
    assert fit.params.theta1 < 0.0
    assert not fit.admissible
    assert "not admissible" in str(fit)
    assert interpolation_check(s, fit.params) < 1e-10
