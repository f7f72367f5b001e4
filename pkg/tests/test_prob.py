import numpy as np
import numpy.testing as npt
import pytest

from conftest import TABLE1_THEORY
from emaxcli.core.model import d_optimal_x2
from emaxcli.core.prob import (
    augmentation_point, bivariate_contrasts, log_dose_grid, power_function,
    shape_probabilities, sweep, x2_for_alpha,
)
from emaxcli.errors import DomainError, NoBracketError
from emaxcli.models import ProbMethod, SweepIn


def test_contrast_moments(scenario):
    mean, cov = bivariate_contrasts(scenario)
    s = 0.1**2 / 6
    npt.assert_allclose(cov, [[2 * s, s], [s, 2 * s]])
    assert mean[0] > 0 and mean[1] > mean[0]


@pytest.mark.parametrize("theta2_g", sorted(TABLE1_THEORY))
def test_quadrature_reproduces_theoretical_table(scenario, domain, theta2_g):
    sc = scenario.with_(x2=d_optimal_x2(domain, theta2_g))
    p = shape_probabilities(sc, method="quad")
    exists, case1, case2 = TABLE1_THEORY[theta2_g]
    assert 100 * p.p_exists == pytest.approx(exists, abs=0.15)
    assert 100 * p.p_case1 == pytest.approx(case1, abs=0.15)
    assert 100 * p.p_case2 == pytest.approx(case2, abs=0.15)
    assert p.total == pytest.approx(1.0, abs=1e-8)


def test_monte_carlo_agrees_with_quadrature(scenario, domain):
    sc = scenario.with_(x2=d_optimal_x2(domain, 12.5))
    q = shape_probabilities(sc, method=ProbMethod.QUAD)
    mc = shape_probabilities(sc, method=ProbMethod.MC, draws=200_000, seed=7)
    assert mc.draws == 200_000
    for name in ("exists", "case1a", "case1b", "case2"):
        p_mc, se = getattr(mc, f"p_{name}"), getattr(mc, f"se_{name}")
        assert abs(p_mc - getattr(q, f"p_{name}")) <= 4 * se + 1e-6
    assert mc.total == pytest.approx(1.0)


def test_monte_carlo_is_replayable_across_thread_counts(scenario):
    a = shape_probabilities(scenario, method="mc", draws=150_000, seed=3, threads=1)
    b = shape_probabilities(scenario, method="mc", draws=150_000, seed=3, threads=4)
    c = shape_probabilities(scenario, method="mc", draws=150_000, seed=4, threads=4)
    assert a == b
    assert a != c


def test_monte_carlo_needs_draws(scenario):
    with pytest.raises(DomainError):
        shape_probabilities(scenario, method="mc", draws=0)


def test_existence_peaks_near_the_d_optimal_point(scenario, domain):
    grid = log_dose_grid(domain, 64)
    p = np.array([shape_probabilities(scenario.with_(x2=x), method="quad").p_exists for x in grid])
    nearest = np.argmin(np.abs(grid - d_optimal_x2(domain, scenario.truth.theta2)))
    assert p.max() - p[nearest] < 0.005


def test_power_decreases_in_true_theta2(scenario):
    x2 = scenario.design.x2
    powers = [power_function(t, x2, scenario) for t in (12.5, 25.0, 50.0, 100.0, 200.0)]
    assert all(a > b for a, b in zip(powers, powers[1:]))


def test_power_rejects_inadmissible_theta2(scenario, domain):
    with pytest.raises(DomainError):
        power_function(-domain.a, 30.0, scenario)


def test_alpha_inversion_round_trip(scenario):
    x2 = x2_for_alpha(50.0, 0.05, scenario)
    assert power_function(50.0, x2, scenario) == pytest.approx(0.05, abs=1e-6)


def test_smaller_guess_moves_the_point_left(scenario):
    assert x2_for_alpha(25.0, 0.05, scenario) < x2_for_alpha(50.0, 0.05, scenario)
    assert augmentation_point(50.0, 25.0, 0.05, scenario) == pytest.approx(x2_for_alpha(25.0, 0.05, scenario))


def test_alpha_out_of_reach(scenario):
    with pytest.raises(NoBracketError) as err:
        x2_for_alpha(50.0, 0.9, scenario)
    lo, hi = err.value.attainable
    assert lo <= hi < 0.9
    with pytest.raises(DomainError):
        x2_for_alpha(50.0, 1.5, scenario)


def test_augmentation_needs_smaller_guess(scenario):
    with pytest.raises(DomainError):
        augmentation_point(25.0, 50.0, 0.05, scenario)


def test_log_dose_grid(domain):
    g = log_dose_grid(domain, 10)
    assert g.shape == (10,)
    assert np.all(np.diff(g) > 0)
    assert domain.a < g[0] and g[-1] < domain.b


def test_sweep_tables(scenario, domain):
    out = sweep(SweepIn(
        scenario=scenario, theta2_list=[25.0, 50.0], x2_grid=[10.0, 30.0, 60.0], alpha_list=[0.05], seed=1,
    ))
    assert len(out.rows) == 6
    assert {r.theta2_true for r in out.rows} == {25.0, 50.0}
    for r in out.rows:
        assert r.p_exists + r.p_case1a + r.p_case1b + r.p_case2 == pytest.approx(1.0, abs=1e-8)
    assert len(out.alpha_rows) == 2
    row = out.alpha_rows[1]
    assert row.theta2_g == 50.0
    assert row.dopt_x2 == pytest.approx(d_optimal_x2(domain, 50.0))
    assert row.x2 == pytest.approx(x2_for_alpha(50.0, 0.05, scenario))


@pytest.mark.slow
@pytest.mark.parametrize("theta2_g", sorted(TABLE1_THEORY))
def test_monte_carlo_reproduces_theoretical_table(scenario, domain, theta2_g):
    sc = scenario.with_(x2=d_optimal_x2(domain, theta2_g))
    p = shape_probabilities(sc, method="mc", draws=1_000_000, seed=2024)
    exists, case1, case2 = TABLE1_THEORY[theta2_g]
    assert abs(100 * p.p_exists - exists) <= 300 * p.se_exists + 0.005
    assert abs(100 * p.p_case2 - case2) <= 300 * p.se_case2 + 0.005


@pytest.mark.parametrize("theta2_g", sorted(TABLE1_THEORY))
def test_alpha_inversion_returns_the_d_optimal_point(scenario, domain, theta2_g):
    dopt = d_optimal_x2(domain, theta2_g)
    alpha = power_function(theta2_g, dopt, scenario)
    assert 0.0 < alpha < 1.0
    assert x2_for_alpha(theta2_g, alpha, scenario) == pytest.approx(dopt, rel=1e-4)
