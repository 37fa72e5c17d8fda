import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from factories import returns_from_variances
from volregime.baselines import (
    HAR_FLOOR,
    GarchParams,
    HarParams,
    fit_garch,
    fit_har,
    garch_filter,
    garch_forecast,
    garch_loglik,
    har_design,
    har_forecast,
    normal_equation_residual,
    rolling_mean_forecast,
    simulate_garch,
)
from volregime.errors import DegenerateDataError, EmptyInputError, ParameterError, PreconditionError

variances = st.floats(0, 1e-2, allow_nan=False)


# -------------------------------------------------------------- rolling mean

def test_rolling_mean_constant():
    assert rolling_mean_forecast([4e-4] * 3) == 4e-4


def test_rolling_mean_symmetric():
    assert rolling_mean_forecast([k * 1e-4 for k in range(1, 8)]) == pytest.approx(4e-4, rel=1e-15)


def test_rolling_mean_empty():
    with pytest.raises(EmptyInputError):
        rolling_mean_forecast([])


@given(st.lists(variances, min_size=1, max_size=30), st.floats(-1e-2, 1e-2))
def test_rolling_mean_translation_equivariant(xs, c):
    shifted = rolling_mean_forecast([x + c for x in xs])
    assert shifted == pytest.approx(rolling_mean_forecast(xs) + c, abs=1e-15)


@given(st.lists(variances, min_size=1, max_size=30))
def test_rolling_mean_within_range(xs):
    assert min(xs) <= rolling_mean_forecast(xs) <= max(xs)


# ----------------------------------------------------------------------- HAR

def noiseless_log_ar1(n_rows=40, seed=0):
    """log(v[t+1] + floor) = 0.1 + 0.5 log(v[t] + floor) from t = 21 on.

    The first 22 values are random so the weekly and monthly regressors move;
    the recursion starts deep below its fixed point so the daily one does too.
    """
    rng = np.random.default_rng(seed)
    nu = list(np.exp(rng.uniform(-12, -6, 21)))
    level = -25.0
    nu.append(math.exp(level) - HAR_FLOOR)
    for _ in range(n_rows):
        level = 0.1 + 0.5 * math.log(nu[-1] + HAR_FLOOR)
        nu.append(math.exp(level) - HAR_FLOOR)
    return nu


def test_har_recovers_noiseless_coefficients():
    obs = returns_from_variances(noiseless_log_ar1())
    p = fit_har(obs)
    assert [p.intercept, p.beta_daily, p.beta_weekly, p.beta_monthly] == pytest.approx(
        [0.1, 0.5, 0.0, 0.0], abs=1e-6)


def test_har_constant_series_is_degenerate():
    with pytest.raises(DegenerateDataError) as err:
        fit_har(returns_from_variances([2e-4] * 60))
    assert err.value.column == "daily"


def test_har_too_few_rows():
    with pytest.raises(PreconditionError):
        fit_har(returns_from_variances([1e-4 * (1 + k % 3) for k in range(31)]))


def test_har_design_shape():
    nu = np.linspace(1e-5, 1e-4, 40)
    X, y = har_design(nu)
    assert X.shape == (40 - 22, 4)
    assert y[0] == math.log(nu[22] + HAR_FLOOR)
    assert X[0, 3] == pytest.approx(math.log(nu[:22].mean() + HAR_FLOOR))
    assert X[0, 2] == pytest.approx(math.log(nu[17:22].mean() + HAR_FLOOR))


@pytest.mark.parametrize("seed", range(5))
def test_har_normal_equations(seed):
    rng = np.random.default_rng(seed)
    nu = rng.exponential(1e-4, 300)
    p = fit_har(nu)
    X, y = har_design(nu)
    assert normal_equation_residual(X, y, p.coefficients) < 1e-8


def test_har_forecast_identity():
    recent = [1e-4] * 21 + [3e-4]
    got = har_forecast(HarParams(0, 1, 0, 0), recent)
    assert abs(got - 3e-4) < 1e-9


def test_har_forecast_zero_params():
    assert har_forecast(HarParams(0, 0, 0, 0), [5e-4] * 22) == 1.0


def test_har_forecast_needs_22():
    with pytest.raises(PreconditionError):
        har_forecast(HarParams(0, 1, 0, 0), [1e-4] * 21)


@given(st.lists(variances, min_size=22, max_size=40))
def test_har_forecast_positive(xs):
    assert har_forecast(HarParams(-1.0, 0.4, 0.3, 0.2), xs) > 0


def test_har_json_round_trip():
    p = HarParams(-0.5, 0.3, 0.2, 0.4)
    assert HarParams.from_json(p.to_json()) == p
    assert set(__import__("json").loads(p.to_json())) >= {"intercept", "beta_daily", "beta_weekly", "beta_monthly"}


# --------------------------------------------------------------------- GARCH

def python_filter(p, r, s0):
    """Direct loop of the recursion, the oracle for the vectorised filter."""
    out = [s0]
    for x in r:
        out.append(p.omega + (p.alpha + (p.gamma if x < 0 else 0.0)) * x * x + p.beta * out[-1])
    return out


def test_garch_single_step():
    p = GarchParams(1e-6, 0.1, 0.8)
    assert garch_forecast(p, 0.01, 1e-4) == pytest.approx(9.1e-5, rel=1e-12)
    assert garch_filter(p, [0.01], 1e-4)[1] == pytest.approx(9.1e-5, rel=1e-12)


def test_garch_collapses_to_omega():
    p = GarchParams(2e-6, 0.0, 0.0, 0.0)
    path = garch_filter(p, [0.03, -0.02, 0.0, 0.01], 5e-4)
    assert np.all(path[1:] == 2e-6)


def test_gjr_branch_difference():
    p = GarchParams(1e-6, 0.05, 0.8, 0.1)
    up, down = garch_forecast(p, 0.01, 1e-4), garch_forecast(p, -0.01, 1e-4)
    assert down - up == pytest.approx(1e-5, rel=1e-9)


def test_garch_forecast_rejects_nonpositive_variance():
    with pytest.raises(PreconditionError):
        garch_forecast(GarchParams(1e-6, 0.1, 0.8), 0.01, 0.0)


@pytest.mark.parametrize("kw", [
    dict(omega=0.0, alpha=0.1, beta=0.8),
    dict(omega=1e-6, alpha=-0.1, beta=0.8),
    dict(omega=1e-6, alpha=0.1, beta=0.85, gamma=0.1),
    dict(omega=1e-6, alpha=0.5, beta=0.5),
])
def test_garch_param_invariants(kw):
    with pytest.raises(ParameterError):
        GarchParams(**kw)


feasible = st.tuples(st.floats(1e-8, 1e-4), st.floats(0, 0.3), st.floats(0, 0.6), st.floats(0, 0.15)).filter(
    lambda t: t[1] + t[2] + t[3] / 2 < 0.999)


@given(feasible, st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=50), st.floats(1e-8, 1e-2))
def test_garch_filter_matches_loop_and_is_positive(params, r, s0):
    p = GarchParams(*params)
    path = garch_filter(p, r, s0)
    assert np.all(path > 0)
    np.testing.assert_allclose(path, python_filter(p, r, s0), rtol=1e-12)


@given(feasible, st.floats(-0.1, 0.1), st.floats(1e-8, 1e-2), st.floats(0, 0.1))
def test_gjr_monotone_in_gamma(params, r, s2, bump):
    omega, alpha, beta, gamma = params
    if alpha + beta + (gamma + bump) / 2 >= 1:
        return
    lo = garch_forecast(GarchParams(omega, alpha, beta, gamma), r, s2)
    hi = garch_forecast(GarchParams(omega, alpha, beta, gamma + bump), r, s2)
    if r < 0:
        assert hi >= lo
    else:
        assert hi == lo


def test_fit_rejects_all_zero_returns():
    with pytest.raises(DegenerateDataError):
        fit_garch(np.zeros(500))


def test_fit_symmetric_gamma_is_exactly_zero():
    r = simulate_garch(GarchParams(1e-6, 0.05, 0.85, 0.1), 2000, seed=3)
    p, diag = fit_garch(r, asymmetric=False)
    assert p.gamma == 0.0
    assert diag.converged


def test_fit_warns_on_short_sample():
    r = simulate_garch(GarchParams(1e-6, 0.1, 0.85), 60, seed=1)
    _, diag = fit_garch(r)
    assert diag.warnings


@pytest.mark.parametrize("asymmetric", [False, True])
def test_fit_beats_random_feasible_points(asymmetric):
    r = simulate_garch(GarchParams(2e-6, 0.06, 0.88, 0.06 if asymmetric else 0.0), 3000, seed=11)
    p, diag = fit_garch(r, asymmetric=asymmetric)
    s0 = float(np.var(r))
    assert diag.log_likelihood_or_sse == pytest.approx(garch_loglik(p, r, s0))
    rng = np.random.default_rng(99)
    checked = 0
    while checked < 100:
        a, b, g = rng.uniform(0, 1, 3) * (1, 1, 2 if asymmetric else 0)
        if a + b + g / 2 >= 1:
            continue
        omega = s0 * (1 - (a + b + g / 2)) * math.exp(rng.normal(0, 1))
        assert diag.log_likelihood_or_sse >= garch_loglik(GarchParams(omega, a, b, g), r, s0)
        checked += 1


def test_garch_json_round_trip():
    p = GarchParams(1.5e-6, 0.07, 0.9, 0.02)
    assert GarchParams.from_json(p.to_json()) == p
