"""Classical variance forecasters: rolling mean, HAR, GARCH(1,1) and GJR-GARCH.

GARCH-family models are fitted by Gaussian maximum likelihood with a
Nelder-Mead search over unconstrained coordinates:

    omega = exp(u0)
    (alpha, beta, gamma/2) = softmax-with-slack(u1, u2[, u3])

so positivity and ``alpha + beta + gamma/2 < 1`` hold for every point the
optimizer visits.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from statistics import fmean

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import DegenerateDataError, EmptyInputError, ParameterError, PreconditionError

HAR_FLOOR = 1e-12
HAR_LAGS = (1, 5, 22)
HAR_COLUMNS = ("intercept", "daily", "weekly", "monthly")
MIN_HAR_ROWS = 10

GARCH_MAX_ITER = 2000
GARCH_RESTARTS = 3
GARCH_SOFT_MIN_OBS = 100


@dataclass(frozen=True)
class FitDiagnostics:
    log_likelihood_or_sse: float
    iterations: int
    converged: bool
    n_obs: int = 0
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    gamma: float = 0.0

    def __post_init__(self):
        vals = (self.omega, self.alpha, self.beta, self.gamma)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError(f"non-finite GARCH parameter in {vals}")
        if self.omega <= 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ParameterError(f"alpha, beta, gamma must be nonnegative: {vals[1:]}")
        if self.persistence >= 1:
            raise ParameterError(f"alpha + beta + gamma/2 = {self.persistence} is not < 1")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta + 0.5 * self.gamma

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> GarchParams:
        d = json.loads(text)
        return cls(d["omega"], d["alpha"], d["beta"], d.get("gamma", 0.0))


@dataclass(frozen=True)
class HarParams:
    intercept: float
    beta_daily: float
    beta_weekly: float
    beta_monthly: float
    log_floor: float = HAR_FLOOR

    def __post_init__(self):
        if not all(math.isfinite(v) for v in asdict(self).values()):
            raise ParameterError(f"non-finite HAR coefficient in {self}")

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.intercept, self.beta_daily, self.beta_weekly, self.beta_monthly])

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> HarParams:
        d = json.loads(text)
        return cls(d["intercept"], d["beta_daily"], d["beta_weekly"], d["beta_monthly"],
                   d.get("log_floor", HAR_FLOOR))


# ---------------------------------------------------------------- rolling mean

def rolling_mean_forecast(history) -> float:
    history = list(history)
    if not history:
        raise EmptyInputError("rolling mean of an empty history")
    # fmean is correctly rounded, but keep the result inside the sample range
    return min(max(fmean(history), min(history)), max(history))


# ----------------------------------------------------------------------- HAR

def _variances(observations) -> np.ndarray:
    return np.array([getattr(o, "realized_variance", o) for o in observations], dtype=float)


def _har_regressors(nu: np.ndarray, floor: float) -> np.ndarray:
    """Row ``[1, log d, log w, log m]`` for the last 22 entries of ``nu``."""
    return np.array([
        1.0,
        math.log(nu[-1] + floor),
        math.log(nu[-5:].mean() + floor),
        math.log(nu[-22:].mean() + floor),
    ])


def har_design(observations, floor: float = HAR_FLOOR):
    """Regression matrix and log-target for HAR on a realized-variance series.

    Row ``k`` uses days ``t-21 .. t`` (``t = k + 21``) and targets ``t + 1``.
    """
    nu = _variances(observations)
    m = HAR_LAGS[-1]
    n_rows = len(nu) - m
    if n_rows < 1:
        raise PreconditionError(f"HAR needs more than {m} observations, got {len(nu)}")
    X = np.array([_har_regressors(nu[t - m + 1 : t + 1], floor) for t in range(m - 1, len(nu) - 1)])
    y = np.log(nu[m:] + floor)
    return X, y


def _collinear_column(X: np.ndarray):
    for k in range(1, X.shape[1] + 1):
        if np.linalg.matrix_rank(X[:, :k]) < k:
            return HAR_COLUMNS[k - 1]
    return None


def fit_har(observations, floor: float = HAR_FLOOR) -> HarParams:
    """OLS of next-day log variance on daily, weekly and monthly log averages."""
    nu = _variances(observations)
    need = HAR_LAGS[-1] + MIN_HAR_ROWS
    if len(nu) < need:
        raise PreconditionError(f"HAR needs at least {need} observations, got {len(nu)}")
    X, y = har_design(nu, floor)
    bad = _collinear_column(X)
    if bad is not None:
        raise DegenerateDataError(f"HAR design is rank deficient: column {bad!r} is collinear", column=bad)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return HarParams(*map(float, beta), log_floor=floor)


def normal_equation_residual(X: np.ndarray, y: np.ndarray, beta) -> float:
    """``||X'(X b - y)|| / (||X||_F ||y||)``; zero at the least-squares solution."""
    r = X.T @ (X @ np.asarray(beta) - y)
    scale = np.linalg.norm(X) * np.linalg.norm(y)
    return float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))


def har_forecast(params: HarParams, recent) -> float:
    nu = _variances(recent)
    if len(nu) < HAR_LAGS[-1]:
        raise PreconditionError(f"HAR forecast needs {HAR_LAGS[-1]} recent values, got {len(nu)}")
    x = _har_regressors(nu, params.log_floor)
    return math.exp(float(params.coefficients @ x))


# --------------------------------------------------------------------- GARCH

def _shock_term(params: GarchParams, r: np.ndarray) -> np.ndarray:
    with np.errstate(under="ignore"):
        r2 = r * r
        if params.gamma:
            return params.omega + (params.alpha + params.gamma * (r < 0)) * r2
        return params.omega + params.alpha * r2


def garch_filter(params: GarchParams, returns, initial_variance: float) -> np.ndarray:
    """Conditional variances for ``returns``.

    Entry ``k`` is the variance of return ``k``; the extra final entry is the
    one-step-ahead forecast after the last return, so the output has
    ``len(returns) + 1`` elements.
    """
    if not isinstance(params, GarchParams):
        raise ParameterError(f"expected GarchParams, got {type(params).__name__}")
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise EmptyInputError("no returns to filter")
    if not initial_variance > 0:
        raise PreconditionError(f"initial variance must be positive, got {initial_variance}")
    # sigma2[k+1] = shock[k] + beta * sigma2[k] is a first-order IIR filter
    tail, _ = lfilter([1.0], [1.0, -params.beta], _shock_term(params, r),
                      zi=[params.beta * initial_variance])
    return np.concatenate(([initial_variance], tail))


def garch_forecast(params: GarchParams, r_t: float, sigma2_t: float) -> float:
    if not sigma2_t > 0:
        raise PreconditionError(f"sigma2_t must be positive, got {sigma2_t}")
    lev = params.gamma if r_t < 0 else 0.0
    return params.omega + (params.alpha + lev) * r_t * r_t + params.beta * sigma2_t


def garch_loglik(params: GarchParams, returns, initial_variance: float) -> float:
    """Gaussian log-likelihood without the constant: ``-1/2 sum(log s2 + r^2/s2)``."""
    r = np.asarray(returns, dtype=float)
    s2 = garch_filter(params, r, initial_variance)[:-1]
    return float(-0.5 * np.sum(np.log(s2) + r * r / s2))


def _to_params(u: np.ndarray, asymmetric: bool) -> GarchParams:
    z = np.exp(np.clip(u[1:], -50.0, 50.0))
    w = z / (1.0 + z.sum())
    omega = math.exp(min(float(u[0]), 50.0))
    gamma = 2.0 * float(w[2]) if asymmetric else 0.0
    return GarchParams(omega, float(w[0]), float(w[1]), gamma)


def _from_params(omega: float, weights) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    slack = 1.0 - weights.sum()
    return np.concatenate(([math.log(omega)], np.log(weights / slack)))


def fit_garch(returns, asymmetric: bool = False, seed: int = 0,
              max_iter: int = GARCH_MAX_ITER, restarts: int = GARCH_RESTARTS):
    """Maximum-likelihood GARCH(1,1) or GJR-GARCH(1,1,1) with Gaussian innovations.

    Returns ``(GarchParams, FitDiagnostics)``.  Non-convergence is reported in
    the diagnostics with the best point found, never raised.
    """
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise EmptyInputError("no returns to fit")
    if not np.all(np.isfinite(r)):
        raise DegenerateDataError("returns contain non-finite values")
    if not np.any(r):
        raise DegenerateDataError("returns are identically zero; likelihood is unbounded")
    warnings = ()
    if r.size < GARCH_SOFT_MIN_OBS:
        warnings = (f"only {r.size} observations; estimates are unreliable",)

    init_var = float(np.var(r))
    if not init_var > 0:
        init_var = float(np.mean(r * r))
    n = r.size

    def objective(u):
        try:
            p = _to_params(u, asymmetric)
        except ParameterError:
            return np.inf
        val = -garch_loglik(p, r, init_var) / n
        return val if math.isfinite(val) else np.inf

    start_weights = (0.05, 0.90, 0.02) if asymmetric else (0.05, 0.90)
    base = _from_params(init_var * (1.0 - sum(start_weights)), start_weights)
    rng = np.random.default_rng(seed)
    starts = [base] + [base + rng.normal(0.0, 0.75, size=base.size) for _ in range(restarts - 1)]

    best = None
    for u0 in starts:
        res = minimize(objective, u0, method="Nelder-Mead",
                       options={"maxiter": max_iter, "maxfev": 4 * max_iter,
                                "xatol": 1e-8, "fatol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res

    params = _to_params(best.x, asymmetric)
    diag = FitDiagnostics(
        log_likelihood_or_sse=garch_loglik(params, r, init_var),
        iterations=int(best.nit),
        converged=bool(best.success) and best.nit <= max_iter,
        n_obs=n,
        warnings=warnings,
    )
    return params, diag


def simulate_garch(params: GarchParams, n: int, seed: int, initial_variance: float | None = None) -> np.ndarray:
    """Draw ``n`` returns from the model with standard normal innovations."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    s2 = params.unconditional_variance if initial_variance is None else initial_variance
    out = np.empty(n)
    for k in range(n):
        out[k] = math.sqrt(s2) * z[k]
        lev = params.gamma if out[k] < 0 else 0.0
        s2 = params.omega + (params.alpha + lev) * out[k] ** 2 + params.beta * s2
    return out
