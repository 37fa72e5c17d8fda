"""Per-sample forecasters for every method in the comparison.

Each factory returns ``method(sample) -> float | Prediction``.  Baselines
that need more history than the window (HAR's 22 days, the GARCH variance
recursion) read the full return series, but only up to the sample's
``end_index``.
"""

from __future__ import annotations

import numpy as np

from .baselines import GarchParams, HarParams, garch_filter, har_forecast, rolling_mean_forecast
from .evaluator import CLAMPED, SHORTFALL, Prediction
from .gateway import Gateway
from .poolbuilder import DemoPool
from .promptcodec import concat, parse_forecast, render_demonstration, render_input, render_query
from .sampler import SamplerConfig, draw_for

CLASSICAL = ("rolling_mean", "har", "garch", "gjr_garch")
LLM_METHODS = ("one_shot", "random", "fixed_prior", "label_estimate")
ALL_METHODS = CLASSICAL + LLM_METHODS

LABELS = {
    "rolling_mean": "Rolling mean",
    "har": "HAR",
    "garch": "GARCH(1,1)",
    "gjr_garch": "GJR-GARCH",
    "one_shot": "One-shot learning",
    "random": "Random selection",
    "fixed_prior": "Regime-aware (fixed prior)",
    "label_estimate": "Regime-aware (label estimate)",
}


def rolling_mean_method():
    return lambda sample: rolling_mean_forecast(sample.variances)


def har_method(params: HarParams, returns):
    nu = np.array([o.realized_variance for o in returns])

    def method(sample):
        t = sample.end_index
        return har_forecast(params, nu[max(0, t - 21) : t + 1])

    return method


def garch_method(params: GarchParams, returns, initial_variance: float):
    """Variance path filtered once through the whole series with fixed parameters.

    Entry ``t + 1`` of the path depends on returns ``0..t`` only.
    """
    path = garch_filter(params, [o.log_return for o in returns], initial_variance)
    return lambda sample: float(path[sample.end_index + 1])


def _ask(gateway: Gateway, prompt) -> Prediction:
    parsed = parse_forecast(gateway.ask(prompt).text)
    return Prediction(parsed.value, frozenset({CLAMPED}) if parsed.clamped else frozenset())


def one_shot_method(gateway: Gateway):
    return lambda sample: _ask(gateway, concat([render_input(sample), render_query()]))


def icl_prompt(demos, sample):
    blocks = [render_demonstration(d.input_text, d.refined_prediction) for d in demos]
    return concat(blocks + [render_input(sample), render_query()])


def icl_method(pool: DemoPool, config: SamplerConfig, gateway: Gateway):
    """Sample demonstrations for the window, then one forecast from the model."""

    def method(sample):
        draw = draw_for(pool, sample, config)
        pred = _ask(gateway, icl_prompt(draw.demonstrations, sample))
        flags = set(pred.flags)
        if draw.shortfall or draw.transferred:
            flags.add(SHORTFALL)
        return Prediction(pred.value, frozenset(flags), tuple(draw.source_indices))

    return method
