"""Demonstration selection: uniform, fixed low/high quota, and quota by estimated regime."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import fmean

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .marketdata import floor_share
from .poolbuilder import HIGH, LOW, DemoPool, Demonstration

STRATEGIES = ("random", "fixed_prior", "label_estimate")


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "label_estimate"
    K: int = 5
    alpha: float | None = None  # low-pool fraction; None -> pool's own low fraction
    alpha_low: float = 0.8
    alpha_high: float = 0.2
    m: int = 3
    tau_prime: float | None = None  # None -> pool tau
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.K < 0:
            raise ConfigurationError("K must be nonnegative")
        if self.m < 1:
            raise ConfigurationError("m must be positive")
        for name in ("alpha", "alpha_low", "alpha_high"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        if self.strategy == "label_estimate" and not self.alpha_low > self.alpha_high:
            raise ConfigurationError(
                f"alpha_low ({self.alpha_low}) must exceed alpha_high ({self.alpha_high})")
        if self.tau_prime is not None and not self.tau_prime > 0:
            raise ConfigurationError("tau_prime must be positive")


@dataclass(frozen=True)
class RegimeEstimate:
    signal: float
    label: str


@dataclass(frozen=True)
class Draw:
    demonstrations: tuple[Demonstration, ...]
    shortfall: int = 0  # slots left empty because the pool is too small
    transferred: int = 0  # quota moved to the other regime pool
    estimate: RegimeEstimate | None = None

    def __len__(self):
        return len(self.demonstrations)

    @property
    def source_indices(self) -> list[int]:
        return [d.source_index for d in self.demonstrations]


def query_rng(seed: int, end_index: int) -> np.random.Generator:
    """Per-query generator, independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence([seed, end_index]))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def estimate_regime(window, m: int, tau_prime: float) -> RegimeEstimate:
    """Mean of the last ``m`` history variances against ``tau_prime``."""
    variances = window.variances
    if m < 1 or m > len(variances):
        raise PreconditionError(f"m must lie in [1, {len(variances)}], got {m}")
    signal = fmean(variances[-m:])
    return RegimeEstimate(signal, HIGH if signal >= tau_prime else LOW)


def _choose(items, k, rng):
    if k <= 0:
        return []
    idx = rng.choice(len(items), size=k, replace=False)
    return [items[i] for i in idx]


def sample_random(pool: DemoPool, K: int, seed) -> Draw:
    rng = _rng(seed)
    demos = list(pool.demonstrations)
    if K >= len(demos):
        chosen = [demos[i] for i in rng.permutation(len(demos))]
        return Draw(tuple(chosen), shortfall=K - len(demos))
    return Draw(tuple(_choose(demos, K, rng)))


def sample_fixed_prior(pool: DemoPool, K: int, alpha: float, seed) -> Draw:
    """``floor(alpha*K)`` low-regime and ``K - floor(alpha*K)`` high-regime demonstrations.

    A sub-pool too small for its quota hands the deficit to the other pool.
    """
    if not 0 <= alpha <= 1:
        raise PreconditionError(f"alpha must lie in [0, 1], got {alpha}")
    rng = _rng(seed)
    low, high = list(pool.low), list(pool.high)
    want_low = floor_share(alpha, K)
    want_high = K - want_low
    n_low, n_high = min(want_low, len(low)), min(want_high, len(high))
    transferred = 0
    if n_low < want_low:
        extra = min(want_low - n_low, len(high) - n_high)
        n_high += extra
        transferred += extra
    if n_high < want_high:
        extra = min(want_high - n_high, len(low) - n_low)
        n_low += extra
        transferred += extra
    chosen = _choose(low, n_low, rng) + _choose(high, n_high, rng)
    order = rng.permutation(len(chosen))
    return Draw(tuple(chosen[i] for i in order),
                shortfall=K - n_low - n_high, transferred=transferred)


def sample_label_estimate(pool: DemoPool, K: int, window, config: SamplerConfig, seed=None) -> Draw:
    if not config.alpha_low > config.alpha_high:
        raise ConfigurationError("alpha_low must exceed alpha_high")
    tau_prime = pool.tau if config.tau_prime is None else config.tau_prime
    est = estimate_regime(window, config.m, tau_prime)
    alpha = config.alpha_high if est.label == HIGH else config.alpha_low
    seed = query_rng(config.seed, window.end_index) if seed is None else seed
    draw = sample_fixed_prior(pool, K, alpha, seed)
    return Draw(draw.demonstrations, draw.shortfall, draw.transferred, est)


def draw_for(pool: DemoPool, window, config: SamplerConfig) -> Draw:
    """Dispatch on ``config.strategy`` with the per-query seed."""
    rng = query_rng(config.seed, window.end_index)
    if config.strategy == "random":
        return sample_random(pool, config.K, rng)
    if config.strategy == "fixed_prior":
        alpha = pool.low_fraction if config.alpha is None else config.alpha
        return sample_fixed_prior(pool, config.K, alpha, rng)
    return sample_label_estimate(pool, config.K, window, config, rng)
