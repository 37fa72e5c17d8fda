"""Oracle-guided refinement over training windows and the regime-labelled pool.

Each demonstration starts from the model's plain forecast for a training
window, then runs ``J`` feedback rounds.  Every round is a fresh single-turn
prompt carrying the current prediction, the ground truth, the absolute error
and a hint (mean of the last ``m`` variances).  The stored answer is the
final refined prediction, not the truth.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import fmean

import numpy as np

from .errors import EmptyInputError, ParseError, PoolConstructionError, PreconditionError, ServiceError, TransportError
from .gateway import Gateway
from .promptcodec import concat, parse_forecast, render_feedback, render_input, render_query, strip_query

logger = logging.getLogger(__name__)

HIGH, LOW = "high", "low"
DEMO_FIELDS = ("prompt_text", "refined_prediction", "regime", "source_index", "iterations_run")


def regime_label(value: float, threshold: float) -> str:
    return HIGH if value >= threshold else LOW


@dataclass(frozen=True)
class Demonstration:
    prompt_text: str
    refined_prediction: float
    regime: str
    source_index: int
    iterations_run: int

    @property
    def input_text(self) -> str:
        return strip_query(self.prompt_text)


@dataclass(frozen=True)
class DemoPool:
    demonstrations: tuple[Demonstration, ...]
    tau: float
    created_from: str = ""
    n: int = 0
    J: int = 0
    seed: int = 0
    skipped: tuple[int, ...] = field(default=())

    def __len__(self):
        return len(self.demonstrations)

    @property
    def high(self) -> tuple[Demonstration, ...]:
        return tuple(d for d in self.demonstrations if d.regime == HIGH)

    @property
    def low(self) -> tuple[Demonstration, ...]:
        return tuple(d for d in self.demonstrations if d.regime == LOW)

    @property
    def low_fraction(self) -> float:
        return len(self.low) / len(self) if len(self) else 0.0


class DemonstrationSkipped(Exception):
    def __init__(self, source_index, reason):
        super().__init__(f"sample {source_index} skipped: {reason}")
        self.source_index = source_index
        self.reason = reason


def hint_value(sample, m: int = 3) -> float:
    return fmean(sample.variances[-m:])


def conc_prompt(sample):
    return concat([render_input(sample), render_query()])


def initial_prediction(sample, gateway: Gateway) -> float:
    reply = gateway.ask(conc_prompt(sample))
    return parse_forecast(reply.text).value


def refine_once(current: float, sample, gateway: Gateway, m: int = 3):
    """One feedback round. Returns ``(new_prediction, parsed_ok)``.

    An unparseable reply keeps ``current`` and reports ``parsed_ok=False``.
    """
    truth = sample.target
    prompt = render_feedback(truth, current, abs(current - truth), hint_value(sample, m))
    reply = gateway.ask(concat([prompt]))
    try:
        return parse_forecast(reply.text).value, True
    except ParseError:
        logger.info("refinement reply for sample %d unparseable; keeping %r", sample.end_index, current)
        return current, False


def build_demonstration(sample, gateway: Gateway, J: int, tau: float, m: int = 3) -> Demonstration:
    if J < 0:
        raise PreconditionError(f"iteration count must be nonnegative, got {J}")
    try:
        value = initial_prediction(sample, gateway)
        for _ in range(J):
            value, _ok = refine_once(value, sample, gateway, m)
    except ParseError as exc:
        raise DemonstrationSkipped(sample.end_index, f"initial reply unparseable: {exc}") from None
    except (TransportError, ServiceError) as exc:
        raise DemonstrationSkipped(sample.end_index, str(exc)) from None
    return Demonstration(
        prompt_text=conc_prompt(sample).text,
        refined_prediction=value,
        regime=regime_label(sample.target, tau),
        source_index=sample.end_index,
        iterations_run=J,
    )


def build_pool(train, gateway: Gateway, n: int, J: int, tau: float, seed: int,
               m: int = 3, created_from: str = "") -> DemoPool:
    """Pick ``min(n, len(train))`` windows uniformly without replacement and refine each.

    Skipped windows are replaced by the next unused one in the seeded order.
    Output order is by source index whatever the completion order.
    """
    train = list(train)
    if not train:
        raise EmptyInputError("no training samples for pool construction")
    if n < 1:
        raise PreconditionError(f"pool size must be positive, got {n}")
    if n > len(train):
        logger.warning("requested pool of %d but only %d training samples", n, len(train))
    target = min(n, len(train))
    order = [int(i) for i in np.random.default_rng(seed).permutation(len(train))]

    def attempt(i):
        try:
            return build_demonstration(train[i], gateway, J, tau, m)
        except DemonstrationSkipped as exc:
            logger.warning("%s", exc)
            return exc

    demos, skipped = [], []
    cursor = 0
    while len(demos) < target and cursor < len(order):
        batch = order[cursor : cursor + target - len(demos)]
        cursor += len(batch)
        for result in gateway.map(attempt, batch):
            if isinstance(result, DemonstrationSkipped):
                skipped.append(result.source_index)
            else:
                demos.append(result)
    if not demos:
        raise PoolConstructionError(f"all {len(skipped)} demonstrations were skipped")
    demos.sort(key=lambda d: d.source_index)
    return DemoPool(tuple(demos), tau, created_from, n, J, seed, tuple(sorted(skipped)))


def save_pool(pool: DemoPool, path) -> None:
    header = {"tau": pool.tau, "n": pool.n, "J": pool.J, "seed": pool.seed,
              "dataset": pool.created_from, "skipped": list(pool.skipped)}
    lines = [json.dumps(header)]
    lines += [json.dumps({k: asdict(d)[k] for k in DEMO_FIELDS}) for d in pool.demonstrations]
    Path(path).write_text("\n".join(lines) + "\n")


def load_pool(path) -> DemoPool:
    with Path(path).open() as fh:
        header = json.loads(fh.readline())
        demos = tuple(Demonstration(**json.loads(line)) for line in fh if line.strip())
    return DemoPool(demos, header["tau"], header.get("dataset", ""), header["n"], header["J"],
                    header["seed"], tuple(header.get("skipped", ())))
