"""Text rendering of windows, queries and feedback, and numeric parsing of replies.

Templates live in ``templates/<version>/`` as plain text; numbers are written
in lowercase scientific notation with 6 significant digits (``1.23000e-4``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import EmptyInputError, ParseError, ValidationError

TEMPLATE_VERSION = "v1"
SEPARATOR = "\n\n"
KINDS = ("input", "query", "feedback", "demonstration", "composite", "answer")

_NUMBER = re.compile(r"(?<![\w.])[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?(?!\w)")


@dataclass(frozen=True)
class PromptText:
    text: str
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown prompt kind {self.kind!r}")

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class ParsedForecast:
    value: float
    raw_span: str
    clamped: bool = False


@lru_cache(maxsize=None)
def template(name: str, version: str = TEMPLATE_VERSION) -> str:
    return resources.files(__package__).joinpath("templates", version, f"{name}.txt").read_text()


def format_number(x: float) -> str:
    """``1.23000e-4`` style; zero is ``0.00000e0``."""
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"cannot render non-finite value {x!r}")
    if x == 0:
        return "0.00000e0"
    mantissa, exponent = f"{x:.5e}".split("e")
    return f"{mantissa}e{int(exponent)}"


def _window_lines(window) -> str:
    line = template("input_line")
    return "\n".join(
        line.format(i=i, r=format_number(obs.log_return), v=format_number(obs.realized_variance))
        for i, obs in enumerate(window.history, start=1)
    )


def render_input(window) -> PromptText:
    return PromptText(_window_lines(window), "input")


def render_query() -> PromptText:
    return PromptText(template("query"), "query")


def render_answer(value: float) -> PromptText:
    return PromptText(template("answer").format(value=format_number(value)), "answer")


def render_feedback(truth: float, prediction: float, error: float, hint: float) -> PromptText:
    expected = abs(prediction - truth)
    if not math.isclose(error, expected, rel_tol=1e-9, abs_tol=1e-300):
        raise ValidationError(f"error field {error!r} != |prediction - truth| = {expected!r}")
    text = template("feedback").format(
        truth=format_number(truth),
        pred=format_number(prediction),
        err=format_number(expected),
        hint=format_number(hint),
    )
    return PromptText(text, "feedback")


def render_demonstration(input_text: str, value: float) -> PromptText:
    return PromptText(f"{input_text}\n{render_answer(value).text}", "demonstration")


def concat(parts) -> PromptText:
    parts = list(parts)
    if not parts:
        raise EmptyInputError("nothing to concatenate")
    return PromptText(SEPARATOR.join(str(p) for p in parts), "composite")


def strip_query(prompt_text: str) -> str:
    """Drop a trailing query block, leaving only the input lines."""
    suffix = SEPARATOR + template("query")
    return prompt_text[: -len(suffix)] if prompt_text.endswith(suffix) else prompt_text


def parse_forecast(reply: str) -> ParsedForecast:
    """Take the last decimal or scientific number in ``reply``.

    Negative values are clamped to zero and flagged.
    """
    matches = _NUMBER.findall(reply or "")
    if not matches:
        raise ParseError("no number found in model reply", raw=reply)
    span = matches[-1]
    value = float(span)
    if not math.isfinite(value):
        raise ParseError(f"non-finite number {span!r} in model reply", raw=reply)
    if value < 0:
        return ParsedForecast(0.0, span, clamped=True)
    return ParsedForecast(value + 0.0, span)  # folds -0.0
