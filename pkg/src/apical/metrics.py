"""Accuracy and McNemar's paired test for comparing two classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

# chi-square, 1 degree of freedom
CRITICAL_05 = 3.841
CRITICAL_01 = 6.635


@dataclass(frozen=True)
class McNemarResult:
    n01: int  # A wrong, B right
    n10: int  # A right, B wrong
    statistic: float
    significant_05: bool
    significant_01: bool

    @property
    def marker(self) -> str:
        if self.significant_01:
            return "‡"
        if self.significant_05:
            return "†"
        return ""


def _as_bool(v, name):
    a = np.asarray(v)
    if a.ndim != 1:
        raise UsageError(f"{name} must be a 1-D correctness vector")
    return a.astype(bool)


def mcnemar_from_counts(n01: int, n10: int) -> McNemarResult:
    if n01 < 0 or n10 < 0:
        raise UsageError("discordant counts must be non-negative")
    n = n01 + n10
    stat = (abs(n01 - n10) - 1) ** 2 / n if n > 0 else 0.0
    return McNemarResult(int(n01), int(n10), float(stat), stat > CRITICAL_05, stat > CRITICAL_01)


def mcnemar(correct_a, correct_b) -> McNemarResult:
    """Continuity-corrected McNemar statistic over the discordant pairs."""
    a = _as_bool(correct_a, "correct_a")
    b = _as_bool(correct_b, "correct_b")
    if a.size != b.size:
        raise UsageError(f"correctness vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise UsageError("correctness vectors are empty")
    n01 = int(np.sum(~a & b))
    n10 = int(np.sum(a & ~b))
    return mcnemar_from_counts(n01, n10)


def accuracy(correct) -> float:
    c = _as_bool(correct, "correct")
    if c.size == 0:
        raise UsageError("cannot take the accuracy of an empty vector")
    return float(np.mean(c))
