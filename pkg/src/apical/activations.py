"""Activation functions with analytic derivatives.

ADA is ``max(0, x) * exp(-alpha * x + c)``: zero for non-positive inputs, a
peak of height ``exp(c - 1) / alpha`` at ``x = 1 / alpha``, then exponential
decay. Leaky ADA adds ``l * min(0, x)`` on the negative side.

Derivatives at kinks (x == 0) take the left-branch value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ParameterError, UsageError
from .tensor import Matrix

ALPHA_MIN = 1e-3


class Kind(str, enum.Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    ADA = "ada"
    LEAKY_ADA = "leaky_ada"
    RBF = "rbf"
    SWISH = "swish"
    IDENTITY = "identity"


ADA_KINDS = (Kind.ADA, Kind.LEAKY_ADA)
LEAKY_KINDS = (Kind.LEAKY_RELU, Kind.LEAKY_ADA)
# points where the derivative is discontinuous
KINKS = {
    Kind.RELU: (0.0,),
    Kind.LEAKY_RELU: (0.0,),
    Kind.ADA: (0.0,),
    Kind.LEAKY_ADA: (0.0,),
    Kind.RBF: (),
    Kind.SWISH: (),
    Kind.IDENTITY: (),
}


@dataclass
class ActivationSpec:
    kind: Kind = Kind.RELU
    alpha: float = 1.0
    c: float = 0.0
    l: float = 0.0
    beta: float = 1.0
    alpha_learnable: bool = False
    beta_learnable: bool = False

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.validate()

    def validate(self) -> None:
        if self.kind in ADA_KINDS and not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.l <= 1.0:
            raise ParameterError(f"leak l must lie in [0, 1], got {self.l}")
        if not math.isfinite(self.c) or not math.isfinite(self.beta):
            raise ParameterError("c and beta must be finite")
        if self.alpha_learnable and self.kind not in ADA_KINDS:
            raise ParameterError(f"{self.kind.value} has no alpha to learn")
        if self.beta_learnable and self.kind is not Kind.SWISH:
            raise ParameterError(f"{self.kind.value} has no beta to learn")

    @property
    def learnable(self) -> tuple[str, ...]:
        names = []
        if self.alpha_learnable:
            names.append("alpha")
        if self.beta_learnable:
            names.append("beta")
        return tuple(names)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "alpha": self.alpha,
            "c": self.c,
            "l": self.l,
            "beta": self.beta,
            "alpha_learnable": self.alpha_learnable,
            "beta_learnable": self.beta_learnable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActivationSpec":
        return cls(**d)


# -- scalar forms ---------------------------------------------------------


def ada(x: float, alpha: float, c: float) -> float:
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    if x <= 0:
        return 0.0
    return x * math.exp(-x * alpha + c)


def leaky_ada(x: float, alpha: float, c: float, l: float) -> float:
    if not 0.0 <= l <= 1.0:
        raise ParameterError(f"leak l must lie in [0, 1], got {l}")
    return l * min(0.0, x) + ada(x, alpha, c)


def ada_reference(x: float) -> float:
    """Piecewise transfer function ADA approximates: 0 below zero, exp(-x) above."""
    return 0.0 if x < 0 else math.exp(-x)


# -- vectorized forms -----------------------------------------------------


def _ada_parts(x, alpha, c):
    xp = np.maximum(x, 0.0)
    # exponent only sees x >= 0, so exp never overflows
    e = np.exp(c - alpha * xp)
    return xp, e


def activation_forward(spec: ActivationSpec, x: Matrix) -> Matrix:
    spec.validate()
    k = spec.kind
    if k is Kind.RELU:
        return np.maximum(x, 0.0)
    if k is Kind.LEAKY_RELU:
        return spec.l * np.minimum(x, 0.0) + np.maximum(x, 0.0)
    if k in ADA_KINDS:
        xp, e = _ada_parts(x, spec.alpha, spec.c)
        y = xp * e
        if k is Kind.LEAKY_ADA:
            y = y + spec.l * np.minimum(x, 0.0)
        return y
    if k is Kind.RBF:
        return np.exp(-np.square(x))
    if k is Kind.SWISH:
        return x * expit(spec.beta * x)
    return np.array(x, dtype=np.float64, copy=True)


def activation_grad_input(spec: ActivationSpec, x: Matrix) -> Matrix:
    spec.validate()
    k = spec.kind
    pos = x > 0
    if k is Kind.RELU:
        return pos.astype(np.float64)
    if k is Kind.LEAKY_RELU:
        return np.where(pos, 1.0, spec.l)
    if k in ADA_KINDS:
        xp, e = _ada_parts(x, spec.alpha, spec.c)
        neg = spec.l if k is Kind.LEAKY_ADA else 0.0
        return np.where(pos, e * (1.0 - spec.alpha * xp), neg)
    if k is Kind.RBF:
        return -2.0 * x * np.exp(-np.square(x))
    if k is Kind.SWISH:
        s = expit(spec.beta * x)
        return s + spec.beta * x * s * (1.0 - s)
    return np.ones_like(x, dtype=np.float64)


def activation_grad_alpha(spec: ActivationSpec, x: Matrix) -> Matrix:
    if spec.kind not in ADA_KINDS:
        raise UsageError(f"no alpha derivative for {spec.kind.value}")
    xp, e = _ada_parts(x, spec.alpha, spec.c)
    return np.where(x > 0, -xp * xp * e, 0.0)


def activation_grad_beta(spec: ActivationSpec, x: Matrix) -> Matrix:
    if spec.kind is not Kind.SWISH:
        raise UsageError(f"no beta derivative for {spec.kind.value}")
    s = expit(spec.beta * x)
    # multiply into the sigmoid term first so huge |x| gives 0, not inf * 0
    return x * (x * (s * (1.0 - s)))
