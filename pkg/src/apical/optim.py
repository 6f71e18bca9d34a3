"""Losses and optimizers.

Both losses reduce by the mean over the batch so learning rates do not depend
on batch size. Optimizers work on flat ``name -> array`` parameter dicts and
return new arrays rather than updating in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from .activations import ALPHA_MIN
from .errors import DataError, DimensionError
from .tensor import Matrix


@dataclass
class LossReport:
    value: float
    grad_logits: Matrix


def _check_one_hot(targets: Matrix) -> None:
    ok = np.all((targets == 0) | (targets == 1), axis=1) & (targets.sum(axis=1) == 1)
    if not np.all(ok):
        bad = int(np.argmin(ok))
        raise DataError(f"target row {bad} is not one-hot")


def softmax_cross_entropy(logits: Matrix, targets: Matrix) -> LossReport:
    if logits.shape != targets.shape:
        raise DimensionError(f"logits {logits.shape} vs targets {targets.shape}")
    _check_one_hot(targets)
    n = logits.shape[0]
    # scipy subtracts the row max internally
    logp = log_softmax(logits, axis=1)
    value = float(-np.sum(logp * targets) / n)
    grad = (softmax(logits, axis=1) - targets) / n
    return LossReport(value, grad)


def mse(outputs: Matrix, targets: Matrix) -> LossReport:
    if outputs.shape != targets.shape:
        raise DimensionError(f"outputs {outputs.shape} vs targets {targets.shape}")
    diff = outputs - targets
    n = outputs.shape[0]
    return LossReport(float(np.sum(diff * diff) / n), 2.0 * diff / n)


LOSSES = {"softmax_ce": softmax_cross_entropy, "mse": mse}


def _clamp(name: str, value: np.ndarray) -> np.ndarray:
    if name == "alpha" or name.endswith(".alpha"):
        return np.maximum(value, ALPHA_MIN)
    return value


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update. Entries named ``*.alpha`` are clamped to ALPHA_MIN."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            out[name] = p
            continue
        g = np.asarray(g, dtype=np.float64)
        if g.shape != np.shape(p):
            raise DimensionError(f"gradient for {name}: {g.shape} vs parameter {np.shape(p)}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        else:
            v = state.v[name]
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        step = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        out[name] = _clamp(name, p - step)
    return out, state


def sgd_step(params: dict, grads: dict, lr: float) -> dict:
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            out[name] = p
            continue
        g = np.asarray(g, dtype=np.float64)
        if g.shape != np.shape(p):
            raise DimensionError(f"gradient for {name}: {g.shape} vs parameter {np.shape(p)}")
        out[name] = _clamp(name, p - lr * g)
    return out
