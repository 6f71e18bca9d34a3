"""Central finite-difference checks for activations and layers.

An analytic/numeric pair agrees when the relative error
``|a - n| / max(|a|, |n|)`` is below ``REL_TOL``; where both are tiny
(``max(|a|, |n|) < SMALL``) the absolute error must be below ``ABS_TOL``
instead. Sample points closer than ``KINK_MARGIN`` to a kink are redrawn.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .activations import (
    ADA_KINDS,
    KINKS,
    ActivationSpec,
    Kind,
    activation_forward,
    activation_grad_alpha,
    activation_grad_beta,
    activation_grad_input,
)
from .layers import DenseLayer, PyramidalLayer
from .tensor import RngStream

H = 1e-5
REL_TOL = 1e-4
ABS_TOL = 1e-7
SMALL = 1e-3
KINK_MARGIN = 1e-3


@dataclass
class CheckResult:
    component: str
    n_checked: int
    worst_rel: float
    worst_abs: float

    @property
    def passed(self) -> bool:
        return self.n_checked > 0 and self.worst_rel < REL_TOL and self.worst_abs < ABS_TOL


def compare(analytic, numeric) -> tuple[float, float]:
    """Worst relative error over large entries and worst absolute error over small ones."""
    a = np.ravel(np.asarray(analytic, dtype=np.float64))
    n = np.ravel(np.asarray(numeric, dtype=np.float64))
    scale = np.maximum(np.abs(a), np.abs(n))
    err = np.abs(a - n)
    big = scale >= SMALL
    worst_rel = float(np.max(err[big] / scale[big])) if big.any() else 0.0
    worst_abs = float(np.max(err[~big])) if (~big).any() else 0.0
    return worst_rel, worst_abs


def _merge(name, parts):
    n = sum(p[0] for p in parts)
    return CheckResult(name, n, max(p[1] for p in parts), max(p[2] for p in parts))


def _sample_away_from_kinks(kind, rng, n, low=-6.0, high=6.0):
    kinks = np.asarray(KINKS[kind])
    out = np.empty(0)
    while out.size < n:
        x = rng.uniform(low, high, n)
        if kinks.size:
            x = x[np.min(np.abs(x[:, None] - kinks[None, :]), axis=1) > KINK_MARGIN]
        out = np.concatenate([out, x])
    return out[:n].reshape(1, n)


def random_spec(kind: Kind, rng: RngStream) -> ActivationSpec:
    alpha = float(rng.uniform(0.1, 2.0, None))
    c = float(rng.integers(0, 2))
    l = float(rng.uniform(0.0, 0.5, None)) if kind in (Kind.LEAKY_RELU, Kind.LEAKY_ADA) else 0.0
    beta = float(rng.uniform(0.1, 2.0, None))
    return ActivationSpec(
        kind, alpha=alpha, c=c, l=l, beta=beta,
        alpha_learnable=kind in ADA_KINDS, beta_learnable=kind is Kind.SWISH,
    )


def check_activation(kind: Kind, rng: RngStream, points: int = 200) -> list:
    """Input derivative and, where present, alpha/beta derivatives for one kind."""
    spec = random_spec(kind, rng.child(0))
    x = _sample_away_from_kinks(kind, rng.child(1), points)
    f = lambda s, v: activation_forward(s, v)
    numeric = (f(spec, x + H) - f(spec, x - H)) / (2 * H)
    results = [CheckResult(f"{kind.value}/input", x.size, *compare(activation_grad_input(spec, x), numeric))]
    if spec.alpha_learnable:
        up, down = replace(spec, alpha=spec.alpha + H), replace(spec, alpha=spec.alpha - H)
        numeric = (f(up, x) - f(down, x)) / (2 * H)
        results.append(CheckResult(f"{kind.value}/alpha", x.size, *compare(activation_grad_alpha(spec, x), numeric)))
    if spec.beta_learnable:
        up, down = replace(spec, beta=spec.beta + H), replace(spec, beta=spec.beta - H)
        numeric = (f(up, x) - f(down, x)) / (2 * H)
        results.append(CheckResult(f"{kind.value}/beta", x.size, *compare(activation_grad_beta(spec, x), numeric)))
    return results


def _pre_activations(layer, x):
    _, cache = layer.forward(x)
    return cache[1:]


def _clear_of_kinks(layer, x):
    acts = list(layer.activations().values())
    for pre, act in zip(_pre_activations(layer, x), acts):
        for k in KINKS[act.kind]:
            if np.min(np.abs(pre - k)) <= KINK_MARGIN:
                return False
    return True


def layer_gradients(layer, x, dY):
    """Analytic gradients and finite-difference estimates for every parameter and the input.

    The scalar probed is ``sum(dY * layer(x))``, whose gradients are exactly
    what ``backward`` returns for upstream gradient ``dY``.
    """
    grads, dX = layer.backward(layer.forward(x)[1], dY)

    def objective():
        return float(np.sum(dY * layer.forward(x)[0]))

    numeric = {}
    for name, value in layer.parameters().items():
        if np.ndim(value) == 0:
            base = float(value)
            layer.set_parameter(name, base + H)
            up = objective()
            layer.set_parameter(name, base - H)
            down = objective()
            layer.set_parameter(name, base)
            numeric[name] = np.asarray((up - down) / (2 * H))
            continue
        arr = value.copy()
        est = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            for sign in (1, -1):
                pert = arr.copy()
                pert[idx] += sign * H
                layer.set_parameter(name, pert)
                est[idx] += sign * objective()
            est[idx] /= 2 * H
        layer.set_parameter(name, arr)
        numeric[name] = est
    num_dx = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += H
        xm[idx] -= H
        num_dx[idx] = (np.sum(dY * layer.forward(xp)[0]) - np.sum(dY * layer.forward(xm)[0])) / (2 * H)
    grads = dict(grads, input=dX)
    numeric["input"] = num_dx
    return grads, numeric


def make_layer(layer_type, act, rng, in_dim=4, out_dim=3, basal=None):
    if layer_type == "dense":
        layer = DenseLayer.create(in_dim, out_dim, act, rng.child(0))
        layer.b = rng.uniform(-0.5, 0.5, (1, out_dim))
    else:
        layer = PyramidalLayer.create(in_dim, out_dim, basal or ActivationSpec(Kind.RELU), act, rng.child(0))
        layer.b_basal = rng.uniform(-0.5, 0.5, (1, out_dim))
        layer.b_apical = rng.uniform(-0.5, 0.5, (1, out_dim))
    return layer


def check_layer(layer_type, kind: Kind, rng: RngStream, min_points: int = 100, basal_kind=Kind.RELU) -> CheckResult:
    """Full finite-difference check over fresh random layers until ``min_points`` entries (>= 5 layers)."""
    parts = []
    checked = 0
    draw = 0
    while checked < min_points or draw < 5:
        r = rng.child(draw)
        draw += 1
        act = random_spec(kind, r.child(0))
        basal = random_spec(basal_kind, r.child(1))
        basal = replace(basal, alpha_learnable=False, beta_learnable=False)
        layer = make_layer(layer_type, act, r.child(2), basal=basal)
        for attempt in range(100):
            x = r.child(3).child(attempt).uniform(-2.0, 2.0, (3, layer.in_dim))
            if _clear_of_kinks(layer, x):
                break
        else:
            continue
        dY = r.child(4).uniform(-1.0, 1.0, (3, layer.out_dim))
        analytic, numeric = layer_gradients(layer, x, dY)
        for name in analytic:
            rel, ab = compare(analytic[name], numeric[name])
            n = int(np.size(analytic[name]))
            parts.append((n, rel, ab))
            checked += n
    name = f"{layer_type}/{kind.value}" if layer_type == "dense" else f"pyramidal/{basal_kind.value}+{kind.value}"
    return _merge(name, parts)


DENSE_KINDS = list(Kind)
PYRAMIDAL_COMBOS = [
    (Kind.RELU, Kind.ADA),
    (Kind.LEAKY_RELU, Kind.LEAKY_ADA),
    (Kind.RELU, Kind.RELU),
    (Kind.RELU, Kind.RBF),
    (Kind.RELU, Kind.SWISH),
]


def run_all(seed: int = 0, points: int = 200) -> list:
    if points < 1:
        raise ValueError("points must be >= 1")
    root = RngStream(seed)
    results = []
    for i, kind in enumerate(Kind):
        results.extend(check_activation(kind, root.child(0).child(i), points))
    for i, kind in enumerate(DENSE_KINDS):
        results.append(check_layer("dense", kind, root.child(1).child(i), min_points=max(points // 2, 100)))
    for i, (basal, apical) in enumerate(PYRAMIDAL_COMBOS):
        results.append(check_layer("pyramidal", apical, root.child(2).child(i),
                                   min_points=max(points // 2, 100), basal_kind=basal))
    return results


def format_results(results) -> str:
    lines = [f"{'component':<28} {'checked':>7} {'worst rel':>11} {'worst abs':>11}  result"]
    for r in results:
        lines.append(
            f"{r.component:<28} {r.n_checked:>7} {r.worst_rel:>11.3e} {r.worst_abs:>11.3e}  "
            f"{'ok' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)
