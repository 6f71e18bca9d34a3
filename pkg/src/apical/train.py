"""Training protocol: minibatch Adam with a piecewise-constant learning rate,
several seeded trials per model, and best-on-validation selection.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .activations import ADA_KINDS, LEAKY_KINDS, ActivationSpec, Kind
from .data import Dataset, minibatches
from .errors import ConfigError, DimensionError, DivergenceError
from .layers import DenseLayer, PyramidalLayer, load_layers, save_layers
from .optim import LOSSES, AdamState, adam_step, sgd_step
from .tensor import Matrix, RngStream

log = logging.getLogger(__name__)


# -- network -----------------------------------------------------------------


class Network:
    def __init__(self, layers):
        self.layers = list(layers)
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise DimensionError(f"layer {i} outputs {a.out_dim} but layer {i + 1} expects {b.in_dim}")

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    def forward(self, x: Matrix):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, d_out: Matrix) -> dict:
        grads = {}
        for i in reversed(range(len(self.layers))):
            g, d_out = self.layers[i].backward(caches[i], d_out)
            for name, value in g.items():
                grads[f"{i}.{name}"] = value
        return grads

    def predict(self, x: Matrix) -> Matrix:
        return self.forward(x)[0]

    def parameters(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.parameters().items():
                out[f"{i}.{name}"] = value
        return out

    def load_parameters(self, params: dict) -> None:
        for key, value in params.items():
            i, name = key.split(".", 1)
            self.layers[int(i)].set_parameter(name, value)

    def learnable_scalars(self) -> dict:
        return {k: float(v) for k, v in self.parameters().items() if np.ndim(v) == 0}

    def n_weights(self) -> int:
        return sum(layer.n_weights() for layer in self.layers)

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def save(self, path) -> None:
        save_layers(path, self.layers)

    @classmethod
    def load(cls, path) -> "Network":
        return cls(load_layers(path))


@dataclass
class Architecture:
    """Layer sizes and activation kinds; numeric activation settings come from TrainConfig.

    ``hidden_acts`` gives one activation per hidden layer (or a single one for all).
    For pyramidal layers it is the apical activation and ``basal_act`` feeds the
    other branch. The output layer is always dense.
    """

    input_dim: int
    hidden: Sequence[int]
    n_outputs: int
    layer_type: str = "dense"
    hidden_acts: Sequence[ActivationSpec] = (ActivationSpec(Kind.RELU),)
    basal_act: ActivationSpec = field(default_factory=lambda: ActivationSpec(Kind.RELU))
    output_act: ActivationSpec = field(default_factory=lambda: ActivationSpec(Kind.IDENTITY))

    def __post_init__(self):
        if self.layer_type not in ("dense", "pyramidal"):
            raise ConfigError(f"layer type must be dense or pyramidal, got {self.layer_type!r}")
        acts = list(self.hidden_acts)
        if len(acts) == 1 and len(self.hidden) > 1:
            acts = acts * len(self.hidden)
        if self.hidden and len(acts) != len(self.hidden):
            raise ConfigError(f"{len(self.hidden)} hidden layers but {len(acts)} activations")
        self.hidden_acts = acts

    def describe(self) -> str:
        dims = [self.input_dim, *self.hidden, self.n_outputs]
        return f"{self.layer_type} " + "-".join(str(d) for d in dims)


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class AlphaMode:
    mode: str = "fixed"  # fixed | grid | learnable
    values: tuple = (1.0,)

    @classmethod
    def fixed(cls, value):
        return cls("fixed", (float(value),))

    @classmethod
    def grid(cls, values):
        return cls("grid", tuple(float(v) for v in values))

    @classmethod
    def learnable(cls, init=0.5):
        return cls("learnable", (float(init),))

    def __str__(self):
        if self.mode == "grid":
            return "grid:" + ",".join(f"{v:g}" for v in self.values)
        return f"{self.mode}:{self.values[0]:g}"


@dataclass
class TrainConfig:
    schedule: Sequence[tuple] = ((15, 1e-3), (15, 1e-4))  # (epochs, lr) phases
    optimizer: str = "adam"
    batch_size: int = 64
    trials: int = 5
    seed: int = 0
    loss: str = "softmax_ce"
    alpha_mode: AlphaMode = field(default_factory=AlphaMode)
    c: float = 0.0
    l: float = 0.01
    beta_learnable: bool = True

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not self.schedule or any(e < 1 or lr < 0 for e, lr in self.schedule):
            raise ConfigError("schedule needs at least one phase with epochs >= 1 and lr >= 0")
        if self.c not in (0, 1):
            raise ConfigError(f"c must be 0 or 1, got {self.c}")
        if not 0 <= self.l <= 1:
            raise ConfigError(f"l must lie in [0, 1], got {self.l}")
        if self.alpha_mode.mode not in ("fixed", "grid", "learnable"):
            raise ConfigError(f"unknown alpha mode {self.alpha_mode.mode!r}")
        if self.alpha_mode.mode == "grid" and not all(0 < v <= 1 for v in self.alpha_mode.values):
            raise ConfigError("alpha grid values must lie in (0, 1]")
        if not all(v > 0 for v in self.alpha_mode.values):
            raise ConfigError("alpha must be positive")

    @property
    def epochs(self) -> int:
        return sum(e for e, _ in self.schedule)


def _apply_config(spec: ActivationSpec, config: TrainConfig) -> ActivationSpec:
    spec = replace(spec)
    if spec.kind in ADA_KINDS:
        spec.c = float(config.c)
        spec.alpha = config.alpha_mode.values[0]
        spec.alpha_learnable = config.alpha_mode.mode == "learnable"
    if spec.kind in LEAKY_KINDS:
        spec.l = float(config.l)
    if spec.kind is Kind.SWISH:
        spec.beta_learnable = config.beta_learnable
    spec.validate()
    return spec


def build_network(arch: Architecture, config: TrainConfig, rng: RngStream) -> Network:
    if config.alpha_mode.mode == "grid" and len(config.alpha_mode.values) != 1:
        raise ConfigError("resolve the alpha grid (alpha_grid_search) before building a network")
    layers = []
    dims = [arch.input_dim, *arch.hidden]
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        act = _apply_config(arch.hidden_acts[i], config)
        if arch.layer_type == "pyramidal":
            basal = _apply_config(arch.basal_act, config)
            layers.append(PyramidalLayer.create(d_in, d_out, basal, act, rng.child(i)))
        else:
            layers.append(DenseLayer.create(d_in, d_out, act, rng.child(i)))
    out_act = _apply_config(arch.output_act, config)
    layers.append(DenseLayer.create(dims[-1], arch.n_outputs, out_act, rng.child(len(dims) - 1)))
    return Network(layers)


# -- history -----------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    split: str
    loss: float
    accuracy: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    scalars: list = field(default_factory=list)  # learnable alpha/beta values after each epoch
    trial: int = 0
    selected_trial: Optional[int] = None
    test_accuracy: Optional[float] = None
    diverged: bool = False

    def add(self, epoch, split, loss, accuracy):
        self.records.append(EpochRecord(epoch, split, float(loss), float(accuracy)))

    def last(self, split) -> Optional[EpochRecord]:
        for r in reversed(self.records):
            if r.split == split:
                return r
        return None

    @property
    def val_accuracy(self) -> float:
        r = self.last("val")
        return r.accuracy if r else float("-inf")

    @property
    def val_loss(self) -> float:
        r = self.last("val")
        return r.loss if r else float("inf")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["epoch", "split", "loss", "accuracy"])
            for r in self.records:
                w.writerow([r.epoch, r.split, repr(r.loss), repr(r.accuracy)])


# -- evaluation --------------------------------------------------------------


@dataclass
class Evaluation:
    accuracy: float
    loss: float
    predictions: np.ndarray
    correct: np.ndarray


def round_half_away(y):
    return np.sign(y) * np.floor(np.abs(y) + 0.5)


def loss_targets(out_dim: int, Y: Matrix, loss: str) -> Matrix:
    # single-output nets regress the class index (0/1) directly
    if out_dim == 1 and Y.shape[1] == 2:
        return Y[:, 1:2]
    return Y


def evaluate(net: Network, ds: Dataset, loss: str = "softmax_ce", batch_size: int = 4096) -> Evaluation:
    outputs = np.vstack(
        [net.predict(ds.X[i : i + batch_size]) for i in range(0, len(ds), batch_size)]
    )
    labels = ds.labels
    if outputs.shape[1] == 1:
        preds = round_half_away(outputs[:, 0]).astype(np.int64)
    else:
        preds = np.argmax(outputs, axis=1)
    correct = preds == labels
    if loss == "softmax_ce" and outputs.shape[1] == 1:
        loss = "mse"
    value = LOSSES[loss](outputs, loss_targets(outputs.shape[1], ds.Y, loss)).value
    return Evaluation(float(np.mean(correct)), value, preds, correct)


# -- training ----------------------------------------------------------------


def _check_inputs(net: Network, ds: Dataset, config: TrainConfig):
    if net.in_dim != ds.X.shape[1]:
        raise ConfigError(f"network expects {net.in_dim} features, data has {ds.X.shape[1]}")
    expected = 1 if net.out_dim == 1 else ds.n_classes
    if net.out_dim != expected or (net.out_dim == 1 and ds.n_classes != 2):
        raise ConfigError(f"network has {net.out_dim} outputs for {ds.n_classes} classes")


def train_once(net: Network, train_ds: Dataset, val_ds: Dataset, config: TrainConfig, rng: RngStream, trial=None):
    """Train ``net`` in place and return it with its per-epoch history."""
    config.validate()
    _check_inputs(net, train_ds, config)
    loss_fn = LOSSES[config.loss]
    state = AdamState()
    history = TrainHistory(trial=trial or 0)
    epoch = 0
    for n_epochs, lr in config.schedule:
        state.lr = lr
        for _ in range(n_epochs):
            epoch += 1
            total_loss = 0.0
            total_correct = 0
            for X, Y in minibatches(train_ds, config.batch_size, rng.child(epoch)):
                out, caches = net.forward(X)
                report = loss_fn(out, loss_targets(net.out_dim, Y, config.loss))
                if not math.isfinite(report.value):
                    raise DivergenceError(epoch, trial)
                grads = net.backward(caches, report.grad_logits)
                params = net.parameters()
                if config.optimizer == "adam":
                    params, state = adam_step(params, grads, state)
                else:
                    params = sgd_step(params, grads, lr)
                net.load_parameters(params)
                total_loss += report.value * X.shape[0]
                if net.out_dim == 1:
                    pred = round_half_away(out[:, 0])
                else:
                    pred = np.argmax(out, axis=1)
                total_correct += int(np.sum(pred == np.argmax(Y, axis=1)))
            train_loss = total_loss / len(train_ds)
            if not math.isfinite(train_loss):
                raise DivergenceError(epoch, trial)
            history.add(epoch, "train", train_loss, total_correct / len(train_ds))
            ev = evaluate(net, val_ds, config.loss)
            history.add(epoch, "val", ev.loss, ev.accuracy)
            history.scalars.append(net.learnable_scalars())
    return net, history


def select_trial(histories) -> int:
    """Index of the best trial: highest val accuracy, then lowest val loss, then lowest index."""
    best = None
    for i, h in enumerate(histories):
        if h is None or getattr(h, "diverged", False):
            continue
        key = (-h.val_accuracy, h.val_loss, i)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError("no trial produced a usable history")
    return best[2]


@dataclass
class TrialsResult:
    net: Network
    history: TrainHistory
    histories: list
    errors: list


def _run_trial(arch, config, train_ds, val_ds, master: RngStream, trial: int):
    rng = master.child(trial)
    net = build_network(arch, config, rng.child(0))
    try:
        return train_once(net, train_ds, val_ds, config, rng.child(1), trial=trial)
    except DivergenceError as exc:
        log.warning("trial %d diverged at epoch %d", trial, exc.epoch)
        return exc


def train_trials(config: TrainConfig, arch: Architecture, datasets, jobs: int = 1) -> TrialsResult:
    """Run ``config.trials`` seeded trials and keep the best on validation.

    ``datasets`` is a (train, val) pair. Trial ``k`` draws from the stream
    ``seed/k``, so results do not depend on ``jobs`` or completion order.
    """
    config.validate()
    train_ds, val_ds = datasets
    master = RngStream(config.seed)
    args = [(arch, config, train_ds, val_ds, master, k) for k in range(config.trials)]
    if jobs > 1 and config.trials > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda a: _run_trial(*a), args))
    else:
        outcomes = [_run_trial(*a) for a in args]
    histories, nets, errors = [], [], []
    for out in outcomes:
        if isinstance(out, DivergenceError):
            errors.append(out)
            histories.append(None)
            nets.append(None)
        else:
            nets.append(out[0])
            histories.append(out[1])
    if len(errors) == len(outcomes):
        raise errors[0]
    best = select_trial(histories)
    history = histories[best]
    history.selected_trial = best
    return TrialsResult(nets[best], history, histories, errors)


@dataclass
class GridResult:
    alpha: float
    result: TrialsResult
    per_alpha: list  # (alpha, val_accuracy, val_loss) for each grid point that trained


def alpha_grid_search(config: TrainConfig, arch: Architecture, datasets, jobs: int = 1) -> GridResult:
    if config.alpha_mode.mode != "grid":
        raise ConfigError("alpha_grid_search needs alpha_mode = grid")
    config.validate()
    best = None
    per_alpha = []
    first_error = None
    for i, alpha in enumerate(config.alpha_mode.values):
        cfg = replace(config, alpha_mode=AlphaMode.fixed(alpha))
        try:
            res = train_trials(cfg, arch, datasets, jobs=jobs)
        except DivergenceError as exc:
            first_error = first_error or exc
            continue
        h = res.history
        per_alpha.append((alpha, h.val_accuracy, h.val_loss))
        key = (-h.val_accuracy, h.val_loss, i)
        if best is None or key < best[0]:
            best = (key, alpha, res)
    if best is None:
        raise first_error
    return GridResult(best[1], best[2], per_alpha)


def write_summary(path, net: Network, arch: Architecture, config: TrainConfig, history: TrainHistory, extra=None) -> None:
    layers = [
        {"type": layer.kind, **{k: a.to_dict() for k, a in layer.activations().items()}}
        for layer in net.layers
    ]
    summary = {
        "architecture": arch.describe(),
        "layers": layers,
        "alpha_mode": str(config.alpha_mode),
        "c": config.c,
        "l": config.l,
        "seed": config.seed,
        "trials": config.trials,
        "selected_trial": history.selected_trial,
        "val_accuracy": history.val_accuracy,
        "test_accuracy": history.test_accuracy,
        "final_scalars": history.scalars[-1] if history.scalars else {},
    }
    if extra:
        summary.update(extra)
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
