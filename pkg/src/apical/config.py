"""On-disk run configuration (INI sections, ``key = value``).

Example::

    [data]
    source = fashion-mnist      ; or xor | or | and | circles | blobs
    holdout = 10000

    [model]
    layer = pyramidal           ; dense | pyramidal
    hidden = 100                ; comma-separated sizes, empty for none
    activation = ada            ; per hidden layer, or one for all
    basal = relu

    [train]
    schedule = 15@1e-3, 15@1e-4
    batch_size = 64
    trials = 5
    seed = 2020
    alpha = learnable:0.5       ; fixed:0.3 | grid:0.1:1.0:0.1 | grid:0.1,0.5 | learnable:init
    c = 0
    l = 0.01

    [output]
    dir = runs/mlp1_pynada
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .activations import ActivationSpec, Kind
from .data import Dataset, Gate, gen_blobs, gen_circles, gen_gate, load_fashion_mnist, split
from .errors import ConfigError
from .tensor import RngStream
from .train import AlphaMode, Architecture, TrainConfig

SYNTHETIC = ("xor", "or", "and", "circles", "blobs")
SPLIT_STREAM = 0xDA7A

_SCHEMA = {
    "data": {"source", "dir", "holdout", "n", "noise", "n_test"},
    "model": {"layer", "hidden", "activation", "basal", "output", "outputs"},
    "train": {"optimizer", "schedule", "batch_size", "trials", "seed", "loss", "alpha", "c", "l", "beta"},
    "output": {"dir"},
}


@dataclass
class DataSpec:
    source: str
    dir: Optional[str] = None
    holdout: int = 10000
    n: int = 1000
    n_test: int = 1000
    noise: float = 0.1


@dataclass
class RunConfig:
    data: DataSpec
    layer_type: str
    hidden: tuple
    activations: tuple
    basal: Kind
    output: Kind
    outputs: Optional[int]
    train: TrainConfig
    out_dir: Path
    path: Optional[Path] = None
    raw: dict = field(default_factory=dict)

    def architecture(self, input_dim: int, n_classes: int) -> Architecture:
        return Architecture(
            input_dim=input_dim,
            hidden=self.hidden,
            n_outputs=self.outputs or n_classes,
            layer_type=self.layer_type,
            hidden_acts=[ActivationSpec(k) for k in self.activations] or [ActivationSpec(Kind.RELU)],
            basal_act=ActivationSpec(self.basal),
            output_act=ActivationSpec(self.output),
        )


class _Reader:
    def __init__(self, parser, text, path):
        self.parser = parser
        self.lines = text.splitlines()
        self.path = path

    def lineno(self, section, key):
        current = None
        for i, line in enumerate(self.lines, 1):
            s = line.strip()
            m = re.match(r"^\[(.+)\]$", s)
            if m:
                current = m.group(1).strip()
            elif current == section and re.match(rf"^{re.escape(key)}\s*[=:]", s):
                return i
        return None

    def fail(self, section, key, message):
        line = self.lineno(section, key) if key else None
        where = f"{self.path}:{line}" if line else str(self.path)
        field_name = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{where}: {field_name}: {message}")

    def get(self, section, key, default=None, conv=str):
        if not self.parser.has_option(section, key):
            if default is None:
                self.fail(section, key, "required field missing")
            return default
        value = self.parser.get(section, key)
        try:
            return conv(value)
        except (ValueError, ConfigError) as exc:
            self.fail(section, key, f"bad value {value!r}: {exc}")


def _kind(value: str) -> Kind:
    value = value.strip().lower().replace("-", "_")
    try:
        return Kind(value)
    except ValueError:
        raise ValueError(f"unknown activation; choose from {', '.join(k.value for k in Kind)}") from None


def _int_list(value: str) -> tuple:
    parts = [p.strip() for p in value.split(",") if p.strip()]
    out = tuple(int(p) for p in parts)
    if any(d < 1 for d in out):
        raise ValueError("layer sizes must be >= 1")
    return out


def _schedule(value: str) -> tuple:
    phases = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        epochs, _, lr = part.partition("@")
        if not lr:
            raise ValueError("phases look like EPOCHS@LR")
        phases.append((int(epochs), float(lr)))
    if not phases:
        raise ValueError("empty schedule")
    return tuple(phases)


def _alpha(value: str) -> AlphaMode:
    mode, _, rest = value.strip().partition(":")
    mode = mode.strip().lower()
    if mode == "fixed":
        return AlphaMode.fixed(float(rest))
    if mode == "learnable":
        return AlphaMode.learnable(float(rest) if rest else 0.5)
    if mode == "grid":
        bits = rest.split(":")
        if len(bits) == 3:
            lo, hi, step = (float(b) for b in bits)
            n = int(round((hi - lo) / step)) + 1
            return AlphaMode.grid(np.round(lo + step * np.arange(n), 10))
        return AlphaMode.grid(float(v) for v in rest.split(","))
    raise ValueError("expected fixed:V, grid:LO:HI:STEP, grid:V1,V2,... or learnable[:INIT]")


def _beta(value: str) -> bool:
    mode = value.strip().lower()
    if mode == "learnable":
        return True
    if mode == "fixed":
        return False
    raise ValueError("expected learnable or fixed")


def _source(value: str) -> str:
    value = value.strip().lower()
    if value not in ("fashion-mnist", *SYNTHETIC):
        raise ValueError(f"unknown source; choose fashion-mnist or one of {', '.join(SYNTHETIC)}")
    return value


def _choice(*options):
    def conv(value):
        value = value.strip().lower()
        if value not in options:
            raise ValueError(f"choose one of {', '.join(options)}")
        return value

    return conv


def parse_config(text: str, path="<config>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    r = _Reader(parser, text, path)
    for section in parser.sections():
        if section not in _SCHEMA:
            r.fail(section, None, "unknown section")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                r.fail(section, key, "unknown field")
    for section in ("data", "model", "train", "output"):
        if not parser.has_section(section):
            raise ConfigError(f"{path}: missing section [{section}]")

    data = DataSpec(
        source=r.get("data", "source", conv=_source),
        dir=r.get("data", "dir", "") or None,
        holdout=r.get("data", "holdout", 10000, int),
        n=r.get("data", "n", 1000, int),
        n_test=r.get("data", "n_test", 1000, int),
        noise=r.get("data", "noise", 0.1, float),
    )
    hidden = r.get("model", "hidden", (), _int_list)
    acts = r.get("model", "activation", (Kind.RELU,), lambda v: tuple(_kind(a) for a in v.split(",")))
    if len(acts) not in (1, len(hidden)) and hidden:
        r.fail("model", "activation", f"{len(acts)} activations for {len(hidden)} hidden layers")
    train = TrainConfig(
        schedule=r.get("train", "schedule", ((15, 1e-3), (15, 1e-4)), _schedule),
        optimizer=r.get("train", "optimizer", "adam", _choice("adam", "sgd")),
        batch_size=r.get("train", "batch_size", 64, int),
        trials=r.get("train", "trials", 5, int),
        seed=r.get("train", "seed", 0, int),
        loss=r.get("train", "loss", "softmax_ce", _choice("softmax_ce", "mse")),
        alpha_mode=r.get("train", "alpha", AlphaMode.fixed(1.0), _alpha),
        c=r.get("train", "c", 0.0, float),
        l=r.get("train", "l", 0.01, float),
        beta_learnable=r.get("train", "beta", True, _beta),
    )
    try:
        train.validate()
    except ConfigError as exc:
        raise ConfigError(f"{path}: [train]: {exc}") from None
    cfg = RunConfig(
        data=data,
        layer_type=r.get("model", "layer", "dense", _choice("dense", "pyramidal")),
        hidden=hidden,
        activations=acts,
        basal=r.get("model", "basal", Kind.RELU, _kind),
        output=r.get("model", "output", Kind.IDENTITY, _kind),
        outputs=r.get("model", "outputs", 0, int) or None,
        train=train,
        out_dir=Path(r.get("output", "dir")),
        path=Path(path) if path != "<config>" else None,
        raw={s: dict(parser.items(s)) for s in parser.sections()},
    )
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


def load_datasets(cfg: RunConfig) -> tuple[Dataset, Dataset, Dataset]:
    """(train, val, test) for a run; the split stream is separate from the trial streams."""
    d = cfg.data
    rng = RngStream(cfg.train.seed).child(SPLIT_STREAM)
    if d.source == "fashion-mnist":
        full, test = load_fashion_mnist(d.dir or os.environ.get("ADA_DATA_DIR"))
        train, val = split(full, d.holdout, rng.child(0))
        return train, val, test
    if d.source in ("xor", "or", "and"):
        ds = gen_gate(Gate(d.source))
        return ds, ds, ds
    gen = gen_circles if d.source == "circles" else gen_blobs
    kwargs = {"noise": d.noise} if d.source == "circles" else {}
    full = gen(d.n, rng=rng.child(1), **kwargs)
    test = gen(d.n_test, rng=rng.child(2), **kwargs)
    train, val = split(full, d.holdout, rng.child(0))
    return train, val, test
