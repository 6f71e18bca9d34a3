"""Dense and pyramidal (two-branch) layers with manual backprop.

A pyramidal layer sums two independent affine branches::

    y = basal_act(x @ W_basal + b_basal) + apical_act(x @ W_apical + b_apical)

With ReLU on the basal branch and ADA on the apical branch this is PyNADA;
other apical activations give the PyNReLU / PyNRBF / PyNSwish baselines.

Parameters are exposed through ``parameters()`` as a flat ``name -> array``
dict. Learnable activation scalars appear as 0-d arrays under
``"<branch>.alpha"`` / ``"<branch>.beta"``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .activations import (
    ActivationSpec,
    activation_forward,
    activation_grad_alpha,
    activation_grad_beta,
    activation_grad_input,
)
from .errors import DimensionError, FormatError
from .tensor import Matrix, RngStream, add_row_broadcast, matmul, row_sum

LayerGrads = dict  # parameter name -> gradient array, mirrors Layer.parameters()


def init_glorot(in_dim: int, out_dim: int, rng: RngStream) -> Matrix:
    if in_dim < 1 or out_dim < 1:
        raise DimensionError(f"layer dims must be >= 1, got {in_dim}x{out_dim}")
    bound = math.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-bound, bound, (in_dim, out_dim))


def _check_input(x: Matrix, in_dim: int) -> None:
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise DimensionError(f"input {x.shape} does not match layer in_dim {in_dim}")


def _branch_forward(W, b, act, x):
    pre = add_row_broadcast(matmul(x, W), b)
    return activation_forward(act, pre), pre


def _branch_backward(W, act, x, pre, dY, prefix, grads):
    delta = dY * activation_grad_input(act, pre)
    grads[f"W{prefix}"] = x.T @ delta
    grads[f"b{prefix}"] = row_sum(delta)
    branch = prefix.lstrip("_") or "act"
    if act.alpha_learnable:
        grads[f"{branch}.alpha"] = np.asarray(np.sum(dY * activation_grad_alpha(act, pre)))
    if act.beta_learnable:
        grads[f"{branch}.beta"] = np.asarray(np.sum(dY * activation_grad_beta(act, pre)))
    return delta @ W.T


def _scalar_params(act, branch, out):
    if act.alpha_learnable:
        out[f"{branch}.alpha"] = np.asarray(float(act.alpha))
    if act.beta_learnable:
        out[f"{branch}.beta"] = np.asarray(float(act.beta))


def _set_scalar(act, attr, value):
    setattr(act, attr, float(value))


@dataclass
class DenseLayer:
    W: Matrix
    b: Matrix
    act: ActivationSpec

    kind = "dense"

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(1, -1)
        if self.b.shape[1] != self.W.shape[1]:
            raise DimensionError(f"bias {self.b.shape} does not match weights {self.W.shape}")

    @classmethod
    def create(cls, in_dim, out_dim, act, rng):
        return cls(init_glorot(in_dim, out_dim, rng), np.zeros((1, out_dim)), act)

    @property
    def in_dim(self):
        return self.W.shape[0]

    @property
    def out_dim(self):
        return self.W.shape[1]

    def forward(self, x):
        _check_input(x, self.in_dim)
        y, pre = _branch_forward(self.W, self.b, self.act, x)
        return y, (x, pre)

    def backward(self, cache, dY):
        x, pre = cache
        if dY.shape != pre.shape:
            raise DimensionError(f"upstream gradient {dY.shape} != output {pre.shape}")
        grads: LayerGrads = {}
        dX = _branch_backward(self.W, self.act, x, pre, dY, "", grads)
        return grads, dX

    def parameters(self):
        out = {"W": self.W, "b": self.b}
        _scalar_params(self.act, "act", out)
        return out

    def set_parameter(self, name, value):
        if name == "W":
            self.W = np.asarray(value, dtype=np.float64)
        elif name == "b":
            self.b = np.asarray(value, dtype=np.float64)
        elif name.startswith("act."):
            _set_scalar(self.act, name[4:], value)
        else:
            raise KeyError(name)

    def n_weights(self):
        return self.W.size + self.b.size

    def activations(self):
        return {"act": self.act}


@dataclass
class PyramidalLayer:
    W_basal: Matrix
    b_basal: Matrix
    act_basal: ActivationSpec
    W_apical: Matrix
    b_apical: Matrix
    act_apical: ActivationSpec

    kind = "pyramidal"

    def __post_init__(self):
        self.W_basal = np.asarray(self.W_basal, dtype=np.float64)
        self.W_apical = np.asarray(self.W_apical, dtype=np.float64)
        self.b_basal = np.asarray(self.b_basal, dtype=np.float64).reshape(1, -1)
        self.b_apical = np.asarray(self.b_apical, dtype=np.float64).reshape(1, -1)
        if self.W_basal.shape != self.W_apical.shape:
            raise DimensionError(
                f"branch weights differ: basal {self.W_basal.shape}, apical {self.W_apical.shape}"
            )
        if self.b_basal.shape != self.b_apical.shape or self.b_basal.shape[1] != self.out_dim:
            raise DimensionError("branch biases must both be 1 x out_dim")

    @classmethod
    def create(cls, in_dim, out_dim, act_basal, act_apical, rng):
        # separate streams: the branches are independent parameter sets
        return cls(
            init_glorot(in_dim, out_dim, rng.child(0)),
            np.zeros((1, out_dim)),
            act_basal,
            init_glorot(in_dim, out_dim, rng.child(1)),
            np.zeros((1, out_dim)),
            act_apical,
        )

    @property
    def in_dim(self):
        return self.W_basal.shape[0]

    @property
    def out_dim(self):
        return self.W_basal.shape[1]

    def forward(self, x):
        _check_input(x, self.in_dim)
        y_basal, pre_basal = _branch_forward(self.W_basal, self.b_basal, self.act_basal, x)
        y_apical, pre_apical = _branch_forward(self.W_apical, self.b_apical, self.act_apical, x)
        return y_basal + y_apical, (x, pre_basal, pre_apical)

    def backward(self, cache, dY):
        x, pre_basal, pre_apical = cache
        if dY.shape != pre_basal.shape:
            raise DimensionError(f"upstream gradient {dY.shape} != output {pre_basal.shape}")
        grads: LayerGrads = {}
        dX = _branch_backward(self.W_basal, self.act_basal, x, pre_basal, dY, "_basal", grads)
        dX = dX + _branch_backward(self.W_apical, self.act_apical, x, pre_apical, dY, "_apical", grads)
        return grads, dX

    def parameters(self):
        out = {
            "W_basal": self.W_basal,
            "b_basal": self.b_basal,
            "W_apical": self.W_apical,
            "b_apical": self.b_apical,
        }
        _scalar_params(self.act_basal, "basal", out)
        _scalar_params(self.act_apical, "apical", out)
        return out

    def set_parameter(self, name, value):
        if name in ("W_basal", "b_basal", "W_apical", "b_apical"):
            setattr(self, name, np.asarray(value, dtype=np.float64))
        elif name.startswith("basal."):
            _set_scalar(self.act_basal, name[6:], value)
        elif name.startswith("apical."):
            _set_scalar(self.act_apical, name[7:], value)
        else:
            raise KeyError(name)

    def n_weights(self):
        return self.W_basal.size + self.b_basal.size + self.W_apical.size + self.b_apical.size

    def activations(self):
        return {"basal": self.act_basal, "apical": self.act_apical}


Layer = Union[DenseLayer, PyramidalLayer]


def dense_forward(layer: DenseLayer, x: Matrix):
    return layer.forward(x)


def dense_backward(layer: DenseLayer, cache, dY: Matrix):
    return layer.backward(cache, dY)


def pyramidal_forward(layer: PyramidalLayer, x: Matrix):
    return layer.forward(x)


def pyramidal_backward(layer: PyramidalLayer, cache, dY: Matrix):
    return layer.backward(cache, dY)


# -- checkpoint container --------------------------------------------------
#
#   bytes 0..7   magic b"APCKPT01"
#   bytes 8..11  header length N, uint32 little-endian
#   next N bytes UTF-8 JSON header:
#                {"layers": [{"type": ..., "activations": {...},
#                             "tensors": [{"name": ..., "shape": [r, c]}, ...]}]}
#   remainder    every tensor's entries, float64 little-endian, row-major,
#                in header order

MAGIC = b"APCKPT01"
_TENSORS = {
    "dense": ("W", "b"),
    "pyramidal": ("W_basal", "b_basal", "W_apical", "b_apical"),
}


def save_layers(path, layers) -> None:
    header = {"layers": []}
    blobs = []
    for layer in layers:
        entry = {
            "type": layer.kind,
            "activations": {k: a.to_dict() for k, a in layer.activations().items()},
            "tensors": [],
        }
        for name in _TENSORS[layer.kind]:
            arr = getattr(layer, name)
            entry["tensors"].append({"name": name, "shape": list(arr.shape)})
            blobs.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        header["layers"].append(entry)
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for blob in blobs:
            f.write(blob)


def load_layers(path) -> list:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise FormatError("not a layer checkpoint (bad magic)", 0)
    if len(raw) < 12:
        raise FormatError("truncated checkpoint header", 8)
    (n,) = struct.unpack("<I", raw[8:12])
    try:
        header = json.loads(raw[12 : 12 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable checkpoint header: {exc}", 12) from None
    offset = 12 + n
    layers = []
    for entry in header["layers"]:
        tensors = {}
        for t in entry["tensors"]:
            rows, cols = t["shape"]
            nbytes = rows * cols * 8
            if offset + nbytes > len(raw):
                raise FormatError(f"truncated data for tensor {t['name']}", offset)
            tensors[t["name"]] = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols).astype(np.float64)
            offset += nbytes
        acts = {k: ActivationSpec.from_dict(v) for k, v in entry["activations"].items()}
        if entry["type"] == "dense":
            layers.append(DenseLayer(tensors["W"], tensors["b"], acts["act"]))
        elif entry["type"] == "pyramidal":
            layers.append(
                PyramidalLayer(
                    tensors["W_basal"], tensors["b_basal"], acts["basal"],
                    tensors["W_apical"], tensors["b_apical"], acts["apical"],
                )
            )
        else:
            raise FormatError(f"unknown layer type {entry['type']!r}", 12)
    if offset != len(raw):
        raise FormatError("trailing bytes after last tensor", offset)
    return layers

