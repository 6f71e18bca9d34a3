"""Single-neuron logic gates: hand-set constructions and learnability by training.

A neuron ``ADA(X @ w + b, alpha, c)`` whose output is rounded to the nearest
integer reproduces XOR with ``w = [5, 5]``, ``b = -4``, ``alpha = c = 1``:
pre-activations ``[-4, 1, 1, 6]`` give ``[0, 1, 1, 6 e^-5]`` before rounding.
Changing ``alpha, c`` to ``0.4, 0.5`` gives OR; changing ``b`` to ``-9`` gives AND.
A pyramidal neuron with its basal branch zeroed reduces to the XOR neuron.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .activations import ActivationSpec, Kind
from .data import GATE_INPUTS, GATE_TARGETS, Gate, gen_gate
from .layers import DenseLayer, PyramidalLayer
from .tensor import Matrix, RngStream
from .train import Network, TrainConfig, evaluate, round_half_away, train_once


@dataclass
class GateCase:
    name: str
    gate: Gate
    neuron: Union[DenseLayer, PyramidalLayer]
    X: Matrix = field(default_factory=lambda: GATE_INPUTS.copy())
    T: Matrix = None

    def __post_init__(self):
        self.gate = Gate(self.gate)
        if self.T is None:
            self.T = GATE_TARGETS[self.gate].copy()


@dataclass
class GateReport:
    case: GateCase
    raw: Matrix
    rounded: Matrix
    passed: bool


def round_output(y: Matrix) -> Matrix:
    """Nearest integer, ties away from zero."""
    return round_half_away(np.asarray(y, dtype=np.float64))


def verify_gate(case: GateCase) -> GateReport:
    raw, _ = case.neuron.forward(case.X)
    rounded = round_output(raw)
    return GateReport(case, raw, rounded, bool(np.array_equal(rounded, case.T)))


def ada_neuron(w, b, alpha, c) -> DenseLayer:
    return DenseLayer(np.asarray(w, dtype=np.float64).reshape(-1, 1), np.array([[b]], dtype=np.float64),
                      ActivationSpec(Kind.ADA, alpha=alpha, c=c))


def construction_cases(alpha_override=None) -> list:
    """The four constructions (XOR, OR, AND, pyramidal XOR).

    ``alpha_override`` replaces every alpha; it exists to exercise the failure path.
    """

    def a(value):
        return value if alpha_override is None else alpha_override

    xor = ada_neuron([5, 5], -4, a(1.0), 1.0)
    pyr = PyramidalLayer(
        np.zeros((2, 1)), np.zeros((1, 1)), ActivationSpec(Kind.RELU),
        xor.W.copy(), xor.b.copy(), replace(xor.act),
    )
    return [
        GateCase("XOR", Gate.XOR, xor),
        GateCase("OR", Gate.OR, ada_neuron([5, 5], -4, a(0.4), 0.5)),
        GateCase("AND", Gate.AND, ada_neuron([5, 5], -9, a(1.0), 1.0)),
        GateCase("PyNADA-XOR", Gate.XOR, pyr),
    ]


def format_report_table(reports) -> str:
    lines = [f"{'gate':<11} {'raw':<40} {'rounded':<14} result"]
    for r in reports:
        raw = "[" + ", ".join(f"{v:.6f}" for v in r.raw[:, 0]) + "]"
        rounded = "[" + ",".join(str(int(v)) for v in r.rounded[:, 0]) + "]"
        lines.append(f"{r.case.name:<11} {raw:<40} {rounded:<14} {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)


@dataclass
class GateTraining:
    accuracy: float
    trials_used: int
    restart_accuracies: list


def train_gate(gate, act: ActivationSpec, config: TrainConfig = None, pyramidal=False) -> GateTraining:
    """Fit one neuron to a gate by gradient descent, restarting up to ``config.trials`` times.

    Uses MSE on the raw output, so the trained object is exactly the rounded
    neuron used by the constructions. Stops at the first restart reaching 4/4.
    """
    config = config or TrainConfig(schedule=((2000, 1e-2),), batch_size=4, trials=5, loss="mse")
    ds = gen_gate(gate)
    master = RngStream(config.seed)
    accs = []
    for k in range(config.trials):
        rng = master.child(k)
        if pyramidal:
            layer = PyramidalLayer.create(2, 1, ActivationSpec(Kind.RELU), replace(act), rng.child(0))
        else:
            layer = DenseLayer.create(2, 1, replace(act), rng.child(0))
        net = Network([layer])
        train_once(net, ds, ds, config, rng.child(1), trial=k)
        accs.append(evaluate(net, ds, "mse").accuracy)
        if accs[-1] == 1.0:
            break
    return GateTraining(max(accs), len(accs), accs)
