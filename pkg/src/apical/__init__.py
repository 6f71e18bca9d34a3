"""Apical dendrite activation (ADA), leaky ADA and pyramidal PyNADA layers in numpy."""

from .activations import ActivationSpec, Kind, ada, ada_reference, leaky_ada
from .layers import DenseLayer, PyramidalLayer
from .tensor import RngStream
from .train import Architecture, Network, TrainConfig

__version__ = "0.1.0"
