"""Minimal neural-network engine."""

from .checkpoint import load_checkpoint, loads_checkpoint, dumps_checkpoint, save_checkpoint
from .gradcheck import GradReport, check_network, grad_check
from .layers import (LSTM, Concat, Conv1D, Dense, GlobalAvgPool, Layer, NoForwardCache, ShapeMismatch,
                     SoftmaxCE, sigmoid, softmax)
from .network import FixedBranch, Grads, Inputs, MultiBranchNet, StageArchitecture
from .optim import AdamState, adam_step

__all__ = [
    "AdamState", "Concat", "Conv1D", "Dense", "FixedBranch", "GlobalAvgPool", "GradReport", "Grads", "Inputs",
    "LSTM", "Layer", "MultiBranchNet", "NoForwardCache", "ShapeMismatch", "SoftmaxCE", "StageArchitecture",
    "adam_step", "check_network", "dumps_checkpoint", "grad_check", "load_checkpoint", "loads_checkpoint",
    "save_checkpoint", "sigmoid", "softmax",
]
