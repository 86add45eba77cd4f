"""Reverse-mode autodiff engine, point-cloud backbones, and training loop."""

from .backbones import (BACKBONE_NAMES, EdgeConvBackbone, ModelConfig,
                        MultiHeadSegmenter, SetHierarchyBackbone,
                        TransformerBlockBackbone, build_model, heads_forward)
from .checkpoint import load_checkpoint, save_checkpoint
from .modules import MLP, Linear, Module, Parameter
from .tensor import Tensor, cross_entropy, log_softmax, softmax
from .train import (AdamW, TrainConfig, TrainResult, evaluate,
                    multilayer_loss, one_cycle_lr, predict, train)

__all__ = [
    "Tensor", "softmax", "log_softmax", "cross_entropy",
    "Module", "Parameter", "Linear", "MLP",
    "ModelConfig", "BACKBONE_NAMES", "MultiHeadSegmenter", "build_model",
    "heads_forward", "SetHierarchyBackbone", "EdgeConvBackbone",
    "TransformerBlockBackbone",
    "TrainConfig", "TrainResult", "AdamW", "one_cycle_lr", "multilayer_loss",
    "train", "evaluate", "predict",
    "save_checkpoint", "load_checkpoint",
]
