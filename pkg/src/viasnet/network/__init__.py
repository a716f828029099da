"""Multimodal encoder / unified-attention / decoder saliency network."""

from .config import ABLATIONS, AblationMask, ModelConfig
from .model import ViASNet, build_model, load_checkpoint, param_count, save_checkpoint

__all__ = ["ABLATIONS", "AblationMask", "ModelConfig", "ViASNet", "build_model", "load_checkpoint",
           "param_count", "save_checkpoint"]
