"""Multimodal video-ad saliency prediction and engagement diagnostics."""

__version__ = "0.1.0"
