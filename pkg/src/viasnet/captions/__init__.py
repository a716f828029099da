"""Scene captioning and caption embedding."""

from .cache import CaptionCache
from .captioner import (FIRST_SCENE, PROMPT_TEMPLATE, Caption, build_prompt, caption_any, caption_scene,
                        caption_short_scene, caption_video, load_captions, save_captions)
from .client import CaptionRequest, HttpCaptionClient, StubClient
from .text import SemanticEmbedding, TextEncoder, WordPieceTokenizer, embed_caption

__all__ = [
    "FIRST_SCENE", "PROMPT_TEMPLATE", "Caption", "CaptionCache", "CaptionRequest", "HttpCaptionClient",
    "SemanticEmbedding", "StubClient", "TextEncoder", "WordPieceTokenizer", "build_prompt", "caption_any",
    "caption_scene", "caption_short_scene", "caption_video", "embed_caption", "load_captions",
    "save_captions",
]
