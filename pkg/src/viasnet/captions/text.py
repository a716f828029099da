"""Wordpiece tokenizer and the trainable caption encoder."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

import torch
from torch import nn

from ..network.attention import TransformerBlock

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
_WORD_RE = re.compile(r"\w+|[^\w\s]")


def default_vocab():
    text = resources.files("viasnet").joinpath("data/vocab.txt").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line]


class WordPieceTokenizer:
    """Lowercasing greedy longest-match-first wordpiece tokenizer."""

    def __init__(self, vocab=None, max_length=64, max_chars_per_word=100):
        vocab = list(vocab) if vocab is not None else default_vocab()
        for tok in (PAD, UNK, CLS, SEP):
            if tok not in vocab:
                raise ValueError(f"vocabulary lacks {tok}")
        self.vocab = vocab
        self.ids = {tok: i for i, tok in enumerate(vocab)}
        self.max_length = max_length
        self.max_chars_per_word = max_chars_per_word

    def __len__(self):
        return len(self.vocab)

    @property
    def pad_id(self):
        return self.ids[PAD]

    def wordpieces(self, word):
        if len(word) > self.max_chars_per_word:
            return [UNK]
        pieces, start = [], 0
        while start < len(word):
            end, cur = len(word), None
            while start < end:
                sub = word[start:end] if start == 0 else "##" + word[start:end]
                if sub in self.ids:
                    cur = sub
                    break
                end -= 1
            if cur is None:
                return [UNK]
            pieces.append(cur)
            start = end
        return pieces

    def tokenize(self, text):
        out = []
        for word in _WORD_RE.findall(text.lower()):
            out.extend(self.wordpieces(word))
        return out

    def encode(self, text):
        """Token ids with [CLS]/[SEP], truncated and padded to ``max_length``; plus the pad mask."""
        toks = [CLS] + self.tokenize(text)[: self.max_length - 2] + [SEP]
        ids = [self.ids[t] for t in toks]
        n = len(ids)
        ids += [self.pad_id] * (self.max_length - n)
        return ids, [False] * n + [True] * (self.max_length - n)

    def batch_encode(self, texts):
        enc = [self.encode(t) for t in texts]
        ids = torch.tensor([e[0] for e in enc], dtype=torch.long)
        mask = torch.tensor([e[1] for e in enc], dtype=torch.bool)
        return ids, mask


@dataclass
class SemanticEmbedding:
    tokens: torch.Tensor  # (L, D)
    pooled: torch.Tensor  # (D,)
    padding_mask: torch.Tensor  # (L,), True at padding


class TextEncoder(nn.Module):
    """Small transformer encoder over wordpiece tokens.

    Plays the role of a pretrained BERT-style encoder at reduced size; it is
    trained jointly with the saliency network.
    """

    def __init__(self, dim=64, layers=2, heads=4, max_length=64, vocab=None):
        super().__init__()
        self.tokenizer = WordPieceTokenizer(vocab, max_length)
        self.dim = dim
        self.token_embed = nn.Embedding(len(self.tokenizer), dim)
        self.pos_embed = nn.Parameter(torch.zeros(max_length, dim))
        nn.init.normal_(self.pos_embed, std=0.02)
        self.blocks = nn.ModuleList(TransformerBlock(dim, heads) for _ in range(layers))
        self.norm = nn.LayerNorm(dim)

    def forward(self, ids, padding_mask):
        x = self.token_embed(ids) + self.pos_embed[: ids.shape[1]]
        for blk in self.blocks:
            x = blk(x, padding_mask)
        x = self.norm(x)
        return x, x[:, 0]

    def encode_texts(self, texts):
        """Returns ``(tokens (B, L, D), pooled (B, D), padding_mask (B, L))``."""
        ids, mask = self.tokenizer.batch_encode(texts)
        ids = ids.to(self.token_embed.weight.device)
        mask = mask.to(ids.device)
        tokens, pooled = self(ids, mask)
        return tokens, pooled, mask


def embed_caption(caption, encoder):
    """Embed one caption (a :class:`Caption` or plain text) with ``encoder``."""
    text = caption.text if hasattr(caption, "text") else str(caption)
    if not text.strip():
        raise ValueError("cannot embed an empty caption")
    tokens, pooled, mask = encoder.encode_texts([text])
    return SemanticEmbedding(tokens[0], pooled[0], mask[0])
