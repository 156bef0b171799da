"""Sentence encoders behind a common interface.

``HashedNgramEncoder`` needs no downloads: word and character-trigram
hashing into a fixed-width feature space, plus an optional trainable linear
head (identity at start) that link-prediction finetuning updates.
``TransformerEncoder`` wraps any Hugging Face model name when the
``transformers`` package and weights are available.
"""

from __future__ import annotations

import zlib

import numpy as np
import torch

from .corpus import tokenize


class EncoderError(RuntimeError):
    """Encoder could not be constructed or run."""


class HashedNgramEncoder:
    """Deterministic offline featurizer with a finetunable linear head."""

    def __init__(self, dim: int = 256, seed: int = 0, char_ngram: int = 3):
        if dim < 2:
            raise EncoderError(f"dim must be >= 2, got {dim}")
        self.dim = dim
        self.seed = seed
        self.char_ngram = char_ngram
        torch.manual_seed(seed)
        self.head = torch.nn.Linear(dim, dim, bias=False).double()
        with torch.no_grad():
            self.head.weight.copy_(torch.eye(dim, dtype=torch.float64))

    def _bucket(self, token: str) -> int:
        return zlib.crc32(token.encode("utf-8")) % self.dim

    def featurize(self, text: str, max_tokens: int | None = None) -> np.ndarray:
        tokens = tokenize(text)
        if max_tokens is not None:
            tokens = tokens[:max_tokens]
        vec = np.zeros(self.dim)
        for token in tokens:
            vec[self._bucket(token)] += 1.0
            padded = f"#{token}#"
            for i in range(len(padded) - self.char_ngram + 1):
                vec[self._bucket(padded[i: i + self.char_ngram])] += 0.25
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def encode(self, texts: list[str], batch_size: int = 64,
               max_tokens: int | None = None) -> np.ndarray:
        features = np.stack([self.featurize(t, max_tokens) for t in texts]) if texts \
            else np.zeros((0, self.dim))
        with torch.no_grad():
            out = self.head(torch.from_numpy(features).double()).numpy()
        return out

    def trainable_parameters(self):
        return self.head.parameters()

    def encode_tensor(self, features: torch.Tensor) -> torch.Tensor:
        """Differentiable pass through the head (features precomputed)."""
        return self.head(features)


class TransformerEncoder:
    """Pretrained text encoder via transformers; pooling mean or first token."""

    def __init__(self, name: str, pooling: str = "mean", device: str = "cpu"):
        if pooling not in ("mean", "first"):
            raise EncoderError(f"pooling must be mean or first, got {pooling!r}")
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderError("the transformers package is not installed") from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(name)
            self.model = AutoModel.from_pretrained(name).to(device)
        except Exception as exc:
            raise EncoderError(f"could not load encoder {name!r}: {exc}") from exc
        self.model.eval()
        self.pooling = pooling
        self.device = device
        self.dim = int(self.model.config.hidden_size)

    def encode(self, texts: list[str], batch_size: int = 16,
               max_tokens: int | None = None) -> np.ndarray:
        outputs = []
        for start in range(0, len(texts), batch_size):
            batch = texts[start: start + batch_size]
            tokens = self.tokenizer(batch, return_tensors="pt", padding=True,
                                    truncation=True,
                                    max_length=max_tokens or self.tokenizer.model_max_length)
            tokens = {k: v.to(self.device) for k, v in tokens.items()}
            with torch.no_grad():
                hidden = self.model(**tokens).last_hidden_state
            if self.pooling == "first":
                pooled = hidden[:, 0]
            else:
                mask = tokens["attention_mask"].unsqueeze(-1)
                pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
            outputs.append(pooled.cpu().double().numpy())
        return np.concatenate(outputs) if outputs else np.zeros((0, self.dim))

    def trainable_parameters(self):
        return self.model.parameters()


def build_encoder(name: str, dim: int = 256, seed: int = 0, pooling: str = "mean"):
    if name == "hashed":
        return HashedNgramEncoder(dim=dim, seed=seed)
    return TransformerEncoder(name, pooling=pooling)
