"""Prompt specification and weighted token-embedding blending."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

EMBED_DIM = 16
ENHANCED_WEIGHT = 1.1 ** 2  # default weight for semantically enhanced words


@dataclass
class PromptSpec:
    tokens: list[str]
    weights: list[float] | None = None
    negative_prompt: list[str] | None = None
    cfg_scale: float = 100.0
    omega_pos: float = 1.0
    omega_neg: float = 0.0
    t_min: float = 0.02
    t_max: float = 0.98

    def __post_init__(self):
        if self.weights is None:
            self.weights = [1.0] * len(self.tokens)
        if len(self.weights) != len(self.tokens):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.weights)} weights")
        if any(w <= 0 for w in self.weights):
            raise ValueError("prompt weights must be positive")
        if not 0.0 <= self.t_min < self.t_max <= 1.0:
            raise ValueError(f"bad timestep range [{self.t_min}, {self.t_max}]")

    @classmethod
    def from_dict(cls, d: dict) -> "PromptSpec":
        return cls(tokens=list(d["tokens"]),
                   weights=list(d["weights"]) if "weights" in d else None,
                   negative_prompt=list(d["negative_prompt"])
                   if d.get("negative_prompt") else None,
                   cfg_scale=float(d.get("cfg_scale", 100.0)),
                   omega_pos=float(d.get("omega_pos", 1.0)),
                   omega_neg=float(d.get("omega_neg", 0.0)),
                   t_min=float(d.get("t_min", 0.02)),
                   t_max=float(d.get("t_max", 0.98)))


def token_embedding(token: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Deterministic pseudo-embedding: stable across processes and runs."""
    digest = hashlib.sha256(token.encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dim)


def embed_tokens(tokens: list[str], dim: int = EMBED_DIM) -> np.ndarray:
    if not tokens:
        return np.zeros((1, dim))
    return np.stack([token_embedding(t, dim) for t in tokens])


def empty_embedding(n_tokens: int, dim: int = EMBED_DIM) -> np.ndarray:
    """Position-aligned empty-text embedding sequence."""
    return np.tile(token_embedding("", dim), (max(n_tokens, 1), 1))


def blend_embeddings(e: np.ndarray, e0: np.ndarray, s) -> np.ndarray:
    """Per-token weighted blend e_w[i] = e0[i] + s[i] * (e[i] - e0[i])."""
    e = np.asarray(e, dtype=np.float64)
    e0 = np.asarray(e0, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if e.shape != e0.shape:
        raise ValueError(f"embedding shapes differ: {e.shape} vs {e0.shape}")
    if s.ndim != 1 or s.shape[0] != e.shape[0]:
        raise ValueError(
            f"{e.shape[0]} tokens but weight vector of shape {s.shape}")
    out = e0 + s[:, None] * (e - e0)
    # exact passthrough at s=1: e0 + (e - e0) is not bit-identical to e in
    # floating point, but unit weight must be the identity
    out[s == 1.0] = e[s == 1.0]
    return out
