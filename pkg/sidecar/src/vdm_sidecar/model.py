"""Noise-prediction models and the diffusion schedule.

The stub model is a fixed linear map from (noised image, conditioning
embedding) to predicted noise, so every gradient formula downstream has a
closed form and is unit-testable without weights.
"""

from __future__ import annotations

import numpy as np

from .prompts import EMBED_DIM


def alpha_bar(t: float) -> float:
    """Cosine cumulative signal level; 1 at t=0, 0 at t=1."""
    return float(np.cos(0.5 * np.pi * t) ** 2)


def default_omega(t: float) -> float:
    return 1.0 - alpha_bar(t)


def add_noise(image: np.ndarray, t: float, eps: np.ndarray) -> np.ndarray:
    ab = alpha_bar(t)
    return np.sqrt(ab) * image + np.sqrt(1.0 - ab) * eps


class StubDiffusionModel:
    """Deterministic linear noise predictor.

    eps_hat(x_t, t, emb) = image_gain * x_t + channel_map @ mean(emb),
    broadcast over pixels. Linear in both arguments, so CFG combinations and
    embedding blends have exact hand-computable outputs.
    """

    max_resolution = 512

    def __init__(self, seed: int = 0, image_gain: float = 0.5,
                 embed_dim: int = EMBED_DIM):
        rng = np.random.default_rng(seed)
        self.image_gain = image_gain
        self.channel_map = rng.standard_normal((3, embed_dim)) * 0.1

    def embedding_response(self, emb: np.ndarray) -> np.ndarray:
        """Per-channel response to a token-embedding sequence (its mean)."""
        return self.channel_map @ np.asarray(emb, dtype=np.float64).mean(axis=0)

    def predict(self, x_t: np.ndarray, t: float, emb: np.ndarray) -> np.ndarray:
        return self.image_gain * x_t + self.embedding_response(emb)


class ModelLoadError(RuntimeError):
    pass


def load_model(name: str | None, stub: bool, seed: int = 0):
    if stub:
        return StubDiffusionModel(seed=seed)
    raise ModelLoadError(
        "no pretrained diffusion model is available in this environment; "
        "run with --stub for the deterministic test model")
