"""Score-distillation gradient modes: SDS, CSD, and semantic-enhancement SDS.

All three return image-space gradient factors with the same shape as the
input render. The stub model works directly on the [0,1] pixel image (an
identity encoder); a real latent-space model would encode first and pull the
gradient back through the encoder.
"""

from __future__ import annotations

import numpy as np

from .model import add_noise, default_omega
from .prompts import PromptSpec, blend_embeddings, embed_tokens, empty_embedding


def _cfg_predict(model, x_t, t, cond_emb, uncond_emb, cfg_scale):
    eps_cond = model.predict(x_t, t, cond_emb)
    eps_uncond = model.predict(x_t, t, uncond_emb)
    return eps_uncond + cfg_scale * (eps_cond - eps_uncond)


def sds_grad(render: np.ndarray, prompt: PromptSpec, t: float,
             eps: np.ndarray, model, omega=default_omega,
             cond_emb: np.ndarray | None = None) -> np.ndarray:
    """omega(t) * (eps_hat_cfg - eps) for the classifier-free-guided prediction."""
    render = np.asarray(render, dtype=np.float64)
    if cond_emb is None:
        cond_emb = embed_tokens(prompt.tokens)
    uncond_emb = empty_embedding(len(prompt.tokens))
    x_t = add_noise(render, t, eps)
    eps_hat = _cfg_predict(model, x_t, t, cond_emb, uncond_emb, prompt.cfg_scale)
    return omega(t) * (eps_hat - eps)


def csd_grad(render: np.ndarray, prompt: PromptSpec, t: float,
             eps: np.ndarray, model, omega_pos: float | None = None,
             omega_neg: float | None = None) -> np.ndarray:
    """omega_pos * eps_hat(y) - omega_neg * eps_hat(y_neg), two conditioned
    inferences without the unconditional term."""
    omega_pos = prompt.omega_pos if omega_pos is None else omega_pos
    omega_neg = prompt.omega_neg if omega_neg is None else omega_neg
    if omega_neg != 0.0 and not prompt.negative_prompt:
        raise ValueError("negative prompt required when omega_neg != 0")
    render = np.asarray(render, dtype=np.float64)
    x_t = add_noise(render, t, eps)
    pos = model.predict(x_t, t, embed_tokens(prompt.tokens))
    out = omega_pos * pos
    if omega_neg != 0.0:
        out = out - omega_neg * model.predict(
            x_t, t, embed_tokens(prompt.negative_prompt))
    return out


def se_sds_grad(render: np.ndarray, prompt: PromptSpec, t: float,
                eps: np.ndarray, model, omega=default_omega) -> np.ndarray:
    """SDS conditioned on the Compel-style weighted embedding blend."""
    e = embed_tokens(prompt.tokens)
    e0 = empty_embedding(len(prompt.tokens))
    e_w = blend_embeddings(e, e0, np.asarray(prompt.weights, dtype=np.float64))
    return sds_grad(render, prompt, t, eps, model, omega=omega, cond_emb=e_w)


GRAD_MODES = {"sds": sds_grad, "csd": csd_grad, "se_sds": se_sds_grad}


class GuidanceSession:
    """Stateful per-connection gradient provider: one t and one eps drawn per
    request, shared across that request's views; gradients averaged over views."""

    def __init__(self, mode: str, prompt: PromptSpec, model, seed: int = 0,
                 omega=default_omega):
        if mode not in GRAD_MODES:
            raise ValueError(f"unknown mode {mode!r}; choose from {sorted(GRAD_MODES)}")
        self.mode = mode
        self.prompt = prompt
        self.model = model
        self.omega = omega
        self.rng = np.random.default_rng(seed)

    def __call__(self, images: np.ndarray):
        """images: (N, H, W, 3) in [0,1] -> (grads with same shape, loss)."""
        n = images.shape[0]
        t = float(self.rng.uniform(self.prompt.t_min, self.prompt.t_max))
        eps = self.rng.standard_normal(images.shape[1:])
        grads = np.empty_like(images, dtype=np.float64)
        for i in range(n):
            if self.mode == "csd":
                grads[i] = csd_grad(images[i], self.prompt, t, eps, self.model)
            else:
                grads[i] = GRAD_MODES[self.mode](images[i], self.prompt, t,
                                                 eps, self.model,
                                                 omega=self.omega)
        grads /= n
        loss = float((grads ** 2).sum() / n)
        return grads, loss
