"""A small differentiable policy over fixed-length discrete token sequences.

The policy scores tokens position by position with a two-layer tanh MLP on
top of a fixed per-input context embedding: the input at position t is the
concatenation of the context vector, a one-hot position indicator, and the
one-hot of the previously chosen token (zeros at t = 0). Sampling draws
tokens autoregressively from softmax(logits / temperature).

Training minimizes the on-policy soft-Q loss: each chosen token's logit is
regressed onto a stop-gradient target, which is the soft state value
V = temperature * logsumexp(logits / temperature) of the next position at
interior steps and the (scaled) terminal reward at the last step. Gradients
are computed analytically by backpropagation and validated against finite
differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "PolicyConfig",
    "PolicyParams",
    "PromptSample",
    "param_count",
    "init_policy",
    "sample_prompts",
    "sql_loss_and_grad",
    "per_objective_loss_grads",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class PolicyConfig:
    """Architecture and loss constants for the token policy.

    Attributes:
        vocab_size: number of distinct tokens.
        prompt_length: tokens sampled per prompt.
        hidden_dim: width of both hidden layers.
        context_dim: dimension of the per-input context embedding.
        temperature: soft-value temperature; also used when sampling.
        reward_scale: terminal rewards are multiplied by this inside the
            loss so targets are commensurate with logit magnitudes.
    """

    vocab_size: int
    prompt_length: int = 5
    hidden_dim: int = 32
    context_dim: int = 8
    temperature: float = 1.0
    reward_scale: float = 10.0

    def __post_init__(self):
        for name in ("vocab_size", "prompt_length", "hidden_dim", "context_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.reward_scale <= 0.0:
            raise ValueError("reward_scale must be positive")

    @property
    def input_dim(self) -> int:
        return self.context_dim + self.prompt_length + self.vocab_size


@dataclass(frozen=True)
class PolicyParams:
    """Flat parameter vector with a fixed layout determined by the config.

    Layout order: input projection, hidden matrix, hidden bias, output
    head, output bias.
    """

    cfg: PolicyConfig
    flat: np.ndarray

    def __post_init__(self):
        expected = param_count(self.cfg)
        if self.flat.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got shape {self.flat.shape}")
        if not np.isfinite(self.flat).all():
            raise ValueError("parameters must be finite")


@dataclass(frozen=True)
class PromptSample:
    """One sampled prompt plus the evidence needed to audit it."""

    tokens: np.ndarray
    token_logits: np.ndarray
    log_prob: float
    context: np.ndarray = field(default_factory=lambda: np.zeros(0))


def param_count(cfg: PolicyConfig) -> int:
    h, v = cfg.hidden_dim, cfg.vocab_size
    return h * cfg.input_dim + h * h + h + v * h + v


def _views(cfg: PolicyConfig, flat: np.ndarray):
    """Slice the flat vector into weight matrices without copying."""
    h, v, d = cfg.hidden_dim, cfg.vocab_size, cfg.input_dim
    bounds = np.cumsum([h * d, h * h, h, v * h, v])
    w_in = flat[: bounds[0]].reshape(h, d)
    w_h = flat[bounds[0] : bounds[1]].reshape(h, h)
    b_h = flat[bounds[1] : bounds[2]]
    w_out = flat[bounds[2] : bounds[3]].reshape(v, h)
    b_out = flat[bounds[3] : bounds[4]]
    return w_in, w_h, b_h, w_out, b_out


def init_policy(cfg: PolicyConfig, seed: int) -> PolicyParams:
    """Weights i.i.d. uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero."""
    rng = np.random.default_rng(seed)
    h, v, d = cfg.hidden_dim, cfg.vocab_size, cfg.input_dim
    parts = [
        rng.uniform(-1.0, 1.0, h * d) / np.sqrt(d),
        rng.uniform(-1.0, 1.0, h * h) / np.sqrt(h),
        np.zeros(h),
        rng.uniform(-1.0, 1.0, v * h) / np.sqrt(h),
        np.zeros(v),
    ]
    return PolicyParams(cfg=cfg, flat=np.concatenate(parts))


def _forward(cfg: PolicyConfig, flat: np.ndarray, contexts: np.ndarray, tokens: np.ndarray):
    """Shared forward pass over a batch of complete prompts.

    Args:
        contexts: (n, context_dim) context vector per sample.
        tokens: (n, T) integer token ids per sample.

    Returns:
        (inputs, h0, h1, logits), each with a leading (n, T) block flattened
        to rows, in token order within each sample.
    """
    w_in, w_h, b_h, w_out, b_out = _views(cfg, flat)
    n, t_len = tokens.shape
    x = np.zeros((n, t_len, cfg.input_dim))
    x[:, :, : cfg.context_dim] = contexts[:, None, :]
    for t in range(t_len):
        x[:, t, cfg.context_dim + t] = 1.0
        if t > 0:
            x[np.arange(n), t, cfg.context_dim + cfg.prompt_length + tokens[:, t - 1]] = 1.0
    rows = x.reshape(n * t_len, cfg.input_dim)
    h0 = np.tanh(rows @ w_in.T)
    h1 = np.tanh(h0 @ w_h.T + b_h)
    logits = h1 @ w_out.T + b_out
    return rows, h0, h1, logits


def _log_softmax(logits: np.ndarray, temperature: float) -> np.ndarray:
    z = logits / temperature
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def sample_prompts(params: PolicyParams, context, k: int, seed: int) -> list[PromptSample]:
    """Draw k prompts autoregressively; deterministic per seed.

    Raises:
        ValueError: if k is not positive or the context dimension is wrong.
    """
    cfg = params.cfg
    ctx = np.asarray(context, dtype=float).ravel()
    if ctx.shape[0] != cfg.context_dim:
        raise ValueError(f"context has dimension {ctx.shape[0]}, expected {cfg.context_dim}")
    if k <= 0:
        raise ValueError("k must be positive")
    w_in, w_h, b_h, w_out, b_out = _views(cfg, params.flat)
    rng = np.random.default_rng(seed)

    tokens = np.zeros((k, cfg.prompt_length), dtype=np.int64)
    all_logits = np.zeros((k, cfg.prompt_length, cfg.vocab_size))
    log_probs = np.zeros(k)
    x = np.zeros((k, cfg.input_dim))
    x[:, : cfg.context_dim] = ctx
    for t in range(cfg.prompt_length):
        x[:, cfg.context_dim :] = 0.0
        x[:, cfg.context_dim + t] = 1.0
        if t > 0:
            x[np.arange(k), cfg.context_dim + cfg.prompt_length + tokens[:, t - 1]] = 1.0
        h1 = np.tanh(np.tanh(x @ w_in.T) @ w_h.T + b_h)
        logits = h1 @ w_out.T + b_out
        log_p = _log_softmax(logits, cfg.temperature)
        cum = np.exp(log_p).cumsum(axis=1)
        draw = rng.random(k)
        chosen = np.minimum((draw[:, None] >= cum).sum(axis=1), cfg.vocab_size - 1)
        tokens[:, t] = chosen
        all_logits[:, t, :] = logits
        log_probs += log_p[np.arange(k), chosen]
    return [
        PromptSample(
            tokens=tokens[i].copy(),
            token_logits=all_logits[i].copy(),
            log_prob=float(log_probs[i]),
            context=ctx.copy(),
        )
        for i in range(k)
    ]


def _stack_samples(cfg: PolicyConfig, samples: list[PromptSample]):
    if not samples:
        raise ValueError("samples must be nonempty")
    tokens = np.stack([s.tokens for s in samples])
    contexts = np.stack([s.context for s in samples])
    if tokens.shape[1] != cfg.prompt_length:
        raise ValueError("sample prompt length does not match config")
    if contexts.shape[1] != cfg.context_dim:
        raise ValueError("sample context dimension does not match config")
    if tokens.min() < 0 or tokens.max() >= cfg.vocab_size:
        raise ValueError("token id out of range")
    return tokens, contexts


def _loss_targets(cfg: PolicyConfig, logits: np.ndarray, rewards: np.ndarray, n: int):
    """Per-position regression targets, treated as constants.

    Interior positions target the next position's soft value; the final
    position targets the scaled terminal reward.
    """
    t_len = cfg.prompt_length
    z = logits / cfg.temperature
    z_max = z.max(axis=1)
    values = cfg.temperature * (np.log(np.exp(z - z_max[:, None]).sum(axis=1)) + z_max)
    values = values.reshape(n, t_len)
    targets = np.empty((n, t_len))
    targets[:, :-1] = values[:, 1:]
    targets[:, -1] = cfg.reward_scale * rewards
    return targets


def _backward(cfg: PolicyConfig, flat: np.ndarray, rows, h0, h1, d_logits) -> np.ndarray:
    w_in, w_h, _, w_out, _ = _views(cfg, flat)
    d_w_out = d_logits.T @ h1
    d_b_out = d_logits.sum(axis=0)
    d_h1 = (d_logits @ w_out) * (1.0 - h1 * h1)
    d_w_h = d_h1.T @ h0
    d_b_h = d_h1.sum(axis=0)
    d_h0 = (d_h1 @ w_h) * (1.0 - h0 * h0)
    d_w_in = d_h0.T @ rows
    return np.concatenate(
        [d_w_in.ravel(), d_w_h.ravel(), d_b_h.ravel(), d_w_out.ravel(), d_b_out.ravel()]
    )


def sql_loss_and_grad(params: PolicyParams, samples: list[PromptSample], per_sample_reward):
    """On-policy soft-Q loss and its analytic parameter gradient.

    Returns:
        (loss, grad) with grad flat in the parameter layout.

    Raises:
        ValueError: if rewards are misaligned with samples or non-finite.
    """
    cfg = params.cfg
    rewards = np.asarray(per_sample_reward, dtype=float).ravel()
    if rewards.shape[0] != len(samples):
        raise ValueError("one reward per sample is required")
    if not np.isfinite(rewards).all():
        raise ValueError("rewards must be finite")
    tokens, contexts = _stack_samples(cfg, samples)
    n, t_len = tokens.shape
    rows, h0, h1, logits = _forward(cfg, params.flat, contexts, tokens)
    targets = _loss_targets(cfg, logits, rewards, n)

    flat_tokens = tokens.reshape(n * t_len)
    chosen_q = logits[np.arange(n * t_len), flat_tokens]
    residual = chosen_q - targets.reshape(n * t_len)
    loss = 0.5 * float(residual @ residual) / (n * t_len)

    d_logits = np.zeros_like(logits)
    d_logits[np.arange(n * t_len), flat_tokens] = residual / (n * t_len)
    return loss, _backward(cfg, params.flat, rows, h0, h1, d_logits)


def per_objective_loss_grads(params: PolicyParams, samples: list[PromptSample], reward_vectors):
    """One soft-Q loss gradient per objective, sharing a single forward pass.

    Args:
        reward_vectors: (n, m) array-like, one reward vector per sample.

    Returns:
        (losses, grads): arrays of shape (m,) and (m, n_params). Row i is
        bit-identical to sql_loss_and_grad with the i-th reward column.
    """
    cfg = params.cfg
    rv = np.asarray(reward_vectors, dtype=float)
    if rv.ndim != 2 or rv.shape[0] != len(samples) or rv.shape[1] == 0:
        raise ValueError("reward_vectors must be (n_samples, m) with m >= 1")
    if not np.isfinite(rv).all():
        raise ValueError("rewards must be finite")
    tokens, contexts = _stack_samples(cfg, samples)
    n, t_len = tokens.shape
    rows, h0, h1, logits = _forward(cfg, params.flat, contexts, tokens)
    flat_tokens = tokens.reshape(n * t_len)
    chosen_q = logits[np.arange(n * t_len), flat_tokens]

    m = rv.shape[1]
    losses = np.zeros(m)
    grads = np.zeros((m, params.flat.shape[0]))
    for i in range(m):
        targets = _loss_targets(cfg, logits, rv[:, i], n)
        residual = chosen_q - targets.reshape(n * t_len)
        losses[i] = 0.5 * float(residual @ residual) / (n * t_len)
        d_logits = np.zeros_like(logits)
        d_logits[np.arange(n * t_len), flat_tokens] = residual / (n * t_len)
        grads[i] = _backward(cfg, params.flat, rows, h0, h1, d_logits)
    return losses, grads


def save_checkpoint(path, params: PolicyParams) -> None:
    """Write a self-describing text checkpoint (config plus flat weights)."""
    payload = {"config": asdict(params.cfg), "flat": params.flat.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> PolicyParams:
    """Inverse of save_checkpoint; float round-trip is exact."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = PolicyConfig(**payload["config"])
    return PolicyParams(cfg=cfg, flat=np.asarray(payload["flat"], dtype=float))
