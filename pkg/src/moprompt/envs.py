"""Synthetic stand-ins for a frozen generator plus reward models.

Each environment is a stochastic channel from (prompt tokens, input) to
output samples carrying m deliberately conflicting reward scores with known
Pareto structure:

* ``tug-of-war``: token j votes for objective axis j mod m. A sample's
  latent is the prompt's vote-fraction vector plus Gaussian noise, so with
  zero noise the rewards lie exactly on the probability simplex: gaining on
  one axis must cost the others. The best achievable expected product is
  m**-m, at the perfectly balanced prompt.
* ``gaussian-arms``: every token sequence hashes to a fixed mean vector in
  [0, 1]^m with negatively correlated components, drawn once per seed; good
  prompts must be discovered rather than constructed.
* ``outlier-prone``: tug-of-war, except each sample's latent is replaced by
  (0.95, ..., 0.95) with probability outlier_prob, a dominant point that
  inflates hypervolume. With outlier_prob 0 the sample stream is identical
  to tug-of-war under the same seed, because outlier decisions come from
  their own RNG stream.

Rewards are always the latent clamped to [0, 1] componentwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import (
    ROLE_ARMS,
    ROLE_INPUTS,
    ROLE_NOISE,
    ROLE_OUTLIER,
    derive_seed,
    unit_floats,
)

__all__ = ["EnvSpec", "OutputSample", "ENV_NAMES", "builtin_env", "rollout", "dump_samples"]

ENV_NAMES = ("tug-of-war", "gaussian-arms", "outlier-prone")

DEFAULT_NOISE_SCALE = 0.05
DEFAULT_OUTLIER_PROB = 0.02
OUTLIER_LATENT = 0.95


@dataclass(frozen=True)
class EnvSpec:
    """A fully determined environment: reward map plus fixed policy inputs."""

    name: str
    m: int
    vocab_size: int
    prompt_length: int
    inputs: np.ndarray
    noise_scale: float = DEFAULT_NOISE_SCALE
    outlier_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.name not in ENV_NAMES:
            raise ValueError(f"unknown environment {self.name!r}, expected one of {ENV_NAMES}")
        if self.m < 2:
            raise ValueError("environments are multi-objective: m must be >= 2")
        if self.vocab_size < self.m:
            raise ValueError("vocab_size must be at least m so every axis has a token")
        if self.prompt_length <= 0:
            raise ValueError("prompt_length must be positive")
        if self.inputs.ndim != 2 or self.inputs.shape[0] == 0:
            raise ValueError("inputs must be a nonempty (n_inputs, context_dim) array")
        if self.noise_scale < 0.0:
            raise ValueError("noise_scale must be nonnegative")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError("outlier_prob must lie in [0, 1]")

    @property
    def context_dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class OutputSample:
    """One generated output: raw latent scores and their clamped rewards."""

    latent: np.ndarray
    rewards: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.rewards is None:
            object.__setattr__(self, "rewards", np.clip(self.latent, 0.0, 1.0))


def builtin_env(
    name: str,
    m: int,
    seed: int,
    *,
    vocab_size: int = 8,
    prompt_length: int = 5,
    n_inputs: int = 4,
    context_dim: int = 8,
    noise_scale: float = DEFAULT_NOISE_SCALE,
    outlier_prob: float = DEFAULT_OUTLIER_PROB,
) -> EnvSpec:
    """Construct one of the named environments with seeded fixed inputs.

    Raises:
        ValueError: for an unknown name or invalid dimensions.
    """
    if name not in ENV_NAMES:
        raise ValueError(f"unknown environment {name!r}, expected one of {ENV_NAMES}")
    raw = unit_floats(derive_seed(seed, ROLE_INPUTS), n_inputs * context_dim)
    inputs = 2.0 * np.array(raw).reshape(n_inputs, context_dim) - 1.0
    return EnvSpec(
        name=name,
        m=m,
        vocab_size=vocab_size,
        prompt_length=prompt_length,
        inputs=inputs,
        noise_scale=noise_scale,
        outlier_prob=outlier_prob if name == "outlier-prone" else 0.0,
        seed=seed,
    )


def _vote_fractions(env: EnvSpec, tokens: np.ndarray) -> np.ndarray:
    votes = np.bincount(tokens % env.m, minlength=env.m)
    return votes / env.prompt_length


def _arm_mean(env: EnvSpec, tokens: np.ndarray) -> np.ndarray:
    """Hash the token sequence to its fixed mean vector.

    Exponential draws normalized to the simplex give negatively correlated
    components; a per-arm amplitude keeps means spread through [0, 1]^m.
    """
    key = derive_seed(env.seed, ROLE_ARMS, *tokens.tolist())
    u = unit_floats(key, env.m + 1)
    exps = [-math.log(1.0 - x) for x in u[: env.m]]
    total = sum(exps)
    amplitude = 0.4 + 0.6 * u[env.m]
    return amplitude * np.array(exps) / total


def rollout(env: EnvSpec, prompt, input_index: int, k_hat: int, seed: int) -> list[OutputSample]:
    """Draw k_hat output samples for one prompt and one input.

    Deterministic per (env, prompt tokens, seed). Noise and outlier
    replacement use disjoint RNG streams derived from the seed, so setting
    outlier_prob to zero reproduces the noise stream exactly.

    Raises:
        ValueError: for an invalid input index, bad k_hat, or a prompt that
            does not match the environment's token space.
    """
    tokens = np.asarray(getattr(prompt, "tokens", prompt), dtype=np.int64).ravel()
    if not 0 <= input_index < env.inputs.shape[0]:
        raise ValueError(f"input_index {input_index} out of range for {env.inputs.shape[0]} inputs")
    if k_hat <= 0:
        raise ValueError("k_hat must be positive")
    if tokens.shape[0] != env.prompt_length:
        raise ValueError("prompt length does not match environment")
    if tokens.min() < 0 or tokens.max() >= env.vocab_size:
        raise ValueError("token id out of range")

    if env.name == "gaussian-arms":
        base = _arm_mean(env, tokens)
    else:
        base = _vote_fractions(env, tokens)

    noise_rng = np.random.default_rng(derive_seed(seed, ROLE_NOISE))
    latents = base + env.noise_scale * noise_rng.standard_normal((k_hat, env.m))
    if env.name == "outlier-prone":
        outlier_rng = np.random.default_rng(derive_seed(seed, ROLE_OUTLIER))
        mask = outlier_rng.random(k_hat) < env.outlier_prob
        latents[mask] = OUTLIER_LATENT
    return [OutputSample(latent=latents[i]) for i in range(k_hat)]


def dump_samples(path, samples: list[OutputSample], tokens, seed: int) -> None:
    """Append one JSONL line per sample: latent, rewards, prompt tokens, seed."""
    token_list = np.asarray(tokens, dtype=np.int64).ravel().tolist()
    with open(path, "a", encoding="utf-8") as fh:
        for sample in samples:
            record = {
                "latent": sample.latent.tolist(),
                "rewards": sample.rewards.tolist(),
                "tokens": token_list,
                "seed": int(seed),
            }
            fh.write(json.dumps(record) + "\n")
