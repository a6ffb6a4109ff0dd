"""Batch reward aggregation: the scalar training signals for each method.

Given a batch of per-sample reward vectors (one vector of m objective scores
per generated output), each aggregator produces a `RewardAssignment`: a scalar
summary of the batch plus a per-sample credit vector that feeds the soft-Q
loss. Average and Product assign per-sample credit directly; HVI is a set
quantity, so its batch value is broadcast identically to every sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import hypervolume

__all__ = [
    "RewardAssignment",
    "EvaluationMetrics",
    "aggregate_average",
    "aggregate_product",
    "aggregate_hvi",
    "evaluation_metrics",
]


@dataclass(frozen=True)
class RewardAssignment:
    """Per-sample training rewards plus the batch-level scalar they came from."""

    per_sample: np.ndarray
    batch_scalar: float


@dataclass(frozen=True)
class EvaluationMetrics:
    """The reported batch metrics, all on the raw [0, 1] reward scale."""

    per_objective_means: np.ndarray
    mean_of_means: float
    expected_product: float
    hvi: float


def _as_batch(batch) -> np.ndarray:
    arr = np.asarray(batch, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"expected a nonempty (n, m) reward batch, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("reward batch must be finite")
    return arr


def aggregate_average(batch) -> RewardAssignment:
    """Mean of objectives per sample; batch scalar is the grand mean.

    Raises:
        ValueError: on an empty or non-finite batch.
    """
    arr = _as_batch(batch)
    per_sample = arr.mean(axis=1)
    return RewardAssignment(per_sample=per_sample, batch_scalar=float(per_sample.mean()))


def aggregate_product(batch) -> RewardAssignment:
    """Product of objectives per sample; batch scalar is the expected product.

    Raises:
        ValueError: on an empty batch or any negative reward.
    """
    arr = _as_batch(batch)
    if (arr < 0.0).any():
        raise ValueError("product aggregation requires nonnegative rewards")
    per_sample = arr.prod(axis=1)
    return RewardAssignment(per_sample=per_sample, batch_scalar=float(per_sample.mean()))


def aggregate_hvi(batch, ref) -> RewardAssignment:
    """Hypervolume of the batch, broadcast as every sample's credit.

    The batch is treated as a point set: dominated samples add nothing to the
    scalar, and every sample receives the same credit because the volume has
    no canonical per-sample decomposition.

    Raises:
        ValueError: on an empty batch or a reference point of wrong dimension.
    """
    arr = _as_batch(batch)
    scalar = hypervolume(arr, ref)
    return RewardAssignment(per_sample=np.full(arr.shape[0], scalar), batch_scalar=scalar)


def evaluation_metrics(batch, ref) -> EvaluationMetrics:
    """All reported metrics for one evaluation batch.

    Raises:
        ValueError: on an empty batch.
    """
    arr = _as_batch(batch)
    per_objective = arr.mean(axis=0)
    return EvaluationMetrics(
        per_objective_means=per_objective,
        mean_of_means=float(per_objective.mean()),
        expected_product=float(arr.prod(axis=1).mean()),
        hvi=hypervolume(arr, ref),
    )
