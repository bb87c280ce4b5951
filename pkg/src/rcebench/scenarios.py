"""Small reproducible experiment set-ups shared by scripts and tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import synth_gaussian_blobs
from .evaluators import retrained_variants
from .model import TrainConfig, forward_logit, init_model, train
from .task import ClassificationTask


@dataclass
class RetrainingScenario:
    seed: int
    boundary_ce: np.ndarray
    deep_ce: np.ndarray
    boundary_logit: float
    deep_logit: float
    boundary_variant_logits: np.ndarray
    deep_variant_logits: np.ndarray

    @property
    def boundary_invalidated(self) -> bool:
        return bool((self.boundary_variant_logits <= 0).any())

    @property
    def deep_survives(self) -> bool:
        return bool((self.deep_variant_logits > 0).all())


def blobs_task(seed: int, n_per_class: int = 100, separation: float = 4.0, hidden: int = 4,
               cfg: TrainConfig | None = None) -> ClassificationTask:
    ds = synth_gaussian_blobs(n_per_class, 2, separation, seed)
    cfg = cfg or TrainConfig(0.1, 200, 32, seed)
    return ClassificationTask(train(init_model([2, hidden, 1], seed), ds, cfg), ds)


def retraining_scenario(seed: int, n_variants: int = 10, epochs: int = 5, deep_logit: float = 2.0) -> RetrainingScenario:
    """A CE just past the decision boundary next to one deep inside the target class.

    Both are checked against ``n_variants`` models fine-tuned on bootstrap
    resamples for ``epochs`` epochs.
    """
    t = blobs_task(seed)
    m = t.model
    X = t.data.X
    logits = m.logits(X)
    _, x = t.negative_instances()[0]
    # the deep CE is the nearest training point with a large margin
    deep_rows = np.flatnonzero(logits >= deep_logit)
    if deep_rows.size == 0:
        raise RuntimeError(f"seed {seed}: no training point with logit >= {deep_logit}")
    deep = X[deep_rows[np.argmin(((X[deep_rows] - x) ** 2).sum(axis=1))]]
    # bisect the segment x -> deep down to the first point past the boundary
    a, b = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (a + b)
        if forward_logit(m, x + mid * (deep - x)) > 0:
            b = mid
        else:
            a = mid
    boundary = x + b * (deep - x)
    variants = retrained_variants(t, n_variants, TrainConfig(0.1, epochs, 32, 0), base_seed=1000 * seed + 1)
    return RetrainingScenario(
        seed, boundary, deep.copy(), forward_logit(m, boundary), forward_logit(m, deep),
        np.array([forward_logit(v, boundary) for v in variants]),
        np.array([forward_logit(v, deep) for v in variants]),
    )
