from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .model import DenseModel, TrainConfig, forward_logit, init_model, train


@dataclass(frozen=True, eq=False)
class ClassificationTask:
    """A trained model bound to a dataset, with ``neg_value`` as the undesirable class."""

    model: DenseModel
    data: Dataset
    neg_value: int = 0

    def __post_init__(self):
        if self.neg_value not in (0, 1):
            raise ValueError("neg_value must be 0 or 1")
        if self.model.n_inputs != self.data.n_features:
            raise ValueError(
                f"model takes {self.model.n_inputs} inputs, dataset has {self.data.n_features} features"
            )

    @property
    def target_class(self) -> int:
        return 1 - self.neg_value

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.data.box

    def predictions(self) -> np.ndarray:
        return self.model.predict_label(self.data.X)

    def negative_instances(self) -> list[tuple[int, np.ndarray]]:
        pred = self.predictions()
        return [(int(i), self.data.X[i]) for i in np.flatnonzero(pred == self.neg_value)]

    def target_rows(self) -> np.ndarray:
        """Row indices of training points predicted as the target class."""
        return np.flatnonzero(self.predictions() == self.target_class)

    def is_valid_ce(self, ce) -> bool:
        return int(forward_logit(self.model, ce) > 0) == self.target_class

    def model_ensemble(self, m_count: int, cfg: TrainConfig, base_seed: int) -> list[DenseModel]:
        return model_ensemble(self, m_count, cfg, base_seed)


def train_task(data: Dataset, layer_dims, cfg: TrainConfig, neg_value: int = 0) -> ClassificationTask:
    """Initialise and train a model with ``cfg.seed`` and wrap it in a task."""
    m = train(init_model(layer_dims, cfg.seed), data, cfg)
    return ClassificationTask(m, data, neg_value)


def model_ensemble(t: ClassificationTask, m_count: int, cfg: TrainConfig, base_seed: int) -> list[DenseModel]:
    """``m_count`` models from independent initialisations, seeds ``base_seed, base_seed+1, ...``."""
    if m_count < 1:
        raise ValueError("m_count must be >= 1")
    dims = t.model.layer_dims
    out = []
    for k in range(m_count):
        seed = base_seed + k
        out.append(train(init_model(dims, seed), t.data, replace(cfg, seed=seed)))
    return out
