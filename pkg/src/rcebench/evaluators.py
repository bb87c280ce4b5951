"""Evaluation metrics for counterfactuals produced here or elsewhere.

Functions that score a batch accept either :class:`CounterfactualResult`
objects or plain ``(row_index, ce_or_None)`` pairs, so externally generated
counterfactuals can be scored without wrapping them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .generators import CounterfactualResult, GeneratorConfig, generate
from .model import (
    DenseModel, ParamBall, TrainConfig, forward_logit, interval_logit, param_gradient,
    perturbed_model, retrain_variant, sample_ball_logits,
)
from .task import ClassificationTask


@dataclass
class EvaluationOutcome:
    metric: str
    per_instance: list[tuple[int, float]]
    aggregate: float
    n_missing: int = 0
    warning: str | None = None


@dataclass
class RobustnessVerdict:
    status: str  # certified_robust | falsified | unknown
    lo: float
    hi: float
    witness: DenseModel | None = None
    samples_tried: int = 0

    @property
    def certified(self) -> bool:
        return self.status == "certified_robust"


def _pairs(ces) -> list[tuple[int, np.ndarray | None]]:
    out = []
    for item in ces:
        if isinstance(item, CounterfactualResult):
            out.append((item.instance_index, item.ce))
        else:
            idx, ce = item
            out.append((int(idx), None if ce is None else np.asarray(ce, dtype=float)))
    return out


def _percentage(metric, rows) -> EvaluationOutcome:
    if not rows:
        return EvaluationOutcome(metric, [], 0.0, warning="no instances")
    return EvaluationOutcome(metric, rows, 100.0 * float(np.mean([v for _, v in rows])))


def eval_validity(t: ClassificationTask, ces) -> EvaluationOutcome:
    """Percentage of instances whose CE is classified as the target class (missing CEs fail)."""
    rows = [(i, float(ce is not None and t.is_valid_ce(ce))) for i, ce in _pairs(ces)]
    return _percentage("validity", rows)


def eval_proximity(t: ClassificationTask, ces, norm: str = "L2") -> EvaluationOutcome:
    order = {"L1": 1, "L2": 2}[norm.upper()]
    rows, missing = [], 0
    for i, ce in _pairs(ces):
        if ce is None:
            missing += 1
            continue
        rows.append((i, float(np.linalg.norm(ce - t.data.X[i], ord=order))))
    if not rows:
        return EvaluationOutcome(f"proximity_{norm.lower()}", [], float("nan"), missing, "no counterfactuals")
    return EvaluationOutcome(f"proximity_{norm.lower()}", rows, float(np.mean([v for _, v in rows])), missing)


# ---------------------------------------------------------------- delta robustness

def _flipped(logits, target_class):
    return logits <= 0 if target_class == 1 else logits > 0


def _unit_draws(m: DenseModel, n, rng, corner):
    draws = []
    for W, b in zip(m.weights, m.biases):
        if corner:
            draws.append((rng.choice([-1.0, 1.0], size=(n,) + W.shape),
                          rng.choice([-1.0, 1.0], size=(n,) + b.shape)))
        else:
            draws.append((rng.uniform(-1.0, 1.0, size=(n,) + W.shape),
                          rng.uniform(-1.0, 1.0, size=(n,) + b.shape)))
    return draws


def _guided_corner(m: DenseModel, ce, target_class):
    """Corner pushing every parameter against the target class to first order."""
    sgn = 1.0 if target_class == 1 else -1.0
    return [(-sgn * np.sign(gW)[None], -sgn * np.sign(gb)[None]) for gW, gb in param_gradient(m, ce)]


def eval_delta_robustness(t: ClassificationTask, ce, delta: float, n_samples: int = 1000,
                          seed: int = 0, perturb_biases: bool = True) -> RobustnessVerdict:
    """Certify with interval bounds; if that fails, search the ball for a counterexample."""
    ce = np.asarray(ce, dtype=float)
    ball = ParamBall(t.model, delta, perturb_biases)
    lo, hi = interval_logit(ball, ce)
    tc = t.target_class
    if (lo > 0) if tc == 1 else (hi <= 0):
        return RobustnessVerdict("certified_robust", lo, hi)
    if not t.is_valid_ce(ce):
        return RobustnessVerdict("falsified", lo, hi, t.model, 0)
    rng = np.random.default_rng(seed)
    batches = [_guided_corner(t.model, ce, tc)]
    n_corner = (n_samples + 1) // 2
    batches.append(_unit_draws(t.model, n_corner, rng, corner=True))
    batches.append(_unit_draws(t.model, n_samples - n_corner, rng, corner=False))
    tried = 0
    for draw in batches:
        if draw[0][0].shape[0] == 0:
            continue
        logits = sample_ball_logits(ball, ce, draw)
        bad = np.flatnonzero(_flipped(logits, tc))
        if bad.size:
            return RobustnessVerdict("falsified", lo, hi, perturbed_model(ball, draw, int(bad[0])),
                                     tried + int(bad[0]) + 1)
        tried += len(logits)
    return RobustnessVerdict("unknown", lo, hi, None, tried)


def eval_delta_robust_rate(t: ClassificationTask, ces, delta: float, seed: int = 0,
                           perturb_biases: bool = True) -> EvaluationOutcome:
    """Percentage of instances whose CE is certified; unknown and missing count as not robust."""
    rows = []
    for i, ce in _pairs(ces):
        ok = ce is not None and eval_delta_robustness(t, ce, delta, seed=seed,
                                                      perturb_biases=perturb_biases).certified
        rows.append((i, float(ok)))
    return _percentage("delta_robustness", rows)


def scenario_sample_size(R: float, alpha: float) -> int:
    """Smallest N with R**N <= alpha."""
    if not (0 < R < 1 and 0 < alpha < 1):
        raise ValueError("R and alpha must lie in (0, 1)")
    v = math.log(alpha) / math.log(R)
    n = math.ceil(v)
    # guard against ratios that are integral up to rounding
    if n - v > 1 - 1e-9:
        n -= 1
    return max(n, 1)


def eval_approx_delta_robustness(t: ClassificationTask, ce, delta: float, R: float = 0.99,
                                 alpha: float = 0.05, seed: int = 0, perturb_biases: bool = True) -> bool:
    """True iff all of N uniform draws from the ball keep ``ce`` valid."""
    n = scenario_sample_size(R, alpha)
    ball = ParamBall(t.model, delta, perturb_biases)
    draw = _unit_draws(t.model, n, np.random.default_rng(seed), corner=False)
    return not _flipped(sample_ball_logits(ball, np.asarray(ce, float), draw), t.target_class).any()


def eval_approx_delta_rate(t, ces, delta, R=0.99, alpha=0.05, seed=0) -> EvaluationOutcome:
    rows = [(i, float(ce is not None and eval_approx_delta_robustness(t, ce, delta, R, alpha, seed + i)))
            for i, ce in _pairs(ces)]
    return _percentage("approx_delta_robustness", rows)


# ---------------------------------------------------------------- retraining / multiplicity

def retrained_variants(t: ClassificationTask, m_count: int, cfg: TrainConfig, base_seed: int):
    return [retrain_variant(t.model, t.data, cfg, base_seed + k) for k in range(m_count)]


def eval_validity_after_retraining(t: ClassificationTask, ces, m_count: int, cfg: TrainConfig,
                                   base_seed: int = 0, variants=None) -> EvaluationOutcome:
    """A CE counts when every retrained variant still assigns it the target class."""
    variants = variants if variants is not None else retrained_variants(t, m_count, cfg, base_seed)
    rows = []
    for i, ce in _pairs(ces):
        ok = ce is not None and all(
            int(forward_logit(v, ce) > 0) == t.target_class for v in variants
        )
        rows.append((i, float(ok)))
    return _percentage("validity_after_retraining", rows)


def eval_multiplicity_validity(ensemble: Sequence[DenseModel], ce, target_class: int) -> float:
    ce = np.asarray(ce, dtype=float)
    return float(np.mean([int(forward_logit(m, ce) > 0) == target_class for m in ensemble]))


def eval_multiplicity_rate(t: ClassificationTask, ces, ensemble) -> EvaluationOutcome:
    rows = [(i, 0.0 if ce is None else eval_multiplicity_validity(ensemble, ce, t.target_class))
            for i, ce in _pairs(ces)]
    return _percentage("multiplicity_validity", rows)


# ---------------------------------------------------------------- input perturbation

def set_distance(S, T, kind: str = "avg-min") -> float:
    """Symmetric average-minimum distance between point sets (or Hausdorff)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    D = np.linalg.norm(S[:, None, :] - T[None, :, :], axis=2)
    if kind == "avg-min":
        return 0.5 * (D.min(axis=1).mean() + D.min(axis=0).mean())
    if kind == "hausdorff":
        return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
    raise ValueError(f"unknown set distance {kind!r}")


def _ce_set(generator, t, x, cfg, index):
    if isinstance(generator, str):
        r = generate(generator, t, x, cfg, index=index, strict=False)
        return [] if r.ce is None else [r.ce]
    out = generator(t, x)
    if out is None:
        return []
    arr = np.atleast_2d(np.asarray(out, dtype=float))
    return list(arr)


def eval_set_distance_robustness(t: ClassificationTask, generator: str | Callable, x, sigma_x: float,
                                 n_perturb: int, seed: int = 0, cfg: GeneratorConfig | None = None,
                                 index: int = 0, kind: str = "avg-min") -> float:
    """Mean set distance between the CEs of ``x`` and of Gaussian-perturbed copies of ``x``.

    Perturbed copies for which either set is empty are skipped; NaN if all are.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng([int(seed), int(index) & 0xFFFFFFFF])
    S0 = _ce_set(generator, t, x, cfg, index)
    if not S0:
        return float("nan")
    dists = []
    for _ in range(n_perturb):
        xi = x + sigma_x * rng.standard_normal(x.shape)
        Si = _ce_set(generator, t, xi, cfg, index)
        if Si:
            dists.append(set_distance(S0, Si, kind))
    return float(np.mean(dists)) if dists else float("nan")
