"""Counterfactual generators behind a common calling convention.

Every method is a function ``(task, x, cfg, rng) -> (ce | None, diagnostics)``
registered in :data:`GENERATORS`; :func:`generate` wraps it with the
precondition check, timing, box clipping and validity bookkeeping.
"""
from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

import numpy as np

from .kdtree import KDTree
from .model import ParamBall, forward_logit, input_gradient, is_certified
from .optim import add_l1_objective, encode_network, solve_lp, solve_milp
from .optim.lp import LpProblem
from .task import ClassificationTask


class PreconditionError(ValueError):
    """The instance is not predicted as the undesirable class."""


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    delta: float = 0.005
    perturb_biases: bool = True
    # Wachter
    wachter_kappa: float = 0.1
    wachter_lambda: float = 0.1
    wachter_step: float = 0.05
    wachter_max_steps: int = 2000
    wachter_double_every: int = 100
    # BLS
    bls_steps: int = 20
    # MCE / MCER
    mce_kappa: float = 0.01
    mcer_rungs: int = 11
    node_limit: int = 100_000
    lp_rule: str = "dantzig"
    # STCE
    stce_samples: int = 500
    stce_sigma: float = 0.1
    stce_tau: float = 0.9
    # PROPLACE
    proplace_k: int = 10
    proplace_bisect_steps: int = 20
    # ROAR (roar_delta None means use ``delta``)
    roar_delta: float | None = None
    roar_kappa: float = 0.1
    roar_step: float = 0.05
    roar_lambda: float = 0.1
    roar_max_steps: int = 2000
    roar_refresh_every: int = 200

    def __post_init__(self):
        positive = ("wachter_lambda", "wachter_step", "stce_sigma", "roar_step", "roar_lambda")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta < 0 or (self.roar_delta is not None and self.roar_delta < 0):
            raise ValueError("delta must be >= 0")

    def ball(self, task: ClassificationTask) -> ParamBall:
        return ParamBall(task.model, self.delta, self.perturb_biases)


@dataclass
class CounterfactualResult:
    instance_index: int
    ce: np.ndarray | None
    valid: bool
    l2_distance: float
    wall_time: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.ce is not None


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Per-instance stream, independent of processing order."""
    return np.random.default_rng([int(seed), int(index) & 0xFFFFFFFF])


# ---------------------------------------------------------------- helpers

@functools.lru_cache(maxsize=16)
def _target_tree(task: ClassificationTask) -> KDTree:
    rows = task.target_rows()
    return KDTree(task.data.X[rows], ids=rows)


def _signed(task, v):
    return v if task.target_class == 1 else -v


def _certified_stream(task, x, ball):
    for row, _ in _target_tree(task).iter_nearest(x):
        c = task.data.X[row]
        if is_certified(ball, c, task.target_class):
            yield row, c


# ---------------------------------------------------------------- methods

def gen_wachter(task, x, cfg: GeneratorConfig, rng=None):
    lo, hi = task.box
    target = _signed(task, cfg.wachter_kappa)
    lam = cfg.wachter_lambda
    xp = x.copy()
    for step in range(cfg.wachter_max_steps + 1):
        if task.is_valid_ce(xp):
            return xp, {"iterations": step, "lambda": lam}
        if step == cfg.wachter_max_steps:
            break
        logit = forward_logit(task.model, xp)
        grad = 2 * lam * (logit - target) * input_gradient(task.model, xp) + 2 * (xp - x)
        xp = np.clip(xp - cfg.wachter_step * grad, lo, hi)
        if (step + 1) % cfg.wachter_double_every == 0:
            lam *= 2
    return None, {"iterations": cfg.wachter_max_steps, "reason": "step budget exhausted"}


def gen_bls(task, x, cfg: GeneratorConfig, rng=None):
    hit = _target_tree(task).nearest(x)
    if hit is None:
        return None, {"reason": "no target-class training point"}
    anchor = task.data.X[hit[0]]
    a, b = 0.0, 1.0  # label(x + a d) = neg, label(x + b d) = target
    d = anchor - x
    for _ in range(cfg.bls_steps):
        mid = 0.5 * (a + b)
        if task.is_valid_ce(x + mid * d):
            b = mid
        else:
            a = mid
    return x + b * d, {"anchor": int(hit[0]), "t": b}


def gen_kdtree_nnce(task, x, cfg: GeneratorConfig, rng=None):
    hit = _target_tree(task).nearest(x)
    if hit is None:
        return None, {"reason": "no target-class training point"}
    return task.data.X[hit[0]].copy(), {"row": int(hit[0])}


def _mce_solve(task, x, kappa, cfg):
    lo, hi = task.box
    enc = encode_network(task.model, lo, hi, kappa, task.target_class)
    add_l1_objective(enc, x)
    sol = solve_milp(enc.problem(), node_limit=cfg.node_limit, rule=cfg.lp_rule)
    if not sol.optimal:
        return None, sol
    return np.clip(enc.decode(sol.x), lo, hi), sol


def gen_mce(task, x, cfg: GeneratorConfig, rng=None):
    ce, sol = _mce_solve(task, x, cfg.mce_kappa, cfg)
    diag = {"nodes": sol.nodes, "kappa": cfg.mce_kappa}
    if ce is None:
        diag["reason"] = "MILP infeasible"
    else:
        diag["l1_objective"] = sol.objective_value
    return ce, diag


def gen_mcer(task, x, cfg: GeneratorConfig, rng=None):
    ball = cfg.ball(task)
    last, last_kappa, nodes = None, None, 0
    for k in range(cfg.mcer_rungs):
        kappa = cfg.mce_kappa * 2 ** k
        ce, sol = _mce_solve(task, x, kappa, cfg)
        nodes += sol.nodes
        if ce is None:
            break
        last, last_kappa = ce, kappa
        if is_certified(ball, ce, task.target_class):
            return ce, {"robust": True, "kappa": kappa, "rungs": k + 1, "nodes": nodes}
    if last is None:
        return None, {"robust": False, "reason": "MILP infeasible", "nodes": nodes}
    return last, {"robust": False, "kappa": last_kappa, "nodes": nodes}


def gen_rnce(task, x, cfg: GeneratorConfig, rng=None):
    for row, c in _certified_stream(task, x, cfg.ball(task)):
        return c.copy(), {"robust": True, "row": int(row)}
    return None, {"robust": False, "reason": "no certified target-class training point"}


def stability(model, c, noise, target_class=1) -> float:
    """Mean minus sample stddev of the target-class probability over ``c + noise``."""
    p = model.predict_proba(c + noise)
    if target_class == 0:
        p = 1.0 - p
    sd = float(p.std(ddof=1)) if len(p) > 1 else 0.0
    return float(p.mean()) - sd


def gen_stce(task, x, cfg: GeneratorConfig, rng=None):
    rng = rng if rng is not None else instance_rng(cfg.seed, 0)
    noise = cfg.stce_sigma * rng.standard_normal((cfg.stce_samples, task.data.n_features))
    best, best_s, scanned = None, -np.inf, 0
    for row, _ in _target_tree(task).iter_nearest(x):
        scanned += 1
        c = task.data.X[row]
        s = stability(task.model, c, noise, task.target_class)
        if s >= cfg.stce_tau:
            return c.copy(), {"robust": True, "stability": s, "row": int(row), "scanned": scanned}
        if s > best_s:
            best, best_s = row, s
    if best is None:
        return None, {"robust": False, "reason": "no target-class training point"}
    return task.data.X[best].copy(), {"robust": False, "stability": best_s, "row": int(best)}


def _hull_l1_point(anchors, x):
    """Point of conv(anchors) closest to ``x`` in L1, by LP over hull weights."""
    k, d = anchors.shape
    span = np.maximum(np.abs(anchors - x).max(axis=0), 1e-12)
    n = k + 2 * d
    c = np.r_[np.zeros(k), np.ones(2 * d)]
    A = np.zeros((d + 1, n))
    A[:d, :k] = anchors.T
    A[:d, k:k + d] = -np.eye(d)
    A[:d, k + d:] = np.eye(d)
    A[d, :k] = 1.0
    b = np.r_[x, 1.0]
    lo = np.zeros(n)
    hi = np.r_[np.ones(k), span, span]
    sol = solve_lp(LpProblem(c, A, ("=",) * (d + 1), b, lo, hi))
    if not sol.optimal:
        return None
    alpha = np.clip(sol.x[:k], 0.0, None)
    alpha /= alpha.sum()
    return alpha @ anchors


def gen_proplace(task, x, cfg: GeneratorConfig, rng=None):
    ball = cfg.ball(task)
    anchors = []
    for _, c in _certified_stream(task, x, ball):
        anchors.append(c)
        if len(anchors) == cfg.proplace_k:
            break
    if not anchors:
        return None, {"robust": False, "reason": "no certified target-class training point"}
    A = np.array(anchors)
    if len(A) == 1:
        return A[0].copy(), {"robust": True, "anchors": 1, "bisected": False}
    p = _hull_l1_point(A, x)
    if p is None:
        return A[0].copy(), {"robust": True, "anchors": len(A), "bisected": False, "note": "hull LP failed"}
    if is_certified(ball, p, task.target_class):
        return p, {"robust": True, "anchors": len(A), "bisected": False}
    a, b = 0.0, 1.0  # p + a d uncertified, p + b d certified
    d = A[0] - p
    for _ in range(cfg.proplace_bisect_steps):
        mid = 0.5 * (a + b)
        if is_certified(ball, p + mid * d, task.target_class):
            b = mid
        else:
            a = mid
    return (A[0].copy() if b == 1.0 else p + b * d), {"robust": True, "anchors": len(A), "bisected": True, "t": b}


def gen_roar(task, x, cfg: GeneratorConfig, rng=None):
    lo, hi = task.box
    dw = cfg.delta if cfg.roar_delta is None else cfg.roar_delta
    s = 1.0 if task.target_class == 1 else -1.0
    lam = cfg.roar_lambda

    def surrogate(at):
        w = input_gradient(task.model, at)
        return w, forward_logit(task.model, at) - w @ at

    def worst(v, w, b):
        return s * (w @ v + b) - dw * (np.abs(v).sum() + 1.0)

    xp = x.copy()
    w, b = surrogate(xp)
    for step in range(cfg.roar_max_steps):
        if step and step % cfg.roar_refresh_every == 0:
            w, b = surrogate(xp)
        wl = worst(xp, w, b)
        if wl >= cfg.roar_kappa:
            # confirm against a surrogate taken at the iterate itself
            w, b = surrogate(xp)
            wl = worst(xp, w, b)
            if wl >= cfg.roar_kappa:
                return xp, {"iterations": step, "worst_logit": float(wl), "lambda": lam}
        gap = max(cfg.roar_kappa - wl, 0.0)
        grad = 2 * (xp - x) - 2 * lam * gap * (s * w - dw * np.sign(xp))
        xp = np.clip(xp - cfg.roar_step * grad, lo, hi)
        if (step + 1) % cfg.wachter_double_every == 0:
            lam *= 2
    return None, {"iterations": cfg.roar_max_steps, "reason": "step budget exhausted"}


GENERATORS = {
    "wachter": gen_wachter,
    "bls": gen_bls,
    "kdtree-nnce": gen_kdtree_nnce,
    "mce": gen_mce,
    "mcer": gen_mcer,
    "rnce": gen_rnce,
    "stce": gen_stce,
    "proplace": gen_proplace,
    "roar": gen_roar,
}

DISPLAY_NAMES = {
    "wachter": "Wachter", "bls": "BLS", "kdtree-nnce": "KDTreeNNCE", "mce": "MCE", "mcer": "MCER",
    "rnce": "RNCE", "stce": "STCE", "proplace": "PROPLACE", "roar": "ROAR",
}


def resolve_method(name: str) -> str:
    key = name.strip().lower()
    aliases = {"kdtreennce": "kdtree-nnce", "nnce": "kdtree-nnce"}
    key = aliases.get(key, key)
    if key not in GENERATORS:
        raise KeyError(f"unknown method {name!r}; choose from {', '.join(GENERATORS)}")
    return key


def generate(method: str, task: ClassificationTask, x, cfg: GeneratorConfig | None = None,
             index: int = 0, strict: bool = True) -> CounterfactualResult:
    """Run one generator on one instance.

    With ``strict`` the instance must be predicted as ``task.neg_value``;
    otherwise :class:`PreconditionError` is raised.
    """
    cfg = cfg or GeneratorConfig()
    key = resolve_method(method)
    x = np.asarray(x, dtype=float)
    if strict and task.is_valid_ce(x):
        raise PreconditionError(f"instance {index} is already predicted as class {task.target_class}")
    rng = instance_rng(cfg.seed, index)
    t0 = time.perf_counter()
    ce, diag = GENERATORS[key](task, x, cfg, rng)
    elapsed = time.perf_counter() - t0
    if ce is None:
        return CounterfactualResult(index, None, False, float("nan"), elapsed, key, diag)
    lo, hi = task.box
    ce = np.clip(np.asarray(ce, dtype=float), lo, hi)
    return CounterfactualResult(index, ce, task.is_valid_ce(ce), float(np.linalg.norm(ce - x)),
                                elapsed, key, diag)
