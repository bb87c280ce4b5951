"""Big-M mixed-integer encoding of a ReLU network over an input box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import DenseModel, propagate_bounds
from .lp import LpProblem
from .milp import MilpProblem


class LpBuilder:
    """Incremental construction of an :class:`LpProblem` with sparse rows."""

    def __init__(self):
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.names: list[str] = []
        self.cost: dict[int, float] = {}
        self.rows: list[tuple[dict[int, float], str, float]] = []
        self.binaries: list[int] = []

    def add_var(self, lo, hi, name="", binary=False) -> int:
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        j = len(self.lo) - 1
        self.names.append(name or f"v{j}")
        if binary:
            self.binaries.append(j)
        return j

    def add_constraint(self, coeffs: dict[int, float], rel: str, rhs: float):
        self.rows.append((dict(coeffs), rel, float(rhs)))

    def build(self) -> LpProblem:
        n = len(self.lo)
        A = np.zeros((len(self.rows), n))
        for i, (coeffs, _, _) in enumerate(self.rows):
            for j, v in coeffs.items():
                A[i, j] += v
        c = np.zeros(n)
        for j, v in self.cost.items():
            c[j] = v
        return LpProblem(c, A, tuple(r for _, r, _ in self.rows),
                         np.array([b for _, _, b in self.rows]),
                         np.array(self.lo), np.array(self.hi), tuple(self.names))

    def build_milp(self) -> MilpProblem:
        return MilpProblem(self.build(), tuple(self.binaries))


@dataclass
class NetworkEncoding:
    """Variable layout of an encoded network.

    ``pre[l][j]``, ``post[l][j]`` and ``active[l][j]`` index the
    pre-activation, post-activation and binary indicator of hidden neuron
    ``j`` in layer ``l``.
    """

    builder: LpBuilder
    x: list[int]
    pre: list[list[int]]
    post: list[list[int]]
    active: list[list[int]]
    logit: int
    bounds: list[tuple[np.ndarray, np.ndarray]]

    def problem(self) -> MilpProblem:
        return self.builder.build_milp()

    def decode(self, solution_x) -> np.ndarray:
        return np.asarray(solution_x)[self.x].copy()


def encode_network(m: DenseModel, box_lo, box_hi, kappa: float, target_class: int = 1,
                   builder: LpBuilder | None = None) -> NetworkEncoding:
    """Encode ``logit(x') >= kappa`` (``<= -kappa`` for class 0) with ``x'`` in the box.

    Per-neuron big-M constants come from interval propagation of the box.
    The objective is left empty for the caller.
    """
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)
    if box_lo.shape != (m.n_inputs,) or box_hi.shape != (m.n_inputs,):
        raise ValueError("box must have one interval per model input")
    bounds = propagate_bounds(m, box_lo, box_hi)
    for L, U in bounds:
        if not (np.isfinite(L).all() and np.isfinite(U).all()):
            raise ValueError("interval propagation produced non-finite neuron bounds")
    b = builder or LpBuilder()
    xs = [b.add_var(lo, hi, f"x{i}") for i, (lo, hi) in enumerate(zip(box_lo, box_hi))]
    prev = xs
    pres, posts, acts = [], [], []
    last = len(m.weights) - 1
    for layer, (W, bias) in enumerate(zip(m.weights, m.biases)):
        L, U = bounds[layer]
        if layer == last:
            logit = b.add_var(L[0], U[0], "logit")
            row = {logit: 1.0}
            for k, p in enumerate(prev):
                row[p] = row.get(p, 0.0) - W[0, k]
            b.add_constraint(row, "=", bias[0])
            break
        zl, al, sl = [], [], []
        for j in range(W.shape[0]):
            z = b.add_var(L[j], U[j], f"z{layer}_{j}")
            row = {z: 1.0}
            for k, p in enumerate(prev):
                row[p] = row.get(p, 0.0) - W[j, k]
            b.add_constraint(row, "=", bias[j])
            if U[j] <= 0:
                a = b.add_var(0.0, 0.0, f"a{layer}_{j}")
                s = b.add_var(0.0, 0.0, f"s{layer}_{j}", binary=True)
            elif L[j] >= 0:
                a = b.add_var(L[j], U[j], f"a{layer}_{j}")
                s = b.add_var(1.0, 1.0, f"s{layer}_{j}", binary=True)
                b.add_constraint({a: 1.0, z: -1.0}, "=", 0.0)
            else:
                a = b.add_var(0.0, U[j], f"a{layer}_{j}")
                s = b.add_var(0.0, 1.0, f"s{layer}_{j}", binary=True)
                b.add_constraint({a: 1.0, z: -1.0}, ">=", 0.0)
                # a <= z - L (1 - s)
                b.add_constraint({a: 1.0, z: -1.0, s: -L[j]}, "<=", -L[j])
                # a <= U s
                b.add_constraint({a: 1.0, s: -U[j]}, "<=", 0.0)
            zl.append(z)
            al.append(a)
            sl.append(s)
        pres.append(zl)
        posts.append(al)
        acts.append(sl)
        prev = al
    if target_class == 1:
        b.add_constraint({logit: 1.0}, ">=", kappa)
    else:
        b.add_constraint({logit: 1.0}, "<=", -kappa)
    return NetworkEncoding(b, xs, pres, posts, acts, logit, bounds)


def add_l1_objective(enc: NetworkEncoding, x0) -> tuple[list[int], list[int]]:
    """Attach ``min sum |x' - x0|`` through slack pairs ``x' - x0 = e+ - e-``."""
    b = enc.builder
    x0 = np.asarray(x0, dtype=float)
    plus, minus = [], []
    for i, xi in enumerate(enc.x):
        span = max(b.hi[xi] - x0[i], x0[i] - b.lo[xi], 0.0)
        ep = b.add_var(0.0, span, f"ep{i}")
        em = b.add_var(0.0, span, f"em{i}")
        b.add_constraint({xi: 1.0, ep: -1.0, em: 1.0}, "=", x0[i])
        b.cost[ep] = 1.0
        b.cost[em] = 1.0
        plus.append(ep)
        minus.append(em)
    return plus, minus
