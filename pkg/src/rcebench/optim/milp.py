"""Best-first branch-and-bound over binary variables."""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .lp import LpProblem, MilpSolution, solve_lp

INT_TOL = 1e-6
PRUNE_TOL = 1e-9


class NodeBudgetExceeded(RuntimeError):
    """Branch-and-bound explored more nodes than allowed."""


@dataclass(frozen=True, eq=False)
class MilpProblem:
    base: LpProblem
    binary_vars: tuple[int, ...]

    def __post_init__(self):
        bv = tuple(sorted(set(int(j) for j in self.binary_vars)))
        if any(j < 0 or j >= self.base.n_vars for j in bv):
            raise ValueError("binary variable index out of range")
        lo = self.base.lo.copy()
        hi = self.base.hi.copy()
        lo[list(bv)] = np.maximum(lo[list(bv)], 0.0)
        hi[list(bv)] = np.minimum(hi[list(bv)], 1.0)
        object.__setattr__(self, "binary_vars", bv)
        object.__setattr__(self, "base", self.base.with_bounds(lo, hi))


def solve_milp(p: MilpProblem, node_limit: int = 100_000, rule: str = "bland") -> MilpSolution:
    """Exact optimum by best-first search; branches on the most fractional binary."""
    base = p.base
    bins = np.array(p.binary_vars, dtype=int)
    counter = itertools.count()
    # node: (parent bound, tiebreak, lo, hi)
    heap = [(-np.inf, next(counter), base.lo, base.hi)]
    best = None
    best_obj = np.inf
    nodes = 0
    iterations = 0
    while heap:
        bound, _, lo, hi = heapq.heappop(heap)
        if bound >= best_obj - PRUNE_TOL:
            break
        if nodes >= node_limit:
            raise NodeBudgetExceeded(f"branch-and-bound exceeded {node_limit} nodes")
        nodes += 1
        sol = solve_lp(base.with_bounds(lo, hi), rule=rule)
        iterations += sol.iterations
        if not sol.optimal or sol.objective_value >= best_obj - PRUNE_TOL:
            continue
        if bins.size:
            vals = sol.x[bins]
            frac = np.abs(vals - np.round(vals))
        else:
            frac = np.zeros(0)
        if frac.size == 0 or frac.max() <= INT_TOL:
            x = sol.x.copy()
            x[bins] = np.round(x[bins])
            best, best_obj = x, sol.objective_value
            continue
        # most fractional: closest to 0.5, ties to the lowest index
        k = int(np.argmax(np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)))
        j = bins[k]
        for v in (0.0, 1.0):
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = v
            heapq.heappush(heap, (sol.objective_value, next(counter), clo, chi))
    if best is None:
        return MilpSolution("infeasible", nodes=nodes, iterations=iterations)
    return MilpSolution("optimal", best, float(base.c @ best), nodes=nodes, iterations=iterations)
