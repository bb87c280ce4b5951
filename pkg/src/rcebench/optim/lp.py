"""Dense two-phase simplex for LPs with finite variable bounds.

Variables are shifted to ``[0, u]`` and upper bounds are handled by
complementing (``y -> u - y``) instead of adding rows, so a problem with
``n`` bounded variables and ``m`` constraints is solved on an ``m``-row
tableau. Pricing uses Bland's rule unless asked otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
COST_TOL = 1e-9
# consecutive degenerate pivots after which Dantzig pricing falls back to Bland
DEGENERATE_SWITCH = 50

RELATIONS = ("<=", "=", ">=")


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Minimise ``c @ x`` subject to ``A x (rel) b`` and ``lo <= x <= hi``."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if A.shape[0] != b.size or len(self.senses) != b.size:
            raise ValueError("constraint matrix, senses and rhs disagree in length")
        if lo.size != n or hi.size != n:
            raise ValueError("bounds must have one entry per variable")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("variable bounds must be finite")
        if (lo > hi).any():
            j = int(np.argmax(lo > hi))
            raise ValueError(f"variable {j}: lower bound {lo[j]} exceeds upper bound {hi[j]}")
        bad = [s for s in self.senses if s not in RELATIONS]
        if bad:
            raise ValueError(f"unknown relation {bad[0]!r}")
        for name, v in (("c", c), ("A", A), ("lo", lo), ("hi", hi), ("b", b)):
            object.__setattr__(self, name, v)
        object.__setattr__(self, "senses", tuple(self.senses))

    @property
    def n_vars(self) -> int:
        return self.c.size

    @classmethod
    def from_constraints(cls, objective, constraints, var_bounds):
        """Build from ``[(coeffs, rel, rhs), ...]`` and ``[(lo, hi), ...]``."""
        n = len(objective)
        A = np.array([row for row, _, _ in constraints], dtype=float).reshape(-1, n)
        senses = tuple(rel for _, rel, _ in constraints)
        b = np.array([rhs for _, _, rhs in constraints], dtype=float)
        lo, hi = (np.array(v, dtype=float) for v in zip(*var_bounds)) if var_bounds else ([], [])
        return cls(np.asarray(objective, float), A, senses, b, lo, hi)

    def with_bounds(self, lo, hi) -> LpProblem:
        return LpProblem(self.c, self.A, self.senses, self.b, lo, hi, self.names)

    def is_feasible(self, x, tol: float = 1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        if (x < self.lo - tol).any() or (x > self.hi + tol).any():
            return False
        r = self.A @ x - self.b
        for v, s in zip(r, self.senses):
            if (s == "<=" and v > tol) or (s == ">=" and v < -tol) or (s == "=" and abs(v) > tol):
                return False
        return True

    def to_lp_text(self) -> str:
        """Human-readable LP-format dump for checking against other solvers by hand."""
        names = self.names or tuple(f"x{j}" for j in range(self.n_vars))

        def expr(coeffs):
            terms = [f"{'-' if v < 0 else '+'} {abs(v):.17g} {names[j]}"
                     for j, v in enumerate(coeffs) if v != 0]
            return " ".join(terms) if terms else "0"

        lines = ["Minimize", f" obj: {expr(self.c)}", "Subject To"]
        for i, (row, s, rhs) in enumerate(zip(self.A, self.senses, self.b)):
            lines.append(f" c{i}: {expr(row)} {s} {rhs:.17g}")
        lines.append("Bounds")
        for j in range(self.n_vars):
            lines.append(f" {self.lo[j]:.17g} <= {names[j]} <= {self.hi[j]:.17g}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class MilpSolution:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None = None
    objective_value: float = float("nan")
    nodes: int = 0
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Constraint rows ``T[:, :-1] y = T[:, -1]`` with an explicit basis.

    ``flipped[j]`` marks variables currently stored as ``u_j - y_j``.
    """

    def __init__(self, T, basis, ub, rule="bland"):
        self.rule = rule
        self.T = T
        self.basis = basis
        self.ub = ub
        self.flipped = np.zeros(T.shape[1] - 1, dtype=bool)
        self.iterations = 0

    def complement_column(self, q):
        T = self.T
        T[:, -1] -= self.ub[q] * T[:, q]
        T[:, q] = -T[:, q]
        self.flipped[q] = ~self.flipped[q]

    def complement_basic(self, i):
        r = self.basis[i]
        T = self.T
        T[i, :-1] = -T[i, :-1]
        T[i, r] = 1.0
        T[i, -1] = self.ub[r] - T[i, -1]
        self.flipped[r] = ~self.flipped[r]

    def pivot(self, i, q):
        T = self.T
        T[i] /= T[i, q]
        col = T[:, q].copy()
        col[i] = 0.0
        T -= np.outer(col, T[i])
        self.basis[i] = q

    def run(self, cost, active, max_iter):
        """Minimise ``cost @ y`` over the columns flagged in ``active``."""
        T = self.T
        m = T.shape[0]
        no_key = T.shape[1]
        degenerate = 0
        d = None
        for it in range(max_iter):
            if it % 50 == 0:
                # reduced costs in stored orientation, refreshed against drift
                cb = np.where(self.flipped, -cost, cost)
                d = cb - cb[self.basis] @ T[:, :-1]
            cand = np.flatnonzero(active & (d < -COST_TOL))
            if cand.size == 0:
                cb = np.where(self.flipped, -cost, cost)
                d = cb - cb[self.basis] @ T[:, :-1]
                cand = np.flatnonzero(active & (d < -COST_TOL))
                if cand.size == 0:
                    return True
            if self.rule == "dantzig" and degenerate < DEGENERATE_SWITCH:
                q = int(cand[np.argmin(d[cand])])
            else:
                q = int(cand[0])
            colq = T[:, q]
            rhs = T[:, -1]
            ub_b = self.ub[self.basis]
            t = np.full(m, np.inf)
            pos = colq > PIVOT_TOL
            t[pos] = np.maximum(rhs[pos], 0.0) / colq[pos]
            neg = (colq < -PIVOT_TOL) & (ub_b < np.inf)
            t[neg] = np.maximum(ub_b[neg] - rhs[neg], 0.0) / -colq[neg]
            best_t = min(t.min() if m else np.inf, self.ub[q])
            if best_t == np.inf:
                raise RuntimeError("unbounded direction in a bounded LP")
            best_row = -1
            best_key = q if self.ub[q] <= best_t + 1e-12 else no_key
            for i in np.flatnonzero(t <= best_t + 1e-12):
                if self.basis[i] < best_key:
                    best_key, best_row = self.basis[i], i
            self.iterations += 1
            degenerate = degenerate + 1 if best_t <= 1e-12 else 0
            if best_row < 0:
                self.complement_column(q)
                d[q] = -d[q]
                continue
            if colq[best_row] < 0:
                self.complement_basic(best_row)
            self.pivot(best_row, q)
            d -= d[q] * T[best_row, :-1]
        raise RuntimeError(f"simplex did not converge in {max_iter} iterations")

    def values(self, n):
        y = np.zeros(self.T.shape[1] - 1)
        y[self.basis] = self.T[:, -1]
        y = np.where(self.flipped, self.ub - y, y)
        return y[:n]


def solve_lp(p: LpProblem, max_iter: int = 50_000, rule: str = "bland") -> MilpSolution:
    """Two-phase simplex. Returns an optimal basic solution or ``infeasible``.

    ``rule="bland"`` prices by smallest index throughout. ``rule="dantzig"``
    takes the most negative reduced cost and drops to Bland's rule after a
    run of degenerate pivots, which keeps the anti-cycling guarantee.
    """
    lo, hi = p.lo, p.hi
    free = np.flatnonzero(hi > lo)
    fixed = hi <= lo
    # constant contribution of fixed variables and of lower-bound shifts
    rhs = p.b - p.A @ lo
    A = p.A[:, free]
    u = (hi - lo)[free]

    keep = np.ones(len(rhs), dtype=bool)
    for i, row in enumerate(A):
        if not np.any(row):
            s, v = p.senses[i], rhs[i]
            ok = (s == "<=" and v >= -FEAS_TOL) or (s == ">=" and v <= FEAS_TOL) or (s == "=" and abs(v) <= FEAS_TOL)
            if not ok:
                return MilpSolution("infeasible")
            keep[i] = False
    A, rhs = A[keep], rhs[keep]
    senses = [s for s, k in zip(p.senses, keep) if k]
    m, nf = A.shape

    # orient rows so rhs >= 0
    sign = np.where(rhs < 0, -1.0, 1.0)
    A = A * sign[:, None]
    rhs = rhs * sign
    senses = [
        {"<=": ">=", ">=": "<=", "=": "="}[s] if sg < 0 else s for s, sg in zip(senses, sign)
    ]
    n_slack = sum(s != "=" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    ncol = nf + n_slack + n_art
    T = np.zeros((m, ncol + 1))
    T[:, :nf] = A
    T[:, -1] = rhs
    basis = np.zeros(m, dtype=int)
    art_cols = []
    k_s, k_a = nf, nf + n_slack
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, k_s] = 1.0
            basis[i] = k_s
            k_s += 1
        else:
            if s == ">=":
                T[i, k_s] = -1.0
                k_s += 1
            T[i, k_a] = 1.0
            basis[i] = k_a
            art_cols.append(k_a)
            k_a += 1
    ub = np.r_[u, np.full(n_slack + n_art, np.inf)]
    tab = _Tableau(T, basis, ub, rule)

    is_art = np.zeros(ncol, dtype=bool)
    is_art[art_cols] = True
    if art_cols:
        cost1 = is_art.astype(float)
        tab.run(cost1, np.ones(ncol, dtype=bool), max_iter)
        infeas = tab.T[np.isin(tab.basis, art_cols), -1].sum()
        if infeas > FEAS_TOL:
            return MilpSolution("infeasible", iterations=tab.iterations)
        # drive zero-level artificials out of the basis; drop redundant rows
        drop = []
        for i in range(m):
            if is_art[tab.basis[i]]:
                row = tab.T[i, :ncol]
                cand = np.flatnonzero(~is_art & (np.abs(row) > PIVOT_TOL))
                if cand.size:
                    tab.T[i, -1] = 0.0
                    tab.pivot(i, int(cand[0]))
                else:
                    drop.append(i)
        keep_rows = np.setdiff1d(np.arange(m), drop)
        # artificial columns sit at the end; none is basic any more
        n_keep = nf + n_slack
        tab.T = np.hstack([tab.T[keep_rows, :n_keep], tab.T[keep_rows, -1:]])
        tab.basis = tab.basis[keep_rows]
        tab.ub = tab.ub[:n_keep]
        tab.flipped = tab.flipped[:n_keep]
        ncol = n_keep
    cost2 = np.zeros(ncol)
    cost2[:nf] = p.c[free]
    tab.run(cost2, np.ones(ncol, dtype=bool), max_iter)

    y = tab.values(nf)
    x = lo.copy()
    x[free] += y
    x[fixed] = lo[fixed]
    x = np.clip(x, lo, hi)
    return MilpSolution("optimal", x, float(p.c @ x), iterations=tab.iterations)
