"""Self-contained exact LP and MILP solving.

LPs go through a bounded-variable primal simplex: two phases with artificial
variables, an explicit dense basis inverse updated by rank-one pivots, and
reduced costs maintained across iterations.  Variable bounds are handled
implicitly (nonbasic-at-lower / nonbasic-at-upper / bound flips), so only
genuine constraints occupy tableau rows; that is what keeps week-long hourly
models tractable without sparsity machinery.

Pivot selection defaults to largest-violation (Dantzig) pricing and switches
to Bland's lowest-index rule whenever a run of degenerate pivots exceeds the
stall limit, which restores the termination guarantee while keeping iteration
counts sane.  Pass ``pivot_rule="bland"`` for lowest-index pricing throughout.
All tie-breaks are by lowest index, so solves are bitwise deterministic.

MILPs run best-first branch-and-bound on LP relaxations: nodes are keyed on
(parent bound, insertion order), the branching variable is the most
fractional one (ties to the lowest id), and the floor child is pushed first.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.linalg.blas import dger

from .errors import NodeLimitExceededError, NumericalBreakdownError
from .milp import INF, MilpProblem, Relation, Sense

# Tolerances (absolute unless noted).
FEAS_TOL = 1e-7        # phase-1 objective above this means infeasible
DJ_TOL = 1e-9          # reduced-cost threshold for an improving column
RATIO_EPS = 1e-9       # pivot floor; smaller entries never block or pivot
INT_TOL = 1e-6         # integrality tolerance in branch-and-bound
BOUND_VIOL_TOL = 1e-6  # basic-value bound violation that triggers breakdown
REFACTOR_EVERY = 1200  # pivots between basis-inverse recomputations

_NB_LOWER, _NB_UPPER, _NB_FREE, _NB_FIXED, _BASIC = 0, 1, 2, 3, 4


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"          # incumbent found but gap unproven (node limit)
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LpSolution:
    """Result of an LP solve; objective/values are None unless Optimal."""

    status: SolveStatus
    objective: float | None = None
    values: dict[int, float] | None = None


@dataclass
class MilpSolution:
    """Result of a MILP solve.

    ``gap`` is the relative incumbent-vs-bound gap at termination (0 when the
    tree was exhausted), ``nodes_explored`` counts LP relaxations solved, and
    ``node_bounds`` records each explored node's LP bound for diagnostics.
    """

    status: SolveStatus
    objective: float | None = None
    values: dict[int, float] | None = None
    gap: float = math.inf
    nodes_explored: int = 0
    node_bounds: list[float] = field(default_factory=list)


@dataclass
class _Standardized:
    """Minimization-form arrays extracted once from a MilpProblem."""

    n: int
    m: int
    A: sparse.csc_matrix          # m x n structural columns
    b: np.ndarray
    relations: list[Relation]
    c: np.ndarray                 # internal costs (negated for maximize)
    lower: np.ndarray
    upper: np.ndarray
    sign: float                   # +1 minimize, -1 maximize
    const: float                  # objective constant, original sense
    integral: np.ndarray          # bool per variable


def _standardize(problem: MilpProblem) -> _Standardized:
    n = problem.num_variables
    m = problem.num_constraints
    lower = np.array([v.lower for v in problem.variables], dtype=float)
    upper = np.array([v.upper for v in problem.variables], dtype=float)
    integral = np.array([v.integral for v in problem.variables], dtype=bool)

    sign = 1.0 if problem.sense is Sense.MINIMIZE else -1.0
    c = np.zeros(n)
    for vid, coef in problem.objective.terms.items():
        c[vid] = coef
    c *= sign

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b = np.zeros(m)
    relations: list[Relation] = []
    for i, con in enumerate(problem.constraints):
        b[i] = con.rhs
        relations.append(con.relation)
        for vid, coef in con.expr.terms.items():
            rows.append(i)
            cols.append(vid)
            vals.append(coef)
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(m, n))
    return _Standardized(n, m, A, b, relations, c, lower, upper, sign,
                         problem.objective.constant, integral)


_SLACK_BOUNDS = {Relation.LE: (0.0, INF), Relation.GE: (-INF, 0.0), Relation.EQ: (0.0, 0.0)}


class _Simplex:
    """Bounded-variable primal simplex over one fixed constraint matrix."""

    def __init__(
        self,
        std: _Standardized,
        lower: np.ndarray,
        upper: np.ndarray,
        pivot_rule: str,
        max_iterations: int | None,
    ):
        m, n = std.m, std.n
        self.m, self.n = m, n
        slack_lo = np.array([_SLACK_BOUNDS[r][0] for r in std.relations])
        slack_up = np.array([_SLACK_BOUNDS[r][1] for r in std.relations])

        self.lower = np.concatenate([lower, slack_lo, np.zeros(m)])
        self.upper = np.concatenate([upper, slack_up, np.full(m, INF)])
        self.N = n + 2 * m

        self.vstat = np.empty(self.N, dtype=np.int8)
        structural = slice(0, n + m)
        lo, up = self.lower[structural], self.upper[structural]
        self.vstat[structural] = np.where(
            lo == up, _NB_FIXED,
            np.where(lo > -INF, _NB_LOWER, np.where(up < INF, _NB_UPPER, _NB_FREE)),
        )
        self.nbval = np.zeros(self.N)
        self.nbval[structural] = np.where(
            self.vstat[structural] == _NB_UPPER, up, np.where(self.vstat[structural] == _NB_FREE, 0.0, lo)
        )

        # Artificial columns get the residual sign so they start basic and
        # nonnegative; the initial basis inverse is then just diag(sigma).
        res = std.b - std.A.dot(self.nbval[:n])
        sigma = np.where(res < 0.0, -1.0, 1.0)
        self.A = sparse.hstack(
            [std.A, sparse.eye(m, format="csc"), sparse.diags(sigma, format="csc")],
            format="csc",
        )
        self.AT = self.A.T.tocsr()
        self.b = std.b

        art = np.arange(n + m, n + 2 * m)
        self.basis = art.copy()
        self.vstat[art] = _BASIC
        self.xB = np.abs(res)
        self.Binv = np.diag(sigma)

        self.c_real = np.concatenate([std.c, np.zeros(2 * m)])
        self.c_art = np.concatenate([np.zeros(n + m), np.ones(m)])

        self.pivot_rule = pivot_rule
        self.stall_limit = max(200, m // 2)
        self.max_iterations = max_iterations if max_iterations is not None else 20_000 + 50 * (n + 3 * m)
        self.iterations = 0
        self._since_refactor = 0

    # -- column access -----------------------------------------------------

    def _column(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        a = self.A
        start, end = a.indptr[q], a.indptr[q + 1]
        return a.indices[start:end], a.data[start:end]

    def _ftran(self, q: int) -> np.ndarray:
        idx, vals = self._column(q)
        return self.Binv[:, idx] @ vals

    # -- maintenance ---------------------------------------------------------

    def _refactor(self, c_phase: np.ndarray) -> None:
        B = self.A[:, self.basis].toarray()
        try:
            inv = scipy.linalg.inv(B, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalBreakdownError("basis became singular") from exc
        # C layout is required so Binv.T stays F-contiguous for in-place ger.
        self.Binv = np.ascontiguousarray(inv)
        x = self.nbval.copy()
        x[self.basis] = 0.0
        self.xB = self.Binv @ (self.b - self.A.dot(x))
        self._recompute_d(c_phase)
        self._since_refactor = 0

    def _recompute_d(self, c_phase: np.ndarray) -> None:
        y = c_phase[self.basis] @ self.Binv
        self.d = c_phase - self.AT.dot(y)
        self.d[self.basis] = 0.0

    # -- pivoting ------------------------------------------------------------

    def _choose_entering(self, bland: bool) -> int | None:
        d, vstat = self.d, self.vstat
        viol = np.full(self.N, -np.inf)
        at_lo = vstat == _NB_LOWER
        at_up = vstat == _NB_UPPER
        fr = vstat == _NB_FREE
        viol[at_lo] = -d[at_lo]
        viol[at_up] = d[at_up]
        viol[fr] = np.abs(d[fr])
        improving = viol > DJ_TOL
        if not improving.any():
            return None
        if bland:
            return int(np.flatnonzero(improving)[0])
        return int(np.argmax(viol))

    def _pivot(self, q: int, r: int, w: np.ndarray, delta: float, theta: float) -> None:
        s = delta * w
        leave = self.basis[r]
        self.xB -= theta * s
        self.nbval[leave] = self.lower[leave] if s[r] > 0 else self.upper[leave]
        self.vstat[leave] = _NB_LOWER if s[r] > 0 else _NB_UPPER
        enter_val = self.nbval[q] + delta * theta
        self.basis[r] = q
        self.vstat[q] = _BASIC
        self.xB[r] = enter_val

        wr = w[r]
        self.Binv[r] /= wr
        br = self.Binv[r].copy()  # BLAS ger must not alias x with the matrix
        w2 = w.copy()
        w2[r] = 0.0
        # Binv -= outer(w2, br), in place through the transposed view; rebind
        # the result so a silent BLAS copy could never desynchronize state.
        self.Binv = dger(-1.0, br, w2, a=self.Binv.T, overwrite_a=1).T

        dq = self.d[q]
        if dq != 0.0:
            self.d -= dq * self.AT.dot(br)
        self.d[self.basis] = 0.0
        self._since_refactor += 1

    def _run_phase(self, c_phase: np.ndarray) -> str:
        """Iterate to optimality of c_phase. Returns 'optimal' or 'unbounded'."""
        self._recompute_d(c_phase)
        bland_active = self.pivot_rule == "bland"
        degenerate_run = 0
        confirmations = 0

        while True:
            if self.iterations > self.max_iterations:
                raise NumericalBreakdownError(
                    f"simplex iteration limit exceeded ({self.max_iterations})"
                )
            q = self._choose_entering(bland_active)
            if q is None:
                # Confirm against a fresh factorization; maintained reduced
                # costs drift and must not decide termination on their own.
                if self._since_refactor > 0 and confirmations < 3:
                    self._refactor(c_phase)
                    confirmations += 1
                    continue
                return "optimal"
            self.iterations += 1

            if self.vstat[q] == _NB_LOWER:
                delta = 1.0
            elif self.vstat[q] == _NB_UPPER:
                delta = -1.0
            else:
                delta = 1.0 if self.d[q] < 0 else -1.0

            w = self._ftran(q)
            s = delta * w
            lB = self.lower[self.basis]
            uB = self.upper[self.basis]
            theta = np.full(self.m, np.inf)
            blocking_lo = (s > RATIO_EPS) & (lB > -INF)
            blocking_up = (s < -RATIO_EPS) & (uB < INF)
            theta[blocking_lo] = (self.xB[blocking_lo] - lB[blocking_lo]) / s[blocking_lo]
            theta[blocking_up] = (self.xB[blocking_up] - uB[blocking_up]) / s[blocking_up]
            np.maximum(theta, 0.0, out=theta)

            theta_row = float(theta.min()) if self.m else math.inf
            if self.vstat[q] != _NB_FREE and self.lower[q] > -INF and self.upper[q] < INF:
                theta_flip = self.upper[q] - self.lower[q]
            else:
                theta_flip = math.inf

            if theta_row == math.inf and theta_flip == math.inf:
                if self._since_refactor > 0:
                    self._refactor(c_phase)  # confirm the ray is real
                    continue
                return "unbounded"

            if theta_flip <= theta_row:
                # Bound flip: no basis change, the entering variable crosses
                # to its other bound.
                self.xB -= theta_flip * s
                self.nbval[q] = self.upper[q] if self.vstat[q] == _NB_LOWER else self.lower[q]
                self.vstat[q] = _NB_UPPER if self.vstat[q] == _NB_LOWER else _NB_LOWER
                degenerate_run = 0
                continue

            if bland_active:
                # Exact ties only: Bland's termination proof needs the
                # lowest-index leaving variable among true minimizers.
                ties = np.flatnonzero(theta <= theta_row + 1e-12)
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                # Harris-style window: among near-minimal ratios take the
                # largest pivot, trading <=1e-7 of step slack for stability.
                ties = np.flatnonzero(theta <= theta_row * (1.0 + 1e-7) + 1e-10)
                r = int(ties[np.argmax(np.abs(s[ties]))])
            self._pivot(q, r, w, delta, theta_row)

            if theta_row <= 1e-12:
                degenerate_run += 1
                if not bland_active and self.pivot_rule == "hybrid" and degenerate_run > self.stall_limit:
                    bland_active = True
            else:
                degenerate_run = 0
                if self.pivot_rule == "hybrid":
                    bland_active = False

            if self._since_refactor >= REFACTOR_EVERY:
                self._refactor(c_phase)

    def _drive_out_artificials(self) -> None:
        art_start = self.n + self.m
        for r in range(self.m):
            if self.basis[r] < art_start:
                continue
            tab_row = self.AT.dot(self.Binv[r])
            candidates = np.flatnonzero(
                (np.abs(tab_row[:art_start]) > 1e-9) & (self.vstat[:art_start] != _NB_FIXED)
            )
            replaced = False
            for q in candidates:
                w = self._ftran(int(q))
                if abs(w[r]) > 1e-9:
                    delta = 1.0  # theta is zero, direction is immaterial
                    self._pivot(int(q), r, w, delta, 0.0)
                    replaced = True
                    break
            if not replaced:
                # Redundant row: pin the artificial at zero for good.
                a = self.basis[r]
                self.lower[a] = self.upper[a] = 0.0

    def solve(self) -> tuple[str, np.ndarray | None, float]:
        """Run both phases. Returns (status, full values, internal objective)."""
        if self.m > 0:
            status = self._run_phase(self.c_art)
            if status != "optimal":
                raise NumericalBreakdownError("phase-1 objective reported unbounded")
            phase1 = float(self.c_art[self.basis] @ self.xB)
            if phase1 > FEAS_TOL:
                return "infeasible", None, math.inf
            self._drive_out_artificials()
            art = slice(self.n + self.m, self.N)
            self.lower[art] = 0.0
            self.upper[art] = 0.0
            nonbasic_art = (self.vstat[art] != _BASIC).nonzero()[0] + self.n + self.m
            self.vstat[nonbasic_art] = _NB_FIXED
            self.nbval[nonbasic_art] = 0.0

        status = self._run_phase(self.c_real)
        if status == "unbounded":
            return "unbounded", None, -math.inf

        if self._since_refactor > 0:
            self._refactor(self.c_real)  # polish values before extraction
        viol = np.maximum(self.lower[self.basis] - self.xB, self.xB - self.upper[self.basis])
        worst = float(viol.max()) if self.m else 0.0
        if worst > BOUND_VIOL_TOL:
            raise NumericalBreakdownError(f"basic value violates bounds by {worst:.3e}")

        x = self.nbval.copy()
        x[self.basis] = self.xB
        np.clip(x, self.lower, self.upper, out=x)
        obj = float(self.c_real[: self.n] @ x[: self.n])
        return "optimal", x[: self.n], obj


def _solve_internal(
    std: _Standardized,
    lower: np.ndarray,
    upper: np.ndarray,
    pivot_rule: str,
    max_iterations: int | None,
) -> tuple[str, np.ndarray | None, float]:
    if np.any(lower > upper):
        return "infeasible", None, math.inf
    if std.n == 0:
        return ("optimal", np.zeros(0), 0.0) if std.m == 0 else ("infeasible", None, math.inf)
    if std.m == 0:
        # Pure bound optimization: each variable sits at its cheapest bound.
        x = np.empty(std.n)
        for j in range(std.n):
            cj = std.c[j]
            if cj > 0:
                if lower[j] == -INF:
                    return "unbounded", None, -math.inf
                x[j] = lower[j]
            elif cj < 0:
                if upper[j] == INF:
                    return "unbounded", None, -math.inf
                x[j] = upper[j]
            else:
                x[j] = lower[j] if lower[j] > -INF else (upper[j] if upper[j] < INF else 0.0)
        return "optimal", x, float(std.c @ x)
    sx = _Simplex(std, lower, upper, pivot_rule, max_iterations)
    return sx.solve()


def solve_lp(
    problem: MilpProblem,
    *,
    pivot_rule: str = "hybrid",
    max_iterations: int | None = None,
) -> LpSolution:
    """Solve the LP relaxation (integrality flags ignored).

    Optimal solutions are basic feasible points; the objective is exact to
    within 1e-8 on desk-scale inputs.  Infeasibility and unboundedness are
    certified by the two phases.  Raises NumericalBreakdownError on
    ill-conditioned input.
    """
    std = _standardize(problem)
    status, x, obj = _solve_internal(std, std.lower, std.upper, pivot_rule, max_iterations)
    return _wrap_lp(std, status, x, obj)


def _wrap_lp(std: _Standardized, status: str, x: np.ndarray | None, obj: float) -> LpSolution:
    if status == "infeasible":
        return LpSolution(SolveStatus.INFEASIBLE)
    if status == "unbounded":
        return LpSolution(SolveStatus.UNBOUNDED)
    objective = std.sign * obj + std.const
    values = {j: float(x[j]) for j in range(std.n)}
    return LpSolution(SolveStatus.OPTIMAL, objective, values)


def solve_milp(
    problem: MilpProblem,
    rel_gap: float = 1e-6,
    node_limit: int = 100_000,
    *,
    pivot_rule: str = "hybrid",
    max_iterations: int | None = None,
) -> MilpSolution:
    """Branch-and-bound with best-first node selection.

    Branches on the most fractional integer variable (ties to the lowest id),
    pushing the floor child first.  Terminates when the relative
    incumbent-vs-bound gap drops to ``rel_gap`` or the node limit is hit; in
    the latter case the best incumbent is returned with status FEASIBLE and
    its remaining gap, or NodeLimitExceededError is raised when no integer
    point was found at all.
    """
    if rel_gap < 0:
        raise ValueError("rel_gap must be nonnegative")
    if node_limit < 1:
        raise ValueError("node_limit must be at least 1")

    std = _standardize(problem)
    int_ids = np.flatnonzero(std.integral)

    def finish(inc_obj, inc_x, gap, nodes, bounds_log, status):
        objective = std.sign * inc_obj + std.const
        values = {j: float(inc_x[j]) for j in range(std.n)}
        for j in int_ids:
            values[int(j)] = float(round(values[int(j)]))
        return MilpSolution(status, objective, values, gap, nodes, bounds_log)

    if int_ids.size == 0:
        status, x, obj = _solve_internal(std, std.lower, std.upper, pivot_rule, max_iterations)
        if status == "infeasible":
            return MilpSolution(SolveStatus.INFEASIBLE, nodes_explored=1)
        if status == "unbounded":
            return MilpSolution(SolveStatus.UNBOUNDED, nodes_explored=1)
        return finish(obj, x, 0.0, 1, [std.sign * obj + std.const], SolveStatus.OPTIMAL)

    incumbent_obj = math.inf
    incumbent_x: np.ndarray | None = None
    nodes_explored = 0
    bounds_log: list[float] = []
    seq = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = [
        (-math.inf, seq, std.lower.copy(), std.upper.copy())
    ]

    def rel(inc: float, bound: float) -> float:
        if inc - bound <= 1e-9:
            return 0.0
        return (inc - bound) / (1e-10 + abs(inc))

    root_unbounded = False
    while heap:
        bound, _, lo, up = heapq.heappop(heap)
        if incumbent_x is not None and rel(incumbent_obj, bound) <= rel_gap:
            return finish(incumbent_obj, incumbent_x, rel(incumbent_obj, bound),
                          nodes_explored, bounds_log, SolveStatus.OPTIMAL)
        if nodes_explored >= node_limit:
            best_bound = bound
            if incumbent_x is None:
                raise NodeLimitExceededError(
                    f"node limit {node_limit} reached with no integer-feasible point"
                )
            return finish(incumbent_obj, incumbent_x, rel(incumbent_obj, best_bound),
                          nodes_explored, bounds_log, SolveStatus.FEASIBLE)

        status, x, obj = _solve_internal(std, lo, up, pivot_rule, max_iterations)
        nodes_explored += 1
        if status == "unbounded":
            if nodes_explored == 1:
                root_unbounded = True
                break
            raise NumericalBreakdownError("child LP unbounded below a bounded parent")
        if status == "infeasible":
            continue
        bounds_log.append(std.sign * obj + std.const)
        if obj >= incumbent_obj - 1e-9:
            continue

        frac = x[int_ids] - np.floor(x[int_ids])
        dist = np.minimum(frac, 1.0 - frac)
        if not (dist > INT_TOL).any():
            incumbent_obj = obj
            incumbent_x = x
            continue
        j = int(int_ids[np.argmax(dist)])
        v = x[j]
        lo_f, up_f = lo.copy(), up.copy()
        up_f[j] = math.floor(v)
        seq += 1
        heapq.heappush(heap, (obj, seq, lo_f, up_f))
        lo_c, up_c = lo.copy(), up.copy()
        lo_c[j] = math.ceil(v)
        seq += 1
        heapq.heappush(heap, (obj, seq, lo_c, up_c))

    if root_unbounded:
        return MilpSolution(SolveStatus.UNBOUNDED, nodes_explored=nodes_explored)
    if incumbent_x is None:
        return MilpSolution(SolveStatus.INFEASIBLE, nodes_explored=nodes_explored)
    return finish(incumbent_obj, incumbent_x, 0.0, nodes_explored, bounds_log, SolveStatus.OPTIMAL)
