"""Independent re-checks of solved models.

Result writers call these before trusting any dispatch: every bus balance,
storage dynamics row, and cyclic-closure row is re-evaluated from the raw
variable values rather than from solver bookkeeping.
"""

from __future__ import annotations

from .milp import MilpProblem

BALANCE_TOL = 1e-6  # kW per bus and timestep; kWh for storage closure


def constraint_residuals(
    problem: MilpProblem, values: dict[int, float], name_filter: str
) -> dict[str, float]:
    """Signed residual (lhs - rhs) of every equality row whose name contains the filter."""
    out: dict[str, float] = {}
    for con in problem.constraints:
        if name_filter in con.name:
            out[con.name] = con.expr.evaluate(values) - con.rhs
    return out


def check_solution(problem: MilpProblem, values: dict[int, float], tol: float = BALANCE_TOL) -> list[str]:
    """Re-verify bus balances and storage behaviour; returns violation messages."""
    bad: list[str] = []
    for tag in ("bus/", "/dynamics/", "/cycle/"):
        for name, resid in constraint_residuals(problem, values, tag).items():
            if abs(resid) > tol:
                bad.append(f"{name}: residual {resid:.3e}")
    return bad


def max_balance_residual(problem: MilpProblem, values: dict[int, float]) -> float:
    resids = constraint_residuals(problem, values, "bus/")
    return max((abs(r) for r in resids.values()), default=0.0)
