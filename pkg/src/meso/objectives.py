"""Objective construction and bi-objective Pareto fronts.

Four standard objectives (annuity, operating cost, CO2, self-consumption)
plus user-composed weighted sums over named model quantities.  Fronts come
from the epsilon-constraint method, which reaches the non-convex points of
MILP fronts that weighted sums cannot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .components import Archetype, Carrier
from .errors import (
    HorizonMismatchError,
    InfeasibleModelError,
    MissingCostParameterError,
    UnknownQuantityError,
)
from .milp import LinExpr, Relation, Sense
from .solver import MilpSolution, SolveStatus, solve_milp
from .topology import AssembledModel


def annuity_factor(interest_rate: float, lifetime_years: int) -> float:
    """Capital recovery factor i(1+i)^n / ((1+i)^n - 1); 1/n at zero interest."""
    if lifetime_years < 1:
        raise ValueError("lifetime_years must be at least 1")
    if interest_rate < 0:
        raise ValueError("interest_rate must be nonnegative")
    if interest_rate == 0.0:
        return 1.0 / lifetime_years
    growth = (1.0 + interest_rate) ** lifetime_years
    return interest_rate * growth / (growth - 1.0)


@dataclass
class CostParameters:
    """Prices and emission factors; scalars or per-timestep series.

    Import prices are required per carrier that has a boundary grid; export
    remuneration defaults to zero (no feed-in payment).
    """

    interest_rate: float | None = None
    electricity_import_price: float | Sequence[float] | None = None
    electricity_export_remuneration: float | Sequence[float] | None = None
    gas_price: float | Sequence[float] | None = None
    import_prices: dict[Carrier, float | Sequence[float]] = field(default_factory=dict)
    export_remunerations: dict[Carrier, float | Sequence[float]] = field(default_factory=dict)
    co2_factors: dict[Carrier, float] = field(default_factory=dict)

    def import_price(self, carrier: Carrier):
        if carrier is Carrier.ELECTRICITY and self.electricity_import_price is not None:
            return self.electricity_import_price
        if carrier is Carrier.GAS and self.gas_price is not None:
            return self.gas_price
        return self.import_prices.get(carrier)

    def export_remuneration(self, carrier: Carrier):
        if carrier is Carrier.ELECTRICITY and self.electricity_export_remuneration is not None:
            return self.electricity_export_remuneration
        return self.export_remunerations.get(carrier, 0.0)


class ObjectiveKind(Enum):
    ANNUITY = "Annuity"
    OPERATING_COST = "OperatingCost"
    CO2 = "CO2"
    SELF_CONSUMPTION = "SelfConsumption"
    CUSTOM = "Custom"


@dataclass
class ObjectiveSpec:
    kind: ObjectiveKind
    custom_terms: dict[str, float] | None = None
    custom_sense: Sense = Sense.MINIMIZE

    def __post_init__(self):
        if self.kind is ObjectiveKind.CUSTOM and not self.custom_terms:
            raise UnknownQuantityError("custom objective needs non-empty custom_terms")


def _series(value, steps: int, what: str) -> list[float]:
    if isinstance(value, (int, float)):
        series = [float(value)] * steps
    else:
        series = [float(v) for v in value]
        if len(series) != steps:
            raise HorizonMismatchError(f"{what}: series length {len(series)} != horizon {steps}")
    if any(v < 0 for v in series):
        raise MissingCostParameterError(f"{what}: prices must be nonnegative")
    return series


def _add_energy(expr: LinExpr, ids: Sequence[int], per_t, horizon, scale: float = 1.0) -> None:
    """expr += scale * sum_t ids[t] * per_t[t] * weight[t] * dt."""
    dt = horizon.dt_hours
    for t, vid in enumerate(ids[: horizon.steps]):
        coef = scale * per_t[t] * horizon.weight(t) * dt
        if coef:
            expr.add_term(vid, coef)


def _operating_cost(model: AssembledModel, cost: CostParameters) -> LinExpr:
    horizon = model.horizon
    expr = LinExpr()
    for key in model.boundary_grids:
        block = model.blocks[key]
        carrier = block.spec.carrier
        price = cost.import_price(carrier)
        if price is None:
            raise MissingCostParameterError(
                f"{key}: no import price configured for {carrier.value}"
            )
        _add_energy(expr, block.flows["import"], _series(price, horizon.steps, key), horizon)
        if "export" in block.flows:
            rem = _series(cost.export_remuneration(carrier), horizon.steps, key)
            _add_energy(expr, block.flows["export"], rem, horizon, scale=-1.0)
    for key, block in model.blocks.items():
        opex = block.spec.opex_per_unit_energy
        flow = block.throughput_flow
        if opex and flow and flow in block.flows:
            _add_energy(expr, block.flows[flow], [opex] * horizon.steps, horizon)
    return expr


def _co2(model: AssembledModel, cost: CostParameters) -> LinExpr:
    horizon = model.horizon
    expr = LinExpr()
    for key in model.boundary_grids:
        block = model.blocks[key]
        carrier = block.spec.carrier
        if carrier not in cost.co2_factors:
            raise MissingCostParameterError(
                f"{key}: no co2 factor configured for {carrier.value}"
            )
        factor = cost.co2_factors[carrier]
        _add_energy(expr, block.flows["import"], [factor] * horizon.steps, horizon)
    for key, block in model.blocks.items():
        rate = block.spec.co2_per_unit_energy
        flow = block.throughput_flow
        if rate and flow and flow in block.flows:
            _add_energy(expr, block.flows[flow], [rate] * horizon.steps, horizon)
    return expr


def _annuity(model: AssembledModel, cost: CostParameters) -> LinExpr:
    if cost.interest_rate is None:
        raise MissingCostParameterError("annuity objective needs interest_rate")
    expr = LinExpr()
    for key, block in model.blocks.items():
        spec = block.spec
        if spec.capex_per_unit == 0.0 or spec.archetype is Archetype.DEMAND:
            continue
        af = annuity_factor(cost.interest_rate, spec.lifetime_years)
        cap_expr, cap_const = block.capacity_term()
        if cap_const == math.inf:
            continue  # unlimited grid connections carry no meaningful capex
        expr = expr + cap_expr * (af * spec.capex_per_unit)
        expr.constant += af * spec.capex_per_unit * cap_const
    annualize = 8760.0 / model.horizon.hours_represented
    return expr + _operating_cost(model, cost) * annualize


def _self_consumption(model: AssembledModel) -> LinExpr:
    horizon = model.horizon
    ones = [1.0] * horizon.steps
    expr = LinExpr()
    for key, block in model.blocks.items():
        if block.spec.archetype is Archetype.GENERATOR:
            _add_energy(expr, block.flows["p_out"], ones, horizon)
    for key in model.boundary_grids:
        block = model.blocks[key]
        if "export" in block.flows:
            _add_energy(expr, block.flows["export"], ones, horizon, scale=-1.0)
    return expr


def _custom(model: AssembledModel, terms: Mapping[str, float]) -> LinExpr:
    horizon = model.horizon
    ones = [1.0] * horizon.steps
    expr = LinExpr()
    for name, weight in terms.items():
        if name.endswith("/cap"):
            block = model.blocks.get(name[: -len("/cap")])
            if block is None or (block.capacity_var is None and block.capacity_value is None):
                raise UnknownQuantityError(f"custom objective: no sizable quantity {name!r}")
            cap_expr, cap_const = block.capacity_term()
            expr = expr + cap_expr * weight
            expr.constant += weight * cap_const
            continue
        key, _, qty = name.rpartition("/")
        block = model.blocks.get(key)
        if block is None or qty not in block.flows:
            raise UnknownQuantityError(f"custom objective: unknown quantity {name!r}")
        _add_energy(expr, block.flows[qty], ones, horizon, scale=weight)
    return expr


def build_objective(
    spec: ObjectiveSpec, model: AssembledModel, cost: CostParameters
) -> tuple[LinExpr, Sense]:
    """Build the requested objective over an assembled model.

    Self-consumption is the linear surrogate "locally consumed generation"
    (generated minus exported energy, maximized); the true ratio would be
    fractional and break linearity.  Annuity scales horizon operating cost to
    a full year via 8760 / represented-hours.
    """
    kind = spec.kind
    if kind is ObjectiveKind.OPERATING_COST:
        return _operating_cost(model, cost), Sense.MINIMIZE
    if kind is ObjectiveKind.CO2:
        return _co2(model, cost), Sense.MINIMIZE
    if kind is ObjectiveKind.ANNUITY:
        return _annuity(model, cost), Sense.MINIMIZE
    if kind is ObjectiveKind.SELF_CONSUMPTION:
        return _self_consumption(model), Sense.MAXIMIZE
    return _custom(model, spec.custom_terms), spec.custom_sense


def apply_objective(model: AssembledModel, spec: ObjectiveSpec, cost: CostParameters) -> None:
    expr, sense = build_objective(spec, model, cost)
    model.problem.set_objective(expr, sense)


@dataclass
class ParetoPoint:
    """One non-dominated solution; objectives are in their natural sense."""

    objective_a: float
    objective_b: float
    solution: MilpSolution


def _minimize_form(expr: LinExpr, sense: Sense) -> LinExpr:
    return expr if sense is Sense.MINIMIZE else -expr


def dominates(p: ParetoPoint, q: ParetoPoint, sense_a: Sense, sense_b: Sense, tol: float = 1e-9) -> bool:
    """True when p is at least as good as q in both objectives, better in one."""
    sa = 1.0 if sense_a is Sense.MINIMIZE else -1.0
    sb = 1.0 if sense_b is Sense.MINIMIZE else -1.0
    da = sa * (p.objective_a - q.objective_a)
    db = sb * (p.objective_b - q.objective_b)
    return da <= tol and db <= tol and (da < -tol or db < -tol)


def generate_pareto_front(
    model: AssembledModel,
    obj_a: ObjectiveSpec,
    obj_b: ObjectiveSpec,
    cost: CostParameters,
    n_points: int = 5,
    *,
    rel_gap: float = 1e-6,
    node_limit: int = 100_000,
) -> list[ParetoPoint]:
    """Epsilon-constraint front for two objectives.

    Solves each objective alone to span the second objective's range, sweeps
    n_points evenly spaced bounds across it, re-minimizes the first objective
    under each bound, then drops duplicates (1e-6 in both coordinates) and
    dominated points.  The result is sorted so objective_a improves first.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    expr_a, sense_a = build_objective(obj_a, model, cost)
    expr_b, sense_b = build_objective(obj_b, model, cost)
    ea = _minimize_form(expr_a, sense_a)
    eb = _minimize_form(expr_b, sense_b)

    def solve_min(expr: LinExpr, extra: tuple[LinExpr, float] | None = None) -> MilpSolution:
        prob = model.problem.copy()
        if extra is not None:
            bound_expr, eps = extra
            prob.add_constraint("pareto/epsilon", bound_expr, Relation.LE, eps)
        prob.set_objective(expr, Sense.MINIMIZE)
        return solve_milp(prob, rel_gap=rel_gap, node_limit=node_limit)

    sol_a = solve_min(ea)
    if sol_a.status is not SolveStatus.OPTIMAL:
        raise InfeasibleModelError(f"base model not solvable: {sol_a.status.value}")
    sol_b = solve_min(eb)
    b_hi = eb.evaluate(sol_a.values)
    b_lo = eb.evaluate(sol_b.values)

    raw: list[tuple[float, float, MilpSolution]] = []
    span = b_hi - b_lo
    for i in range(n_points):
        eps = b_lo + span * i / (n_points - 1) if span > 0 else b_lo
        sol = solve_min(ea, (eb, eps + 1e-9))
        if sol.status is not SolveStatus.OPTIMAL:
            continue
        raw.append((ea.evaluate(sol.values), eb.evaluate(sol.values), sol))

    kept: list[tuple[float, float, MilpSolution]] = []
    for am, bm, sol in sorted(raw, key=lambda r: (r[0], r[1])):
        if any(abs(am - ka) <= 1e-6 and abs(bm - kb) <= 1e-6 for ka, kb, _ in kept):
            continue
        kept = [(ka, kb, ks) for ka, kb, ks in kept
                if not (am <= ka + 1e-9 and bm <= kb + 1e-9 and (am < ka - 1e-9 or bm < kb - 1e-9))]
        if any(ka <= am + 1e-9 and kb <= bm + 1e-9 and (ka < am - 1e-9 or kb < bm - 1e-9)
               for ka, kb, _ in kept):
            continue
        kept.append((am, bm, sol))

    kept.sort(key=lambda r: (r[0], r[1]))
    front = [
        ParetoPoint(expr_a.evaluate(sol.values), expr_b.evaluate(sol.values), sol)
        for am, bm, sol in kept
    ]
    return front
