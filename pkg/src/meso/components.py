"""Parameterized energy-component models.

Each component archetype knows how to emit its decision variables and
constraints over a time horizon into a MilpProblem, either with a fixed
capacity (operation) or with the capacity as a decision variable (sizing).
Power flows are in kW, storage energy in kWh, timestep length in hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import (
    ComponentSpecError,
    HorizonMismatchError,
    MissingCapacityError,
    MissingProfileError,
)
from .milp import INF, LinExpr, MilpProblem, Relation


class Carrier(Enum):
    ELECTRICITY = "electricity"
    HEAT = "heat"
    COOLING = "cooling"
    GAS = "gas"
    HYDROGEN = "hydrogen"


class Archetype(Enum):
    GENERATOR = "Generator"
    STORAGE = "Storage"
    CONVERTER = "Converter"
    GRID_CONNECTION = "GridConnection"
    DEMAND = "Demand"


class Mode(Enum):
    SIZING = "Sizing"
    OPERATION = "Operation"


@dataclass(frozen=True)
class Horizon:
    """Optimization horizon: T timesteps of dt_hours each.

    ``weights`` carries per-timestep multiplicities when the horizon is a set
    of typical periods (defaults to 1.0 everywhere); ``period_length`` marks
    storage-cycle boundaries, None meaning one cycle over the whole horizon.
    ``start`` is only used to stamp output files.
    """

    steps: int
    dt_hours: float = 1.0
    start: str = "2025-01-01T00:00:00"
    weights: tuple[float, ...] | None = None
    period_length: int | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("horizon needs at least one timestep")
        if self.dt_hours <= 0:
            raise ValueError("dt_hours must be positive")
        if self.weights is not None and len(self.weights) != self.steps:
            raise HorizonMismatchError(
                f"weights length {len(self.weights)} != horizon {self.steps}"
            )
        if self.period_length is not None and self.steps % self.period_length:
            raise HorizonMismatchError(
                f"period_length {self.period_length} does not divide horizon {self.steps}"
            )

    def weight(self, t: int) -> float:
        return 1.0 if self.weights is None else self.weights[t]

    @property
    def hours_represented(self) -> float:
        """Total hours the horizon stands for, including typical-period weights."""
        if self.weights is None:
            return self.steps * self.dt_hours
        return float(sum(self.weights)) * self.dt_hours

    def cycle_bounds(self) -> list[tuple[int, int]]:
        """Storage cycle [start, end) index pairs."""
        if self.period_length is None:
            return [(0, self.steps)]
        size = self.period_length
        return [(i, i + size) for i in range(0, self.steps, size)]


@dataclass
class ComponentSpec:
    """Parameter set of one energy component.

    ``capacity`` is kW (kWh for storage); None means "size me".  ``profile``
    is either a profile name resolved at assembly time or an inline series:
    availability in [0, 1] for generators, demand in kW for demands.
    """

    name: str
    archetype: Archetype
    carrier_in: Carrier | None = None
    carrier_out: Carrier | None = None
    capacity: float | None = None
    efficiency: float = 1.0
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0
    conversion_ratio: float | None = None
    capex_per_unit: float = 0.0
    opex_per_unit_energy: float = 0.0
    co2_per_unit_energy: float = 0.0
    lifetime_years: int = 20
    profile: str | Sequence[float] | None = None
    bidirectional: bool = False
    power_limit_kw: float | None = None
    exclusive_flows: bool = False  # storage only: forbid simultaneous charge+discharge

    def validate(self) -> None:
        a = self.archetype
        err = lambda msg: (_ for _ in ()).throw(ComponentSpecError(f"{self.name}: {msg}"))
        if a is Archetype.GENERATOR:
            if self.carrier_out is None or self.carrier_in is not None:
                err("generator needs carrier_out only")
        elif a is Archetype.DEMAND:
            if self.carrier_in is None or self.carrier_out is not None:
                err("demand needs carrier_in only")
        elif a is Archetype.CONVERTER:
            if self.carrier_in is None or self.carrier_out is None:
                err("converter needs carrier_in and carrier_out")
            if self.carrier_in == self.carrier_out:
                err("converter carriers must differ")
            if self.conversion_ratio is None or self.conversion_ratio <= 0:
                err("converter needs conversion_ratio > 0")
        elif a in (Archetype.STORAGE, Archetype.GRID_CONNECTION):
            set_carriers = [c for c in (self.carrier_in, self.carrier_out) if c is not None]
            if len(set_carriers) != 1:
                err(f"{a.value} needs exactly one carrier")
            if a is Archetype.STORAGE and not self.bidirectional:
                err("storage is inherently bidirectional; set bidirectional=True")
        if self.bidirectional and a not in (Archetype.STORAGE, Archetype.GRID_CONNECTION):
            err("bidirectional flows are only allowed on storage and grid connections")
        if not 0.0 < self.efficiency <= 1.0:
            err("efficiency must be in (0, 1]")
        if not 0.0 < self.charge_efficiency <= 1.0 or not 0.0 < self.discharge_efficiency <= 1.0:
            err("charge/discharge efficiency must be in (0, 1]")
        if self.capacity is not None and self.capacity < 0:
            err("capacity must be nonnegative")
        if self.lifetime_years < 1:
            err("lifetime_years must be at least 1")
        if self.exclusive_flows and a is not Archetype.STORAGE:
            err("exclusive_flows applies to storage only")

    @property
    def carrier(self) -> Carrier:
        """The single carrier of a storage or grid connection."""
        one = self.carrier_in or self.carrier_out
        assert one is not None, f"{self.name} has no carrier"
        return one

    @property
    def ports(self) -> dict[str, Carrier]:
        a = self.archetype
        if a is Archetype.GENERATOR:
            return {"out": self.carrier_out}
        if a is Archetype.DEMAND:
            return {"in": self.carrier_in}
        if a is Archetype.CONVERTER:
            return {"in": self.carrier_in, "out": self.carrier_out}
        if a is Archetype.STORAGE:
            return {"store": self.carrier}
        return {"grid": self.carrier}


@dataclass
class ComponentBlock:
    """Variables and constraints one component contributed to a problem.

    ``flows`` maps quantity names (p_out, p_in, p_ch, p_dis, soc, import,
    export) to per-timestep variable ids; soc has one extra entry for the
    end-of-horizon state.
    """

    key: str                      # owner-qualified component name
    spec: ComponentSpec
    mode: Mode
    flows: dict[str, list[int]] = field(default_factory=dict)
    capacity_var: int | None = None
    capacity_value: float | None = None
    mode_binaries: list[int] = field(default_factory=list)
    constraint_names: list[str] = field(default_factory=list)

    def capacity_term(self) -> tuple[LinExpr, float]:
        """(expression, constant) so that expr + constant == installed capacity."""
        if self.capacity_var is not None:
            return LinExpr.term(self.capacity_var), 0.0
        return LinExpr(), self.capacity_value or 0.0

    @property
    def throughput_flow(self) -> str | None:
        """The flow whose energy carries opex and onsite emissions."""
        return {
            Archetype.GENERATOR: "p_out",
            Archetype.CONVERTER: "p_out",
            Archetype.STORAGE: "p_dis",
            Archetype.GRID_CONNECTION: "import",
            Archetype.DEMAND: None,
        }[self.spec.archetype]

    def bus_flows(self, port: str) -> list[tuple[str, int]]:
        """(quantity, direction) pairs for a port; +1 feeds the bus, -1 draws."""
        a = self.spec.archetype
        table = {
            (Archetype.GENERATOR, "out"): [("p_out", +1)],
            (Archetype.DEMAND, "in"): [("p_in", -1)],
            (Archetype.CONVERTER, "in"): [("p_in", -1)],
            (Archetype.CONVERTER, "out"): [("p_out", +1)],
            (Archetype.STORAGE, "store"): [("p_dis", +1), ("p_ch", -1)],
            (Archetype.GRID_CONNECTION, "grid"): [("import", +1), ("export", -1)],
        }
        return [(q, d) for q, d in table[(a, port)] if q in self.flows]


def resolve_profile(
    spec: ComponentSpec, steps: int, profiles: Mapping[str, Sequence[float]] | None
) -> list[float] | None:
    """Turn a profile reference into a concrete series of length ``steps``."""
    ref = spec.profile
    if ref is None:
        return None
    if isinstance(ref, str):
        if profiles is None or ref not in profiles:
            raise MissingProfileError(f"{spec.name}: profile {ref!r} not provided")
        series = list(profiles[ref])
    else:
        series = list(ref)
    if len(series) != steps:
        raise HorizonMismatchError(
            f"{spec.name}: profile length {len(series)} != horizon {steps}"
        )
    if spec.archetype is Archetype.GENERATOR:
        bad = [v for v in series if not 0.0 <= v <= 1.0 + 1e-12]
        if bad:
            raise ComponentSpecError(
                f"{spec.name}: generator availability must lie in [0, 1], got {bad[0]}"
            )
    return [float(v) for v in series]


def emit_component_constraints(
    spec: ComponentSpec,
    horizon: Horizon,
    mode: Mode,
    problem: MilpProblem,
    *,
    prefix: str = "",
    profiles: Mapping[str, Sequence[float]] | None = None,
) -> ComponentBlock:
    """Emit one component's variables and constraints into ``problem``.

    In sizing mode the capacity becomes a continuous variable >= 0 (bounded
    above by spec.capacity when that is given); in operation mode the spec
    capacity is required and used as a fixed parameter.  Names follow
    ``<prefix><component>/<quantity>/<t>``.
    """
    spec.validate()
    T, dt = horizon.steps, horizon.dt_hours
    base = f"{prefix}{spec.name}"
    block = ComponentBlock(key=base, spec=spec, mode=mode)
    profile = resolve_profile(spec, T, profiles)

    def var(qty: str, t, lower: float, upper: float, integral: bool = False) -> int:
        return problem.add_variable(f"{base}/{qty}/{t}", lower, upper, integral)

    def con(name: str, expr: LinExpr, rel: Relation, rhs: float) -> None:
        full = f"{base}/{name}"
        problem.add_constraint(full, expr, rel, rhs)
        block.constraint_names.append(full)

    if spec.archetype is Archetype.DEMAND:
        if profile is None:
            raise MissingProfileError(f"{spec.name}: demand requires a profile")
        block.flows["p_in"] = [var("p_in", t, profile[t], profile[t]) for t in range(T)]
        return block

    sizing = mode is Mode.SIZING
    if sizing:
        cap_ub = INF if spec.capacity is None else spec.capacity
        cap = problem.add_variable(f"{base}/cap", 0.0, cap_ub)
        block.capacity_var = cap
    else:
        if spec.capacity is None:
            raise MissingCapacityError(f"{spec.name}: operation mode requires a capacity")
        block.capacity_value = spec.capacity

    def cap_limit(qty: str, t, vid: int, factor: float = 1.0) -> None:
        """qty[t] <= factor * capacity, as a row when sizing, as a bound otherwise."""
        if sizing:
            con(f"cap_limit/{qty}/{t}", LinExpr({vid: 1.0, block.capacity_var: -factor}),
                Relation.LE, 0.0)

    def upper(factor: float = 1.0) -> float:
        return INF if sizing else factor * spec.capacity

    if spec.archetype is Archetype.GENERATOR:
        avail = profile if profile is not None else [1.0] * T
        p_out = []
        for t in range(T):
            vid = var("p_out", t, 0.0, upper(avail[t]))
            cap_limit("p_out", t, vid, avail[t])
            p_out.append(vid)
        block.flows["p_out"] = p_out

    elif spec.archetype is Archetype.CONVERTER:
        ratio = spec.conversion_ratio
        p_in, p_out = [], []
        for t in range(T):
            vin = var("p_in", t, 0.0, INF)
            vout = var("p_out", t, 0.0, upper())
            cap_limit("p_out", t, vout)
            con(f"convert/{t}", LinExpr({vout: 1.0, vin: -ratio}), Relation.EQ, 0.0)
            p_in.append(vin)
            p_out.append(vout)
        block.flows["p_in"] = p_in
        block.flows["p_out"] = p_out

    elif spec.archetype is Archetype.STORAGE:
        plim = spec.power_limit_kw
        if plim is None and not sizing:
            plim = spec.capacity  # 1C convention: kWh capacity per one hour
        power_ub = INF if plim is None else plim
        p_ch = [var("p_ch", t, 0.0, power_ub) for t in range(T)]
        p_dis = [var("p_dis", t, 0.0, power_ub) for t in range(T)]
        soc = [var("soc", t, 0.0, upper()) for t in range(T + 1)]
        for t in range(T + 1):
            cap_limit("soc", t, soc[t])
        if plim is None and sizing:
            for t in range(T):
                cap_limit("p_ch", t, p_ch[t])
                cap_limit("p_dis", t, p_dis[t])
        eta_c, eta_d = spec.charge_efficiency, spec.discharge_efficiency
        for t in range(T):
            con(
                f"dynamics/{t}",
                LinExpr({soc[t + 1]: 1.0, soc[t]: -1.0,
                         p_ch[t]: -eta_c * dt, p_dis[t]: dt / eta_d}),
                Relation.EQ, 0.0,
            )
        for start, end in horizon.cycle_bounds():
            con(f"cycle/{start}", LinExpr({soc[end]: 1.0, soc[start]: -1.0}),
                Relation.EQ, 0.0)
        if spec.exclusive_flows:
            if plim is None:
                raise ComponentSpecError(
                    f"{spec.name}: exclusive_flows needs a finite power limit "
                    "(set power_limit_kw when sizing)"
                )
            for t in range(T):
                u = var("u_ch", t, 0.0, 1.0, integral=True)
                block.mode_binaries.append(u)
                con(f"ch_only/{t}", LinExpr({p_ch[t]: 1.0, u: -plim}), Relation.LE, 0.0)
                con(f"dis_only/{t}", LinExpr({p_dis[t]: 1.0, u: plim}), Relation.LE, plim)
        block.flows["p_ch"] = p_ch
        block.flows["p_dis"] = p_dis
        block.flows["soc"] = soc

    elif spec.archetype is Archetype.GRID_CONNECTION:
        imp = []
        for t in range(T):
            vid = var("import", t, 0.0, upper())
            cap_limit("import", t, vid)
            imp.append(vid)
        block.flows["import"] = imp
        if spec.bidirectional:
            exp = []
            for t in range(T):
                vid = var("export", t, 0.0, upper())
                cap_limit("export", t, vid)
                exp.append(vid)
            block.flows["export"] = exp

    return block


def resolve_mode(spec: ComponentSpec, mode: Mode | Mapping[str, Mode] | None) -> Mode:
    """Per-component mode: explicit setting wins, else size when capacity is absent."""
    if isinstance(mode, Mode):
        return mode
    if isinstance(mode, Mapping) and spec.name in mode:
        return mode[spec.name]
    return Mode.SIZING if spec.capacity is None else Mode.OPERATION
