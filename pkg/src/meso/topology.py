"""Wiring components onto per-carrier buses and assembling prosumer MILPs.

The energy management system of a prosumer is realized mathematically: one
power-balance equality per bus per timestep plus whatever objective the
caller attaches.  Assembly is deterministic, so building the same topology
twice exports byte-identical LP text.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .components import (
    Archetype,
    Carrier,
    ComponentBlock,
    ComponentSpec,
    Horizon,
    Mode,
    emit_component_constraints,
    resolve_mode,
)
from .errors import MesoError
from .milp import LinExpr, MilpProblem, Relation


@dataclass(frozen=True)
class Bus:
    name: str
    carrier: Carrier


@dataclass(frozen=True)
class FlowLink:
    """Attachment of a component port ("comp.port") to a bus, or vice versa.

    ``from_`` names the energy source end.  Links default to directed; only
    ports of bidirectional components (storage, grid connections) may carry
    directed=False.
    """

    from_: str
    to: str
    directed: bool = True


@dataclass
class ProsumerTopology:
    name: str
    components: list[ComponentSpec]
    buses: list[Bus]
    links: list[FlowLink]

    def component(self, name: str) -> ComponentSpec | None:
        for c in self.components:
            if c.name == name:
                return c
        return None

    def bus(self, name: str) -> Bus | None:
        for b in self.buses:
            if b.name == name:
                return b
        return None


def _parse_port(endpoint: str) -> tuple[str, str] | None:
    if "." in endpoint:
        comp, port = endpoint.rsplit(".", 1)
        return comp, port
    return None


def validate_topology(topo: ProsumerTopology) -> list[str]:
    """Check all topology invariants; returns one message per violation."""
    report: list[str] = []
    seen_buses: set[str] = set()
    for b in topo.buses:
        if b.name in seen_buses:
            report.append(f"duplicate bus name {b.name!r}")
        seen_buses.add(b.name)
    seen_comps: set[str] = set()
    for c in topo.components:
        if c.name in seen_comps:
            report.append(f"duplicate component name {c.name!r}")
        seen_comps.add(c.name)
        try:
            c.validate()
        except MesoError as exc:
            report.append(str(exc))

    attached: dict[tuple[str, str], str] = {}  # (component, port) -> bus
    for link in topo.links:
        ends = [link.from_, link.to]
        ports = [_parse_port(e) for e in ends]
        port_sides = [i for i, p in enumerate(ports) if p is not None and topo.component(p[0])]
        bus_sides = [i for i, e in enumerate(ends) if topo.bus(e)]
        if len(port_sides) != 1 or len(bus_sides) != 1 or port_sides[0] == bus_sides[0]:
            report.append(f"link {link.from_!r} -> {link.to!r}: must join one component port and one bus")
            continue
        comp_name, port = ports[port_sides[0]]
        bus = topo.bus(ends[bus_sides[0]])
        comp = topo.component(comp_name)
        if port not in comp.ports:
            report.append(f"link {link.from_!r} -> {link.to!r}: component {comp_name!r} has no port {port!r}")
            continue
        if comp.ports[port] != bus.carrier:
            report.append(
                f"carrier mismatch: {comp_name}.{port} is {comp.ports[port].value}, "
                f"bus {bus.name!r} is {bus.carrier.value}"
            )
        if (comp_name, port) in attached:
            report.append(f"port {comp_name}.{port} attached more than once")
        attached[(comp_name, port)] = bus.name
        if not link.directed and not comp.bidirectional:
            report.append(
                f"link {link.from_!r} -> {link.to!r}: directed=False requires "
                f"a bidirectional component"
            )
        if link.directed and comp.archetype in (Archetype.STORAGE,):
            report.append(f"storage {comp_name!r} must use a bidirectional link")

    for c in topo.components:
        for port in c.ports:
            if (c.name, port) not in attached:
                report.append(f"port {c.name}.{port} is not attached to any bus")

    # Demand reachability: a bus is supplied if a generator, storage, or grid
    # feeds it directly, or a converter feeds it whose input bus is supplied.
    supplied: set[str] = set()
    conv_edges: list[tuple[str, str]] = []  # (in bus, out bus)
    for c in topo.components:
        spots = {port: attached.get((c.name, port)) for port in c.ports}
        if c.archetype in (Archetype.GENERATOR, Archetype.STORAGE, Archetype.GRID_CONNECTION):
            bus = spots.get("out") or spots.get("store") or spots.get("grid")
            if bus:
                supplied.add(bus)
        elif c.archetype is Archetype.CONVERTER:
            if spots.get("in") and spots.get("out"):
                conv_edges.append((spots["in"], spots["out"]))
    changed = True
    while changed:
        changed = False
        for src, dst in conv_edges:
            if src in supplied and dst not in supplied:
                supplied.add(dst)
                changed = True
    for c in topo.components:
        if c.archetype is Archetype.DEMAND:
            bus = attached.get((c.name, "in"))
            if bus is not None and bus not in supplied:
                report.append(f"demand {c.name!r} on bus {bus!r} has no reachable source")

    return report


@dataclass
class AssembledModel:
    """A built MilpProblem plus the index needed to interpret its solution."""

    problem: MilpProblem
    horizon: Horizon
    blocks: dict[str, ComponentBlock]
    balance_names: list[str]
    boundary_grids: list[str]  # block keys whose import/export cross the system edge

    def flow_names(self) -> list[str]:
        """Deterministic column order for dispatch output: variable id order."""
        names = []
        for key in self.blocks:
            for qty, ids in self.blocks[key].flows.items():
                names.append((ids[0], f"{key}/{qty}"))
        return [n for _, n in sorted(names)]


def emit_prosumer(
    problem: MilpProblem,
    topo: ProsumerTopology,
    horizon: Horizon,
    mode: Mode | Mapping[str, Mode] | None,
    profiles: Mapping[str, Sequence[float]] | None,
    prefix: str,
) -> tuple[dict[str, ComponentBlock], list[str]]:
    """Emit all component blocks and bus balances of one prosumer.

    Returns the blocks (keyed ``<prefix><component>``) and the balance
    constraint names.  Used directly by district assembly, which owns the
    surrounding problem.
    """
    report = validate_topology(topo)
    if report:
        raise MesoError(f"{topo.name}: invalid topology:\n" + "\n".join(f"  - {r}" for r in report))

    blocks: dict[str, ComponentBlock] = {}
    for spec in topo.components:
        block = emit_component_constraints(
            spec, horizon, resolve_mode(spec, mode), problem,
            prefix=prefix, profiles=profiles,
        )
        blocks[block.key] = block

    port_to_bus: dict[tuple[str, str], str] = {}
    for link in topo.links:
        for end, other in ((link.from_, link.to), (link.to, link.from_)):
            parsed = _parse_port(end)
            if parsed and topo.component(parsed[0]):
                port_to_bus[parsed] = other

    balance = {
        b.name: {t: LinExpr() for t in range(horizon.steps)} for b in topo.buses
    }
    for spec in topo.components:
        block = blocks[f"{prefix}{spec.name}"]
        for port in spec.ports:
            bus = port_to_bus[(spec.name, port)]
            for qty, direction in block.bus_flows(port):
                for t, vid in enumerate(block.flows[qty][: horizon.steps]):
                    balance[bus][t].add_term(vid, float(direction))

    names: list[str] = []
    for b in topo.buses:
        for t in range(horizon.steps):
            name = f"{prefix}bus/{b.name}/{t}"
            problem.add_constraint(name, balance[b.name][t], Relation.EQ, 0.0)
            names.append(name)
    return blocks, names


def assemble_model(
    topo: ProsumerTopology,
    horizon: Horizon,
    mode: Mode | Mapping[str, Mode] | None = None,
    timeseries: Mapping[str, Sequence[float]] | None = None,
    *,
    level: str = "p",
) -> AssembledModel:
    """Build the prosumer-level MilpProblem: blocks plus per-bus balances.

    ``mode`` may be a single Mode, a per-component mapping, or None to derive
    it from capacity presence.  All grid connections of a standalone prosumer
    are boundary grids (they price and emit at the objective).
    """
    problem = MilpProblem(name=topo.name)
    prefix = f"{level}/{topo.name}/"
    blocks, names = emit_prosumer(problem, topo, horizon, mode, timeseries, prefix)
    boundary = [
        k for k, b in blocks.items() if b.spec.archetype is Archetype.GRID_CONNECTION
    ]
    return AssembledModel(problem, horizon, blocks, names, boundary)
