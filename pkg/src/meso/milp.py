"""In-memory representation of mixed-integer linear programs.

A :class:`MilpProblem` is built incrementally (single-threaded), validated on
the way in, and treated as immutable once construction is done.  Constraints
are stored in canonical form: the expression constant is folded into the
right-hand side and zero coefficients are dropped, so that building the same
model twice yields byte-identical LP exports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import DuplicateNameError, InvalidBoundsError, UnknownVariableError

INF = math.inf


class Sense(Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class Relation(Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass(frozen=True)
class Variable:
    """One decision variable; ids are dense and assigned sequentially from 0."""

    id: int
    name: str
    lower: float
    upper: float
    integral: bool = False

    @property
    def is_fixed(self) -> bool:
        return self.lower == self.upper


class LinExpr:
    """Linear expression: sparse coefficient map over variable ids plus a constant.

    Zero coefficients are never stored.  Supports enough operator algebra to
    keep model-building code readable; all arithmetic returns new objects.
    """

    __slots__ = ("terms", "constant")

    def __init__(self, terms: dict[int, float] | None = None, constant: float = 0.0):
        self.terms: dict[int, float] = {}
        if terms:
            for vid, coef in terms.items():
                if coef != 0.0:
                    self.terms[vid] = float(coef)
        self.constant = float(constant)

    @classmethod
    def term(cls, vid: int, coef: float = 1.0) -> "LinExpr":
        return cls({vid: coef})

    def add_term(self, vid: int, coef: float) -> None:
        """Accumulate coef onto vid in place, dropping the entry if it cancels."""
        new = self.terms.get(vid, 0.0) + coef
        if new == 0.0:
            self.terms.pop(vid, None)
        else:
            self.terms[vid] = new

    def __add__(self, other) -> "LinExpr":
        out = LinExpr(dict(self.terms), self.constant)
        if isinstance(other, LinExpr):
            for vid, coef in other.terms.items():
                out.add_term(vid, coef)
            out.constant += other.constant
        else:
            out.constant += float(other)
        return out

    __radd__ = __add__

    def __sub__(self, other) -> "LinExpr":
        return self + (other * -1.0 if isinstance(other, LinExpr) else -float(other))

    def __mul__(self, factor: float) -> "LinExpr":
        factor = float(factor)
        if factor == 0.0:
            return LinExpr()
        return LinExpr({v: c * factor for v, c in self.terms.items()}, self.constant * factor)

    __rmul__ = __mul__

    def __neg__(self) -> "LinExpr":
        return self * -1.0

    def evaluate(self, values: dict[int, float]) -> float:
        return self.constant + sum(coef * values[vid] for vid, coef in self.terms.items())

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*x{v}" for v, c in sorted(self.terms.items()))
        return f"LinExpr({body or '0'} + {self.constant:g})"


@dataclass
class Constraint:
    """Stored constraint; expr.constant is always 0 (folded into rhs on insert)."""

    name: str
    expr: LinExpr
    relation: Relation
    rhs: float


@dataclass
class MilpProblem:
    """A mixed-integer linear program: variables, constraints, linear objective."""

    name: str = ""
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: LinExpr = field(default_factory=LinExpr)
    sense: Sense = Sense.MINIMIZE
    _by_name: dict[str, int] = field(default_factory=dict, repr=False)
    _constraint_names: set[str] = field(default_factory=set, repr=False)

    def add_variable(
        self,
        name: str,
        lower: float = 0.0,
        upper: float = INF,
        integral: bool = False,
    ) -> int:
        """Declare a variable and return its sequential id.

        Raises DuplicateNameError if the name is taken and InvalidBoundsError
        if lower > upper (both checked before anything is stored).
        """
        if name in self._by_name:
            raise DuplicateNameError(f"variable name already used: {name!r}")
        if lower > upper:
            raise InvalidBoundsError(f"variable {name!r}: lower {lower} > upper {upper}")
        vid = len(self.variables)
        self.variables.append(Variable(vid, name, float(lower), float(upper), integral))
        self._by_name[name] = vid
        return vid

    def add_constraint(self, name: str, expr: LinExpr, relation: Relation, rhs: float) -> int:
        """Store a constraint in canonical form and return its row index.

        The expression constant is folded into the rhs; zero coefficients were
        already dropped by LinExpr.  Unknown variable ids raise.
        """
        if name in self._constraint_names:
            raise DuplicateNameError(f"constraint name already used: {name!r}")
        for vid in expr.terms:
            if not 0 <= vid < len(self.variables):
                raise UnknownVariableError(f"constraint {name!r} references unknown variable id {vid}")
        canonical = LinExpr(dict(expr.terms))
        row = Constraint(name, canonical, relation, float(rhs) - expr.constant)
        self.constraints.append(row)
        self._constraint_names.add(name)
        return len(self.constraints) - 1

    def set_objective(self, expr: LinExpr, sense: Sense = Sense.MINIMIZE) -> None:
        for vid in expr.terms:
            if not 0 <= vid < len(self.variables):
                raise UnknownVariableError(f"objective references unknown variable id {vid}")
        self.objective = LinExpr(dict(expr.terms), expr.constant)
        self.sense = sense

    # -- lookups ---------------------------------------------------------

    def variable_id(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownVariableError(f"no variable named {name!r}") from None

    def variable(self, ref: int | str) -> Variable:
        if isinstance(ref, str):
            ref = self.variable_id(ref)
        return self.variables[ref]

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def has_integers(self) -> bool:
        return any(v.integral for v in self.variables)

    def copy(self, name: str | None = None) -> "MilpProblem":
        """Deep-enough copy: new variable/constraint containers, shared nothing mutable."""
        out = MilpProblem(name=self.name if name is None else name, sense=self.sense)
        out.variables = list(self.variables)
        out._by_name = dict(self._by_name)
        out.constraints = [
            Constraint(c.name, LinExpr(dict(c.expr.terms)), c.relation, c.rhs)
            for c in self.constraints
        ]
        out._constraint_names = set(self._constraint_names)
        out.objective = LinExpr(dict(self.objective.terms), self.objective.constant)
        return out


def _fmt(value: float) -> str:
    """Numbers in LP text: 12 significant digits, no negative zero."""
    if value == 0.0:
        value = 0.0
    return format(value, ".12g")


def _expr_body(terms: dict[int, float], names: list[str]) -> str:
    """Render coefficient terms ordered by variable id, e.g. '2 x + 3 y - z'."""
    parts: list[str] = []
    for vid in sorted(terms):
        coef = terms[vid]
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        chunk = names[vid] if mag == 1.0 else f"{_fmt(mag)} {names[vid]}"
        if not parts:
            parts.append(chunk if sign == "+" else f"- {chunk}")
        else:
            parts.append(f"{sign} {chunk}")
    return " ".join(parts)


def export_lp_text(problem: MilpProblem) -> str:
    """Serialize the problem in CPLEX-LP text format.

    Sections in order: Minimize/Maximize, Subject To, Bounds, Generals (all
    integral variables), End.  Ordering follows variable ids and constraint
    insertion order, so identical models export byte-identically.  Infinite
    bounds are omitted per LP-format convention; free variables get a
    ``free`` line.
    """
    names = [v.name for v in problem.variables]
    lines: list[str] = []
    lines.append("Minimize" if problem.sense is Sense.MINIMIZE else "Maximize")

    obj_body = _expr_body(problem.objective.terms, names)
    const = problem.objective.constant
    if obj_body and const != 0.0:
        sign = "-" if const < 0 else "+"
        obj_body = f"{obj_body} {sign} {_fmt(abs(const))}"
    elif not obj_body:
        obj_body = _fmt(const)
    lines.append(f" obj: {obj_body}")

    lines.append("Subject To")
    for con in problem.constraints:
        body = _expr_body(con.expr.terms, names) or "0 " + (names[0] if names else "x")
        lines.append(f" {con.name}: {body} {con.relation.value} {_fmt(con.rhs)}")

    lines.append("Bounds")
    for v in problem.variables:
        lo_inf = v.lower == -INF
        up_inf = v.upper == INF
        if lo_inf and up_inf:
            lines.append(f" {v.name} free")
        elif lo_inf:
            lines.append(f" -inf <= {v.name} <= {_fmt(v.upper)}")
        elif up_inf:
            lines.append(f" {v.name} >= {_fmt(v.lower)}")
        else:
            lines.append(f" {_fmt(v.lower)} <= {v.name} <= {_fmt(v.upper)}")

    integrals = [v.name for v in problem.variables if v.integral]
    if integrals:
        lines.append("Generals")
        for name in integrals:
            lines.append(f" {name}")

    lines.append("End")
    return "\n".join(lines) + "\n"
