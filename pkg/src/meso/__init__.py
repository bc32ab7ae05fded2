"""meso: hierarchical multi-energy system optimization.

Builds and solves mixed-integer linear programs for prosumers, districts,
and coupled districts bottom-up: component sizing, operational dispatch,
four standard objectives plus custom ones, epsilon-constraint Pareto fronts,
and typical-period aggregation of input time series.
"""

from .errors import MesoError
from .milp import INF, LinExpr, MilpProblem, Relation, Sense, export_lp_text
from .solver import LpSolution, MilpSolution, SolveStatus, solve_lp, solve_milp

__version__ = "0.1.0"

__all__ = [
    "INF",
    "LinExpr",
    "LpSolution",
    "MesoError",
    "MilpProblem",
    "MilpSolution",
    "Relation",
    "Sense",
    "SolveStatus",
    "export_lp_text",
    "solve_lp",
    "solve_milp",
    "__version__",
]
