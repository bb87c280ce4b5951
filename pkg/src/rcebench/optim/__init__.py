from .lp import LpProblem, MilpSolution, solve_lp
from .milp import MilpProblem, NodeBudgetExceeded, solve_milp
from .encoding import NetworkEncoding, encode_network, add_l1_objective, LpBuilder

__all__ = [
    "LpProblem", "MilpSolution", "solve_lp", "MilpProblem", "NodeBudgetExceeded",
    "solve_milp", "NetworkEncoding", "encode_network", "add_l1_objective", "LpBuilder",
]
