from .barrier import (BarrierOptions, LogAffineProgram, NumericalFailure, Solution,
                      StartPointError, convex_solve, kkt_residual)
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LPResult, lp_feasible, lp_solve

__all__ = ["BarrierOptions", "LogAffineProgram", "NumericalFailure", "Solution",
           "StartPointError", "convex_solve", "kkt_residual", "LinearProgram", "LPResult",
           "lp_solve", "lp_feasible", "OPTIMAL", "INFEASIBLE", "UNBOUNDED"]
