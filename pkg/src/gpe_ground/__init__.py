"""Positive ground states of the discretized Gross-Pitaevskii equation.

Newton-Noda (:func:`nni`) and Newton-Bisection (:func:`nbi`) solvers for
``beta*diag(u**2) u + B u = lambda u``, ``|u| = 1``, on block tridiagonal
finite-difference discretizations.
"""

from .blocktri import BlockTridiag, SingularBlockError, bicgstab, factor_block_lu, solve, solve_block_lu
from .grid import DiscreteGpe, PotentialSpec, build_problem
from .nepv import Eigenpair, apply_A, energy, jacobian, noda_lambda, rayleigh_lambda, residual
from .solvers import (SolveResult, SolverOptions, SolverStatus, find_initial_interval, inner_newton, nbi,
                      nni, smallest_eigenpair)

__all__ = [
    "BlockTridiag", "SingularBlockError", "bicgstab", "factor_block_lu", "solve", "solve_block_lu",
    "DiscreteGpe", "PotentialSpec", "build_problem",
    "Eigenpair", "apply_A", "energy", "jacobian", "noda_lambda", "rayleigh_lambda", "residual",
    "SolveResult", "SolverOptions", "SolverStatus", "find_initial_interval", "inner_newton", "nbi", "nni",
    "smallest_eigenpair",
]
