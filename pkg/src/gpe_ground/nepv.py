"""Operators and diagnostics of the eigenvector-nonlinear eigenproblem.

With ``A(u) = beta*diag(u**2) + B`` the problem reads ``A(u) u = lambda u``,
``u.T u = 1``. ``beta`` below always means the scaled coefficient
``DiscreteGpe.beta_scaled``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocktri import BlockTridiag, matvec, shift_diagonal
from .grid import DiscreteGpe


@dataclass(frozen=True, eq=False)
class Eigenpair:
    u: np.ndarray
    lam: float

    @property
    def is_positive_normalized(self) -> bool:
        return bool((self.u > 0).all() and abs(np.linalg.norm(self.u) - 1.0) <= 1e-6)


def _vec(p: DiscreteGpe, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (p.n,):
        raise ValueError(f"vector of length {p.n} expected, got shape {u.shape}")
    return u


def apply_A(p: DiscreteGpe, u) -> np.ndarray:
    """``A(u) u = beta * u**3 + B u``."""
    u = _vec(p, u)
    return p.beta_scaled * u ** 3 + matvec(p.B, u)


def residual(p: DiscreteGpe, u, lam: float) -> np.ndarray:
    """``r(u, lambda) = A(u) u - lambda u``."""
    u = _vec(p, u)
    return apply_A(p, u) - lam * u


def jacobian(p: DiscreteGpe, u, lam: float) -> BlockTridiag:
    """``J(u, lambda) = B + 3*beta*diag(u**2) - lambda*I``."""
    u = _vec(p, u)
    return shift_diagonal(p.B, 3.0 * p.beta_scaled * u * u, lam)


def noda_lambda(p: DiscreteGpe, u) -> float:
    """Collatz-Wielandt lower bound ``min_i (A(u) u)_i / u_i`` for ``u > 0``."""
    u = _vec(p, u)
    if not (u > 0).all():
        raise ValueError("noda_lambda requires a strictly positive vector")
    return float(np.min(apply_A(p, u) / u))


def rayleigh_lambda(p: DiscreteGpe, u) -> float:
    u = _vec(p, u)
    return float(u @ apply_A(p, u) / (u @ u))


def energy(p: DiscreteGpe, u) -> float:
    """Discrete energy ``u.T B u + (beta/2) sum(u**4)`` (no volume factor)."""
    u = _vec(p, u)
    return float(u @ matvec(p.B, u) + 0.5 * p.beta_scaled * np.sum(u ** 4))


def quadratic_ratios(residuals, floor_factor: float = 10.0, last: int = 3) -> np.ndarray:
    """``|r_{k+1}| / |r_k|**2`` over the last ``last`` steps above the roundoff floor.

    Steps whose new residual is within ``floor_factor`` of the smallest
    residual in the history are treated as stagnated at roundoff and skipped.
    """
    r = np.asarray(residuals, dtype=float)
    floor = floor_factor * r.min()
    ratios = [r[k + 1] / r[k] ** 2 for k in range(len(r) - 1) if r[k + 1] > floor and r[k] > 0]
    return np.array(ratios[-last:])


def convergence_metric(p: DiscreteGpe, u_prev, u, lam: float) -> float:
    """``(|u - u_prev| + |A(u) u - lambda u|) / |u|`` in 2-norms."""
    u = _vec(p, u)
    u_prev = _vec(p, u_prev)
    nu = np.linalg.norm(u)
    if nu == 0.0:
        raise ValueError("convergence metric undefined for u = 0")
    return float((np.linalg.norm(u - u_prev) + np.linalg.norm(residual(p, u, lam))) / nu)
