"""Ground-state eigensolvers.

Two methods are provided:

* :func:`nni` -- Newton-Noda iteration on the bordered system for
  ``(u, lambda)``, with a step-halving line search that keeps every iterate
  positive and the eigenvalue estimate increasing.
* :func:`nbi` -- Newton-Bisection iteration: bisection on ``lambda`` where
  each trial value solves the unconstrained problem ``A(u) u = lambda u``
  by Newton's method and the sign of ``|u| - 1`` picks the half interval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .blocktri import (BlockTridiag, SingularBlockError, bicgstab, factor_block_lu, matvec,
                       solve_block_lu)
from .grid import DiscreteGpe
from .nepv import (Eigenpair, apply_A, convergence_metric, jacobian, noda_lambda,
                   rayleigh_lambda, residual)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


class LambdaBelowMuError(SolverError):
    """The unconstrained problem has no positive solution: lambda <= lambda_min(B)."""


class PositivityLostError(SolverError):
    pass


class IntervalSearchError(SolverError):
    pass


class EigenSolveError(SolverError):
    pass


class SolverStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    LINE_SEARCH_FAILED = "line_search_failed"
    SINGULAR_SYSTEM = "singular_system"

    def __str__(self):
        return self.value


@dataclass
class SolverOptions:
    tol_outer: float = 1e-7
    tol_inner: float = 1e-10
    max_outer: int = 100
    max_inner: int = 100
    inexact: bool = False
    bicgstab_tol: float = 1e-6
    bicgstab_maxit: int = 200
    max_halvings: int = 50
    warm_start: bool = True
    alpha_init: float | None = None

    def __post_init__(self):
        for name in ("tol_outer", "tol_inner", "bicgstab_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_outer", "max_inner", "bicgstab_maxit", "max_halvings"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.alpha_init is not None and not self.alpha_init > 0:
            raise ValueError("alpha_init must be positive")


@dataclass
class IterationRecord:
    """One outer iteration.

    ``step`` is the accepted line-search factor (NNI); ``inner_iterations``
    the Newton count for this bisection step (NBI). ``violations`` counts
    inner Newton steps that increased some component, ``nonpositive`` the
    inner steps that produced a nonpositive component.
    """

    k: int
    lam: float
    residual: float
    norm_u: float
    step: float | None = None
    inner_iterations: int | None = None
    violations: int = 0
    nonpositive: int = 0
    linear_converged: bool | None = None

    @property
    def step_or_inner_count(self) -> float:
        return self.step if self.step is not None else self.inner_iterations


@dataclass
class SolveResult:
    """Outcome of :func:`nni` or :func:`nbi`.

    For NBI ``pair`` is the last unnormalized bisection iterate
    ``(u_k, lambda_k)`` and ``residual_norm`` its unconstrained residual;
    ``normalized`` holds ``u_k/|u_k|`` with its Rayleigh quotient. For NNI
    both are the unit-norm iterate with its Noda eigenvalue.
    """

    pair: Eigenpair
    residual_norm: float
    outer_iterations: int
    history: list[IterationRecord]
    status: SolverStatus
    normalized: Eigenpair
    solver: str = ""
    interval: tuple[float, float] | None = None

    @property
    def converged(self) -> bool:
        return self.status is SolverStatus.CONVERGED

    @property
    def lam(self) -> float:
        return self.pair.lam

    @property
    def inner_counts(self) -> list[int]:
        return [h.inner_iterations for h in self.history if h.inner_iterations is not None]

    @property
    def max_violations(self) -> int:
        return max((h.violations for h in self.history), default=0)


@dataclass(frozen=True, eq=False)
class EigResult:
    mu: float
    p_vec: np.ndarray


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    residuals: list[float] = field(default_factory=list)
    violations: int = 0
    nonpositive: int = 0
    converged: bool = False


def _factor(J: BlockTridiag):
    try:
        return factor_block_lu(J)
    except SingularBlockError as exc:
        raise SingularSystemError(str(exc)) from exc


def smallest_eigenpair(B: BlockTridiag, tol: float = 1e-10, maxiter: int = 10000) -> EigResult:
    """Smallest eigenpair of an SPD M-matrix by inverse power iteration.

    One block LU factorization of ``B`` is reused for every step; iteration
    stops when ``|B v - theta v| <= tol * theta``.
    """
    F = _factor(B)
    v = np.full(B.n, 1.0 / math.sqrt(B.n))
    for _ in range(maxiter):
        w = solve_block_lu(F, v)
        v = w / np.linalg.norm(w)
        if v.sum() < 0:
            v = -v
        Bv = matvec(B, v)
        theta = float(v @ Bv)
        if np.linalg.norm(Bv - theta * v) <= tol * abs(theta):
            return EigResult(theta, v)
    raise EigenSolveError(f"inverse iteration did not converge in {maxiter} steps "
                          "(smallest eigenvalue nearly degenerate?)")


def solve_bordered(J: BlockTridiag, u, r, s: float, factors=None):
    """Solve ``[[J, -u], [-u.T, 0]] [d; delta] = [-r; -s]`` by Schur elimination.

    Returns ``(d, delta)``. ``J`` is factored once (or ``factors`` reused) and
    applied to ``u`` and ``r`` together.
    """
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    F = factors if factors is not None else _factor(J)
    Z = solve_block_lu(F, np.column_stack([u, r]))
    z1, z2 = Z[:, 0], Z[:, 1]
    denom = float(u @ z1)
    if abs(denom) < 1e-14 * np.linalg.norm(u) * np.linalg.norm(z1):
        raise SingularSystemError("bordered system is singular (u.T J^-1 u ~ 0)")
    delta = (s + float(u @ z2)) / denom
    return delta * z1 - z2, delta


def bordered_operator(J: BlockTridiag, u):
    """Matrix-free ``x -> [[J, -u], [-u.T, 0]] x`` on vectors of length n+1."""
    u = np.asarray(u, dtype=float)
    n = u.size

    def apply(x):
        out = np.empty(n + 1)
        out[:n] = matvec(J, x[:n]) - u * x[n]
        out[n] = -(u @ x[:n])
        return out

    return apply


def solve_bordered_inexact(J: BlockTridiag, u, r, s: float, tol: float = 1e-6, maxit: int = 200):
    """BiCGSTAB on the full bordered system; returns ``(d, delta, status)``."""
    n = len(u)
    rhs = np.concatenate([-np.asarray(r, dtype=float), [-s]])
    x, status = bicgstab(bordered_operator(J, u), rhs, np.zeros(n + 1), tol=tol, maxit=maxit)
    return x[:n], float(x[n]), status


def _positive_start(p: DiscreteGpe, u0, default) -> np.ndarray:
    u = np.array(default if u0 is None else u0, dtype=float)
    if u.shape != (p.n,):
        raise ValueError(f"initial vector of length {p.n} expected, got shape {u.shape}")
    if not (u > 0).all():
        raise ValueError("initial vector must be strictly positive")
    return u


def nni(p: DiscreteGpe, u0=None, opts: SolverOptions | None = None, callback=None) -> SolveResult:
    """Newton-Noda iteration.

    Parameters
    ----------
    p : DiscreteGpe
    u0 : array_like, optional
        Positive start, normalized internally. Defaults to ``ones/sqrt(n)``.
    opts : SolverOptions, optional
        ``inexact`` selects BiCGSTAB on the bordered system instead of the
        exact Schur-complement solve.
    callback : callable, optional
        Called as ``callback(record, u)`` after every accepted iterate.
    """
    opts = opts or SolverOptions()
    u = _positive_start(p, u0, np.ones(p.n))
    u = u / np.linalg.norm(u)
    lam = noda_lambda(p, u)
    history: list[IterationRecord] = []
    status = SolverStatus.MAX_ITERATIONS

    for k in range(1, opts.max_outer + 1):
        r = residual(p, u, lam)
        s = 0.5 * (1.0 - u @ u)
        J = jacobian(p, u, lam)
        lin_ok = None
        try:
            if opts.inexact:
                d, _, lin = solve_bordered_inexact(J, u, r, s, opts.bicgstab_tol, opts.bicgstab_maxit)
                lin_ok = bool(lin.converged)
            else:
                d, _ = solve_bordered(J, u, r, s)
        except SingularSystemError:
            status = SolverStatus.SINGULAR_SYSTEM
            break

        theta = 1.0
        u_new = None
        for _ in range(opts.max_halvings + 1):
            w = u + theta * d
            u_hat = w / np.linalg.norm(w)
            h = apply_A(p, u_hat) - lam * u_hat
            if (u_hat > 0).all() and (h > 0).all():
                u_new = u_hat
                break
            theta *= 0.5
        if u_new is None:
            # at a roundoff-exact eigenpair h vanishes and can never be > 0;
            # accept the full step only if it already meets the stopping test
            w = u + d
            u_hat = w / np.linalg.norm(w)
            if (u_hat > 0).all() and convergence_metric(p, u, u_hat, noda_lambda(p, u_hat)) < opts.tol_inner:
                u_new, theta = u_hat, 1.0
            else:
                status = SolverStatus.LINE_SEARCH_FAILED
                break

        u_prev, u = u, u_new
        lam = noda_lambda(p, u)
        metric = convergence_metric(p, u_prev, u, lam)
        history.append(IterationRecord(k, lam, float(np.linalg.norm(residual(p, u, lam))),
                                       float(np.linalg.norm(u)), step=theta, linear_converged=lin_ok))
        log.debug("nni k=%d lambda=%.12g theta=%g metric=%.3e", k, lam, theta, metric)
        if callback is not None:
            callback(history[-1], u)
        if metric < opts.tol_inner:
            status = SolverStatus.CONVERGED
            break

    pair = Eigenpair(u, lam)
    return SolveResult(pair, float(np.linalg.norm(residual(p, u, lam))), len(history), history,
                       status, pair, solver="nni-inexact" if opts.inexact else "nni")


def inner_newton(p: DiscreteGpe, lam: float, u0, tol: float = 1e-10, max_iter: int = 100) -> NewtonResult:
    """Newton's method for ``beta*u**3 + B u = lambda u`` at fixed ``lambda``.

    Each step solves ``J(u_l, lambda) u_{l+1} = 2*beta*u_l**3`` with one
    block LU factorization. Stops when
    ``(|u_{l+1} - u_l| + |r(u_{l+1})|) / |u_{l+1}| < tol``.

    Raises
    ------
    LambdaBelowMuError
        The iterates collapse to zero (``lambda <= lambda_min(B)``).
    PositivityLostError
        More than three consecutive iterates have a nonpositive component.
    SingularSystemError
        A Jacobian is singular.
    """
    if not p.beta_scaled > 0:
        raise ValueError("inner Newton iteration needs beta > 0")
    u = _positive_start(p, u0, None)
    beta = p.beta_scaled
    out = NewtonResult(u, 0)
    nonpos_run = 0
    for it in range(1, max_iter + 1):
        F = _factor(jacobian(p, u, lam))
        u_new = solve_block_lu(F, 2.0 * beta * u ** 3)
        nrm = float(np.linalg.norm(u_new))
        if not np.isfinite(nrm):
            raise SingularSystemError(f"non-finite Newton iterate at lambda={lam}")
        if nrm < 1e-8:
            raise LambdaBelowMuError(f"Newton iterates collapse to 0 at lambda={lam}: "
                                     "lambda is not above lambda_min(B)")
        if (u_new - u).max() > tol * nrm:
            out.violations += 1
        if (u_new <= 0).any():
            out.nonpositive += 1
            nonpos_run += 1
            if nonpos_run > 3:
                raise PositivityLostError(f"positivity not recovered after {nonpos_run} steps "
                                          f"at lambda={lam}")
        else:
            nonpos_run = 0
        res = float(np.linalg.norm(residual(p, u_new, lam)))
        out.residuals.append(res)
        metric = (float(np.linalg.norm(u_new - u)) + res) / nrm
        u = u_new
        out.iterations = it
        if metric < tol:
            out.converged = True
            break
    out.u = u
    return out


def monotone_start_alpha(p: DiscreteGpe, lam: float, eig: EigResult, safety: float = 1.1) -> float:
    """Scale ``alpha`` with ``beta*(alpha*p_i)**2 > lam - mu`` for all i, times ``safety``."""
    gap = max(lam - eig.mu, 0.0)
    return safety * math.sqrt(gap / (p.beta_scaled * float(eig.p_vec.min()) ** 2))


def find_initial_interval(p: DiscreteGpe, eps: float = 1e-3, max_doublings: int = 60,
                          tol: float = 1e-10, eig: EigResult | None = None):
    """Bracket the eigenvalue by doubling from ``lambda_min(B) + eps``.

    Starting from ``a = mu + eps``, ``b = 2a``: while the positive solution
    at ``lambda = b`` has ``|u| <= 1``, set ``a = b``, ``b = 2a``. Each solve
    starts from the scaled Perron vector satisfying the monotone-convergence
    condition at ``b``.
    """
    if not p.beta_scaled > 0:
        raise ValueError("interval search needs beta > 0")
    eig = eig or smallest_eigenpair(p.B)
    a = eig.mu + eps
    b = 2.0 * a
    for _ in range(max_doublings):
        start = monotone_start_alpha(p, b, eig) * eig.p_vec
        u = inner_newton(p, b, start, tol=tol).u
        if np.linalg.norm(u) > 1.0:
            return a, b
        a, b = b, 2.0 * b
    raise IntervalSearchError(f"no bracket found after {max_doublings} doublings")


def nbi(p: DiscreteGpe, a: float, b: float, u0=None, opts: SolverOptions | None = None,
        callback=None) -> SolveResult:
    """Newton-Bisection iteration on ``[a, b]``.

    Parameters
    ----------
    p : DiscreteGpe
        Requires ``beta_scaled > 0``.
    a, b : float
        Bracket ``a < b`` around the ground-state eigenvalue. Trial values
        at or below ``lambda_min(B)`` are counted as ``|u| = 0``.
    u0 : array_like, optional
        Positive Newton start; defaults to all ones. Ignored when
        ``opts.alpha_init`` is set, in which case ``alpha_init * p_vec``
        (scaled Perron vector of B) is used.
    opts : SolverOptions, optional
        ``warm_start`` restarts each Newton solve from the previous bisection
        iterate instead of ``u0``.
    callback : callable, optional
        Called as ``callback(record, u_k)`` after every bisection step.
    """
    opts = opts or SolverOptions()
    if not a < b:
        raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
    if not p.beta_scaled > 0:
        raise ValueError("NBI needs beta > 0")
    if opts.alpha_init is not None:
        u0 = opts.alpha_init * smallest_eigenpair(p.B).p_vec
    u0 = _positive_start(p, u0, np.ones(p.n))
    interval = (float(a), float(b))

    history: list[IterationRecord] = []
    status = SolverStatus.MAX_ITERATIONS
    u, lam = u0, 0.5 * (a + b)
    for k in range(1, opts.max_outer + 1):
        lam = 0.5 * (a + b)
        start = u if (opts.warm_start and k > 1) else u0
        try:
            nr = inner_newton(p, lam, start, tol=opts.tol_inner, max_iter=opts.max_inner)
        except SingularSystemError:
            status = SolverStatus.SINGULAR_SYSTEM
            break
        except LambdaBelowMuError:
            # no positive solution below lambda_min(B): treat as |u| = 0 < 1
            history.append(IterationRecord(k, lam, float("nan"), 0.0, inner_iterations=0))
            if callback is not None:
                callback(history[-1], np.zeros(p.n))
            a, u = lam, u0
            continue
        u = nr.u
        nu = float(np.linalg.norm(u))
        history.append(IterationRecord(k, lam, float(np.linalg.norm(residual(p, u, lam))), nu,
                                       inner_iterations=nr.iterations, violations=nr.violations,
                                       nonpositive=nr.nonpositive))
        log.debug("nbi k=%d lambda=%.12g |u|=%.12g newton=%d", k, lam, nu, nr.iterations)
        if callback is not None:
            callback(history[-1], u)
        if abs(nu - 1.0) < opts.tol_outer:
            status = SolverStatus.CONVERGED
            break
        if nu > 1.0:
            b = lam
        else:
            a = lam

    u_hat = u / np.linalg.norm(u)
    return SolveResult(Eigenpair(u, lam), float(np.linalg.norm(residual(p, u, lam))), len(history),
                       history, status, Eigenpair(u_hat, rayleigh_lambda(p, u_hat)), solver="nbi",
                       interval=interval)
