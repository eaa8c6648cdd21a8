"""Symmetric block tridiagonal matrices.

Storage, matvec, block LU factorization without inter-block pivoting, and an
unpreconditioned BiCGSTAB for operators given as callables.

A matrix with ``m`` diagonal blocks ``D_i`` and sub-diagonal blocks ``C_i``
(coupling block-row ``i+1`` to block-column ``i``) is::

    [ D_0  C_0^T                ]
    [ C_0  D_1   C_1^T          ]
    [      C_1   D_2   ...      ]
    [            ...   D_{m-1}  ]
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg


class SingularBlockError(np.linalg.LinAlgError):
    """A Schur complement block of the block LU factorization is singular."""

    def __init__(self, block: int, msg: str | None = None):
        self.block = block
        super().__init__(msg or f"singular Schur complement at block {block}")


@dataclass(frozen=True, eq=False)
class BlockTridiag:
    """Symmetric block tridiagonal matrix.

    Parameters
    ----------
    diag_blocks : ndarray, shape (m, p, p)
        Symmetric diagonal blocks.
    off_blocks : ndarray, shape (m - 1, p, p)
        Sub-diagonal blocks; the super-diagonal blocks are their transposes.
    m_matrix : bool
        Caller's assertion that all off-diagonal entries are nonpositive.
    """

    diag_blocks: np.ndarray
    off_blocks: np.ndarray
    m_matrix: bool = False

    def __post_init__(self):
        d = np.asarray(self.diag_blocks, dtype=float)
        o = np.asarray(self.off_blocks, dtype=float)
        if d.ndim != 3 or d.shape[1] != d.shape[2] or d.shape[0] < 1:
            raise ValueError(f"diag_blocks must have shape (m, p, p), got {d.shape}")
        m, p, _ = d.shape
        if m == 1 and o.size == 0:
            o = np.zeros((0, p, p))
        if o.shape != (m - 1, p, p):
            raise ValueError(f"off_blocks must have shape {(m - 1, p, p)}, got {o.shape}")
        asym = np.abs(d - d.transpose(0, 2, 1)).max()
        if asym > 1e-12 * max(1.0, np.abs(d).max()):
            raise ValueError(f"diagonal blocks are not symmetric (max asymmetry {asym:.3e})")
        d.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "diag_blocks", d)
        object.__setattr__(self, "off_blocks", o)

    @property
    def m(self) -> int:
        return self.diag_blocks.shape[0]

    @property
    def p(self) -> int:
        return self.diag_blocks.shape[1]

    @property
    def n(self) -> int:
        return self.m * self.p

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.diag_blocks, axis1=1, axis2=2).reshape(-1)

    def to_dense(self) -> np.ndarray:
        m, p = self.m, self.p
        out = np.zeros((self.n, self.n))
        for i in range(m):
            out[i * p:(i + 1) * p, i * p:(i + 1) * p] = self.diag_blocks[i]
        for i in range(m - 1):
            c = self.off_blocks[i]
            out[(i + 1) * p:(i + 2) * p, i * p:(i + 1) * p] = c
            out[i * p:(i + 1) * p, (i + 1) * p:(i + 2) * p] = c.T
        return out

    def check_m_matrix(self) -> bool:
        """Return True if every off-diagonal entry is <= 0."""
        off_diag = self.diag_blocks - np.einsum(
            "ij,ki->kij", np.eye(self.p), np.diagonal(self.diag_blocks, axis1=1, axis2=2))
        return bool((off_diag <= 0).all() and (self.off_blocks <= 0).all())

    def __matmul__(self, x):
        return matvec(self, x)


def matvec(M: BlockTridiag, x: np.ndarray) -> np.ndarray:
    """Compute ``M @ x`` block-row by block-row."""
    x = np.asarray(x, dtype=float)
    if x.shape != (M.n,):
        raise ValueError(f"vector of length {M.n} expected, got shape {x.shape}")
    xb = x.reshape(M.m, M.p)
    y = np.einsum("kij,kj->ki", M.diag_blocks, xb)
    if M.m > 1:
        y[1:] += np.einsum("kij,kj->ki", M.off_blocks, xb[:-1])
        y[:-1] += np.einsum("kji,kj->ki", M.off_blocks, xb[1:])
    return y.reshape(-1)


def shift_diagonal(M: BlockTridiag, d: np.ndarray, s: float) -> BlockTridiag:
    """Return ``M + diag(d) - s*I``; the off-diagonal blocks are shared."""
    d = np.asarray(d, dtype=float)
    if d.shape != (M.n,):
        raise ValueError(f"diagonal of length {M.n} expected, got shape {d.shape}")
    blocks = M.diag_blocks.copy()
    idx = np.arange(M.p)
    blocks[:, idx, idx] += d.reshape(M.m, M.p) - s
    m_matrix = M.m_matrix and bool((d >= 0).all()) and s <= 0
    return BlockTridiag(blocks, M.off_blocks, m_matrix=m_matrix)


@dataclass(frozen=True, eq=False)
class BlockLuFactors:
    """Block LU factors ``M = L U``.

    ``L`` is unit block lower bidiagonal with sub-diagonal blocks ``lower``;
    ``U`` is block upper bidiagonal with diagonal blocks ``U_i`` (kept as
    partial-pivoting LU factorizations in ``upper_lu``) and super-diagonal
    blocks equal to ``C_i^T``.
    """

    lower: np.ndarray
    upper_diag: np.ndarray
    upper_lu: tuple
    off_blocks: np.ndarray

    @property
    def m(self) -> int:
        return self.upper_diag.shape[0]

    @property
    def p(self) -> int:
        return self.upper_diag.shape[1]

    @property
    def n(self) -> int:
        return self.m * self.p

    def reconstruct(self) -> np.ndarray:
        """Assemble ``L @ U`` densely (for verification on small instances)."""
        m, p, n = self.m, self.p, self.n
        L = np.eye(n)
        U = np.zeros((n, n))
        for i in range(m):
            U[i * p:(i + 1) * p, i * p:(i + 1) * p] = self.upper_diag[i]
        for i in range(m - 1):
            L[(i + 1) * p:(i + 2) * p, i * p:(i + 1) * p] = self.lower[i]
            U[i * p:(i + 1) * p, (i + 1) * p:(i + 2) * p] = self.off_blocks[i].T
        return L @ U


def _lu_block(a: np.ndarray, i: int):
    scale = np.abs(a).max()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diagonal(lu))
    if not np.isfinite(lu).all() or pivots.min() <= 1e-14 * max(scale, 1e-300):
        raise SingularBlockError(i)
    return lu, piv


def factor_block_lu(M: BlockTridiag) -> BlockLuFactors:
    """Block LU factorization of a block tridiagonal matrix.

    No pivoting is done across block rows; each Schur complement block is
    factored with partial pivoting.

    Raises
    ------
    SingularBlockError
        If a Schur complement block is numerically singular.
    """
    m, p = M.m, M.p
    upper = np.empty((m, p, p))
    lower = np.empty((max(m - 1, 0), p, p))
    factors = []
    upper[0] = M.diag_blocks[0]
    factors.append(_lu_block(upper[0], 0))
    for i in range(1, m):
        c = M.off_blocks[i - 1]
        # L_i = C U_{i-1}^{-1}  <=>  U_{i-1}^T L_i^T = C^T
        lower[i - 1] = scipy.linalg.lu_solve(factors[i - 1], c.T, trans=1, check_finite=False).T
        upper[i] = M.diag_blocks[i] - lower[i - 1] @ c.T
        factors.append(_lu_block(upper[i], i))
    return BlockLuFactors(lower, upper, tuple(factors), M.off_blocks)


def solve_block_lu(F: BlockLuFactors, b: np.ndarray) -> np.ndarray:
    """Solve ``M x = b`` given ``F = factor_block_lu(M)``.

    ``b`` may be a vector of length n or an (n, k) array of right-hand sides.
    """
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.n or b.ndim > 2:
        raise ValueError(f"right-hand side with leading dimension {F.n} expected, got {b.shape}")
    m, p = F.m, F.p
    y = b.reshape((m, p) + b.shape[1:]).copy()
    for i in range(1, m):
        y[i] -= F.lower[i - 1] @ y[i - 1]
    x = np.empty_like(y)
    x[m - 1] = scipy.linalg.lu_solve(F.upper_lu[m - 1], y[m - 1], check_finite=False)
    for i in range(m - 2, -1, -1):
        rhs = y[i] - F.off_blocks[i].T @ x[i + 1]
        x[i] = scipy.linalg.lu_solve(F.upper_lu[i], rhs, check_finite=False)
    return x.reshape(b.shape)


def solve(M: BlockTridiag, b: np.ndarray) -> np.ndarray:
    return solve_block_lu(factor_block_lu(M), b)


@dataclass(frozen=True)
class IterativeStatus:
    converged: bool
    iterations: int
    final_relative_residual: float


def bicgstab(apply: Callable[[np.ndarray], np.ndarray], b, x0=None, tol=1e-6, maxit=200):
    """Unpreconditioned BiCGSTAB.

    Returns the best iterate seen (smallest true relative residual) and an
    :class:`IterativeStatus`. On breakdown the recurrence is restarted once
    from the best iterate; a second breakdown ends the solve unconverged.
    """
    if tol <= 0 or maxit < 1:
        raise ValueError("tol must be > 0 and maxit >= 1")
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), IterativeStatus(True, 0, 0.0)

    r = b - apply(x)
    best_x, best_res = x.copy(), np.linalg.norm(r) / bnorm
    if best_res <= tol:
        return best_x, IterativeStatus(True, 0, best_res)

    restarts = 0
    it = 0
    tiny = np.finfo(float).tiny
    while it < maxit:
        r_hat = r.copy()
        rho_old = alpha = omega = 1.0
        v = np.zeros_like(b)
        pdir = np.zeros_like(b)
        broke = False
        while it < maxit:
            it += 1
            rho = r_hat @ r
            if abs(rho) <= tiny or abs(omega) <= tiny:
                broke = True
                break
            beta = (rho / rho_old) * (alpha / omega)
            pdir = r + beta * (pdir - omega * v)
            v = apply(pdir)
            denom = r_hat @ v
            if abs(denom) <= tiny:
                broke = True
                break
            alpha = rho / denom
            s = r - alpha * v
            if np.linalg.norm(s) / bnorm <= tol:
                x = x + alpha * pdir
                r = s
            else:
                t = apply(s)
                tt = t @ t
                if tt <= tiny:
                    broke = True
                    break
                omega = (t @ s) / tt
                x = x + alpha * pdir + omega * s
                r = s - omega * t
            rho_old = rho
            res = np.linalg.norm(r) / bnorm
            if res < best_res:
                best_x, best_res = x.copy(), res
            if res <= tol:
                # guard against drift between recursive and true residual
                true_res = np.linalg.norm(b - apply(x)) / bnorm
                if true_res <= tol:
                    return x, IterativeStatus(True, it, true_res)
                r = b - apply(x)
                broke = True
                break
        if not broke:
            break
        if restarts >= 1:
            break
        restarts += 1
        x = best_x.copy()
        r = b - apply(x)
    best_res = np.linalg.norm(b - apply(best_x)) / bnorm
    return best_x, IterativeStatus(best_res <= tol, it, best_res)
