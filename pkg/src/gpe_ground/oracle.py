"""Independent reference computations.

Nothing here shares code paths with the block LU kernels or the Newton
solvers: dense Jacobi eigensolves, a golden-section search over the unit
circle for two-unknown problems, and a projected gradient flow.
"""

from __future__ import annotations

import math

import numpy as np

from .blocktri import BlockTridiag
from .grid import DiscreteGpe


class OracleError(RuntimeError):
    pass


def dense_matrix(M: BlockTridiag) -> np.ndarray:
    return M.to_dense()


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigenvalue iteration for a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm is ``<= tol * |A|_F``.
    Returns ``(eigenvalues, eigenvectors)`` unsorted, eigenvectors as columns.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix expected")
    if np.abs(a - a.T).max() > 1e-12 * max(1.0, np.abs(a).max()):
        raise ValueError("matrix is not symmetric")
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise OracleError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def dense_smallest_eig(B) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and its eigenvector, signed to have positive sum."""
    if isinstance(B, BlockTridiag):
        B = B.to_dense()
    B = np.asarray(B, dtype=float)
    if B.shape[0] > 1000:
        raise ValueError("dense oracle limited to n <= 1000")
    w, v = jacobi_eigh(B)
    i = int(np.argmin(w))
    vec = v[:, i] / np.linalg.norm(v[:, i])
    if vec.sum() < 0:
        vec = -vec
    return float(w[i]), vec


def _energy_2(B: np.ndarray, beta: float, theta: float) -> float:
    u = np.array([math.cos(theta), math.sin(theta)])
    return float(u @ B @ u + 0.5 * beta * np.sum(u ** 4))


def brute_force_ground_state_2(p: DiscreteGpe, xtol: float = 1e-12):
    """Ground state of a two-unknown problem by golden-section search.

    ``u = (cos t, sin t)`` with ``t`` in ``(0, pi/2)``; the energy is
    minimized over ``t`` and ``lambda = u.T A(u) u`` returned with ``u``.
    """
    if p.n != 2:
        raise ValueError("brute-force oracle handles n = 2 only")
    B = p.B.to_dense()
    beta = p.beta_scaled
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, math.pi / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = _energy_2(B, beta, c), _energy_2(B, beta, d)
    while hi - lo > xtol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = _energy_2(B, beta, c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = _energy_2(B, beta, d)
    t = 0.5 * (lo + hi)
    u = np.array([math.cos(t), math.sin(t)])
    lam = float(u @ B @ u + beta * np.sum(u ** 4))
    return lam, u


def projected_gradient_ground_state(p: DiscreteGpe, step: float | None = None, max_iter: int = 200000,
                                    tol: float = 1e-8, u0=None, callback=None):
    """Normalized gradient flow restricted to the positive cone.

    ``v = u - step * (A(u) u - lambda u)`` with ``lambda = u.T A(u) u``, then
    ``u = |v| / |v|``. Without an explicit ``step`` each iteration uses
    ``1 / (g + 3*beta*max(u**2))`` with ``g`` the Gershgorin bound of B.
    ``callback(k, lam, residual_norm, u)`` is called after every step.
    """
    dense = p.B.to_dense() if p.n <= 400 else None
    Bmul = (lambda x: dense @ x) if dense is not None else (lambda x: p.B @ x)
    beta = p.beta_scaled
    u = np.ones(p.n) if u0 is None else np.abs(np.asarray(u0, dtype=float))
    u = u / np.linalg.norm(u)
    if step is not None and not step > 0:
        raise ValueError("step must be positive")
    row = np.abs(p.B.diag_blocks).sum(axis=2).reshape(-1)
    if p.B.m > 1:
        off = np.abs(p.B.off_blocks)
        row[p.B.p:] += off.sum(axis=2).reshape(-1)
        row[:-p.B.p] += off.sum(axis=1).reshape(-1)
    gersh = float(row.max())

    def energy(x):
        return float(x @ Bmul(x) + 0.5 * beta * np.sum(x ** 4))

    e_prev = energy(u)
    rises = 0
    lam = float("nan")
    for k in range(max_iter):
        Au = beta * u ** 3 + Bmul(u)
        lam = float(u @ Au)
        r = Au - lam * u
        rn = float(np.linalg.norm(r))
        if callback is not None and k > 0:
            callback(k, lam, rn, u)
        if rn <= tol:
            return lam, u
        tau = step if step is not None else 1.0 / (gersh + 3.0 * beta * float(np.max(u * u)))
        v = np.abs(u - tau * r)
        u = v / np.linalg.norm(v)
        e = energy(u)
        rises = rises + 1 if e > e_prev + 1e-15 * abs(e_prev) else 0
        if rises >= 100:
            raise OracleError("energy increased for 100 consecutive steps; use a smaller step")
        e_prev = e
    raise OracleError(f"projected gradient did not reach tol={tol} in {max_iter} steps "
                      f"(lambda={lam:.10g})")
