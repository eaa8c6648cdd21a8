"""Finite-difference discretization of the stationary GPE on [0, 1]^d.

Interior nodes ``x_i = i*h`` (``h = 1/(N+1)``) with homogeneous Dirichlet
boundary; unknowns are ordered x-fastest so that the negative Laplacian is
the Kronecker sum ``... + I (x) L_hy (x) I + ... (x) L_hx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocktri import BlockTridiag

POTENTIAL_KINDS = ("harmonic", "harmonic_lattice", "custom_table")


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    kind: str = "harmonic"
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        if self.kind == "custom_table":
            if self.values is None:
                raise ValueError("custom_table potential needs a value table")
            vals = np.asarray(self.values, dtype=float).reshape(-1)
            if not np.isfinite(vals).all() or (vals < 0).any():
                raise ValueError("potential values must be finite and nonnegative")
            object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, n: int) -> "PotentialSpec":
        return cls("custom_table", np.zeros(n))


def eval_potential(spec: PotentialSpec, point) -> float:
    """Evaluate the trapping potential at a point of the unit cube."""
    if spec.kind == "custom_table":
        raise ValueError("custom_table potentials are positional and cannot be evaluated at a point")
    x = np.atleast_1d(np.asarray(point, dtype=float))
    sq = float(np.sum(x * x))
    if spec.kind == "harmonic":
        return sq
    return 0.5 * sq + 50.0 * float(np.sum(np.sin(np.pi * x / 4.0) ** 2))


def _potential_on_grid(spec: PotentialSpec, sizes: tuple[int, ...]) -> np.ndarray:
    n = math.prod(sizes)
    if spec.kind == "custom_table":
        if spec.values.shape != (n,):
            raise ValueError(f"custom_table has {spec.values.size} values, grid has {n} points")
        return spec.values.copy()
    axes = [np.arange(1, N + 1) / (N + 1) for N in sizes]
    # meshgrid with 'ij' on reversed axes gives x-fastest flattening
    mesh = np.meshgrid(*reversed(axes), indexing="ij")
    coords = np.stack([c.reshape(-1) for c in reversed(mesh)], axis=0)
    sq = np.sum(coords ** 2, axis=0)
    if spec.kind == "harmonic":
        return sq
    return 0.5 * sq + 50.0 * np.sum(np.sin(np.pi * coords / 4.0) ** 2, axis=0)


def laplacian_1d(N: int) -> np.ndarray:
    """Dense ``(1/h^2) tridiag(-1, 2, -1)`` of order N, ``h = 1/(N+1)``."""
    h2 = (N + 1) ** 2
    return h2 * (2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1))


@dataclass(frozen=True, eq=False)
class DiscreteGpe:
    """Discrete problem ``beta_scaled * u**3 + B u = lambda u``, ``|u| = 1``."""

    dim: int
    sizes: tuple[int, ...]
    B: BlockTridiag
    beta_physical: float
    beta_scaled: float
    potential: PotentialSpec = field(default_factory=PotentialSpec)

    @property
    def n(self) -> int:
        return self.B.n

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(1.0 / (N + 1) for N in self.sizes)

    @classmethod
    def from_matrix(cls, B, beta_scaled: float) -> "DiscreteGpe":
        """Wrap an explicit matrix as a 1D problem with the given scaled coefficient.

        A dense array becomes a single block; the potential is taken as
        already included in ``B``.
        """
        if not isinstance(B, BlockTridiag):
            B = np.asarray(B, dtype=float)
            B = BlockTridiag(B[None], np.zeros((0,) + B.shape))
        if beta_scaled < 0:
            raise ValueError("beta must be nonnegative")
        n = B.n
        return cls(1, (n,), B, beta_scaled / (n + 1), float(beta_scaled), PotentialSpec.zero(n))

    def with_beta(self, beta: float) -> "DiscreteGpe":
        """Same discretization, different interaction strength."""
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        return DiscreteGpe(self.dim, self.sizes, self.B, float(beta),
                           float(beta) * math.prod(N + 1 for N in self.sizes), self.potential)


def build_problem(dim: int, sizes, beta: float, spec: PotentialSpec | None = None) -> DiscreteGpe:
    """Assemble ``B = -Laplacian + V`` and the scaled interaction coefficient.

    Parameters
    ----------
    dim : {1, 2, 3}
    sizes : int or tuple of int
        Interior points per direction, ``(N_x[, N_y[, N_z]])``. A single int
        is used for every direction.
    beta : float
        Physical interaction strength; the discrete coefficient is
        ``beta * prod(N_i + 1)``.
    spec : PotentialSpec, optional
        Defaults to the harmonic trap ``sum(x_i**2)``.

    Returns
    -------
    DiscreteGpe
        1D uses ``m=N`` blocks of size 1, 2D ``m=N_y`` blocks of size
        ``N_x``, 3D ``m=N_z`` dense blocks of size ``N_x*N_y``.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if isinstance(sizes, (int, np.integer)):
        sizes = (int(sizes),) * dim
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != dim:
        raise ValueError(f"{dim} sizes expected, got {sizes}")
    if min(sizes) < 2:
        raise ValueError(f"every grid size must be >= 2, got {sizes}")
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    spec = spec if spec is not None else PotentialSpec("harmonic")

    V = _potential_on_grid(spec, sizes)
    if dim == 1:
        (N,) = sizes
        L = laplacian_1d(N)
        diag = (np.diagonal(L) + V).reshape(N, 1, 1)
        off = np.diagonal(L, offset=-1).reshape(N - 1, 1, 1)
    else:
        # inner block: Laplacian of the leading dim-1 directions (x-fastest)
        inner = sizes[:-1]
        Nm = sizes[-1]
        p = math.prod(inner)
        block = np.zeros((p, p))
        for k, N in enumerate(inner):
            left = math.prod(inner[k + 1:])
            right = math.prod(inner[:k])
            block += np.kron(np.eye(left), np.kron(laplacian_1d(N), np.eye(right)))
        outer = (Nm + 1) ** 2
        diag = np.repeat(block[None], Nm, axis=0)
        idx = np.arange(p)
        diag[:, idx, idx] += 2.0 * outer + V.reshape(Nm, p)
        off = np.repeat((-outer * np.eye(p))[None], Nm - 1, axis=0)

    B = BlockTridiag(diag, off, m_matrix=True)
    beta_scaled = float(beta) * math.prod(N + 1 for N in sizes)
    return DiscreteGpe(dim, sizes, B, float(beta), beta_scaled, spec)


def laplacian_min_eig(sizes) -> float:
    """Smallest eigenvalue of the discrete Dirichlet Laplacian (no potential)."""
    return float(sum(2.0 * (N + 1) ** 2 * (1.0 - math.cos(math.pi / (N + 1))) for N in sizes))
