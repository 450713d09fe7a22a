"""Discrete space-time vectors: time grids, trajectories, weighted inner products.

A trajectory is an ordered family of J+1 coefficient vectors in a space V
carrying an SPD Gram matrix G.  The space-time inner product is the
tau-weighted sum of the per-node V-inner products,

    <u, v> = sum_j tau * (u^j)^T G v^j,

with uniform weight tau on all J+1 nodes.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ContractViolation

__all__ = [
    "TimeGrid",
    "Trajectory",
    "InnerProduct",
    "vt_inner",
    "vt_norm",
    "project_trajectory",
    "gram_schmidt",
    "basis_matrix",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_J = T with step tau = T/J.

    J = 0 is the single-snapshot edge case: one node t_0 = 0 with
    quadrature weight tau = T.
    """

    T: float
    J: int

    def __post_init__(self):
        if self.T <= 0:
            raise ContractViolation(f"final time must be positive, got {self.T}")
        if self.J < 0 or int(self.J) != self.J:
            raise ContractViolation(f"step count must be a non-negative integer, got {self.J}")

    @property
    def tau(self):
        return self.T / self.J if self.J > 0 else self.T

    @property
    def nodes(self):
        return self.tau * np.arange(self.J + 1) if self.J > 0 else np.zeros(1)

    @property
    def n_nodes(self):
        return self.J + 1


@dataclass(frozen=True)
class Trajectory:
    """J+1 coefficient vectors stored as the columns of a (dim, J+1) array."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, order="C")
        if vals.ndim != 2:
            raise ContractViolation("trajectory values must be a 2-d array")
        if vals.shape[1] != self.grid.n_nodes:
            raise ContractViolation(
                f"expected {self.grid.n_nodes} columns, got {vals.shape[1]}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dim(self):
        return self.values.shape[0]

    def column(self, j):
        return self.values[:, j]

    @staticmethod
    def zero(grid, dim):
        return Trajectory(grid, np.zeros((dim, grid.n_nodes)))

    def to_csv(self, path):
        """One column per time node, header row t_0,...,t_J."""
        header = ",".join(f"t_{j}" for j in range(self.grid.n_nodes))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in self.values:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")

    @staticmethod
    def from_csv(path, grid):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if len(header) != grid.n_nodes:
                raise ContractViolation(
                    f"file has {len(header)} time columns, grid expects {grid.n_nodes}"
                )
            vals = np.loadtxt(fh, delimiter=",", ndmin=2)
        return Trajectory(grid, vals)

    def to_npy(self, path):
        np.save(path, self.values)

    @staticmethod
    def from_npy(path, grid):
        return Trajectory(grid, np.load(path))


class InnerProduct:
    """SPD Gram matrix G together with a factor F satisfying G = F^T F.

    G may be dense or sparse (matvec-heavy paths); F is a dense upper
    triangular Cholesky factor used for SVD-based spectra and Riesz solves.
    """

    def __init__(self, G, F, _validate=True):
        self.G = G
        self.F = np.asarray(F, dtype=float)
        self.dim = self.F.shape[0]
        if _validate:
            self._check()

    def _check(self):
        G = self.G
        Gd = G.toarray() if sp.issparse(G) else np.asarray(G)
        scale = np.abs(Gd).max()
        if scale == 0 or np.abs(Gd - Gd.T).max() > 1e-12 * scale:
            raise ContractViolation("Gram matrix is not symmetric")
        if self.dim <= 800:
            err = np.abs(self.F.T @ self.F - Gd).max()
        else:
            # probe check: full reconstruction is O(dim^3) at scale
            rng = np.random.default_rng(0)
            X = rng.standard_normal((self.dim, 3))
            err = np.abs(self.F.T @ (self.F @ X) - self.apply(X)).max()
        if err > 1e-10 * scale:
            raise ContractViolation("factor F does not reproduce G (F^T F != G)")

    @classmethod
    def from_gram(cls, G):
        Gd = G.toarray() if sp.issparse(G) else np.asarray(G, dtype=float)
        F = sla.cholesky(Gd, lower=False)
        return cls(G, F)

    @classmethod
    def identity(cls, dim):
        return cls(sp.identity(dim, format="csr"), np.eye(dim), _validate=False)

    def apply(self, X):
        """G @ X for a vector or stacked columns."""
        return self.G @ X

    def inner(self, x, y):
        return float(x @ self.apply(y))

    def norm(self, x):
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    def solve_F(self, X):
        """F^{-1} X."""
        return sla.solve_triangular(self.F, X, lower=False)

    def solve_Ft(self, X):
        """F^{-T} X."""
        return sla.solve_triangular(self.F, X, trans="T", lower=False)


def _check_compatible(u, v):
    if u.grid != v.grid:
        raise ContractViolation("trajectories live on different time grids")
    if u.dim != v.dim:
        raise ContractViolation(f"dimension mismatch: {u.dim} vs {v.dim}")


def vt_inner(u, v, ip):
    """Space-time inner product sum_j tau * (u^j)^T G v^j."""
    _check_compatible(u, v)
    if u.dim != ip.dim:
        raise ContractViolation(f"inner product expects dim {ip.dim}, got {u.dim}")
    return u.grid.tau * float(np.sum(u.values * ip.apply(v.values)))


def vt_norm(u, ip):
    return float(np.sqrt(max(vt_inner(u, u, ip), 0.0)))


def basis_matrix(basis):
    """Accept a ReducedBasis-like object or a plain (dim, N) column array."""
    mat = getattr(basis, "vectors", basis)
    mat = np.asarray(mat, dtype=float)
    if mat.ndim == 1:
        mat = mat[:, None]
    return mat


def check_orthonormal(B, ip, tol=1e-8):
    if B.shape[1] == 0:
        return
    gram = B.T @ ip.apply(B)
    if np.abs(gram - np.eye(B.shape[1])).max() > tol:
        raise ContractViolation("basis is not G-orthonormal")


def project_trajectory(basis, u, ip):
    """Column-wise G-orthogonal projection of u onto span(basis)."""
    B = basis_matrix(basis)
    if B.shape[1] == 0:
        return Trajectory.zero(u.grid, u.dim)
    if B.shape[0] != u.dim:
        raise ContractViolation(f"basis dim {B.shape[0]} != trajectory dim {u.dim}")
    check_orthonormal(B, ip)
    coeffs = B.T @ ip.apply(u.values)
    return Trajectory(u.grid, B @ coeffs)


def gram_schmidt(vectors, ip, basis=None, drop_tol=1e-13):
    """G-orthonormalize columns against an existing basis (modified
    Gram-Schmidt with one reorthogonalization pass).

    Columns whose residual norm falls below drop_tol times their original
    norm are dropped.  Returns (kept columns, number dropped).
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    B = None if basis is None else basis_matrix(basis)
    kept = []
    dropped = 0
    for k in range(V.shape[1]):
        w = V[:, k].copy()
        ref = ip.norm(w)
        if ref == 0.0:
            dropped += 1
            continue
        for _ in range(2):
            if B is not None and B.shape[1] > 0:
                w = w - B @ (B.T @ ip.apply(w))
            for q in kept:
                w = w - q * ip.inner(q, w)
        nrm = ip.norm(w)
        if nrm <= drop_tol * ref:
            dropped += 1
            continue
        kept.append(w / nrm)
    out = np.column_stack(kept) if kept else np.zeros((V.shape[0], 0))
    return out, dropped
