"""P1 finite elements on (-1,1)^2 with implicit Euler time stepping.

The mesh is a uniform right-triangle split of a square vertex grid aligned
so that x = 0 is a mesh line; the diffusion coefficient mu*1_{Omega1} + 1_{Omega2}
with Omega1 = (-1,0]x(-1,1) then has the affine two-term stiffness
mu*K1 + K2.  Homogeneous Dirichlet conditions are imposed by eliminating
boundary dofs, which keeps every retained matrix SPD.
"""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ContractViolation
from .spacetime import InnerProduct, Trajectory, basis_matrix, check_orthonormal

__all__ = [
    "Mesh",
    "AssembledOperators",
    "build_mesh",
    "assemble",
    "solve_full",
    "solve_reduced",
    "riesz_dual_norm",
    "estimator_delta",
    "default_source",
    "default_initial",
    "export_mesh",
    "export_operators",
]


def default_source(x, y, t):
    return np.exp(-t) * np.sin(np.pi * x) * np.sin(np.pi * y)


def default_initial(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


@dataclass(frozen=True)
class Mesh:
    """Uniform triangulation of (-1,1)^2, row-major vertex ordering."""

    n_side: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray

    @property
    def h(self):
        return 2.0 / (self.n_side - 1)

    @property
    def interior(self):
        return np.flatnonzero(~self.boundary)


def build_mesh(n_side):
    """Split each grid cell by the diagonal from its lower-left corner.

    n_side must be odd so the interface x = 0 is resolved by mesh lines.
    """
    if n_side < 3 or n_side % 2 == 0:
        raise ContractViolation(f"n_side must be odd and >= 3, got {n_side}")
    n = n_side
    coords = np.linspace(-1.0, 1.0, n)
    X, Y = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])  # index = iy*n + ix

    ix, iy = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="xy")
    v00 = (iy * n + ix).ravel()
    v10 = v00 + 1
    v01 = v00 + n
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.vstack([lower, upper])

    bx = (np.arange(n * n) % n == 0) | (np.arange(n * n) % n == n - 1)
    by = (np.arange(n * n) // n == 0) | (np.arange(n * n) // n == n - 1)
    return Mesh(n_side=n, vertices=vertices, triangles=triangles, boundary=bx | by)


def _p1_element_arrays(mesh):
    """Per-triangle local stiffness and mass blocks (vectorized)."""
    tri = mesh.triangles
    pts = mesh.vertices[tri]  # (nt, 3, 2)
    x = pts[:, :, 0]
    y = pts[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * np.abs(b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    Kloc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * area[:, None, None]
    )
    Mbase = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Mloc = area[:, None, None] * Mbase[None, :, :]
    return Kloc, Mloc, area


def _accumulate(loc, tri, n_dof):
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    mat = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n_dof, n_dof))
    return mat.tocsr()


class AssembledOperators:
    """Interior-dof matrices plus load/initial builders for given f and g.

    Attributes
    ----------
    M, K1, K2 : csr_matrix
        Mass and the two sub-domain stiffness matrices on interior dofs.
    G : csr_matrix
        Full H1 Gram M + K1 + K2.
    M_full, K1_full, K2_full : csr_matrix
        Pre-elimination matrices over all vertices (diagnostics/export).
    """

    def __init__(self, mesh, f=None, g=None):
        self.mesh = mesh
        self.f = f if f is not None else default_source
        self.g = g if g is not None else default_initial

        Kloc, Mloc, _ = _p1_element_arrays(mesh)
        bary_x = mesh.vertices[mesh.triangles, 0].mean(axis=1)
        in_left = bary_x < 0.0
        n_dof = mesh.vertices.shape[0]
        tri = mesh.triangles
        self.M_full = _accumulate(Mloc, tri, n_dof)
        self.K1_full = _accumulate(Kloc[in_left], tri[in_left], n_dof)
        self.K2_full = _accumulate(Kloc[~in_left], tri[~in_left], n_dof)

        idx = mesh.interior
        self.interior = idx
        self.M = self.M_full[idx][:, idx].tocsr()
        self.K1 = self.K1_full[idx][:, idx].tocsr()
        self.K2 = self.K2_full[idx][:, idx].tocsr()
        self.G = (self.M + self.K1 + self.K2).tocsr()
        self.M_load = self.M_full[idx].tocsr()

        xv = mesh.vertices[:, 0]
        yv = mesh.vertices[:, 1]
        self._xy_all = (xv, yv)
        g_nodes = np.asarray(self.g(xv, yv), dtype=float)
        self.Mg = self.M_load @ g_nodes
        self._m_lu = spla.splu(self.M.tocsc())
        self.u0 = self._m_lu.solve(self.Mg)

        self._h1 = None
        self._load_cache = {}

    @property
    def n_interior(self):
        return self.interior.size

    @property
    def h1(self):
        """H1 inner product with dense Cholesky factor (built lazily)."""
        if self._h1 is None:
            self._h1 = InnerProduct.from_gram(self.G)
        return self._h1

    def stiffness(self, mu):
        return (mu * self.K1 + self.K2).tocsr()

    def load_columns(self, grid):
        """(n_interior, J+1) array of load vectors (f(t_j), phi_i)."""
        key = (grid.T, grid.J)
        if key not in self._load_cache:
            xv, yv = self._xy_all
            cols = np.empty((self.n_interior, grid.n_nodes))
            for j, t in enumerate(grid.nodes):
                cols[:, j] = self.M_load @ np.asarray(self.f(xv, yv, t), dtype=float)
            cols.flags.writeable = False
            self._load_cache[key] = cols
        return self._load_cache[key]


def assemble(mesh, f=None, g=None):
    return AssembledOperators(mesh, f=f, g=g)


def solve_full(ops, mu, grid):
    """Implicit Euler for (M/tau + mu*K1 + K2) u^j = M u^{j-1}/tau + F(t_j).

    The system matrix is factored once and reused for all J steps.
    """
    if mu <= 0:
        raise ContractViolation(f"diffusion parameter must be positive, got {mu}")
    tau = grid.tau
    M = ops.M
    A = M / tau + ops.stiffness(mu)
    lu = spla.splu(A.tocsc())
    loads = ops.load_columns(grid)
    U = np.empty((ops.n_interior, grid.n_nodes))
    U[:, 0] = ops.u0
    for j in range(1, grid.n_nodes):
        rhs = M @ U[:, j - 1] / tau + loads[:, j]
        U[:, j] = lu.solve(rhs)
    return Trajectory(grid, U)


def solve_reduced(ops, basis, mu, grid):
    """Galerkin projection of the implicit Euler scheme onto span(basis)."""
    B = basis_matrix(basis)
    if B.shape[1] == 0:
        raise ContractViolation("reduced solve needs a nonempty basis")
    check_orthonormal(B, ops.h1)
    tau = grid.tau
    Mr = B.T @ (ops.M @ B)
    Ar = Mr / tau + B.T @ (ops.stiffness(mu) @ B)
    loads_r = B.T @ ops.load_columns(grid)
    c = np.empty((B.shape[1], grid.n_nodes))
    c[:, 0] = sla.solve(Mr, B.T @ ops.Mg, assume_a="pos")
    chol = sla.cho_factor(Ar)
    for j in range(1, grid.n_nodes):
        c[:, j] = sla.cho_solve(chol, Mr @ c[:, j - 1] / tau + loads_r[:, j])
    return Trajectory(grid, B @ c)


def riesz_dual_norm(r, ip):
    """Dual norm sqrt(r^T G^{-1} r) of a functional via the factor F."""
    r = np.asarray(r, dtype=float)
    if r.shape[0] != ip.dim:
        raise ContractViolation(f"functional dim {r.shape[0]} != space dim {ip.dim}")
    return float(np.sqrt(np.sum(ip.solve_Ft(r) ** 2)))


def _residual_columns(ops, mu, grid, reduced):
    U = reduced.values
    tau = grid.tau
    loads = ops.load_columns(grid)
    R = np.empty_like(U)
    R[:, 0] = ops.Mg - ops.M @ U[:, 0]
    dU = (U[:, 1:] - U[:, :-1]) / tau
    R[:, 1:] = loads[:, 1:] - ops.M @ dU - ops.stiffness(mu) @ U[:, 1:]
    return R


def estimator_delta(ops, basis, mu, grid, reduced):
    """Quadrature-weighted root-sum-square of residual dual norms.

    The j = 0 term is the residual of the initial L2 projection; steps
    j >= 1 use the implicit Euler residual functional of `reduced`.
    """
    del basis  # pre: reduced was produced for (mu, basis); not re-derived here
    R = _residual_columns(ops, mu, grid, reduced)
    Z = ops.h1.solve_Ft(R)
    return float(np.sqrt(grid.tau * np.sum(Z**2)))


def export_mesh(mesh, directory):
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(d / "vertices.mtx"), mesh.vertices)
    scipy.io.mmwrite(str(d / "triangles.mtx"), mesh.triangles)


def export_operators(ops, directory):
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, mat in (("M", ops.M), ("K1", ops.K1), ("K2", ops.K2), ("G", ops.G)):
        scipy.io.mmwrite(str(d / f"{name}.mtx"), mat)
