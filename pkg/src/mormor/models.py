"""Built-in parametric problems feeding the greedy drivers.

Three constructions: the two-material diffusion benchmark on (-1,1)^2, the
inverse-distance target-function family on (0,1) x (0,1), and the synthetic
orthogonal-sequence model with prescribed decay exponent used for rate
checks.
"""

import itertools
import math

import numpy as np

from . import fem
from .eim import FunctionFamily
from .errors import ContractViolation
from .spacetime import InnerProduct, TimeGrid, Trajectory, basis_matrix

__all__ = [
    "DiffusionModel",
    "SequenceModel",
    "diffusion_model",
    "inverse_distance_family",
    "sequence_model",
]


class DiffusionModel:
    """Parabolic model with coefficient mu on the left half, 1 on the right.

    Training parameters are equidistant in [1, 2]; the V-inner product is
    the full H1 Gram of the interior dofs.  Solves are memoized, so a
    repeated parameter costs one factorization total.
    """

    def __init__(self, n_side, tau, param_count, f=None, g=None):
        J = round(1.0 / tau)
        if J < 1 or abs(J * tau - 1.0) > 1e-12:
            raise ContractViolation(f"tau={tau} does not divide T=1 evenly")
        self.mesh = fem.build_mesh(n_side)
        self.ops = fem.assemble(self.mesh, f=f, g=g)
        self.grid = TimeGrid(1.0, J)
        self.parameters = [float(mu) for mu in np.linspace(1.0, 2.0, param_count)]
        self._cache = {}

    @property
    def ip(self):
        return self.ops.h1

    @property
    def dim(self):
        return self.ops.n_interior

    def solve(self, mu):
        mu = float(mu)
        if mu not in self._cache:
            self._cache[mu] = fem.solve_full(self.ops, mu, self.grid)
        return self._cache[mu]

    def solve_reduced(self, mu, basis):
        return fem.solve_reduced(self.ops, basis, mu, self.grid)

    def estimator(self, mu, basis):
        B = basis_matrix(basis)
        if B.shape[1] == 0:
            reduced = Trajectory.zero(self.grid, self.dim)
        else:
            reduced = fem.solve_reduced(self.ops, B, mu, self.grid)
        return fem.estimator_delta(self.ops, B, mu, self.grid, reduced)


def diffusion_model(n_side, tau, param_count, f=None, g=None):
    if param_count < 1:
        raise ContractViolation("need at least one training parameter")
    return DiffusionModel(n_side, tau, param_count, f=f, g=g)


def sequence_amplitude(i, alpha):
    """x_i = 2^{-k*alpha} on the dyadic block 2^{k-1} <= i <= 2^k - 1."""
    if i < 1:
        raise ContractViolation("sequence index starts at 1")
    k = int(i).bit_length()  # 2^{k-1} <= i <= 2^k - 1
    return 2.0 ** (-k * alpha)


class SequenceModel:
    """Mutually orthogonal trajectories u_i = (e^{-lam*t_j} x_i e_i)_j in R^D."""

    def __init__(self, alpha, lam, D, grid):
        if alpha <= 0 or lam <= 0:
            raise ContractViolation("alpha and lam must be positive")
        if D < 1:
            raise ContractViolation("truncation dimension must be >= 1")
        self.alpha = alpha
        self.lam = lam
        self.D = D
        self.grid = grid
        self.ip = InnerProduct.identity(D)
        self.parameters = list(range(1, D + 1))
        self.x = np.array([sequence_amplitude(i, alpha) for i in self.parameters])
        self._decay = np.exp(-lam * grid.nodes)

    @property
    def dim(self):
        return self.D

    def solve(self, i):
        if not 1 <= i <= self.D:
            raise ContractViolation(f"index {i} outside 1..{self.D}")
        vals = np.zeros((self.D, self.grid.n_nodes))
        vals[i - 1, :] = self.x[i - 1] * self._decay
        return Trajectory(self.grid, vals)

    def sigma_exact(self, n):
        """Closed-form greedy error sqrt(tau * sum_j e^{-2*lam*t_j}) * x_n."""
        c = math.sqrt(self.grid.tau * float(np.sum(self._decay**2)))
        return c * self.x[n - 1]


def sequence_model(alpha, lam, D, grid=None):
    if grid is None:
        grid = TimeGrid(1.0, 32)
    return SequenceModel(alpha, lam, D, grid)


def inverse_distance_family(levels=128, sigma_count=100, param_grid=10):
    """Targets a(t)(x) = 1/sqrt((x - mu1)^2 + (t - mu2)^2 + 1) on (0,1)x(0,1).

    `levels` time nodes (J = levels - 1), `sigma_count` equidistant candidate
    points, and a param_grid x param_grid tensor grid of parameters in [0,1]^2.
    """
    if levels < 2 or sigma_count < 2 or param_grid < 1:
        raise ContractViolation("family sizes out of range")
    grid = TimeGrid(1.0, levels - 1)
    sigma = np.linspace(0.0, 1.0, sigma_count)
    ticks = np.linspace(0.0, 1.0, param_grid) if param_grid > 1 else np.array([0.0])
    parameters = tuple(itertools.product(ticks.tolist(), ticks.tolist()))

    def evaluator(mu, t_nodes, points):
        mu1, mu2 = mu
        dx2 = (points[:, None] - mu1) ** 2
        dt2 = (t_nodes[None, :] - mu2) ** 2
        return 1.0 / np.sqrt(dx2 + dt2 + 1.0)

    return FunctionFamily(parameters=parameters, sigma=sigma, grid=grid, evaluator=evaluator)
