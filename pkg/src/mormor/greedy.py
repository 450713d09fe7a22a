"""Weak POD-Greedy loop with m POD modes per iteration.

Each iteration selects the worst-approximated training parameter (exact
projection error or an a posteriori estimate), extracts the leading POD
modes of the projection residual, and appends them to the reduced basis.
The greedy threshold gamma_n of the weak formulation is not prescribed; it
materializes as the diagnostic ratio ||r_n|| / sigma_n.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._util import fmt17, parallel_map
from .errors import ContractViolation, SolverError
from .pod import DEGENERATE_CUTOFF, pod_modes
from .spacetime import (
    Trajectory,
    basis_matrix,
    check_orthonormal,
    gram_schmidt,
    project_trajectory,
    vt_norm,
)

__all__ = [
    "ReducedBasis",
    "GreedyConfig",
    "GreedyReport",
    "pod_greedy",
    "exact_sigma",
    "width_proxy",
]

SELECTION_MODES = ("exact-error", "estimator")


@dataclass(frozen=True)
class ReducedBasis:
    """Ordered G-orthonormal basis columns of the reduced subspace."""

    vectors: np.ndarray
    ip: object

    def __post_init__(self):
        check_orthonormal(self.vectors, self.ip)

    @property
    def size(self):
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GreedyConfig:
    n_iters: int
    m: int = 1
    selection: str = "exact-error"
    training: tuple = None
    tolerance: float = 0.0
    track_exact: bool = False
    keep_history: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.n_iters < 1:
            raise ContractViolation("n_iters must be >= 1")
        if self.m < 1:
            raise ContractViolation("m must be >= 1")
        if self.selection not in SELECTION_MODES:
            raise ContractViolation(f"unknown selection mode {self.selection!r}")
        if self.training is not None and len(self.training) == 0:
            raise ContractViolation("training set must be nonempty")


@dataclass
class GreedyReport:
    """Per-iteration records plus run status and free-form metadata.

    `rows` keeps every recorded quantity; `columns` fixes the CSV schema.
    Extra row keys (basis dimension, dropped-mode counts, ...) only appear
    in the JSON serialization.
    """

    columns: list
    rows: list = field(default_factory=list)
    status: str = "completed"
    meta: dict = field(default_factory=dict)
    history: list = None

    def column(self, name):
        return np.array([row.get(name, float("nan")) for row in self.rows])

    def to_csv(self, path, zero_seconds=False):
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                cells = []
                for col in self.columns:
                    val = row.get(col, float("nan"))
                    if col == "seconds" and zero_seconds:
                        val = 0.0
                    cells.append(fmt17(val))
                fh.write(",".join(cells) + "\n")

    def to_json(self, path):
        payload = {
            "columns": self.columns,
            "status": self.status,
            "meta": self.meta,
            "rows": self.rows,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, default=float)
            fh.write("\n")


def exact_sigma(model, basis):
    """Max projection error over the training set and its argmax parameter.

    Ties go to the lowest training-set index.
    """
    B = basis_matrix(basis)
    errs = []
    for mu in model.parameters:
        u = model.solve(mu)
        d = u.values - project_trajectory(B, u, model.ip).values
        errs.append(vt_norm(Trajectory(u.grid, d), model.ip))
    i = int(np.argmax(errs))
    return errs[i], model.parameters[i]


def width_proxy(trajectories, ip):
    """Singular-value decay of the pooled snapshot matrix in the G-norm.

    A lower-bound proxy for Kolmogorov widths; report diagnostic only.
    """
    snaps = np.hstack([t.values for t in trajectories])
    return sla.svdvals(ip.F @ snaps)


def _projection_residual(u, B, ip):
    d = u.values - project_trajectory(B, u, ip).values
    return Trajectory(u.grid, d)


def report_columns(m):
    lams = [f"lambda_{k}" for k in range(1, m + 1)]
    return ["n", "mu", "sigma", "delta_sup"] + lams + ["theta", "gamma_eff", "seconds"]


def pod_greedy(model, config):
    """Run the weak POD-Greedy method; returns (ReducedBasis, GreedyReport).

    The model must expose `parameters`, `solve(mu) -> Trajectory`, `ip`, and
    (for estimator selection) `estimator(mu, basis) -> float`.
    """
    ip = model.ip
    m = config.m
    params = list(config.training) if config.training is not None else list(model.parameters)
    if not params:
        raise ContractViolation("empty training set")
    use_exact = config.selection == "exact-error" or config.track_exact
    if config.selection == "estimator" and getattr(model, "estimator", None) is None:
        raise ContractViolation("estimator selection requires a model estimator hook")

    def full_solve(mu):
        try:
            return model.solve(mu)
        except ContractViolation:
            raise
        except Exception as exc:  # noqa: BLE001 - annotate the offending parameter
            raise SolverError(f"full solve failed at mu={mu}: {exc}", parameter=mu) from exc

    snapshots = {}
    if use_exact:
        solved = parallel_map(full_solve, params, config.threads)
        snapshots = dict(enumerate(solved))

    B = np.zeros((ip.dim, 0))
    report = GreedyReport(columns=report_columns(m), history=[] if config.keep_history else None)
    report.meta = {"selection": config.selection, "m": m, "n_iters": config.n_iters}
    prev_sigma = None
    status = "completed"

    for n in range(1, config.n_iters + 1):
        t0 = time.perf_counter()
        sigma = float("nan")
        delta_sup = float("nan")

        if use_exact:
            errs = parallel_map(
                lambda i: vt_norm(_projection_residual(snapshots[i], B, ip), ip),
                range(len(params)),
                config.threads,
            )
            i_exact = int(np.argmax(errs))
            sigma = errs[i_exact]
            if prev_sigma is not None and sigma > prev_sigma * (1.0 + 1e-10) + 1e-300:
                raise ContractViolation(
                    f"sigma increased at iteration {n}: {prev_sigma} -> {sigma}"
                )
            prev_sigma = sigma

        if config.selection == "estimator":
            deltas = parallel_map(
                lambda i: model.estimator(params[i], B), range(len(params)), config.threads
            )
            delta_sup = float(np.max(deltas))
            i_sel = int(np.argmax(deltas))
            surrogate = delta_sup
        else:
            i_sel = i_exact
            surrogate = sigma

        if surrogate <= config.tolerance:
            status = "converged"
            break

        mu_sel = params[i_sel]
        if i_sel not in snapshots:
            snapshots[i_sel] = full_solve(mu_sel)
        u = snapshots[i_sel]
        r = _projection_residual(u, B, ip)
        r_norm = vt_norm(r, ip)
        gamma_eff = r_norm / sigma if np.isfinite(sigma) and sigma > 0 else float("nan")

        spec = pod_modes(r, ip, m)
        lam = spec.eigenvalues
        n_real = m - spec.n_degenerate
        keep = [
            k
            for k in range(n_real)
            if lam[k] >= DEGENERATE_CUTOFF * lam[0]
        ] if lam[0] > 0 else []

        row = {
            "n": n,
            "mu": mu_sel,
            "sigma": sigma,
            "delta_sup": delta_sup,
            "theta": lam[m - 1] / lam[0] if lam[0] > 0 else float("nan"),
            "gamma_eff": gamma_eff,
            "residual_norm": r_norm,
        }
        for k in range(m):
            row[f"lambda_{k + 1}"] = lam[k]

        if not keep:
            row["seconds"] = time.perf_counter() - t0
            row["N"] = B.shape[1]
            row["modes_dropped"] = m
            report.rows.append(row)
            status = "manifold exhausted"
            break

        new_modes, dropped_orth = gram_schmidt(spec.modes[:, keep], ip, basis=B)
        B = np.hstack([B, new_modes])
        row["seconds"] = time.perf_counter() - t0
        row["N"] = B.shape[1]
        row["modes_dropped"] = (m - len(keep)) + dropped_orth
        report.rows.append(row)
        if config.keep_history:
            report.history.append(
                {"mu": mu_sel, "snapshot": u, "residual": r, "modes": new_modes, "lambda": lam}
            )

    report.status = status
    return ReducedBasis(B, ip), report
