"""Snapshot correlation operator and its leading eigen-pairs (POD modes).

For a trajectory v the correlation operator acts on w in V as

    C_v(w) = sum_j tau * <v^j, w> v^j,

i.e. tau * R (R^T G w) with R the snapshot matrix.  Its spectrum is
computed through the SVD of S = sqrt(tau) * F R (G = F^T F): eigenvalues
are the squared singular values and mode k is F^{-1} applied to the k-th
left singular vector, which makes the modes G-orthonormal by construction.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation

__all__ = [
    "CorrelationSpectrum",
    "correlation_apply",
    "pod_modes",
    "spectrum_total",
    "DEGENERATE_CUTOFF",
]

# eigenvalues below this (relative to max(lambda_1, 1)) are rank noise
DEGENERATE_CUTOFF = 1e-14


@dataclass(frozen=True)
class CorrelationSpectrum:
    """Leading eigen-pairs, eigenvalues non-increasing and clamped at zero.

    The trailing n_degenerate modes are arbitrary G-orthonormal completions
    paired with exact-zero eigenvalues (rank deficiency).  raw_eigenvalues
    keeps the squared singular values before the rank cutoff zeroes the
    tail; reports log those.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    n_degenerate: int = 0
    raw_eigenvalues: np.ndarray = None

    @property
    def degenerate(self):
        return self.n_degenerate > 0


def correlation_apply(v, w, ip):
    """C_v(w) in coefficient space: tau * R (R^T G w)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (v.dim,):
        raise ContractViolation(f"vector of dim {w.shape} against trajectory dim {v.dim}")
    if v.dim != ip.dim:
        raise ContractViolation(f"inner product expects dim {ip.dim}, got {v.dim}")
    R = v.values
    return v.grid.tau * (R @ (R.T @ ip.apply(w)))


def _fix_signs(modes):
    # deterministic sign: largest-magnitude entry of each mode is positive
    for k in range(modes.shape[1]):
        col = modes[:, k]
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            modes[:, k] = -col
    return modes


def _complete_orthonormal(modes, ip, count, dim):
    """Deterministic G-orthonormal completion from canonical directions."""
    extra = []
    for i in range(dim):
        if len(extra) == count:
            break
        w = np.zeros(dim)
        w[i] = 1.0
        for _ in range(2):
            if modes.shape[1]:
                w = w - modes @ (modes.T @ ip.apply(w))
            for q in extra:
                w = w - q * ip.inner(q, w)
        nrm = ip.norm(w)
        if nrm > 1e-8:
            extra.append(w / nrm)
    if len(extra) < count:
        raise ContractViolation("cannot complete basis: space exhausted")
    return np.column_stack([modes] + extra) if modes.size else np.column_stack(extra)


def pod_modes(v, ip, m):
    """The m leading eigen-pairs of C_v.

    Rank-deficient trajectories are padded: trailing eigenvalues come back
    as exact zeros with completion modes, and n_degenerate is set.
    """
    if m < 1 or m > v.grid.n_nodes:
        raise ContractViolation(f"need 1 <= m <= J+1 = {v.grid.n_nodes}, got {m}")
    if v.dim != ip.dim:
        raise ContractViolation(f"inner product expects dim {ip.dim}, got {v.dim}")
    S = np.sqrt(v.grid.tau) * (ip.F @ v.values)
    U, s, _ = sla.svd(S, full_matrices=False)
    lam_all = s**2
    lam1 = lam_all[0] if lam_all.size else 0.0

    # relative rank cutoff; the absolute floor only guards lambda_1 == 0
    cutoff = DEGENERATE_CUTOFF * lam1 if lam1 > 0 else DEGENERATE_CUTOFF
    rank = int(np.sum(lam_all >= cutoff))
    n_keep = min(m, rank)

    lam = np.zeros(m)
    lam[:n_keep] = lam_all[:n_keep]
    raw = np.zeros(m)
    raw[: min(m, lam_all.size)] = lam_all[: min(m, lam_all.size)]
    if n_keep:
        modes = _fix_signs(ip.solve_F(U[:, :n_keep]))
    else:
        modes = np.zeros((v.dim, 0))
    n_degenerate = m - n_keep
    if n_degenerate:
        modes = _fix_signs(_complete_orthonormal(modes, ip, n_degenerate, v.dim))

    _check_eigen_residual(v, ip, lam[:n_keep], modes[:, :n_keep], lam1)
    return CorrelationSpectrum(lam, modes, n_degenerate, raw)


def _check_eigen_residual(v, ip, lam, modes, lam1):
    if lam.size == 0:
        return
    R = v.values
    CF = v.grid.tau * (R @ (R.T @ ip.apply(modes)))
    resid = CF - modes * lam[None, :]
    err = np.sqrt(np.sum((ip.F @ resid) ** 2, axis=0)).max()
    if err > 1e-8 * lam1:
        raise ContractViolation(f"eigen-pair residual {err:.3e} exceeds 1e-8 * lambda_1")


def spectrum_total(v, ip):
    """Sum of all eigenvalues of C_v (trace of the reduced operator).

    Equals the squared space-time norm of v.
    """
    s = sla.svdvals(ip.F @ v.values)
    return v.grid.tau * float(np.sum(s**2))
