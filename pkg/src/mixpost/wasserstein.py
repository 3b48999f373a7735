"""Exact r-th order Wasserstein distances between finitely supported measures.

The optimal coupling is found by solving the transportation linear program
with a simplex method (HiGHS dual simplex), which returns an exact vertex
optimum up to floating tolerance.  No entropic regularization is used, so
distances carry no smoothing bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import DimensionError, DomainError
from .measures import MixingMeasure, canonicalize

MARGINAL_TOL = 1e-8


def cost_matrix(g: MixingMeasure, h: MixingMeasure, r: float) -> np.ndarray:
    """Pairwise ground costs ||atom_i - atom_j||^r."""
    diff = g.atoms[:, None, :] - h.atoms[None, :, :]
    return np.linalg.norm(diff, axis=2) ** r


@dataclass(frozen=True)
class TransportPlan:
    """A coupling between two weight vectors: a nonnegative matrix whose row
    and column sums reproduce the prescribed marginals."""

    q: np.ndarray
    row_marginals: np.ndarray
    col_marginals: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        rows = np.asarray(self.row_marginals, dtype=float).ravel()
        cols = np.asarray(self.col_marginals, dtype=float).ravel()
        if q.shape != (rows.shape[0], cols.shape[0]):
            raise DimensionError(f"plan shape {q.shape} does not match marginals ({rows.shape[0]}, {cols.shape[0]})")
        if np.any(q < -MARGINAL_TOL):
            raise DomainError("plan entries must be nonnegative")
        q = np.maximum(q, 0.0)
        if np.max(np.abs(q.sum(axis=1) - rows)) > MARGINAL_TOL:
            raise DomainError(f"row sums deviate from marginals by more than {MARGINAL_TOL}")
        if np.max(np.abs(q.sum(axis=0) - cols)) > MARGINAL_TOL:
            raise DomainError(f"column sums deviate from marginals by more than {MARGINAL_TOL}")
        for name, arr in (("q", q), ("row_marginals", rows), ("col_marginals", cols)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class WassersteinResult:
    distance: float
    plan: TransportPlan
    r: float


def _solve_transport(row: np.ndarray, col: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Minimize <costs, q> over couplings of (row, col); returns the plan."""
    k, kp = costs.shape
    if k == 1:
        return col[None, :].copy()
    if kp == 1:
        return row[:, None].copy()
    # Equality constraints: all row sums and all but one column sum (the last
    # column constraint is implied, dropping it keeps the system full rank).
    data, rows_idx, cols_idx = [], [], []
    for i in range(k):
        for j in range(kp):
            v = i * kp + j
            rows_idx.append(i)
            cols_idx.append(v)
            data.append(1.0)
            if j < kp - 1:
                rows_idx.append(k + j)
                cols_idx.append(v)
                data.append(1.0)
    a_eq = sparse.csr_matrix((data, (rows_idx, cols_idx)), shape=(k + kp - 1, k * kp))
    b_eq = np.concatenate([row, col[:-1]])
    res = linprog(costs.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise DomainError(f"transportation LP failed: {res.message}")
    return res.x.reshape(k, kp)


def wasserstein(g: MixingMeasure, h: MixingMeasure, r: float = 2.0) -> WassersteinResult:
    """Exact r-th order Wasserstein distance between two mixing measures.

    Inputs are canonicalized (exact duplicate atoms merged) before solving.
    The returned plan attains ``distance**r == sum_ij q_ij ||a_i - b_j||^r``.

    Parameters
    ----------
    g, h : MixingMeasure
        Measures on the same parameter space.
    r : float
        Order of the distance, must satisfy r >= 1.
    """
    if g.dim != h.dim:
        raise DimensionError(f"dimension mismatch: {g.dim} vs {h.dim}")
    if not (np.isfinite(r) and r >= 1.0):
        raise DomainError(f"order r must satisfy r >= 1, got {r!r}")
    g = canonicalize(g)
    h = canonicalize(h)
    costs = cost_matrix(g, h, r)
    q = _solve_transport(g.weights, h.weights, costs)
    plan = TransportPlan(q=q, row_marginals=g.weights, col_marginals=h.weights)
    total = float(np.sum(plan.q * costs))
    return WassersteinResult(distance=float(max(total, 0.0) ** (1.0 / r)), plan=plan, r=float(r))


def bottleneck_match(g: MixingMeasure, g0: MixingMeasure) -> list[tuple[int, int, float]]:
    """For each atom of ``g0``, the nearest atom of ``g`` and their distance.

    Returns a list of (index into g, index into g0, Euclidean distance), one
    entry per atom of g0.  A diagnostic for checking that estimated atoms
    track reference atoms up to a permutation; ties go to the lowest index.
    """
    if g.dim != g0.dim:
        raise DimensionError(f"dimension mismatch: {g.dim} vs {g0.dim}")
    dists = np.linalg.norm(g.atoms[:, None, :] - g0.atoms[None, :, :], axis=2)
    out = []
    for j in range(g0.n_atoms):
        i = int(np.argmin(dists[:, j]))
        out.append((i, j, float(dists[i, j])))
    return out
