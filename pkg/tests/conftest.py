"""Shared test helpers: brute-force transport oracle and measure generators."""

from __future__ import annotations

import math

import numpy as np
import pytest

from mixpost import MixingMeasure


def exact_transport_cost(row_masses, col_masses, costs) -> float:
    """Minimum of sum_ij n_ij * costs[i][j] over all nonnegative integer
    tables with the given integer margins, by exhaustive enumeration.

    The transportation polytope with integer margins has integer vertices,
    so this equals the LP optimum over the polytope (in integer mass units).
    Branch-and-bound pruning keeps the search fast for margins totalling a
    few dozen units.
    """
    rows = [int(v) for v in row_masses]
    cols = [int(v) for v in col_masses]
    assert sum(rows) == sum(cols)
    k, kp = len(rows), len(cols)
    best = [math.inf]

    def fill_row(i: int, acc: float) -> None:
        if acc >= best[0]:
            return
        if i == k:
            best[0] = acc  # all column capacity consumed exactly
            return

        def comp(j: int, left: int, acc2: float) -> None:
            if acc2 >= best[0]:
                return
            if j == kp - 1:
                if left <= cols[j]:
                    cols[j] -= left
                    fill_row(i + 1, acc2 + left * costs[i][j])
                    cols[j] += left
                return
            for v in range(min(left, cols[j]) + 1):
                cols[j] -= v
                comp(j + 1, left - v, acc2 + v * costs[i][j])
                cols[j] += v

        comp(0, rows[i], acc)

    fill_row(0, 0.0)
    return best[0]


def oracle_wasserstein(atoms_g, masses_g, atoms_h, masses_h, denom: int, r: float) -> float:
    """Exact W_r between measures with weights masses/denom via enumeration."""
    atoms_g = np.atleast_2d(np.asarray(atoms_g, dtype=float))
    atoms_h = np.atleast_2d(np.asarray(atoms_h, dtype=float))
    costs = np.linalg.norm(atoms_g[:, None, :] - atoms_h[None, :, :], axis=2) ** r
    units = exact_transport_cost(masses_g, masses_h, costs.tolist())
    return (units / denom) ** (1.0 / r)


def random_rational_measure(rng, max_atoms: int = 6, denom: int = 8, dim: int = 2, spread: float = 3.0):
    """A measure with distinct atoms and weights a_i/denom, a_i >= 1."""
    k = int(rng.integers(1, max_atoms + 1))
    k = min(k, denom)
    cuts = rng.choice(np.arange(1, denom), size=k - 1, replace=False) if k > 1 else np.array([], dtype=int)
    bounds = np.concatenate([[0], np.sort(cuts), [denom]])
    masses = np.diff(bounds).astype(int)
    atoms = rng.uniform(-spread, spread, size=(k, dim))
    return MixingMeasure(atoms=atoms, weights=masses / denom), masses


def random_measure(rng, max_atoms: int = 6, dim: int = 2, spread: float = 3.0) -> MixingMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    atoms = rng.uniform(-spread, spread, size=(k, dim))
    w = rng.dirichlet(np.ones(k))
    return MixingMeasure(atoms=atoms, weights=w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
