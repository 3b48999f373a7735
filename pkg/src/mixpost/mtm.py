"""Merge-truncate-merge post-processing of discrete mixing measures.

Given a measure that is believed to sit within a radius ``omega`` of an
unknown reference measure with few atoms, :func:`mtm` collapses clusters of
nearby atoms (a weight-biased random merge), truncates atoms whose mass falls
below ``(c * omega)**r``, and reassigns the truncated mass, producing an
estimate of the reference measure and of its number of atoms.

Randomness is driven by numpy's PCG64 generator seeded from the config; for
per-draw seeds in sweeps use ``numpy.random.SeedSequence([master, index])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyMeasureError
from .measures import MixingMeasure


@dataclass(frozen=True)
class MtmConfig:
    """Inputs of the merge-truncate-merge pass.

    omega : merge radius and truncation rate, > 0
    c     : truncation tuning constant, > 0
    r     : cost order used in the thresholds, >= 1
    seed  : seed for the reordering randomness (64-bit unsigned)
    """

    omega: float
    c: float
    r: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise DomainError(f"omega must be positive, got {self.omega!r}")
        if not (np.isfinite(self.c) and self.c > 0):
            raise DomainError(f"c must be positive, got {self.c!r}")
        if not (np.isfinite(self.r) and self.r >= 1):
            raise DomainError(f"r must satisfy r >= 1, got {self.r!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class MtmResult:
    """Output of :func:`mtm`.

    ``merged_measure`` is the intermediate measure after the random merge
    stage, sorted by descending weight; ``g_tilde``'s atoms are a subset of
    its atoms.  ``fallback_atom_kept`` flags the degenerate case where the
    truncation threshold exceeded every weight and the single largest atom
    was retained instead of returning an empty measure.
    """

    g_tilde: MixingMeasure
    k_tilde: int
    merged_measure: MixingMeasure
    stage1_merge_count: int
    stage2_truncated_count: int
    stage2_demoted_count: int
    fallback_atom_kept: bool = False

    def __post_init__(self):
        if self.k_tilde != self.g_tilde.n_atoms:
            raise DomainError("k_tilde must equal the number of atoms of g_tilde")


def omega_n(n: int) -> float:
    """The vanishing rate sqrt(log(log n) / log n), natural logarithms.

    Requires n >= 3 so that log(log(n)) is positive.
    """
    if int(n) != n or n <= 2:
        raise DomainError(f"n must be an integer >= 3, got {n!r}")
    return math.sqrt(math.log(math.log(n)) / math.log(n))


def srswor_order(weights, seed) -> np.ndarray:
    """Random permutation by successive weighted sampling without replacement.

    Index ``j`` is drawn first with probability ``w_j / sum(w)``; each later
    position is drawn from the remaining indices with probability proportional
    to weight.  Implemented with the exponential-race equivalence: sort the
    keys ``E_i / w_i`` with ``E_i`` iid standard exponentials, which yields
    exactly that law.  Zero-weight indices come last, in index order.

    ``seed`` may be anything accepted by ``numpy.random.default_rng``,
    including an existing Generator.
    """
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be a nonempty vector of finite nonnegative reals")
    if not np.any(w > 0):
        raise EmptyMeasureError("all weights are zero")
    rng = np.random.default_rng(seed)
    keys = np.full(w.shape, np.inf)
    pos = w > 0
    keys[pos] = rng.exponential(size=int(pos.sum())) / w[pos]
    return np.argsort(keys, kind="stable")


def mtm(g: MixingMeasure, cfg: MtmConfig) -> MtmResult:
    """Run the merge-truncate-merge pass on a mixing measure.

    Stage 1 reorders the atoms by weighted sampling without replacement, then
    walks the new order: an atom within distance ``omega`` of an earlier kept
    atom donates its weight to the earliest such atom and is dropped.  The
    survivors, sorted by descending weight (ties broken by stage-1 order),
    form the intermediate measure.

    Stage 2 keeps the index set ``A = {i : q_i > (c*omega)**r}``.  Scanning
    ``A`` in descending-weight order, atom ``i`` is demoted if some remaining
    ``j in A`` with ``j < i`` satisfies ``q_i * ||phi_i - phi_j||**r <=
    (c*omega)**r``.  Every non-surviving atom finally donates its weight to
    the nearest surviving atom (ties to the lowest surviving index).
    """
    if g.n_atoms == 0:
        raise EmptyMeasureError("input measure has no atoms")
    rng = np.random.default_rng(cfg.seed)

    # Stage 1: probabilistic merge.
    perm = srswor_order(g.weights, rng)
    atoms = g.atoms[perm]
    w = g.weights[perm]
    kept: list[int] = []
    acc: list[float] = []
    merges = 0
    for j in range(len(w)):
        target = -1
        for slot, i in enumerate(kept):
            if np.linalg.norm(atoms[j] - atoms[i]) <= cfg.omega:
                target = slot
                break
        if target >= 0:
            acc[target] += w[j]
            merges += 1
        else:
            kept.append(j)
            acc.append(float(w[j]))
    kept_idx = np.array(kept, dtype=int)
    q = np.array(acc)
    order = np.lexsort((np.arange(len(q)), -q))  # descending weight, stable
    phi = atoms[kept_idx][order]
    q = q[order]
    merged = MixingMeasure(atoms=phi, weights=q / q.sum())

    # Stage 2: truncate, demote, and reassign.
    threshold = (cfg.c * cfg.omega) ** cfg.r
    in_a = q > threshold
    truncated = int(np.sum(~in_a))
    demoted = 0
    for i in range(len(q)):
        if not in_a[i]:
            continue
        for j in range(i):
            if in_a[j] and q[i] * np.linalg.norm(phi[i] - phi[j]) ** cfg.r <= threshold:
                in_a[i] = False
                demoted += 1
                break
    fallback = False
    if not np.any(in_a):
        # Undefined corner: every weight fell below the threshold.  Keep the
        # single heaviest atom rather than emit an empty measure.
        in_a[0] = True
        truncated -= 1
        fallback = True

    surv = np.flatnonzero(in_a)
    q_final = q[surv].copy()
    for i in np.flatnonzero(~in_a):
        dists = np.linalg.norm(phi[surv] - phi[i], axis=1)
        q_final[int(np.argmin(dists))] += q[i]

    g_tilde = MixingMeasure(atoms=phi[surv], weights=q_final / q_final.sum())
    return MtmResult(
        g_tilde=g_tilde,
        k_tilde=len(surv),
        merged_measure=merged,
        stage1_merge_count=merges,
        stage2_truncated_count=truncated,
        stage2_demoted_count=demoted,
        fallback_atom_kept=fallback,
    )


def mtm_guard_conditions(g0: MixingMeasure, omega: float, delta: float, r: float) -> dict[str, bool]:
    """Sufficient conditions on (omega, delta) for the recovery guarantees.

    Evaluated against a reference measure ``g0``: the merge radius must be
    small relative to the minimum weight and the atom separation, and delta
    must be small relative to the minimum weight and the atom count.  These
    are sufficient, not necessary; callers use them as guards when choosing
    test constants.
    """
    k0 = g0.n_atoms
    p_min = float(np.min(g0.weights))
    dists = np.linalg.norm(g0.atoms[:, None, :] - g0.atoms[None, :, :], axis=2)
    min_sep = float(np.min(dists[~np.eye(k0, dtype=bool)])) if k0 > 1 else np.inf
    return {
        "merge_radius_ok": omega < min((p_min / 2.0) ** (1.0 / r), min_sep / 8.0),
        "merge_mass_ok": math.sqrt(delta) < p_min / (2.0 * k0),
        "truncate_radius_ok": omega < 7.0 * p_min * min_sep / 16.0,
        "truncate_mass_ok": math.sqrt(delta) < p_min / (2.0 * k0 * (k0 + 2.0)),
    }


def merge_success_bound(g0_weights, delta: float, r: float) -> float:
    """Lower bound on the probability that the random merge stage succeeds:
    ``1 - delta**(r/2) * sum_i 1/w_i`` (may be negative for large delta)."""
    w = np.asarray(g0_weights, dtype=float)
    return float(1.0 - delta ** (r / 2.0) * np.sum(1.0 / w))


def recovery_constant(g0: MixingMeasure, diameter: float, r: float) -> float:
    """The factor C in the post-processing error bound C * sqrt(delta) * omega:
    ``(1 + 4*(2*diameter/min_sep)**r)**(1/r) * (k0 + 2)``."""
    k0 = g0.n_atoms
    dists = np.linalg.norm(g0.atoms[:, None, :] - g0.atoms[None, :, :], axis=2)
    min_sep = float(np.min(dists[~np.eye(k0, dtype=bool)]))
    return float((1.0 + 4.0 * (2.0 * diameter / min_sep) ** r) ** (1.0 / r) * (k0 + 2))
