"""End-to-end simulation study: synthetic three-component Gaussian data,
posterior sampling with the DP mixture chain, and a sweep of the
merge-truncate-merge constant ``c`` over the retained draws.

Seed discipline: a single master seed drives everything.  The dataset seed
and the per-draw post-processing seeds are derived through
``numpy.random.SeedSequence(entropy=master, spawn_key=...)`` so that results
are reproducible while per-draw randomness stays independent.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .dpmm import ChainConfig, DpmmModel, run_chain
from .errors import DomainError
from .measures import BoxDomain, GaussianKernel, MixingMeasure
from .mtm import MtmConfig, mtm, omega_n

FREQ_SUM_TOL = 1e-9

_CASES = {
    "A": (np.array([[0.8, 0.8], [0.8, -0.8], [-0.8, 0.8]]), 0.05, 500),
    "B": (np.array([[0.8, 0.8], [0.8, -0.8], [-0.8, 0.8]]), 0.05, 1500),
    "C": (np.array([[1.8, 1.8], [1.8, -1.8], [-1.8, 1.8]]), 0.05, 500),
    "D": (np.array([[0.8, 0.8], [0.8, -0.8], [-0.8, 0.8]]), 0.01, 1500),
}

DEFAULT_BOX = BoxDomain(lower=np.array([-6.0, -6.0]), upper=np.array([6.0, 6.0]))
DEFAULT_ALPHA = 1.0
DEFAULT_C_VALUES = (0.45, 0.5, 0.55, 1.0)


@dataclass(frozen=True)
class ExperimentCase:
    """One synthetic-data configuration: three Gaussian components in the
    plane with a shared isotropic covariance."""

    name: str
    means: np.ndarray
    cov_scale: float
    weights: np.ndarray
    n: int

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if means.shape[0] != weights.shape[0]:
            raise DomainError("one weight per component mean required")
        if not (self.cov_scale > 0 and self.n >= 1):
            raise DomainError("require cov_scale > 0 and n >= 1")
        if abs(weights.sum() - 1.0) > FREQ_SUM_TOL:
            raise DomainError("component weights must sum to 1")
        means = np.array(means)
        weights = np.array(weights)
        means.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def by_name(cls, name: str) -> "ExperimentCase":
        key = name.upper()
        if key not in _CASES:
            raise DomainError(f"unknown case {name!r}; choose one of {sorted(_CASES)}")
        means, cov_scale, n = _CASES[key]
        return cls(name=key, means=means, cov_scale=cov_scale, weights=np.array([0.4, 0.3, 0.3]), n=n)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def kernel(self) -> GaussianKernel:
        return GaussianKernel.isotropic(self.cov_scale, self.dim)

    def true_measure(self) -> MixingMeasure:
        return MixingMeasure(atoms=self.means, weights=self.weights)


@dataclass(frozen=True)
class CaseData:
    points: np.ndarray
    labels: np.ndarray


def generate_case_data(case: ExperimentCase, seed) -> CaseData:
    """n iid draws from the case's Gaussian mixture, with component labels."""
    rng = np.random.default_rng(seed)
    labels = rng.choice(case.means.shape[0], size=case.n, p=case.weights)
    noise = rng.standard_normal((case.n, case.dim)) * np.sqrt(case.cov_scale)
    return CaseData(points=case.means[labels] + noise, labels=labels)


@dataclass(frozen=True)
class MfmPrior:
    """Forward model for a finite mixture with a random component count:
    K ~ q_k, weights ~ Dirichlet(gamma/K, ..., gamma/K), atoms iid uniform."""

    q_k: dict[int, float]
    gamma: float
    base: BoxDomain

    def __post_init__(self):
        if not self.q_k:
            raise DomainError("q_k must be a nonempty pmf over positive integers")
        ks = sorted(self.q_k)
        probs = np.array([self.q_k[k] for k in ks], dtype=float)
        if ks[0] < 1 or any(int(k) != k for k in ks):
            raise DomainError("q_k support must be positive integers")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > FREQ_SUM_TOL:
            raise DomainError("q_k must be nonnegative and sum to 1")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError("gamma must be positive")
        object.__setattr__(self, "q_k", dict(self.q_k))

    @classmethod
    def with_poisson_k(cls, rate: float, gamma: float, base: BoxDomain, kmax: int = 40) -> "MfmPrior":
        """q_k proportional to a Poisson(rate) pmf conditioned on k >= 1,
        renormalized over 1..kmax."""
        ks = np.arange(1, kmax + 1)
        logp = ks * np.log(rate) - rate - np.array([np.sum(np.log(np.arange(1, k + 1))) for k in ks])
        p = np.exp(logp - logp.max())
        p /= p.sum()
        return cls(q_k={int(k): float(v) for k, v in zip(ks, p)}, gamma=gamma, base=base)


def mfm_forward_sample(prior: MfmPrior, seed) -> MixingMeasure:
    """One measure from the forward model: count, Dirichlet weights, atoms."""
    rng = np.random.default_rng(seed)
    ks = sorted(prior.q_k)
    probs = np.array([prior.q_k[k] for k in ks])
    k = int(rng.choice(ks, p=probs / probs.sum()))
    weights = rng.dirichlet(np.full(k, prior.gamma / k))
    atoms = prior.base.sample(rng, k)
    return MixingMeasure(atoms=atoms, weights=weights)


def posterior_mode_bound(g0_weights, c: float) -> float:
    """Lower bound ``1 - sum_i c / w_i`` on the frequency mass at the modal
    component count; may be negative, in which case it is uninformative."""
    w = np.asarray(g0_weights, dtype=float)
    if np.any(w <= 0) or c < 0:
        raise DomainError("weights must be positive and c nonnegative")
    return float(1.0 - np.sum(c / w))


@dataclass(frozen=True)
class FrequencyTable:
    """Relative frequencies of the post-processed component count per value
    of ``c``, next to the raw (pre-processing) support-size frequencies."""

    by_c: dict[float, dict[int, float]]
    raw: dict[int, float]

    def __post_init__(self):
        for c, freqs in self.by_c.items():
            total = sum(freqs.values())
            if abs(total - 1.0) > FREQ_SUM_TOL:
                raise DomainError(f"frequencies for c={c} sum to {total}, not 1")
        if self.raw and abs(sum(self.raw.values()) - 1.0) > FREQ_SUM_TOL:
            raise DomainError("raw frequencies must sum to 1")

    def mode(self, c: float) -> int:
        freqs = self.by_c[c]
        # Highest frequency wins; ties go to the smaller count.
        return min(sorted(freqs), key=lambda k: (-freqs[k], k))

    def raw_mode(self) -> int:
        return min(sorted(self.raw), key=lambda k: (-self.raw[k], k))

    def write_frequencies_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["c", "k", "frequency"])
            for c in sorted(self.by_c):
                for k in sorted(self.by_c[c]):
                    writer.writerow([c, k, self.by_c[c][k]])

    def write_raw_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "frequency"])
            for k in sorted(self.raw):
                writer.writerow([k, self.raw[k]])


def _tabulate(values) -> dict[int, float]:
    values = np.asarray(values, dtype=int)
    out: dict[int, float] = {}
    for v, count in zip(*np.unique(values, return_counts=True)):
        out[int(v)] = float(count / len(values))
    return out


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed from a master seed and an index path."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def apply_mtm_sweep(
    draws: list[MixingMeasure],
    omega: float,
    c_values,
    r: float,
    master_seed: int,
) -> FrequencyTable:
    """Post-process every draw at each ``c`` and tabulate component counts.

    Each draw gets its own seed (derived from the master seed and the draw
    index) shared across the ``c`` sweep, so the random merge stage is common
    and only the truncation threshold varies with ``c``.
    """
    if not draws:
        raise DomainError("no draws to post-process")
    seeds = [derive_seed(master_seed, 1, idx) for idx in range(len(draws))]
    by_c: dict[float, dict[int, float]] = {}
    for c in c_values:
        counts = [
            mtm(draw, MtmConfig(omega=omega, c=float(c), r=r, seed=seed)).k_tilde
            for draw, seed in zip(draws, seeds)
        ]
        by_c[float(c)] = _tabulate(counts)
    raw = _tabulate([draw.n_atoms for draw in draws])
    return FrequencyTable(by_c=by_c, raw=raw)


def replicate(
    case: ExperimentCase,
    c_values,
    chain: ChainConfig,
    *,
    r: float = 2.0,
    alpha: float = DEFAULT_ALPHA,
    base: BoxDomain = DEFAULT_BOX,
    data: CaseData | None = None,
) -> FrequencyTable:
    """Run the full pipeline for one case: data, chain, post-processing sweep.

    The chain seed acts as the master seed: the dataset seed and per-draw
    post-processing seeds are derived from it, so the result is a
    deterministic function of (case, c_values, chain).  ``data`` may be
    supplied to reuse a pre-generated dataset.
    """
    if data is None:
        data = generate_case_data(case, derive_seed(chain.seed, 0))
    model = DpmmModel(alpha=alpha, base=base, kernel=case.kernel(), data=data.points)
    draws = run_chain(model, chain)
    return apply_mtm_sweep(draws, omega_n(case.n), c_values, r, chain.seed)


def write_results(
    outdir,
    table: FrequencyTable,
    manifest: dict,
    draws: list[MixingMeasure] | None = None,
) -> None:
    """Persist a frequency table (and optionally the raw draws) to a directory."""
    import os

    os.makedirs(outdir, exist_ok=True)
    table.write_frequencies_csv(os.path.join(outdir, "frequencies.csv"))
    table.write_raw_csv(os.path.join(outdir, "raw_frequencies.csv"))
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    if draws is not None:
        for idx, draw in enumerate(draws):
            draw.save(os.path.join(outdir, f"draw_{idx:05d}.json"))
