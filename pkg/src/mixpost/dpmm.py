"""MCMC for a Dirichlet-process location-Gaussian mixture on a box domain.

The model: cluster locations drawn iid from a uniform base measure on an
axis-aligned box, observations Gaussian around their cluster location with a
fixed shared covariance, and a Chinese-restaurant-process partition prior with
concentration ``alpha``.  The chain interleaves

* per-point Gibbs scans using auxiliary-parameter proposals for the
  new-cluster case (``m_aux`` fresh draws from the base measure), followed by
  reflected random-walk updates of each cluster location, and
* split-merge Metropolis-Hastings moves built from restricted Gibbs launch
  states, with cluster-location proposals drawn from the exact Gaussian
  conditional of the location given its members (an unconstrained draw; a
  proposal landing outside the box has zero posterior density and the move is
  rejected).

Setting ``kernel=None`` on the model replaces the likelihood by a constant,
so the chain targets the partition prior exactly; this is used to validate
the samplers against closed-form partition laws.

A chain is single-threaded and owns its state; run chains with distinct seeds
for parallel sweeps.  Emitted measures are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .measures import BoxDomain, GaussianKernel, MixingMeasure

DEFAULT_M_AUX = 3
DEFAULT_RW_SD = 0.1
DEFAULT_LOCATION_UPDATES = 5


@dataclass(frozen=True)
class DpmmModel:
    """Data plus prior: concentration, uniform base box, fixed-covariance
    Gaussian kernel (or ``None`` for a likelihood-free prior chain)."""

    alpha: float
    base: BoxDomain
    kernel: GaussianKernel | None
    data: np.ndarray

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"alpha must be positive, got {self.alpha!r}")
        if data.shape[0] < 1:
            raise DomainError("data must contain at least one observation")
        if data.shape[1] != self.base.dim:
            raise DimensionError(f"data dimension {data.shape[1]} != base dimension {self.base.dim}")
        if self.kernel is not None and self.kernel.dim != data.shape[1]:
            raise DimensionError(f"kernel dimension {self.kernel.dim} != data dimension {data.shape[1]}")
        data = np.array(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def loglik(self, theta, xs: np.ndarray) -> np.ndarray:
        """log f(x | theta) for the rows of xs (zeros when likelihood-free)."""
        if self.kernel is None:
            return np.zeros(np.atleast_2d(xs).shape[0])
        return np.atleast_1d(self.kernel.log_density(theta, np.atleast_2d(xs)))

    def loglik_sum(self, theta, xs: np.ndarray) -> float:
        if self.kernel is None or xs.shape[0] == 0:
            return 0.0
        return float(np.sum(self.kernel.log_density(theta, xs)))


@dataclass
class DpmmState:
    """Cluster labels (dense, 0..k-1), per-label locations, iteration count."""

    assignments: np.ndarray
    cluster_params: np.ndarray
    iteration: int = 0

    def copy(self) -> "DpmmState":
        return DpmmState(
            assignments=self.assignments.copy(),
            cluster_params=self.cluster_params.copy(),
            iteration=self.iteration,
        )

    @property
    def n_clusters(self) -> int:
        return self.cluster_params.shape[0]

    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.n_clusters)

    def validate(self, model: DpmmModel) -> None:
        counts = self.counts()
        if self.assignments.shape[0] != model.n:
            raise DomainError("one label per observation required")
        if np.any(counts == 0):
            raise DomainError("empty cluster in state")
        if self.assignments.min() < 0 or self.assignments.max() >= self.n_clusters:
            raise DomainError("labels must be dense integers into cluster_params")
        for c in range(self.n_clusters):
            if not model.base.contains(self.cluster_params[c]):
                raise DomainError(f"cluster {c} location outside the base box")

    def to_measure(self) -> MixingMeasure:
        counts = self.counts()
        return MixingMeasure(atoms=self.cluster_params, weights=counts / counts.sum())


@dataclass(frozen=True)
class ChainConfig:
    """Chain length and move schedule.

    ``scheme`` is (restricted scans building a split launch state, split-merge
    moves per iteration, Gibbs scans per iteration, moves building a merge
    launch state).  The fourth entry is accepted for interface fidelity but
    has no effect here: merged-location proposals are drawn from the exact
    conditional of the location given all merged members, which launch
    refinement cannot improve on.
    """

    burn_in: int
    iterations: int
    thin: int = 1
    scheme: tuple[int, int, int, int] = (5, 1, 1, 5)
    seed: int = 0
    m_aux: int = DEFAULT_M_AUX
    rw_sd: float = DEFAULT_RW_SD
    location_updates: int = DEFAULT_LOCATION_UPDATES

    def __post_init__(self):
        if self.burn_in < 0 or self.iterations <= 0 or self.thin < 1:
            raise DomainError("require burn_in >= 0, iterations > 0, thin >= 1")
        if len(self.scheme) != 4 or any(int(s) != s or s < 0 for s in self.scheme):
            raise DomainError("scheme must be four nonnegative integers")
        if self.m_aux < 1 or self.location_updates < 0 or self.rw_sd <= 0:
            raise DomainError("require m_aux >= 1, location_updates >= 0, rw_sd > 0")


def initial_state(model: DpmmModel) -> DpmmState:
    """Everything in one cluster located at the data mean, clamped to the box."""
    center = model.base.clamp(model.data.mean(axis=0))
    return DpmmState(
        assignments=np.zeros(model.n, dtype=np.int64),
        cluster_params=center[None, :].copy(),
        iteration=0,
    )


def _categorical(logw: list[float], rng: np.random.Generator) -> int:
    m = max(logw)
    probs = [math.exp(v - m) for v in logw]
    target = rng.random() * sum(probs)
    acc = 0.0
    for idx, p in enumerate(probs):
        acc += p
        if target < acc:
            return idx
    return len(probs) - 1


def _distinct_pair(n: int, rng: np.random.Generator) -> tuple[int, int]:
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    return i, j


def gibbs_scan(
    state: DpmmState,
    model: DpmmModel,
    rng: np.random.Generator,
    *,
    m_aux: int = DEFAULT_M_AUX,
    rw_sd: float = DEFAULT_RW_SD,
    location_updates: int = DEFAULT_LOCATION_UPDATES,
) -> DpmmState:
    """One sweep: resample every assignment, then update every location.

    Assignments are resampled from the restaurant-process conditional with
    ``m_aux`` auxiliary location proposals standing in for unseen clusters
    (the current location is recycled as the first auxiliary when the point
    sits in a singleton).  Locations then take ``location_updates`` reflected
    Gaussian random-walk steps each, which leaves the location conditional
    (a Gaussian truncated to the box) invariant.
    """
    n, d = model.n, model.dim
    assign = state.assignments.copy()
    params = [state.cluster_params[c].copy() for c in range(state.n_clusters)]
    counts = list(np.bincount(assign, minlength=len(params)))
    loglik = [model.loglik(p, model.data) for p in params]  # per-cluster columns

    aux_all = model.base.sample(rng, n * m_aux).reshape(n, m_aux, d)
    if model.kernel is None:
        aux_ll_all = np.zeros((n, m_aux))
    else:
        rep = np.repeat(model.data, m_aux, axis=0)
        aux_ll_all = model.kernel.log_density_rowwise(aux_all.reshape(-1, d), rep).reshape(n, m_aux)

    log_alpha_m = math.log(model.alpha / m_aux)
    for i in range(n):
        c = int(assign[i])
        counts[c] -= 1
        singleton = counts[c] == 0
        aux_params = aux_all[i]
        aux_ll = aux_ll_all[i]
        if singleton:
            aux_params = aux_params.copy()
            aux_ll = aux_ll.copy()
            aux_params[0] = params[c]
            aux_ll[0] = loglik[c][i]
        k = len(params)
        logw = [
            math.log(counts[c2]) + loglik[c2][i] if counts[c2] else -math.inf
            for c2 in range(k)
        ]
        logw.extend(log_alpha_m + aux_ll[t] for t in range(m_aux))
        pick = _categorical(logw, rng)
        if pick < k:
            assign[i] = pick
            counts[pick] += 1
            if singleton:
                # Old cluster died: compact labels by moving the last in.
                last = k - 1
                if c != last:
                    params[c] = params[last]
                    counts[c] = counts[last]
                    loglik[c] = loglik[last]
                    assign[assign == last] = c
                params.pop()
                counts.pop()
                loglik.pop()
        else:
            chosen = aux_params[pick - k].copy()
            if singleton:
                params[c] = chosen
                loglik[c] = model.loglik(chosen, model.data)
                assign[i] = c
                counts[c] = 1
            else:
                params.append(chosen)
                loglik.append(model.loglik(chosen, model.data))
                counts.append(1)
                assign[i] = k

    # Location updates: reflected random walk, Metropolis-corrected (the
    # reflection map is an involution, so the proposal stays symmetric).
    # With the likelihood disabled the conditional is the base measure
    # itself, so the location is redrawn from it directly.
    if location_updates > 0:
        for c in range(len(params)):
            if model.kernel is None:
                params[c] = model.base.sample(rng)
                continue
            members = model.data[assign == c]
            theta = params[c]
            cur_ll = model.loglik_sum(theta, members)
            for _ in range(location_updates):
                prop = model.base.reflect(theta + rng.normal(0.0, rw_sd, size=d))
                prop_ll = model.loglik_sum(prop, members)
                if math.log(rng.random()) < prop_ll - cur_ll:
                    theta, cur_ll = prop, prop_ll
            params[c] = theta

    return DpmmState(
        assignments=assign,
        cluster_params=np.array(params),
        iteration=state.iteration + 1,
    )


def _location_draw(model: DpmmModel, members: np.ndarray, rng) -> np.ndarray:
    """Draw from the location conditional given members, ignoring the box."""
    if model.kernel is None:
        return model.base.sample(rng)
    m = members.shape[0]
    z = rng.standard_normal(model.dim)
    return members.mean(axis=0) + (model.kernel.chol @ z) / math.sqrt(m)


def _location_logpdf(model: DpmmModel, members: np.ndarray, theta) -> float:
    """Density of :func:`_location_draw` at ``theta``."""
    if model.kernel is None:
        return -math.log(model.base.volume)
    m = members.shape[0]
    quad = float(model.kernel.mahalanobis_sq(members.mean(axis=0), np.atleast_2d(theta))[0])
    return model.kernel.log_norm_const + 0.5 * model.dim * math.log(m) - 0.5 * m * quad


def _draw_in_box(model: DpmmModel, members: np.ndarray, rng) -> np.ndarray:
    # Rejection into the box; used only while constructing launch states.
    theta = _location_draw(model, members, rng)
    for _ in range(1000):
        if model.base.contains(theta):
            return theta
        theta = _location_draw(model, members, rng)
    return model.base.clamp(theta)


def _restricted_scan(model, s_idx, start_side, phi, rng=None, target_side=None):
    """One restricted Gibbs pass over ``s_idx`` between two pinned clusters.

    ``start_side`` holds 0/1 flags aligned with ``s_idx`` (side 0 is the
    cluster pinned to the first anchor observation, side 1 to the second;
    each anchor contributes one permanent count).  Items are visited in
    order; unvisited items keep their ``start_side`` when counting.  If
    ``target_side`` is given the pass evaluates the probability of realizing
    it; otherwise new sides are sampled with ``rng``.  Returns (sides, log
    probability of the realized pass).
    """
    if len(s_idx) == 0:
        return start_side.copy(), 0.0
    if model.kernel is None:
        ll0 = ll1 = None
    else:
        xs = model.data[s_idx]
        ll0 = model.loglik(phi[0], xs).tolist()
        ll1 = model.loglik(phi[1], xs).tolist()
    sides = start_side.tolist()
    target = target_side.tolist() if target_side is not None else None
    n0 = 1 + sides.count(0)
    n1 = 1 + len(sides) - (n0 - 1)
    logq = 0.0
    for t in range(len(sides)):
        if sides[t] == 0:
            n0 -= 1
        else:
            n1 -= 1
        if ll0 is None:
            p0 = n0 / (n0 + n1)
        else:
            a = math.log(n0) + ll0[t]
            b = math.log(n1) + ll1[t]
            m = a if a > b else b
            pa = math.exp(a - m)
            p0 = pa / (pa + math.exp(b - m))
        choose0 = (target[t] == 0) if target is not None else (rng.random() < p0)
        if choose0:
            sides[t] = 0
            n0 += 1
            logq += math.log(p0)
        else:
            sides[t] = 1
            n1 += 1
            logq += math.log1p(-p0)
    return np.array(sides, dtype=np.int64), logq


def _build_split_launch(model, s_idx, i, j, t_scans, rng):
    """Launch state for a split: random halves refined by restricted scans.

    The construction depends only on (i, j, s_idx) and fresh randomness, never
    on the current clustering, so the same procedure serves both proposal
    directions.
    """
    side = rng.integers(0, 2, size=len(s_idx))
    if model.kernel is None:
        # Launch locations never enter the count-only scan probabilities.
        for _ in range(t_scans):
            side, _ = _restricted_scan(model, s_idx, side, None, rng=rng)
        return side, None
    phi = [
        _draw_in_box(model, model.data[[i]], rng),
        _draw_in_box(model, model.data[[j]], rng),
    ]
    for _ in range(t_scans):
        side, _ = _restricted_scan(model, s_idx, side, phi, rng=rng)
        phi[0] = _draw_in_box(model, model.data[np.append(s_idx[side == 0], i)], rng)
        phi[1] = _draw_in_box(model, model.data[np.append(s_idx[side == 1], j)], rng)
    return side, phi


def _log_base_density(model: DpmmModel, theta) -> float:
    if not model.base.contains(theta):
        return -math.inf
    return -math.log(model.base.volume)


def split_log_acceptance(
    model: DpmmModel,
    phi_c,
    xa: np.ndarray,
    xb: np.ndarray,
    phi_a,
    phi_b,
    logq_alloc: float,
) -> float:
    """log Metropolis-Hastings ratio for splitting one cluster in two.

    ``phi_c`` is the current merged location; ``xa``/``xb`` the proposed
    member data of the two halves with proposed locations ``phi_a``/``phi_b``;
    ``logq_alloc`` the log probability of the allocation scan that produced
    the halves.  Exposed separately so the ratio can be evaluated directly.
    """
    log_base = _log_base_density(model, phi_a) + _log_base_density(model, phi_b)
    if not math.isfinite(log_base):
        return -math.inf
    x_all = np.concatenate([xa, xb])
    log_prior = (
        math.log(model.alpha)
        + math.lgamma(xa.shape[0])
        + math.lgamma(xb.shape[0])
        - math.lgamma(x_all.shape[0])
        + log_base
        - _log_base_density(model, phi_c)
    )
    log_lik = (
        model.loglik_sum(phi_a, xa)
        + model.loglik_sum(phi_b, xb)
        - model.loglik_sum(phi_c, x_all)
    )
    log_fwd = logq_alloc + _location_logpdf(model, xa, phi_a) + _location_logpdf(model, xb, phi_b)
    log_rev = _location_logpdf(model, x_all, phi_c)
    return log_prior + log_lik + log_rev - log_fwd


def merge_log_acceptance(
    model: DpmmModel,
    phi_i,
    phi_j,
    xi: np.ndarray,
    xj: np.ndarray,
    phi_m,
    logq_alloc_rev: float,
) -> float:
    """log Metropolis-Hastings ratio for merging two clusters into one.

    ``phi_i``/``phi_j`` are the current locations with member data ``xi`` and
    ``xj``; ``phi_m`` the proposed merged location; ``logq_alloc_rev`` the log
    probability that the reverse split's allocation scan reproduces the
    current halves.
    """
    log_base_m = _log_base_density(model, phi_m)
    if not math.isfinite(log_base_m):
        return -math.inf
    x_all = np.concatenate([xi, xj])
    log_prior = (
        -math.log(model.alpha)
        + math.lgamma(x_all.shape[0])
        - math.lgamma(xi.shape[0])
        - math.lgamma(xj.shape[0])
        + log_base_m
        - _log_base_density(model, phi_i)
        - _log_base_density(model, phi_j)
    )
    log_lik = (
        model.loglik_sum(phi_m, x_all)
        - model.loglik_sum(phi_i, xi)
        - model.loglik_sum(phi_j, xj)
    )
    log_fwd = _location_logpdf(model, x_all, phi_m)
    log_rev = (
        logq_alloc_rev
        + _location_logpdf(model, xi, phi_i)
        + _location_logpdf(model, xj, phi_j)
    )
    return log_prior + log_lik + log_rev - log_fwd


def split_merge_move(
    state: DpmmState, model: DpmmModel, cfg: ChainConfig, rng: np.random.Generator
) -> DpmmState:
    """One split-merge Metropolis-Hastings proposal.

    Two observations are drawn; sharing a cluster triggers a split proposal,
    otherwise a merge.  Split allocations come from one restricted Gibbs scan
    off a launch state built by ``cfg.scheme[0]`` refinement scans; location
    proposals (in both directions) are exact Gaussian conditionals given the
    proposed members.  Either way the proposal keeps every observation
    assigned, so the move can never empty the state.
    """
    n = model.n
    if n < 2:
        return state.copy()
    i, j = _distinct_pair(n, rng)
    assign = state.assignments
    ci, cj = int(assign[i]), int(assign[j])
    new = state.copy()
    new.iteration = state.iteration + 1

    if ci == cj:
        members_all = np.flatnonzero(assign == ci)
        s_idx = members_all[(members_all != i) & (members_all != j)]
        side_launch, phi_launch = _build_split_launch(model, s_idx, i, j, cfg.scheme[0], rng)
        side, logq_alloc = _restricted_scan(model, s_idx, side_launch, phi_launch, rng=rng)
        idx_a = np.append(s_idx[side == 0], i)
        idx_b = np.append(s_idx[side == 1], j)
        xa, xb = model.data[idx_a], model.data[idx_b]
        phi_a = _location_draw(model, xa, rng)
        phi_b = _location_draw(model, xb, rng)
        log_acc = split_log_acceptance(
            model, state.cluster_params[ci], xa, xb, phi_a, phi_b, logq_alloc
        )
        if math.log(rng.random()) < log_acc:
            label_a = state.n_clusters
            new.assignments[idx_a] = label_a
            new.assignments[idx_b] = ci
            new.cluster_params = np.vstack([state.cluster_params, phi_a[None, :]])
            new.cluster_params[ci] = phi_b
        return new

    # Merge proposal: everything into j's cluster.
    idx_i = np.flatnonzero(assign == ci)
    idx_j = np.flatnonzero(assign == cj)
    merged_idx = np.concatenate([idx_i, idx_j])
    phi_m = _location_draw(model, model.data[merged_idx], rng)
    s_idx = merged_idx[(merged_idx != i) & (merged_idx != j)]
    target_side = (assign[s_idx] != ci).astype(np.int64)  # 0 = i's cluster
    side_launch, phi_launch = _build_split_launch(model, s_idx, i, j, cfg.scheme[0], rng)
    _, logq_alloc = _restricted_scan(model, s_idx, side_launch, phi_launch, target_side=target_side)
    log_acc = merge_log_acceptance(
        model,
        state.cluster_params[ci],
        state.cluster_params[cj],
        model.data[idx_i],
        model.data[idx_j],
        phi_m,
        logq_alloc,
    )
    if math.log(rng.random()) < log_acc:
        new.assignments[idx_i] = cj
        new.cluster_params[cj] = phi_m
        # Compact labels: move the last cluster into the freed slot.
        last = state.n_clusters - 1
        if ci != last:
            new.cluster_params[ci] = new.cluster_params[last]
            new.assignments[new.assignments == last] = ci
        new.cluster_params = new.cluster_params[:last].copy()
    return new


def run_chain(model: DpmmModel, cfg: ChainConfig) -> list[MixingMeasure]:
    """Run burn-in plus sampling iterations; return the thinned draws.

    Each iteration applies ``scheme[1]`` split-merge moves then ``scheme[2]``
    Gibbs scans.  After burn-in, every ``thin``-th iteration emits the state
    as a mixing measure (cluster locations weighted by cluster sizes / n).
    Identical configs produce bitwise-identical draw sequences.
    """
    rng = np.random.default_rng(cfg.seed)
    state = initial_state(model)
    draws: list[MixingMeasure] = []
    for t in range(1, cfg.burn_in + cfg.iterations + 1):
        for _ in range(cfg.scheme[1]):
            state = split_merge_move(state, model, cfg, rng)
        for _ in range(cfg.scheme[2]):
            state = gibbs_scan(
                state,
                model,
                rng,
                m_aux=cfg.m_aux,
                rw_sd=cfg.rw_sd,
                location_updates=cfg.location_updates,
            )
        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            draws.append(state.to_measure())
    return draws
