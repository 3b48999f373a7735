"""Discrete mixing measures, box parameter domains, and location-kernel densities.

The central object is :class:`MixingMeasure`, a finitely supported probability
measure on a subset of R^d given by atom locations and weights.  Two location
kernels are provided for evaluating mixture densities: a Gaussian with fixed
covariance and a heavy-tailed multivariate Laplace with unit-determinant shape
matrix.  All types are immutable after construction and safe to share across
threads; density evaluation is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import kv

from .errors import DimensionError, DomainError, EmptyMeasureError, KernelError

WEIGHT_SUM_TOL = 1e-9
SYMMETRY_TOL = 1e-12
UNIT_DET_TOL = 1e-9
# Radii below this (in the Sigma^-1 norm) are clamped before evaluating the
# Laplace kernel, whose exact expression is singular at the atom for d >= 2.
LAPLACE_RADIUS_FLOOR = 1e-8


def _as_readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _check_points(atoms: np.ndarray) -> None:
    if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
        raise DimensionError(f"atoms must be a (k, d) array with k, d >= 1, got shape {atoms.shape}")
    if not np.all(np.isfinite(atoms)):
        raise DomainError("atom coordinates must be finite")


@dataclass(frozen=True)
class MixingMeasure:
    """A finitely supported probability measure sum_i w_i * delta_{atom_i}.

    Parameters
    ----------
    atoms : (k, d) array
        Atom locations; all rows share the dimension d.
    weights : (k,) array
        Nonnegative weights summing to one (within 1e-9).
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        _check_points(atoms)
        if atoms.shape[0] != weights.shape[0]:
            raise DimensionError(
                f"{atoms.shape[0]} atoms but {weights.shape[0]} weights"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise DomainError("weights must be finite and nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
        object.__setattr__(self, "atoms", _as_readonly(atoms))
        object.__setattr__(self, "weights", _as_readonly(weights))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    def to_json_dict(self) -> dict:
        """Serialize to the shared wire format {"d", "atoms", "weights"}."""
        return {
            "d": self.dim,
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MixingMeasure":
        atoms = np.asarray(obj["atoms"], dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != int(obj["d"]):
            raise DimensionError(
                f"atoms do not match declared dimension d={obj.get('d')!r}"
            )
        return cls(atoms=atoms, weights=np.asarray(obj["weights"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "MixingMeasure":
        return cls.from_json_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "MixingMeasure":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


def dirac(point) -> MixingMeasure:
    """The point mass at ``point``."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    return MixingMeasure(atoms=p[None, :], weights=np.array([1.0]))


def measures_equal(g: MixingMeasure, h: MixingMeasure, atol: float = 0.0) -> bool:
    """Equality of canonical forms up to atom permutation."""
    gc, hc = canonicalize(g), canonicalize(h)
    if gc.dim != hc.dim or gc.n_atoms != hc.n_atoms:
        return False
    gi = np.lexsort(gc.atoms.T[::-1])
    hi = np.lexsort(hc.atoms.T[::-1])
    return np.allclose(gc.atoms[gi], hc.atoms[hi], atol=atol, rtol=0.0) and np.allclose(
        gc.weights[gi], hc.weights[hi], atol=max(atol, 1e-12), rtol=0.0
    )


def canonicalize(g: MixingMeasure, atol: float = 0.0) -> MixingMeasure:
    """Merge coincident atoms, drop zero-weight atoms, renormalize.

    Atoms within Euclidean distance ``atol`` of an earlier atom are folded into
    that atom (the earlier location is kept).  The default ``atol = 0`` merges
    bitwise-equal locations only, so near-duplicates survive and can be handled
    by downstream merging logic with its own radius.

    Raises
    ------
    EmptyMeasureError
        If no atom carries positive weight.
    """
    reps: list[int] = []  # indices of representative atoms, in first-seen order
    acc: list[float] = []
    for i in range(g.n_atoms):
        a = g.atoms[i]
        for slot, j in enumerate(reps):
            d = np.linalg.norm(a - g.atoms[j])
            if d <= atol:
                acc[slot] += g.weights[i]
                break
        else:
            reps.append(i)
            acc.append(float(g.weights[i]))
    w = np.array(acc)
    keep = w > 0.0
    if not np.any(keep):
        raise EmptyMeasureError("all atoms have zero weight")
    atoms = g.atoms[np.array(reps)][keep]
    w = w[keep]
    return MixingMeasure(atoms=atoms, weights=w / w.sum())


@dataclass(frozen=True)
class BoxDomain:
    """An axis-aligned box {x : lower <= x <= upper} used as parameter space."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise DimensionError("lower and upper must be vectors of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DomainError("box bounds must be finite")
        if not np.all(lower < upper):
            raise DomainError("require lower[i] < upper[i] for every axis")
        object.__setattr__(self, "lower", _as_readonly(lower))
        object.__setattr__(self, "upper", _as_readonly(upper))
        # Cached scalars and plain tuples: these sit on MCMC hot paths.
        width = upper - lower
        object.__setattr__(self, "_width", _as_readonly(width))
        object.__setattr__(self, "_lo_t", tuple(lower.tolist()))
        object.__setattr__(self, "_hi_t", tuple(upper.tolist()))
        object.__setattr__(self, "_volume", float(np.prod(width)))
        object.__setattr__(self, "_diameter", float(np.linalg.norm(width)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter(self) -> float:
        return self._diameter

    @property
    def volume(self) -> float:
        return self._volume

    def contains(self, x) -> bool:
        lo, hi = self._lo_t, self._hi_t
        for axis, v in enumerate(np.asarray(x, dtype=float).tolist()):
            if v < lo[axis] or v > hi[axis]:
                return False
        return True

    def clamp(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Uniform draw(s) from the box: (d,) if size is None else (size, d)."""
        if size is None:
            return self.lower + rng.random(self.dim) * self._width
        return self.lower + rng.random((size, self.dim)) * self._width

    def reflect(self, x) -> np.ndarray:
        """Fold a point into the box by reflection at the faces."""
        x = np.asarray(x, dtype=float)
        t = np.mod(x - self.lower, 2.0 * self._width)
        return self.lower + np.minimum(t, 2.0 * self._width - t)


def _spd_cholesky(sigma: np.ndarray, name: str) -> np.ndarray:
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise KernelError(f"{name} must be a square matrix, got shape {sigma.shape}")
    if not np.allclose(sigma, sigma.T, atol=SYMMETRY_TOL, rtol=0.0):
        raise KernelError(f"{name} must be symmetric within {SYMMETRY_TOL}")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise KernelError(f"{name} must be positive definite") from exc
    return chol


@dataclass(frozen=True)
class GaussianKernel:
    """Gaussian location kernel N(x | theta, sigma) with fixed covariance.

    The Cholesky factor is computed once at construction; quadratic forms are
    evaluated with triangular solves.
    """

    sigma: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False, compare=False)
    _log_norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        chol = _spd_cholesky(sigma, "sigma")
        d = sigma.shape[0]
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        object.__setattr__(self, "sigma", _as_readonly(sigma))
        object.__setattr__(self, "_chol", _as_readonly(chol))
        object.__setattr__(self, "_log_norm", -0.5 * (d * np.log(2.0 * np.pi) + log_det))

    @classmethod
    def isotropic(cls, variance: float, dim: int) -> "GaussianKernel":
        return cls(sigma=variance * np.eye(dim))

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def chol(self) -> np.ndarray:
        """Lower-triangular Cholesky factor of the covariance (read-only)."""
        return self._chol

    @property
    def log_norm_const(self) -> float:
        """log of the density's normalizing constant, -0.5*log|2*pi*sigma|."""
        return self._log_norm

    def mahalanobis_sq(self, theta, x) -> np.ndarray:
        """(x - theta)^T sigma^{-1} (x - theta), broadcasting over rows of x."""
        diff = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(theta, dtype=float)
        sol = solve_triangular(self._chol, diff.T, lower=True, check_finite=False)
        return np.einsum("ij,ij->j", sol, sol)

    def log_density(self, theta, x) -> np.ndarray | float:
        x_arr = np.asarray(x, dtype=float)
        scalar = x_arr.ndim == 1
        q = self.mahalanobis_sq(theta, x_arr)
        out = self._log_norm - 0.5 * q
        return float(out[0]) if scalar else out

    def log_density_rowwise(self, thetas, xs) -> np.ndarray:
        """log N(xs[i] | thetas[i], sigma) for row-aligned (m, d) arrays."""
        diff = np.asarray(xs, dtype=float) - np.asarray(thetas, dtype=float)
        sol = solve_triangular(self._chol, diff.T, lower=True, check_finite=False)
        return self._log_norm - 0.5 * np.einsum("ij,ij->j", sol, sol)

    def density(self, theta, x) -> np.ndarray | float:
        return np.exp(self.log_density(theta, x))

    def sample(self, theta, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        n = 1 if size is None else size
        z = rng.standard_normal((n, self.dim))
        out = np.asarray(theta, dtype=float) + z @ self._chol.T
        return out[0] if size is None else out


@dataclass(frozen=True)
class LaplaceKernel:
    """Multivariate Laplace location kernel with unit-determinant shape matrix.

    The density involves a modified Bessel function of the second kind of
    order d/2 - 1 evaluated at sqrt(2/lam) * r, where r is the Mahalanobis
    radius under ``sigma``.  It is singular at r = 0 for d >= 2; radii below
    ``LAPLACE_RADIUS_FLOOR`` are clamped, so values that close to an atom are
    approximations.
    """

    sigma: np.ndarray
    lam: float
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        chol = _spd_cholesky(sigma, "sigma")
        det = float(np.prod(np.diag(chol))) ** 2
        if abs(det - 1.0) > UNIT_DET_TOL:
            raise KernelError(f"sigma must have unit determinant within {UNIT_DET_TOL}, got det={det!r}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise KernelError(f"lam must be a positive real, got {self.lam!r}")
        object.__setattr__(self, "sigma", _as_readonly(sigma))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "_chol", _as_readonly(chol))

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def radius(self, theta, x) -> np.ndarray:
        diff = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(theta, dtype=float)
        sol = solve_triangular(self._chol, diff.T, lower=True, check_finite=False)
        return np.sqrt(np.einsum("ij,ij->j", sol, sol))

    def density(self, theta, x) -> np.ndarray | float:
        x_arr = np.asarray(x, dtype=float)
        scalar = x_arr.ndim == 1
        r = np.maximum(self.radius(theta, x_arr), LAPLACE_RADIUS_FLOOR)
        d = self.dim
        order = d / 2.0 - 1.0
        front = 2.0 / (self.lam * (2.0 * np.pi) ** (d / 2.0))
        out = front * kv(order, np.sqrt(2.0 / self.lam) * r) / (np.sqrt(self.lam / 2.0) * r) ** order
        return float(out[0]) if scalar else out

    def log_density(self, theta, x) -> np.ndarray | float:
        return np.log(self.density(theta, x))


Kernel = GaussianKernel | LaplaceKernel


def laplace_density(kernel: LaplaceKernel, theta, x) -> float:
    """Evaluate the Laplace location kernel at a single point."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if theta.shape != x.shape or theta.shape[0] != kernel.dim:
        raise DimensionError(
            f"theta {theta.shape}, x {x.shape} incompatible with kernel dim {kernel.dim}"
        )
    return float(kernel.density(theta, x))


def mixture_density(g: MixingMeasure, kernel: Kernel, x) -> float:
    """Evaluate sum_i w_i f(x | atom_i) at a single point x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != g.dim:
        raise DimensionError(f"x has dimension {x.shape[0]}, measure has dimension {g.dim}")
    if kernel.dim != g.dim:
        raise DimensionError(f"kernel dimension {kernel.dim} != measure dimension {g.dim}")
    vals = np.array([kernel.density(g.atoms[i], x) for i in range(g.n_atoms)])
    return float(np.dot(g.weights, vals))
