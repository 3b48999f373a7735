"""Measure types, kernels, and density evaluation."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixpost import (
    BoxDomain,
    DimensionError,
    DomainError,
    EmptyMeasureError,
    GaussianKernel,
    KernelError,
    LaplaceKernel,
    MixingMeasure,
    canonicalize,
    dirac,
    laplace_density,
    measures_equal,
    mixture_density,
)

# Oracle: 0.5*phi(0) + 0.5*phi(1) with phi the standard normal pdf,
# evaluated to high precision with mpmath (see test_two_atom_value).
TWO_ATOM_DENSITY = 0.320456502460288


class TestMixingMeasure:
    def test_validates_weight_sum(self):
        with pytest.raises(DomainError):
            MixingMeasure(atoms=[[0.0]], weights=[0.5])

    def test_validates_negative_weight(self):
        with pytest.raises(DomainError):
            MixingMeasure(atoms=[[0.0], [1.0]], weights=[1.5, -0.5])

    def test_validates_atom_weight_count(self):
        with pytest.raises(DimensionError):
            MixingMeasure(atoms=[[0.0], [1.0]], weights=[1.0])

    def test_rejects_nonfinite_atoms(self):
        with pytest.raises(DomainError):
            MixingMeasure(atoms=[[np.nan]], weights=[1.0])

    def test_immutable(self):
        g = dirac([1.0, 2.0])
        with pytest.raises(ValueError):
            g.atoms[0, 0] = 5.0

    def test_json_roundtrip(self, rng):
        g = MixingMeasure(atoms=rng.normal(size=(4, 3)), weights=[0.1, 0.2, 0.3, 0.4])
        h = MixingMeasure.from_json(g.to_json())
        assert np.array_equal(g.atoms, h.atoms)
        assert np.array_equal(g.weights, h.weights)
        obj = g.to_json_dict()
        assert obj["d"] == 3

    def test_json_rejects_bad_weights(self):
        text = json.dumps({"d": 1, "atoms": [[0.0], [1.0]], "weights": [0.5, 0.6]})
        with pytest.raises(DomainError):
            MixingMeasure.from_json(text)

    def test_json_rejects_dim_mismatch(self):
        text = json.dumps({"d": 2, "atoms": [[0.0], [1.0]], "weights": [0.5, 0.5]})
        with pytest.raises(DimensionError):
            MixingMeasure.from_json(text)


class TestGaussianKernel:
    def test_density_at_atom_matches_closed_form(self):
        g = dirac([0.0, 0.0])
        kernel = GaussianKernel.isotropic(0.05, 2)
        # 1 / (2*pi*0.05) for a bivariate normal with covariance 0.05*I
        assert mixture_density(g, kernel, [0.0, 0.0]) == pytest.approx(
            1.0 / (2.0 * math.pi * 0.05), abs=1e-12
        )

    def test_two_atom_value(self):
        from mpmath import mp, mpf

        mp.dps = 30
        phi = lambda x: mp.exp(-mpf(x) ** 2 / 2) / mp.sqrt(2 * mp.pi)
        oracle = float(mpf("0.5") * (phi(0) + phi(1)))
        assert oracle == pytest.approx(TWO_ATOM_DENSITY, abs=1e-14)
        g = MixingMeasure(atoms=[[0.0], [1.0]], weights=[0.5, 0.5])
        kernel = GaussianKernel.isotropic(1.0, 1)
        assert mixture_density(g, kernel, [0.0]) == pytest.approx(TWO_ATOM_DENSITY, abs=1e-12)

    def test_peak_equals_normalizer_for_random_spd(self, rng):
        for _ in range(20):
            a = rng.normal(size=(3, 3))
            sigma = a @ a.T + 0.5 * np.eye(3)
            kernel = GaussianKernel(sigma=sigma)
            theta = rng.normal(size=3)
            expected = 1.0 / math.sqrt(np.linalg.det(2.0 * math.pi * sigma))
            assert kernel.density(theta, theta) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch(self):
        g = dirac([0.0, 0.0])
        kernel = GaussianKernel.isotropic(1.0, 2)
        with pytest.raises(DimensionError):
            mixture_density(g, kernel, [0.0])
        with pytest.raises(DimensionError):
            mixture_density(g, GaussianKernel.isotropic(1.0, 3), [0.0, 0.0])

    def test_rejects_non_spd(self):
        with pytest.raises(KernelError):
            GaussianKernel(sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))  # eigenvalue -1
        with pytest.raises(KernelError):
            GaussianKernel(sigma=np.array([[1.0, 0.1], [0.0, 1.0]]))  # asymmetric

    def test_strictly_positive(self, rng):
        # positive wherever exp() does not underflow (|x| within ~sqrt(1400*var))
        kernel = GaussianKernel.isotropic(0.3, 2)
        g = MixingMeasure(atoms=rng.normal(size=(3, 2)), weights=[0.2, 0.3, 0.5])
        assert mixture_density(g, kernel, [5.0, -5.0]) > 0.0
        assert math.isfinite(kernel.log_density(g.atoms[0], np.array([50.0, -50.0])))

    def test_integrates_to_one_1d(self):
        g = MixingMeasure(atoms=[[-1.0], [0.5], [2.0]], weights=[0.25, 0.5, 0.25])
        kernel = GaussianKernel.isotropic(0.7, 1)
        xs = np.linspace(-30.0, 30.0, 200_001)
        vals = sum(
            w * kernel.density(atom, xs[:, None]) for atom, w in zip(g.atoms, g.weights)
        )
        assert np.trapezoid(vals, xs) == pytest.approx(1.0, rel=1e-3)
        mid = len(xs) // 2
        assert vals[mid] == pytest.approx(mixture_density(g, kernel, [xs[mid]]), rel=1e-12)


class TestLaplaceKernel:
    def test_d1_closed_form(self):
        # At d=1, lam=1, sigma=1 the Bessel order is -1/2, for which
        # K_{-1/2}(z) = sqrt(pi/(2z)) * exp(-z) exactly.
        kernel = LaplaceKernel(sigma=np.eye(1), lam=1.0)
        u = 1.0
        z = math.sqrt(2.0) * u
        k_half = math.sqrt(math.pi / (2.0 * z)) * math.exp(-z)
        expected = 2.0 / math.sqrt(2.0 * math.pi) * k_half / (math.sqrt(0.5) * u) ** (-0.5)
        got = laplace_density(kernel, [0.0], [1.0])
        assert got == pytest.approx(expected, rel=1e-12)
        # which simplifies to exp(-sqrt(2)*u)/sqrt(2), the unit-variance case
        assert got == pytest.approx(math.exp(-math.sqrt(2.0)) / math.sqrt(2.0), rel=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_tail_asymptotics(self, d):
        kernel = LaplaceKernel(sigma=np.eye(d), lam=1.3)
        lam = kernel.lam
        for u in (20.0, 27.5, 40.0):
            x = np.zeros(d)
            x[0] = u
            got = laplace_density(kernel, np.zeros(d), x)
            z = math.sqrt(2.0 / lam) * u
            bessel_tail = math.sqrt(math.pi / (2.0 * z)) * math.exp(-z)
            approx = (
                2.0
                / (lam * (2.0 * math.pi) ** (d / 2.0))
                * bessel_tail
                / (math.sqrt(lam / 2.0) * u) ** (d / 2.0 - 1.0)
            )
            assert got == pytest.approx(approx, rel=0.05)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_finite_at_atom(self, d):
        kernel = LaplaceKernel(sigma=np.eye(d), lam=0.8)
        theta = np.zeros(d)
        val = laplace_density(kernel, theta, theta)
        assert math.isfinite(val) and val > 0.0

    def test_integrates_to_one_1d(self):
        kernel = LaplaceKernel(sigma=np.eye(1), lam=1.0)
        g = MixingMeasure(atoms=[[0.0], [1.5]], weights=[0.6, 0.4])
        xs = np.linspace(-40.0, 40.0, 400_001)
        vals = kernel.density(np.array([0.0]), xs[:, None]) * 0.6 + kernel.density(
            np.array([1.5]), xs[:, None]
        ) * 0.4
        assert np.trapezoid(vals, xs) == pytest.approx(1.0, rel=1e-3)
        # spot-check the vectorized path against the scalar entry point
        assert vals[200_000] == pytest.approx(mixture_density(g, kernel, [xs[200_000]]), rel=1e-12)

    def test_rejects_bad_parameters(self):
        with pytest.raises(KernelError):
            LaplaceKernel(sigma=np.eye(2), lam=0.0)
        with pytest.raises(KernelError):
            LaplaceKernel(sigma=2.0 * np.eye(2), lam=1.0)  # determinant 4

    def test_unit_determinant_non_identity(self):
        sigma = np.array([[2.0, 0.0], [0.0, 0.5]])
        kernel = LaplaceKernel(sigma=sigma, lam=1.0)
        assert kernel.density(np.zeros(2), np.array([1.0, 1.0])) > 0.0


class TestMixtureDensityProperties:
    def test_linear_in_weights(self, rng):
        kernel = GaussianKernel.isotropic(0.4, 2)
        for _ in range(20):
            a1 = rng.normal(size=(3, 2))
            a2 = rng.normal(size=(2, 2))
            w1 = rng.dirichlet(np.ones(3))
            w2 = rng.dirichlet(np.ones(2))
            alpha = rng.random()
            g1 = MixingMeasure(atoms=a1, weights=w1)
            g2 = MixingMeasure(atoms=a2, weights=w2)
            mix = MixingMeasure(
                atoms=np.vstack([a1, a2]), weights=np.concatenate([alpha * w1, (1 - alpha) * w2])
            )
            x = rng.normal(size=2)
            expected = alpha * mixture_density(g1, kernel, x) + (1 - alpha) * mixture_density(
                g2, kernel, x
            )
            assert mixture_density(mix, kernel, x) == pytest.approx(expected, abs=1e-12)


class TestCanonicalize:
    def test_duplicate_collapse(self):
        g = MixingMeasure(atoms=[[0.0], [0.0]], weights=[0.5, 0.5])
        out = canonicalize(g)
        assert out.n_atoms == 1
        assert out.weights[0] == pytest.approx(1.0)

    def test_zero_weight_drop(self):
        g = MixingMeasure(atoms=[[0.0], [1.0]], weights=[1.0, 0.0])
        out = canonicalize(g)
        assert out.n_atoms == 1
        assert out.atoms[0, 0] == 0.0

    def test_identity_case(self):
        g = MixingMeasure(atoms=[[0.0], [1.0]], weights=[0.3, 0.7])
        out = canonicalize(g)
        assert measures_equal(g, out)

    def test_atol_merging(self):
        g = MixingMeasure(atoms=[[0.0], [1e-7]], weights=[0.5, 0.5])
        assert canonicalize(g).n_atoms == 2  # default bitwise identity
        assert canonicalize(g, atol=1e-6).n_atoms == 1

    def test_all_zero_weights_unreachable_via_type(self):
        # the measure type itself forbids all-zero weights
        with pytest.raises(DomainError):
            MixingMeasure(atoms=[[0.0]], weights=[0.0])

    @given(
        st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=8),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_idempotent(self, atom_indices, seed):
        rng = np.random.default_rng(seed)
        pool = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, -1.0], [0.5, 0.25]])
        atoms = pool[atom_indices]
        w = rng.dirichlet(np.ones(len(atom_indices)))
        g = MixingMeasure(atoms=atoms, weights=w)
        once = canonicalize(g)
        twice = canonicalize(once)
        assert measures_equal(once, twice)
        assert once.n_atoms == len({tuple(a) for a in atoms})


class TestBoxDomain:
    def test_invariants(self):
        with pytest.raises(DomainError):
            BoxDomain(lower=[0.0, 0.0], upper=[1.0, 0.0])
        box = BoxDomain(lower=[-6.0, -6.0], upper=[6.0, 6.0])
        assert box.diameter == pytest.approx(12.0 * math.sqrt(2.0))
        assert box.volume == pytest.approx(144.0)

    def test_contains_clamp_reflect(self):
        box = BoxDomain(lower=[-1.0], upper=[1.0])
        assert box.contains([0.5]) and not box.contains([1.5])
        assert box.clamp([2.0])[0] == 1.0
        assert box.reflect([1.2])[0] == pytest.approx(0.8)
        assert box.reflect([-1.2])[0] == pytest.approx(-0.8)
        inside = box.reflect([7.3])
        assert box.contains(inside)

    def test_sample_inside(self, rng):
        box = BoxDomain(lower=[-2.0, 0.0], upper=[-1.0, 5.0])
        pts = box.sample(rng, 100)
        assert pts.shape == (100, 2)
        assert all(box.contains(p) for p in pts)
