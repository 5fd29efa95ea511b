import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss
from scipy import special

from rmt_kit.ensembles import CoupledParams, ProductParams, WishartParams, log_jpdf_wishart
from rmt_kit.errors import DegeneracyError, GeometryError, MethodError
from rmt_kit.kernels import (FiniteKernel, chi_square_equiprobable, default_contours,
                             density_curve, double_contour_sum, equiprobable_edges,
                             kernel_coupled_delta_zero_check, kernel_eval, kernel_factorized,
                             kernel_grid, kernel_reproduce, kernel_trace, rho_k)
from rmt_kit.quadrature import Contour

ONE = CoupledParams(1, 1, 1, 1.0, (2.0,), (1.0,))
PTS = np.array([0.3, 1.0, 2.5])

INSTANCES = {
    "wishart": [WishartParams(2, 2, (1.0, 2.0), (0.0, 1.0)),
                WishartParams(2, 3, (0.8, 1.6, 2.9), (0.3, 1.1)),
                WishartParams(3, 4, (1.0, 1.5, 2.2, 3.0), (-0.4, 0.2, 0.9))],
    "product": [ProductParams(2, 2, 2, 1.0, (1.0, 2.0)),
                ProductParams(2, 3, 3, 1.5, (1.0, 1.7, 2.6)),
                ProductParams(3, 4, 5, 0.8, (0.9, 1.4, 2.0, 2.8))],
    "coupled": [CoupledParams(2, 2, 2, 1.0, (1.0, 2.0), (0.2, 0.5)),
                CoupledParams(2, 3, 3, 1.5, (1.0, 1.7, 2.6), (0.1, 0.9)),
                CoupledParams(3, 4, 4, 1.0, (1.0, 1.4, 2.0, 2.8), (0.0, 0.3, 0.6))],
}
ALL = [(k, p) for k, ps in INSTANCES.items() for p in ps]
IDS = [f"{k}-{i}" for k, ps in INSTANCES.items() for i in range(len(ps))]


class TestFiniteKernel:
    def test_unknown_method(self):
        with pytest.raises(MethodError):
            FiniteKernel("coupled", ONE, "magic")

    def test_residue_needs_square(self):
        with pytest.raises(MethodError):
            FiniteKernel("product", ProductParams(1, 1, 1, 1.0, (2.0,)), "residue-sum")

    def test_gram_rejects_coalescing(self):
        p = CoupledParams(2, 2, 2, 1.0, (1.0, 1.0), (0.1, 0.2))
        with pytest.raises(DegeneracyError):
            FiniteKernel("coupled", p, "gram-sum")
        FiniteKernel("coupled", p, "contour-quadrature")

    def test_kind_params_mismatch(self):
        with pytest.raises(MethodError):
            FiniteKernel("wishart", ONE)


class TestKernelValues:
    def test_one_by_one_coupled(self):
        k = FiniteKernel("coupled", ONE, "gram-sum")
        for x in PTS:
            for y in PTS:
                ref = 2 * special.i0(2 * math.sqrt(x)) * special.k0(2 * math.sqrt(2 * y))
                assert kernel_eval(k, x, y) == pytest.approx(ref, rel=1e-12)

    def test_one_by_one_contour(self):
        a = kernel_grid(FiniteKernel("coupled", ONE, "gram-sum"), PTS, PTS).values
        b = kernel_grid(FiniteKernel("coupled", ONE, "contour-quadrature"), PTS, PTS)
        np.testing.assert_allclose(b.values, a, rtol=1e-8)
        assert np.all(b.est_error <= 1e-9 * np.abs(b.values) + 1e-15)

    def test_wishart_rank_one(self):
        k = FiniteKernel("wishart", WishartParams(1, 1, (1.0,), (0.0,)), "gram-sum")
        for x, y in [(0.3, 1.0), (2.0, 0.5)]:
            assert kernel_eval(k, x, y) == pytest.approx(math.exp(-y))
        assert kernel_trace(k) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("kind,p", ALL, ids=IDS)
    def test_path_equality(self, kind, p):
        xs = np.array([0.2, 0.9, 2.7])
        g = kernel_grid(FiniteKernel(kind, p, "gram-sum"), xs, xs).values
        c = kernel_grid(FiniteKernel(kind, p, "contour-quadrature"), xs, xs).values
        np.testing.assert_allclose(c, g, rtol=1e-8, atol=1e-12 * np.abs(g).max())
        if kind != "product" and p.nu == 0:
            r = kernel_grid(FiniteKernel(kind, p, "residue-sum"), xs, xs).values
            np.testing.assert_allclose(r, g, rtol=1e-8, atol=1e-12 * np.abs(g).max())

    @staticmethod
    def _random_coupled(N, M, kappa, seed):
        rng = np.random.default_rng(seed)
        q = 1.0 + 0.3 * np.arange(M) + rng.uniform(0, 0.1, M)
        d = 0.05 + 0.08 * np.arange(N) + rng.uniform(0, 0.03, N)
        return CoupledParams(N, M, N + kappa, 1.0, tuple(q), tuple(d))

    # the Gram inverse is Cauchy-like, so float64 accuracy decays with N
    @given(st.integers(1, 4), st.integers(0, 2), st.integers(0, 2), st.integers(0, 10_000))
    def test_path_equality_random(self, N, nu, kappa, seed):
        p = self._random_coupled(N, min(N + nu, 4), kappa, seed)
        xs = np.array([0.4, 1.7])
        g = kernel_grid(FiniteKernel("coupled", p, "gram-sum"), xs, xs).values
        c = kernel_grid(FiniteKernel("coupled", p, "contour-quadrature"), xs, xs).values
        np.testing.assert_allclose(c, g, rtol=1e-8, atol=1e-12 * np.abs(g).max())

    @settings(max_examples=10)
    @given(st.integers(1, 5), st.integers(0, 2), st.integers(0, 10_000))
    def test_contour_matches_residue_random(self, N, kappa, seed):
        p = self._random_coupled(N, N, kappa, seed)
        xs = np.array([0.4, 1.7])
        r = kernel_grid(FiniteKernel("coupled", p, "residue-sum"), xs, xs).values
        c = kernel_grid(FiniteKernel("coupled", p, "contour-quadrature"), xs, xs).values
        np.testing.assert_allclose(c, r, rtol=1e-8, atol=1e-12 * np.abs(r).max())

    def test_coalescing_parameters_are_continuous(self):
        xs = np.array([0.5, 1.5])
        deg = CoupledParams(2, 2, 2, 1.0, (1.0, 1.0), (0.2, 0.2))
        near = CoupledParams(2, 2, 2, 1.0, (1.0, 1.0 + 1e-6), (0.2, 0.2 + 1e-6))
        a = kernel_grid(FiniteKernel("coupled", deg), xs, xs).values
        b = kernel_grid(FiniteKernel("coupled", near), xs, xs).values
        np.testing.assert_allclose(a, b, rtol=1e-4)


class TestCorrelations:
    def test_rho1_is_diagonal(self):
        k = FiniteKernel("coupled", INSTANCES["coupled"][0], "gram-sum")
        assert rho_k(k, [0.7]) == pytest.approx(kernel_eval(k, 0.7, 0.7))

    def test_repeated_point(self):
        k = FiniteKernel("coupled", INSTANCES["coupled"][0], "gram-sum")
        assert abs(rho_k(k, [0.7, 0.7])) < 1e-12

    def test_two_point_function_is_density(self):
        p = WishartParams(2, 2, (1.0, 2.0), (0.0, 1.0))
        k = FiniteKernel("wishart", p, "gram-sum")
        pts = [0.5, 1.5]
        assert rho_k(k, pts) == pytest.approx(2 * math.exp(log_jpdf_wishart(p, pts)), rel=1e-10)

    @pytest.mark.parametrize("kind,p", ALL, ids=IDS)
    def test_gauge_invariance(self, kind, p):
        k = FiniteKernel(kind, p, "gram-sum")
        pts = np.array([0.3, 1.1, 2.4])[: p.N]
        K = kernel_grid(k, pts, pts).values
        f = pts ** (getattr(p, "kappa", 1) / 2 + 0.5)
        assert np.linalg.det(K * f[:, None] / f[None, :]) == pytest.approx(np.linalg.det(K),
                                                                           rel=1e-10)

    @pytest.mark.parametrize("kind,p", ALL, ids=IDS)
    def test_positivity(self, kind, p):
        rho = density_curve(FiniteKernel(kind, p, "gram-sum"), np.linspace(0.01, 10, 50))
        assert np.all(rho >= -1e-10)


class TestFactorised:
    def test_wishart(self):
        k = FiniteKernel("wishart", WishartParams(1, 1, (1.0,), (0.0,)))
        assert kernel_factorized(k, 0.7, 1.3) == pytest.approx(math.exp(-1.3), rel=1e-8)

    def test_coupled_one_by_one(self):
        k = FiniteKernel("coupled", ONE)
        assert kernel_factorized(k, 0.4, 1.2) == pytest.approx(kernel_eval(k, 0.4, 1.2), rel=1e-6)

    @pytest.mark.parametrize("kind,p", ALL, ids=IDS)
    def test_matches_gram(self, kind, p):
        k = FiniteKernel(kind, p, "gram-sum")
        assert kernel_factorized(k, 0.6, 1.4) == pytest.approx(kernel_eval(k, 0.6, 1.4), rel=1e-6)


class TestDeltaZero:
    @pytest.mark.parametrize("p", [ProductParams(1, 1, 1, 1.0, (2.0,)),
                                   ProductParams(1, 2, 1, 1.0, (1.0, 2.5)),
                                   ProductParams(2, 2, 3, 1.0, (1.0, 1.8))])
    def test_reduction(self, p):
        for x, y in [(1.0, 1.0), (0.3, 2.0), (2.2, 0.6)]:
            a, b = kernel_coupled_delta_zero_check(p, x, y)
            assert a == pytest.approx(b, rel=1e-8)


class TestDeterminantalStructure:
    @pytest.mark.parametrize("kind,p", ALL, ids=IDS)
    def test_trace(self, kind, p):
        k = FiniteKernel(kind, p, "gram-sum")
        assert kernel_trace(k) == pytest.approx(p.N, abs=1e-6 * p.N)

    @pytest.mark.parametrize("kind,p", ALL, ids=IDS)
    def test_reproducing(self, kind, p):
        k = FiniteKernel(kind, p, "gram-sum")
        for x, y in [(0.5, 1.2), (2.0, 0.3)]:
            assert kernel_reproduce(k, x, y) == pytest.approx(kernel_eval(k, x, y), rel=1e-6)


class TestDensity:
    def test_curve_integrates_to_n(self):
        p = INSTANCES["coupled"][1]
        k = FiniteKernel("coupled", p, "gram-sum")
        x, w = leggauss(64)
        total = 0.0
        for a, b in [(0, 1), (1, 5), (5, 20), (20, 80), (80, 300), (300, 1200), (1200, 5000)]:
            t = 0.5 * (b - a) * (x + 1) + a
            total += 0.5 * (b - a) * np.sum(w * density_curve(k, t))
        assert total == pytest.approx(p.N, rel=1e-6)

    def test_equiprobable_edges(self):
        p = INSTANCES["coupled"][0]
        k = FiniteKernel("coupled", p, "gram-sum")
        e = equiprobable_edges(k, 5)
        assert e[0] == 0 and e[-1] == np.inf and np.all(np.diff(e) > 0)
        for a, b in zip(e[1:-2], e[2:-1]):
            assert kernel_trace_between(k, a, b) == pytest.approx(p.N / 5, rel=1e-6)

    def test_chi_square_counts(self):
        k = FiniteKernel("coupled", INSTANCES["coupled"][0], "gram-sum")
        e = equiprobable_edges(k, 4)
        vals = np.array([0.5 * (e[1] + e[2])] * 8)
        chi2, dof, counts = chi_square_equiprobable(k, vals, 4)
        assert dof == 3 and counts.sum() == 8 and chi2 == pytest.approx(24.0)


def kernel_trace_between(k, a, b):
    x, w = leggauss(48)
    t = 0.5 * (b - a) * (x + 1) + a
    return 0.5 * (b - a) * np.sum(w * density_curve(k, t))


class TestContours:
    @pytest.mark.parametrize("kind,p", ALL, ids=IDS)
    def test_defaults_are_nested(self, kind, p):
        c = default_contours(kind, p)
        assert c.mode == "nested"
        if kind != "wishart":
            z, _ = c.inner.rule(256)
            assert np.all(z.real > 0)

    def test_intersecting_circles_rejected(self):
        lv = lambda v, xs: np.zeros((len(xs), v.size), complex)
        with pytest.raises(GeometryError):
            double_contour_sum(lv, lv, Contour(0, 1), Contour(0.5, 1), [1.0], [1.0], 1e-10)
