import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from rmt_kit.ensembles import CoupledParams, ProductParams, WishartParams
from rmt_kit.errors import ConditioningError, DegeneracyError
from rmt_kit.gram import (block_inverse, build_gram, cauchy_det_generalized, cauchy_inverse,
                          check_distinct, invert_gram, log_normalization, log_vandermonde, logdet,
                          pairing_integral)
from rmt_kit.kernels import biorthogonal_pair
from rmt_kit.specfun import g_reg, h_reg


def separated(rng, n, lo, hi, gap=0.15):
    # n points in [lo, hi] with pairwise gaps of at least gap
    slack = hi - lo - gap * (n - 1)
    assert slack > 0
    u = np.sort(rng.uniform(0, slack, n))
    return lo + u + gap * np.arange(n)


def random_instance(rng, kind, N, M, nu_kappa=1):
    q = separated(rng, M, 1.0, 4.0)
    if kind == "wishart":
        return WishartParams(N, M, tuple(q), tuple(separated(rng, N, 0.0, 2.0)))
    alpha = float(rng.uniform(0.5, 2.0))
    L = N + int(rng.integers(0, nu_kappa + 1))
    if kind == "product":
        return ProductParams(N, M, L, alpha, tuple(q))
    d = separated(rng, N, 0.0, 0.9 * alpha * q[0], gap=0.05)
    return CoupledParams(N, M, L, alpha, tuple(q), tuple(d))


class TestPairingIntegral:
    def test_wishart(self):
        assert pairing_integral("wishart", WishartParams(1, 1, (2.0,), (1.0,)), 1, 1) == pytest.approx(1 / 3)

    def test_product(self):
        p = ProductParams(1, 1, 1, 1.0, (2.0,))
        assert pairing_integral("product", p, 1, 1) == pytest.approx(0.25)

    def test_coupled(self):
        p = CoupledParams(1, 1, 1, 1.0, (2.0,), (1.0,))
        assert pairing_integral("coupled", p, 1, 1) == pytest.approx(0.5)

    @pytest.mark.parametrize("kind", ["wishart", "product", "coupled"])
    def test_quadrature_oracle(self, kind, rng):
        p = random_instance(rng, kind, 2, 3)
        psi, phi = biorthogonal_pair(kind, p)
        A = build_gram(kind, p, rescaled=(kind == "coupled")).entries
        nu = p.nu

        def pair(i, j, t):
            if kind != "coupled":
                return float(psi(np.array([t]))[j, 0] * phi(np.array([t]))[i, 0])
            # scaled Bessel factors keep the tail finite
            k, a = p.kappa, p.alpha
            d, aq = p.delta[j] * t, a * p.q[i] * t
            g = g_reg(k, d, scaled=True).real * h_reg(k, aq, scaled=True).real
            return t**k * (a * t) ** (-k) * g * math.exp(2 * math.sqrt(d) - 2 * math.sqrt(aq))

        for i in range(p.M):
            for j in range(p.N):
                f = lambda t: pair(i, j, t)
                val = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-11, limit=400)[0]
                assert A[i, nu + j] == pytest.approx(val, rel=1e-7)


class TestBuildGram:
    def test_no_monomials_when_square(self):
        A = build_gram("wishart", WishartParams(2, 2, (1.0, 2.0), (0.5, 1.5))).entries
        np.testing.assert_allclose(A, 1 / (np.array([[1.0], [2.0]]) + np.array([0.5, 1.5])))

    def test_monomial_column(self):
        A = build_gram("coupled", CoupledParams(1, 2, 1, 2.0, (1.0, 2.0), (0.5,)))
        assert A.nu == 1 and A.entries.shape == (2, 2)
        np.testing.assert_allclose(A.entries[:, 0], 1.0)


class TestCauchyInverse:
    def test_scalar(self):
        np.testing.assert_allclose(cauchy_inverse([2.0], [1.0]).entries, [[3.0]])

    def test_two_by_two(self):
        C = cauchy_inverse([1.0, 2.0], [0.0, 1.0]).entries
        A = 1 / (np.array([[1.0], [2.0]]) + np.array([0.0, 1.0]))
        np.testing.assert_allclose(C @ A, np.eye(2), atol=1e-12)

    @given(st.integers(1, 8), st.integers(0, 10_000))
    def test_matches_numeric_inverse(self, n, seed):
        rng = np.random.default_rng(seed)
        q, s = separated(rng, n, 1.0, 6.0, 0.4), separated(rng, n, 0.0, 4.0, 0.4)
        C = cauchy_inverse(q, s).entries
        # float64 LU is the weaker side at n = 8, so the oracle runs at 40 digits
        with mpmath.workdps(40):
            A = mpmath.matrix([[1 / (mpmath.mpf(a) + b) for b in s] for a in q])
            ref = np.array((A**-1).tolist(), dtype=float)
        np.testing.assert_allclose(C, ref, rtol=1e-8)


class TestInvertGram:
    def test_identity(self):
        from rmt_kit.gram import GramMatrix
        inv = invert_gram(GramMatrix(np.eye(3), 0, "wishart"))
        np.testing.assert_allclose(inv.entries, np.eye(3))

    def test_wishart_equals_closed_form(self):
        p = WishartParams(3, 3, (1.0, 2.0, 3.5), (0.2, 0.8, 1.6))
        np.testing.assert_allclose(invert_gram(build_gram("wishart", p)).entries,
                                   cauchy_inverse(p.q, p.sigma).entries, rtol=1e-9)

    def test_coupled_substitution(self):
        p = CoupledParams(3, 3, 3, 1.5, (1.0, 2.0, 3.0), (0.2, 0.6, 1.1))
        A = build_gram("coupled", p, rescaled=True).entries
        # kappa = 0: A_ij = 1/(alpha q_i - delta_j) times the column scale 1/alpha
        aq = p.alpha * np.asarray(p.q)
        ref = 1 / (aq[:, None] - np.asarray(p.delta)[None, :])
        col = A[0] / ref[0]
        np.testing.assert_allclose(A, ref * col, rtol=1e-12)
        C = invert_gram(build_gram("coupled", p, rescaled=True)).entries
        np.testing.assert_allclose(C, cauchy_inverse(aq, -np.asarray(p.delta)).entries / col[:, None],
                                   rtol=1e-9)

    def test_conditioning_cutoff(self):
        q = np.array([1.0, 1.0 + 1e-7, 1.0 + 2e-7])
        from rmt_kit.gram import GramMatrix
        A = GramMatrix(1 / (q[:, None] + q[None, :]), 0, "wishart")
        with pytest.raises(ConditioningError):
            invert_gram(A)

    @pytest.mark.parametrize("kind", ["wishart", "product", "coupled"])
    @pytest.mark.parametrize("nu", [0, 1, 2])
    def test_residual(self, kind, nu, rng):
        for _ in range(3):
            N = int(rng.integers(1, 5))
            p = random_instance(rng, kind, N, N + nu)
            A = build_gram(kind, p).entries
            C = invert_gram(build_gram(kind, p)).entries
            assert np.max(np.abs(A @ C - np.eye(p.M))) <= 1e-8


class TestBlockInverse:
    @pytest.mark.parametrize("nu", [1, 2])
    def test_matches_invert_gram(self, nu, rng):
        for _ in range(4):
            p = random_instance(rng, "coupled", 2, 2 + nu)
            A = build_gram("coupled", p)
            np.testing.assert_allclose(block_inverse(A, nu), invert_gram(A).entries,
                                       rtol=1e-7, atol=1e-9)

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))
    def test_schur_determinant(self, m, k, seed):
        rng = np.random.default_rng(seed)
        D = rng.normal(size=(m + k, m + k)) + 3 * np.eye(m + k)
        a, c, b, d = D[:m, :m], D[:m, m:], D[m:, :m], D[m:, m:]
        lhs = np.linalg.det(D)
        rhs = np.linalg.det(a) * np.linalg.det(d - b @ np.linalg.inv(a) @ c)
        assert lhs == pytest.approx(rhs, rel=1e-10)


class TestCauchyDeterminants:
    def test_scalar(self):
        assert cauchy_det_generalized([2.0], [1.0], "alpha-minus-delta", 1.0) == (1.0, 0.0)

    def test_monomial_column(self):
        s, l = cauchy_det_generalized([1.0, 2.0], [0.0], "plus-sigma")
        assert s * math.exp(l) == pytest.approx(-0.5)

    def test_random_against_lu(self, rng):
        for _ in range(50):
            M = int(rng.integers(1, 9))
            N = int(rng.integers(1, M + 1))
            nu = M - N
            q = separated(rng, M, 1.0, 5.0, 0.2)
            if rng.random() < 0.5:
                s = separated(rng, N, 0.0, 3.0, 0.2)
                variant, alpha, arg = "plus-sigma", 1.0, s
                entry = lambda a, b: 1 / (a + b)
            else:
                alpha = float(rng.uniform(0.5, 2.0))
                d = separated(rng, N, 0.0, 0.9 * alpha, 0.05)
                variant, arg = "alpha-minus-delta", d
                entry = lambda a, b: 1 / (alpha * a - b)
            # float64 LU is the weaker side once monomial columns appear, so eliminate at 50 digits
            with mpmath.workdps(50):
                A = mpmath.matrix([[mpmath.mpf(a) ** j for j in range(nu)]
                                   + [entry(mpmath.mpf(a), b) for b in arg] for a in q])
                ref = float(mpmath.det(A))
            s, l = cauchy_det_generalized(q, arg, variant, alpha)
            assert s * math.exp(l) == pytest.approx(ref, rel=1e-10)


class TestNormalisation:
    def test_coupled_unit_instance(self):
        s, l = log_normalization("coupled", CoupledParams(1, 1, 1, 1.0, (2.0,), (1.0,)))
        assert s * math.exp(l) == pytest.approx(1.0)

    @pytest.mark.parametrize("kind", ["wishart", "product", "coupled"])
    def test_andreief_route(self, kind, rng):
        for _ in range(5):
            N = int(rng.integers(1, 5))
            p = random_instance(rng, kind, N, N + int(rng.integers(0, 3)))
            s, l = log_normalization(kind, p)
            sd, ld = logdet(build_gram(kind, p).entries)
            if kind == "wishart":
                extra = math.lgamma(N + 1)
            else:
                extra = 2 * math.lgamma(N + 1) + N * math.log(2)
            if kind == "coupled":
                # monomial columns are (alpha q)^k
                extra -= 0.5 * p.nu * (p.nu - 1) * math.log(p.alpha)
            assert s == sd
            assert l == pytest.approx(ld + extra, rel=1e-10, abs=1e-10)


class TestLogHelpers:
    def test_vandermonde(self):
        s, l = log_vandermonde([1.0, 2.0, 4.0])
        assert s * math.exp(l) == pytest.approx(6.0)

    def test_logdet_large(self):
        D = np.diag(np.full(400, 10.0))
        s, l = logdet(D)
        assert s == 1.0 and l == pytest.approx(400 * math.log(10))

    def test_check_distinct(self):
        check_distinct([1.0, 2.0], "q")
        with pytest.raises(DegeneracyError):
            check_distinct([1.0, 1.0 + 1e-12], "q")

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=7, unique=True))
    def test_vandermonde_sign(self, x):
        x = np.array(x)
        if np.min(np.abs(np.subtract.outer(x, x)) + np.eye(x.size)) < 1e-3:
            return
        s, l = log_vandermonde(x)
        ref = np.prod([x[k] - x[j] for j in range(x.size) for k in range(j + 1, x.size)])
        assert s * math.exp(l) == pytest.approx(ref, rel=1e-10)
