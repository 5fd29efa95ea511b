"""Finite-N correlation kernels of the three ensembles.

Gauge
-----
Kernels are returned in the gauge of the biorthogonal functions that appear
in the joint densities, ``K(x, y) = sum_ij psi_i(x) C_{i+nu, j} phi_j(y)``:

* wishart: ``psi_i = exp(-sigma_i x)``, ``phi_j = exp(-q_j y)``;
* product: ``psi_i = x^{kappa+i-1}``, ``phi_j = (q_j/(alpha y))^{kappa/2} K_kappa(2 sqrt(alpha q_j y))``;
* coupled: ``psi_i = x^{kappa/2} I_kappa(2 sqrt(delta_i x))``, same ``phi``.

For the coupled and product kinds this is ``(x/y)^{kappa/2}`` times the
symmetric double contour integral
``2 \\oint\\oint (zeta/eta)^{kappa/2} I_kappa K_kappa / (eta - zeta) ...``.
Every gauge gives the same correlation functions.

Methods
-------
``gram-sum``            closed-form Gram matrix, pivoted-LU inverse;
``contour-quadrature``  nested circles and the trapezoid rule (always available);
``residue-sum``         closed-form double residue sum (``nu = 0`` only).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import CoupledParams, ProductParams, WishartParams, validate
from .errors import AccuracyError, GeometryError, MethodError
from .gram import build_gram, cauchy_inverse, check_distinct, invert_gram
from .quadrature import Contour, ContourPair, integrate_interval, make_enclosing_contour
from .specfun import g_reg, h_reg, log_g_reg, log_h_reg

__all__ = [
    "FiniteKernel",
    "KernelGrid",
    "kernel_eval",
    "kernel_grid",
    "rho_k",
    "kernel_factorized",
    "kernel_coupled_delta_zero_check",
    "default_contours",
    "nested_double_sum",
    "double_contour_sum",
    "kernel_trace",
    "kernel_reproduce",
    "biorthogonal_pair",
    "density_curve",
    "equiprobable_edges",
    "chi_square_equiprobable",
    "METHODS",
]

METHODS = ("gram-sum", "contour-quadrature", "residue-sum")
GAUGE = "density (psi_i(x) C phi_j(y))"


@dataclass(frozen=True)
class FiniteKernel:
    """A finite-N kernel with an evaluation method and tolerance.

    Parameters
    ----------
    kind : {"wishart", "product", "coupled"}
    params : WishartParams, ProductParams or CoupledParams
    method : {"gram-sum", "contour-quadrature", "residue-sum"}
    tol : float
        Relative target of the contour quadrature.
    contours : ContourPair, optional
        Override for the nested contours (inner around the ``q`` cluster).
    """

    kind: str
    params: object
    method: str = "contour-quadrature"
    tol: float = 1e-10
    contours: object = field(default=None, compare=False)

    def __post_init__(self):
        expected = {"wishart": WishartParams, "product": ProductParams, "coupled": CoupledParams}
        if self.kind not in expected:
            raise MethodError(f"unknown kernel kind {self.kind!r}")
        if not isinstance(self.params, expected[self.kind]):
            raise MethodError(f"{self.kind} kernel needs {expected[self.kind].__name__}")
        if self.method not in METHODS:
            raise MethodError(f"unknown method {self.method!r}")
        validate(self.params)
        if self.method == "residue-sum":
            if self.kind == "product" or self.params.nu != 0:
                raise MethodError("residue-sum needs kind wishart or coupled with nu = 0")
        if self.method in ("gram-sum", "residue-sum"):
            check_distinct(self.params.q, "q")
            if self.kind == "coupled":
                check_distinct(self.params.delta, "delta")
            elif self.kind == "wishart":
                check_distinct(self.params.sigma, "sigma")


@dataclass(frozen=True)
class KernelGrid:
    """Kernel values on the outer product ``xs x ys`` with error estimates."""

    values: np.ndarray
    est_error: np.ndarray
    contours: object = None


# ---------------------------------------------------------------------------
# biorthogonal functions and the Gram path


def _cluster(params):
    # (points of the "psi" cluster, points of the "phi" cluster) in the
    # contour variables
    if isinstance(params, WishartParams):
        return -np.asarray(params.sigma), np.asarray(params.q)
    a = params.alpha * np.asarray(params.q)
    if isinstance(params, ProductParams):
        return np.zeros(1), a
    return np.asarray(params.delta), a


def biorthogonal_pair(kind, params):
    """Callables ``psi(x) -> (N, len(x))`` and ``phi(y) -> (M, len(y))``.

    For ``coupled`` the ``psi`` family is rescaled to ``x^kappa g(delta_i x)``
    (the density's functions divided by ``delta_i^{kappa/2}``), matching
    ``build_gram(..., rescaled=True)``.
    """
    q = np.asarray(params.q, dtype=float)
    if kind == "wishart":
        s = np.asarray(params.sigma, dtype=float)
        return (lambda x: np.exp(-s[:, None] * x[None, :]),
                lambda y: np.exp(-q[:, None] * y[None, :]))
    k, al = params.kappa, params.alpha

    def phi(y):
        return (al * y[None, :]) ** (-k) * h_reg(k, al * q[:, None] * y[None, :]).real

    if kind == "product":
        powers = k + np.arange(params.N)
        return (lambda x: x[None, :] ** powers[:, None]), phi
    d = np.asarray(params.delta, dtype=float)
    return (lambda x: x[None, :] ** k * g_reg(k, d[:, None] * x[None, :]).real), phi


def _gram_inverse(kind, params):
    A = build_gram(kind, params, rescaled=(kind == "coupled"))
    return invert_gram(A).entries


def _gram_grid(kind, params, xs, ys):
    C = _gram_inverse(kind, params)
    nu = params.nu
    if kind != "coupled":
        psi, phi = biorthogonal_pair(kind, params)
        return psi(xs).T @ C[nu:, :] @ phi(ys)
    # scaled Bessel factors with the exponentials restored per cell, so the
    # tails stay finite where g(delta x) alone would overflow
    k, al = params.kappa, params.alpha
    d = np.asarray(params.delta, dtype=float)
    aq = al * np.asarray(params.q, dtype=float)
    dmax, qmin = float(np.max(d)), float(np.min(aq))
    sx, sy = 2.0 * np.sqrt(dmax * xs), 2.0 * np.sqrt(qmin * ys)
    psi = xs[None, :] ** k * (g_reg(k, d[:, None] * xs[None, :], scaled=True).real
                              * np.exp(2.0 * np.sqrt(d[:, None] * xs[None, :]) - sx[None, :]))
    phi = (al * ys[None, :]) ** (-k) * (h_reg(k, aq[:, None] * ys[None, :], scaled=True).real
                                        * np.exp(sy[None, :] - 2.0 * np.sqrt(aq[:, None] * ys[None, :])))
    with np.errstate(over="ignore", under="ignore"):
        return (psi.T @ C[nu:, :] @ phi) * np.exp(sx[:, None] - sy[None, :])


def _residue_grid(kind, params, xs, ys):
    if kind == "wishart":
        C = cauchy_inverse(params.q, params.sigma).entries
        psi, phi = biorthogonal_pair(kind, params)
        return psi(xs).T @ C @ phi(ys)
    # coupled, nu = 0: residues of the contour integrand at eta = delta_i, zeta = a_j
    k = params.kappa
    d = np.asarray(params.delta)
    a = params.alpha * np.asarray(params.q)
    dd = d[:, None] - d[None, :]
    np.fill_diagonal(dd, 1.0)
    aa = a[:, None] - a[None, :]
    np.fill_diagonal(aa, 1.0)
    da = d[:, None] - a[None, :]  # da[i, j] = delta_i - a_j
    log_i = np.log(np.abs(da)).sum(axis=1) - np.log(np.abs(dd)).sum(axis=1)
    sgn_i = np.prod(np.sign(da), axis=1) * np.prod(np.sign(dd), axis=1)
    log_j = np.log(np.abs(da)).sum(axis=0) - np.log(np.abs(aa)).sum(axis=1)
    sgn_j = np.prod(-np.sign(da), axis=0) * np.prod(np.sign(aa), axis=1)
    W = (sgn_i[:, None] * sgn_j[None, :] * np.exp(log_i[:, None] + log_j[None, :])) / da
    G = g_reg(k, d[:, None] * xs[None, :]).real
    H = h_reg(k, a[:, None] * ys[None, :]).real
    return 2.0 * (xs[:, None] / ys[None, :]) ** k * (G.T @ W @ H)


# ---------------------------------------------------------------------------
# contour path


def default_contours(kind, params, nodes=64):
    """Nested circles: inner around the ``q`` cluster, outer around everything.

    The inner circle excludes the origin and the ``psi`` cluster (for the
    coupled and product kinds the ``K_kappa`` factor has its branch point at
    0), the outer circle encloses the ``psi`` cluster and the inner circle
    with a clearance of half the inner radius.
    """
    left, right = _cluster(params)
    exclude = list(left)
    if kind != "wishart":
        exclude.append(0.0)
    inner = make_enclosing_contour(right, exclude=exclude, margin_policy=0.5, nodes=nodes)
    if kind != "wishart" and inner.center - inner.radius <= 0:
        raise GeometryError("inner contour crosses the branch cut of K_kappa")
    lo = min(float(np.min(left)), inner.center - inner.radius)
    hi = max(float(np.max(left)), inner.center + inner.radius)
    clearance = max(0.5 * inner.radius, 0.25 * (hi - lo))
    outer = Contour(0.5 * (lo + hi), 0.5 * (hi - lo) + clearance, nodes)
    return ContourPair(inner, outer, "nested")


def _log_sum_prod(z, pts, sign=1.0):
    # sum_l log(z - p_l) as complex log, vectorised over z
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0:
        return np.zeros(z.shape, dtype=complex)
    return sign * np.log(z[..., None] - pts).sum(axis=-1)


def _log_integrands(kind, params):
    """``(log F_v(v, x), log F_u(u, y), prefactor(x, y))`` for the contour kernel.

    ``F_v`` lives on the outer (``psi``) circle and ``F_u`` on the inner
    (``q``) circle; the kernel is ``prefactor * sum F_v F_u / (v - u)``.
    """
    q = np.asarray(params.q, dtype=float)
    if kind == "wishart":
        s = np.asarray(params.sigma, dtype=float)

        def lv(v, x):
            return (x[:, None] * v[None, :]
                    + (_log_sum_prod(v, q) - _log_sum_prod(v, -s))[None, :])

        def lu(u, y):
            return (-y[:, None] * u[None, :]
                    + (_log_sum_prod(u, -s) - _log_sum_prod(u, q))[None, :])

        return lv, lu, lambda x, y: np.ones((x.size, y.size))

    k, al, N = params.kappa, params.alpha, params.N
    a = al * q
    if kind == "product":
        def poles_v(v):
            return _log_sum_prod(v, a) - N * np.log(v)

        def poles_u(u):
            return N * np.log(u) - _log_sum_prod(u, a)
    else:
        d = np.asarray(params.delta, dtype=float)

        def poles_v(v):
            return _log_sum_prod(v, a) - _log_sum_prod(v, d)

        def poles_u(u):
            return _log_sum_prod(u, d) - _log_sum_prod(u, a)

    def lv(v, x):
        return log_g_reg(k, x[:, None] * v[None, :]) + poles_v(v)[None, :]

    def lu(u, y):
        return log_h_reg(k, y[:, None] * u[None, :]) + poles_u(u)[None, :]

    return lv, lu, lambda x, y: 2.0 * (x[:, None] / y[None, :]) ** k


def _circle_gap(a, b):
    # distance between two circles; zero or negative means they intersect
    d = abs(a.center - b.center)
    big, small = (a, b) if a.radius >= b.radius else (b, a)
    if d + small.radius < big.radius:
        return big.radius - d - small.radius
    return d - a.radius - b.radius


def _cauchy_sandwich(Fv, v, u, Fu, chunk=2048):
    # Fv @ [1/(v_j - u_k)] @ Fu.T without materialising a huge Cauchy matrix
    out = np.zeros((Fv.shape[0], Fu.shape[0]), dtype=complex)
    for a in range(0, u.size, chunk):
        b = a + chunk
        out += (Fv @ (1.0 / (v[:, None] - u[None, a:b]))) @ Fu[:, a:b].T
    return out


def double_contour_sum(lv, lu, cv, cu, xs, ys, tol, max_nodes=2**14, real=True):
    """Adaptive double trapezoid sum ``sum_jk F_v(v_j) F_u(u_k) / (v_j - u_k)``.

    ``lv(v, xs)`` and ``lu(u, ys)`` return complex logarithms with shapes
    ``(len(xs), len(v))`` and ``(len(ys), len(u))``; each row is rescaled by
    its largest modulus before exponentiation.  The circles ``cv`` and ``cu``
    may be nested either way or separated, but must not intersect.  The node
    counts of the two circles are doubled independently until each
    refinement changes the result by at most ``tol`` relative to the result
    (or to ``1e-6`` times the size of the summands, whichever is larger).

    Returns
    -------
    values, est_error : ndarray, ndarray
        Shape ``(len(xs), len(ys))``; real parts unless ``real=False``.

    Raises
    ------
    GeometryError
        If the circles intersect.
    AccuracyError
        If either circle needs more than ``max_nodes`` nodes.
    """
    gap = _circle_gap(cv, cu)
    if gap <= 0:
        raise GeometryError("integration circles intersect")
    cache_v, cache_u = {}, {}

    def side(cache, c, n, fn, pts):
        if n not in cache:
            z, w = c.rule(n)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
                L = fn(z, pts)
            shift = np.max(L.real, axis=1, keepdims=True)
            shift[~np.isfinite(shift)] = 0.0
            with np.errstate(under="ignore", invalid="ignore", over="ignore"):
                F = np.exp(L - shift) * w[None, :]
            F[~np.isfinite(F)] = 0.0
            cache[n] = (z, F, shift[:, 0])
        return cache[n]

    def total(nv, nu):
        v, Fv, sv = side(cache_v, cv, nv, lv, xs)
        u, Fu, su = side(cache_u, cu, nu, lu, ys)
        S = _cauchy_sandwich(Fv, v, u, Fu)
        with np.errstate(over="ignore"):
            scale = np.exp(sv[:, None] + su[None, :])
        mass = np.abs(Fv).sum(axis=1)[:, None] * np.abs(Fu).sum(axis=1)[None, :] / gap
        return S * scale, mass * scale

    nv, nu = cv.nodes, cu.nodes
    base, mass = total(nv, nu)
    done_v = done_u = False
    while True:
        err_v = err_u = np.zeros(base.shape)
        if not done_v:
            err_v = np.abs(total(2 * nv, nu)[0] - base)
        if not done_u:
            err_u = np.abs(total(nv, 2 * nu)[0] - base)
        bound = tol * np.maximum(np.abs(base), 1e-6 * mass)
        done_v = done_v or bool(np.all(err_v <= bound))
        done_u = done_u or bool(np.all(err_u <= bound))
        if not done_v:
            nv *= 2
        if not done_u:
            nu *= 2
        if done_v and done_u:
            # one more doubling of both circles; the trapezoid error on
            # analytic integrands roughly squares, so the successive
            # difference is a conservative estimate
            final, _ = total(2 * nv, 2 * nu)
            err = np.maximum(np.abs(final - base), np.maximum(err_v, err_u))
            return (final.real if real else final), err
        if max(nv, nu) > max_nodes:
            raise AccuracyError("double contour quadrature hit the node cap",
                                base.real if real else base,
                                float(np.max(np.maximum(err_v, err_u))))
        base, mass = total(nv, nu)


def nested_double_sum(lv, lu, pair, xs, ys, tol, max_nodes=2**14):
    """``double_contour_sum`` with ``F_v`` on ``pair.outer`` and ``F_u`` on ``pair.inner``."""
    return double_contour_sum(lv, lu, pair.outer, pair.inner, xs, ys, tol, max_nodes)


def _contour_grid(k, xs, ys):
    pair = k.contours or default_contours(k.kind, k.params)
    lv, lu, pref = _log_integrands(k.kind, k.params)
    vals, err = nested_double_sum(lv, lu, pair, xs, ys, k.tol)
    # the integrand carries 1/(eta - zeta) with eta outer: v - u
    P = pref(xs, ys)
    return KernelGrid(P * vals, np.abs(P) * err, pair)


def _as_positive(a, name):
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be positive")
    return arr


def kernel_grid(k, xs, ys):
    """Kernel on the outer product of ``xs`` and ``ys``.

    Returns
    -------
    KernelGrid
        ``values[i, j] = K(xs[i], ys[j])`` in the density gauge.
    """
    xs = _as_positive(xs, "x")
    ys = _as_positive(ys, "y")
    if k.method == "contour-quadrature":
        return _contour_grid(k, xs, ys)
    if k.method == "gram-sum":
        vals = _gram_grid(k.kind, k.params, xs, ys)
    else:
        vals = _residue_grid(k.kind, k.params, xs, ys)
    return KernelGrid(vals, np.abs(vals) * 1e-13)


def kernel_eval(k, x, y):
    """Kernel value ``K_N(x, y)`` (see the module docstring for the gauge).

    Parameters
    ----------
    k : FiniteKernel
    x, y : float
        Positive arguments.

    Returns
    -------
    float
    """
    return float(kernel_grid(k, [x], [y]).values[0, 0])


def rho_k(k, points):
    """``k``-point correlation function ``det[K(y_i, y_j)]``."""
    pts = _as_positive(points, "points")
    if pts.size > k.params.N:
        raise ValueError("rho_k needs at most N points")
    return float(np.linalg.det(kernel_grid(k, pts, pts).values))


def kernel_coupled_delta_zero_check(paramsP, x, y, tol=1e-11):
    """Coupled kernel at ``delta = 0`` next to the product kernel, both by quadrature."""
    validate(paramsP)
    coupled = FiniteKernel("coupled", paramsP.to_coupled(), "contour-quadrature", tol)
    product = FiniteKernel("product", paramsP, "contour-quadrature", tol)
    return kernel_eval(coupled, x, y), kernel_eval(product, x, y)


# ---------------------------------------------------------------------------
# factorised form


def kernel_factorized(k, x, y, tol=1e-10):
    """Kernel from ``-\\int_0^1 (du/u) F_1(x; u) F_2(y; u)`` on separated circles.

    With ``u = exp(-s)`` the integrand decays like ``exp(-s gap)``, where
    ``gap`` separates the ``psi`` cluster from the ``q`` cluster.  Each
    circle keeps a quarter of the gap as clearance, which bounds the
    cancellation in ``F_1``, ``F_2`` by the decay of the integrand.

    Raises
    ------
    GeometryError
        If the two clusters are not separated by a positive gap.
    """
    left, right = _cluster(k.params)
    lo_r = float(np.min(right))
    hi_l = float(np.max(left))
    gap = lo_r - hi_l
    if gap <= 0:
        raise GeometryError("no gap between the two parameter clusters")
    c1 = make_enclosing_contour(left, exclude=[lo_r], margin_policy=0.25)
    c2 = make_enclosing_contour(right, exclude=[hi_l], margin_policy=0.25)
    if k.kind != "wishart" and c2.center - c2.radius <= 0:
        raise GeometryError("q circle crosses the branch cut")
    xs = np.array([float(x)])
    ys = np.array([float(y)])
    lv, lu, pref = _log_integrands(k.kind, k.params)
    smax = 50.0 / gap

    def value(n):
        z1, w1 = c1.rule(n)
        z2, w2 = c2.rule(n)
        L1 = lv(z1, xs)[0]
        L2 = lu(z2, ys)[0]

        def f(s):
            F1 = np.exp(s[:, None] * z1[None, :] + L1[None, :]) @ w1
            F2 = np.exp(-s[:, None] * z2[None, :] + L2[None, :]) @ w2
            return (F1 * F2).real

        res = integrate_interval(f, 0.0, smax, tol=tol * 1e-2)
        return -res.value

    n = 64
    prev = value(n)
    while True:
        n *= 2
        cur = value(n)
        if abs(cur - prev) <= tol * max(abs(cur), 1e-300):
            return float(pref(xs, ys)[0, 0] * cur)
        if n >= 2**14:
            raise AccuracyError("factorised kernel did not converge", cur, abs(cur - prev))
        prev = cur


# ---------------------------------------------------------------------------
# determinantal-structure checks


def _decay_cutoff(kind, params, tol):
    left, right = _cluster(params)
    if kind == "wishart":
        rate = float(np.min(right) + np.min(-left))
        return (math.log(1.0 / tol) + 20.0) / rate
    rate = 2.0 * (math.sqrt(float(np.min(right))) - math.sqrt(max(float(np.max(left)), 0.0)))
    return ((math.log(1.0 / tol) + 20.0) / rate) ** 2


def _grid_method(k):
    # gram-sum is cheap on long node lists; fall back to quadrature when degenerate
    if k.method != "contour-quadrature":
        return k
    try:
        return FiniteKernel(k.kind, k.params, "gram-sum", k.tol)
    except Exception:
        return k


def kernel_trace(k, tol=1e-9):
    """``\\int_0^\\infty K(t, t) dt``, which equals ``N``."""
    kk = _grid_method(k)
    tmax = _decay_cutoff(k.kind, k.params, tol)

    def f(t):
        g = kernel_grid(kk, t, t).values
        return np.diag(g)

    return integrate_interval(f, 0.0, tmax, tol=tol).value


def kernel_reproduce(k, x, y, tol=1e-9):
    """``\\int_0^\\infty K(x, t) K(t, y) dt``, which equals ``K(x, y)``."""
    kk = _grid_method(k)
    tmax = _decay_cutoff(k.kind, k.params, tol)
    xs = np.array([float(x)])
    ys = np.array([float(y)])

    def f(t):
        left = kernel_grid(kk, xs, t).values[0]
        right = kernel_grid(kk, t, ys).values[:, 0]
        return left * right

    return integrate_interval(f, 0.0, tmax, tol=tol).value


# one-point density


def density_curve(k, ts, chunk=512):
    """One-point density ``rho_1(t) = K(t, t)`` on a list of points.

    Uses the gram-sum path when the parameters allow it and evaluates the
    diagonal in blocks.
    """
    ts = _as_positive(ts, "ts")
    kk = _grid_method(k)
    out = np.empty(ts.size)
    for s in range(0, ts.size, chunk):
        t = ts[s:s + chunk]
        out[s:s + chunk] = np.diag(kernel_grid(kk, t, t).values)
    return out


def equiprobable_edges(k, bins, panels=256, order=16):
    """Bin edges that split ``rho_1/N`` into ``bins`` cells of equal mass.

    The cumulative mass is integrated with Gauss-Legendre panels graded
    towards the hard edge, then each interior edge is located by bisection.

    Returns
    -------
    ndarray
        ``bins + 1`` edges, from ``0`` to ``inf``.
    """
    from numpy.polynomial.legendre import leggauss

    if int(bins) < 2:
        raise ValueError("need at least two bins")
    bins = int(bins)
    x, w = leggauss(order)
    tmax = _decay_cutoff(k.kind, k.params, 1e-13)
    # geometric grading resolves the logarithmic behaviour at t = 0
    e = tmax * np.concatenate(([0.0], np.logspace(-12.0, 0.0, panels)))
    a, b = e[:-1, None], e[1:, None]
    nodes = 0.5 * (b - a) * (x + 1.0) + a
    mass = (0.5 * (b - a)[:, 0]) * (density_curve(k, nodes.ravel()).reshape(nodes.shape) @ w)
    cum = np.concatenate(([0.0], np.cumsum(mass)))
    levels = cum[-1] * np.arange(1, bins) / bins
    j = np.clip(np.searchsorted(cum, levels) - 1, 0, panels - 1)
    lo, hi = e[j].copy(), e[j + 1].copy()
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        span = 0.5 * (mid - e[j])[:, None]
        t = span * (x + 1.0) + e[j][:, None]
        F = cum[j] + span[:, 0] * (density_curve(k, t.ravel()).reshape(t.shape) @ w)
        below = F < levels
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.concatenate(([0.0], 0.5 * (lo + hi), [np.inf]))


def chi_square_equiprobable(k, values, bins=25):
    """Pearson statistic of pooled spectra against ``rho_1/N``.

    Parameters
    ----------
    k : FiniteKernel
    values : array_like
        Sampled squared singular values (any shape; pooled).
    bins : int
        Number of equal-probability cells.

    Returns
    -------
    chi2 : float
    dof : int
        ``bins - 1``.
    counts : ndarray
    """
    v = np.asarray(values, dtype=float).ravel()
    edges = equiprobable_edges(k, bins)
    counts = np.histogram(v, bins=edges)[0]
    expected = v.size / bins
    chi2 = float(np.sum((counts - expected) ** 2) / expected)
    return chi2, bins - 1, counts
