"""Hard-edge limiting kernels with finite-rank perturbations.

Three families appear as ``N -> infinity`` limits of the coupled ensemble
near the origin:

* ``kernel_III``  a perturbed Bessel kernel (``mu N -> 0``);
* ``kernel_II``   an interpolating kernel with parameter ``tau`` (``mu N -> tau/4``);
* ``kernel_I``    a perturbed Meijer G-kernel (``mu`` fixed).

Conventions
-----------
``kernel_III(x, y)`` is the bare double contour integral

    \\oint dv \\oint du  e^{-x v + y u} e^{-1/u + 1/v} (v/u)^{nu+n-m} / (u - v)
                        prod_l (u - pi_l)/(v - pi_l) prod_k (v - theta_k)/(u - theta_k),

with ``u`` around ``{0} u theta`` and ``v`` around ``{0} u pi``.  At
``n = m = 0`` it equals ``4 (y/x)^{nu/2} K_Bessel(4x, 4y)`` where
``K_Bessel`` is the usual hard-edge Bessel kernel (``bessel_kernel_closed``).
``kernel_II`` carries the prefactor ``(2/tau)(x/y)^{kappa/2}`` and
``kernel_I`` none; the scans apply the matching gauge factors.

All contour measures are normalised, ``dz/(2 pi i)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .ensembles import CoupledParams, validate
from .errors import AccuracyError, DomainError, GeometryError, ValidationError
from .kernels import FiniteKernel, double_contour_sum, kernel_grid
from .quadrature import Contour, ContourPair, integrate_halfline
from .specfun import g_reg, hankel2, bessel_j, log_g_reg, log_h_reg

__all__ = [
    "PerturbationSet",
    "ScalingRegime",
    "MuSchedule",
    "build_perturbed_params",
    "bessel_kernel_closed",
    "bessel_base",
    "kernel_III",
    "kernel_II",
    "kernel_I",
    "kernel_II_composition",
    "decompose_integrable",
    "Decomposition",
    "ScanRow",
    "hard_edge_scan",
    "interpolate_scan",
    "trend_ok",
]

TOL = 1e-10
_CAP = 2**15


# ---------------------------------------------------------------------------
# domain types


def _floats(values):
    return tuple(float(v) for v in np.ravel(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class PerturbationSet:
    """Finite-rank perturbation: ``n`` values ``pi_hat`` and ``m`` values ``theta_hat``.

    ``n`` and ``m`` default to the vector lengths.
    """

    pi_hat: tuple = ()
    theta_hat: tuple = ()
    n: int = None
    m: int = None

    def __post_init__(self):
        pi = _floats(self.pi_hat)
        th = _floats(self.theta_hat)
        object.__setattr__(self, "pi_hat", pi)
        object.__setattr__(self, "theta_hat", th)
        n = len(pi) if self.n is None else int(self.n)
        m = len(th) if self.m is None else int(self.m)
        if n != len(pi) or m != len(th):
            raise DomainError("n and m must match the lengths of pi_hat and theta_hat")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        if not all(math.isfinite(v) for v in pi + th):
            raise DomainError("perturbations must be finite")

    def check(self, regime, tau=None):
        """Raise ``DomainError`` unless the values are admissible for ``regime``."""
        pi, th = np.asarray(self.pi_hat), np.asarray(self.theta_hat)
        if regime == "I":
            if np.any(pi != 0.0):
                raise DomainError("regime I has no pi_hat perturbations (pi_hat = 0)")
            if np.any(th > 0):
                raise DomainError("regime I needs theta_hat <= 0")
            return
        if regime not in ("II", "III"):
            raise DomainError(f"unknown regime {regime!r}")
        if np.any(pi < 0):
            raise DomainError("pi_hat must be nonnegative")
        if regime == "II":
            if tau is None or not tau > 0:
                raise DomainError("regime II needs tau > 0")
            if np.any(pi >= 1.0 / tau):
                raise DomainError("regime II needs pi_hat < 1/tau")
        cap = float(np.min(pi)) if pi.size else 0.0
        if np.any(th > cap):
            raise DomainError("theta_hat must not exceed min(pi_hat) (and 0 when n = 0)")

    def as_dict(self):
        return {"n": self.n, "m": self.m, "pi_hat": list(self.pi_hat),
                "theta_hat": list(self.theta_hat)}


@dataclass(frozen=True)
class ScalingRegime:
    """Which limit to take, with its perturbations and the integers ``kappa``, ``nu``."""

    regime: str
    perturbations: PerturbationSet = field(default_factory=PerturbationSet)
    tau: float = None
    kappa: int = 0
    nu: int = 0

    def __post_init__(self):
        if self.regime not in ("I", "II", "III"):
            raise DomainError(f"unknown regime {self.regime!r}")
        if int(self.kappa) != self.kappa or self.kappa < 0:
            raise DomainError("kappa must be a nonnegative integer")
        if int(self.nu) != self.nu or self.nu < 0:
            raise DomainError("nu must be a nonnegative integer")
        self.perturbations.check(self.regime, self.tau)

    def as_dict(self):
        return {"regime": self.regime, "tau": self.tau, "kappa": self.kappa, "nu": self.nu,
                "perturbations": self.perturbations.as_dict()}


@dataclass(frozen=True)
class MuSchedule:
    """``mu(N)``: ``constant`` (``mu0``), ``critical`` (``tau/(4N)``) or ``vanishing`` (``c/N^{3/2}``)."""

    rule: str
    value: float

    def __post_init__(self):
        if self.rule not in ("constant", "critical", "vanishing"):
            raise DomainError(f"unknown mu schedule {self.rule!r}")
        if not (math.isfinite(self.value) and self.value > 0):
            raise DomainError("schedule parameter must be positive")

    def __call__(self, N):
        if self.rule == "constant":
            mu = self.value
        elif self.rule == "critical":
            mu = self.value / (4.0 * N)
        else:
            mu = self.value / N**1.5
        if not 0.0 < mu <= 1.0:
            raise DomainError(f"mu({N}) = {mu} is outside (0, 1]")
        return mu

    def as_dict(self):
        return {"rule": self.rule, "value": self.value}


def build_perturbed_params(N, mu, p, nu=0, kappa=0):
    """Coupled-ensemble parameters whose hard-edge limit carries the perturbation ``p``.

    With ``pi_l = max(N pi_hat_l, 1)`` and ``theta_j = N theta_hat_j``,

        delta_l = ((1+mu)^2 - 4 mu pi_l) / (4 mu^2),     l <= n,
        q_j     = ((1+mu)^2/(4 mu) - theta_j) / (mu alpha), j <= m,

    ``alpha = (1+mu)/(2 mu)`` and the remaining entries take the unperturbed
    values ``delta = (1-mu)^2/(4 mu^2)``, ``q = alpha``.  The floor at 1 is
    the unperturbed value, so ``pi_hat = 0`` reproduces the unperturbed
    ``delta``.

    Raises
    ------
    ValidationError
        ``constraint="allbounds"`` when ``0 < pi_l <= (1+mu)^2/(4 mu)`` or
        ``theta_j < min(pi_l, 1)`` fails.
    """
    if int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    if not 0.0 < mu <= 1.0:
        raise DomainError("mu must lie in (0, 1]")
    if p.n > N:
        raise DomainError("n must not exceed N")
    M, L = N + int(nu), N + int(kappa)
    if p.m > M:
        raise DomainError("m must not exceed M = N + nu")
    pi = np.maximum(N * np.asarray(p.pi_hat, dtype=float), 1.0)
    th = N * np.asarray(p.theta_hat, dtype=float)
    top = (1.0 + mu) ** 2 / (4.0 * mu)
    bad = [f"pi_{l + 1}" for l, v in enumerate(pi) if not 0.0 < v <= top]
    cap = min(float(np.min(pi)) if pi.size else 1.0, 1.0)
    bad += [f"theta_{j + 1}" for j, v in enumerate(th) if not v < cap]
    if bad:
        raise ValidationError(f"0 < pi_l <= (1+mu)^2/(4mu), theta_j < min(pi, 1) (allbounds) "
                              f"violated by {bad}", "allbounds", bad)
    alpha = (1.0 + mu) / (2.0 * mu)
    delta = np.full(N, (1.0 - mu) ** 2 / (4.0 * mu**2))
    delta[: p.n] = ((1.0 + mu) ** 2 - 4.0 * mu * pi) / (4.0 * mu**2)
    delta = np.maximum(delta, 0.0)  # mu = 1 rounds (1-mu)^2 to 0 anyway
    q = np.full(M, alpha)
    q[: p.m] = (top - th) / (mu * alpha)
    params = CoupledParams(N, M, L, alpha, q, delta)
    validate(params)
    return params


# ---------------------------------------------------------------------------
# Bessel kernel


def _jcal(k, X):
    # entire J-type function X^{-k/2} J_k(2 sqrt X) = sum (-X)^n / (n! (n+k)!)
    X = np.asarray(X, dtype=complex)
    if k >= 0:
        return g_reg(k, -X)
    return (-1) ** k * X ** (-k) * g_reg(-k, -X)


def bessel_base(p, X, Y):
    """Unperturbed contour kernel ``\\oint\\oint e^{-Xv+Yu-1/u+1/v} (v/u)^p / (u-v)``.

    Closed form ``Y^p [X J_{p+1}(X) J_p(Y) - Y J_{p+1}(Y) J_p(X)] / (X - Y)`` with
    ``J_k(X) = X^{-k/2} J_k(2 sqrt X)`` (entire in ``X``), for any integer
    ``p`` and complex arguments.  Near the diagonal the quotient is replaced by
    its derivative at the midpoint.
    """
    X, Y = np.broadcast_arrays(np.asarray(X, dtype=complex), np.asarray(Y, dtype=complex))
    X, Y = X.ravel(), Y.ravel()
    out = np.empty(X.shape, dtype=complex)
    near = np.abs(X - Y) <= 1e-6 * np.maximum(1.0, np.maximum(np.abs(X), np.abs(Y)))
    far = ~near
    if np.any(far):
        a, b = X[far], Y[far]
        num = a * _jcal(p + 1, a) * _jcal(p, b) - b * _jcal(p + 1, b) * _jcal(p, a)
        out[far] = b**p * num / (a - b)
    if np.any(near):
        c = 0.5 * (X[near] + Y[near])
        j0, j1, j2 = _jcal(p, c), _jcal(p + 1, c), _jcal(p + 2, c)
        out[near] = Y[near] ** p * ((j1 - c * j2) * j0 + c * j1 * j1)
    return out


def bessel_kernel_closed(nu, x, y):
    """Hard-edge Bessel kernel in its standard positive form.

        K(x, y) = [sqrt(x) J_{nu+1}(sqrt x) J_nu(sqrt y) - sqrt(y) J_{nu+1}(sqrt y) J_nu(sqrt x)]
                  / (2 (x - y))

    For ``|x - y| < 1e-6 max(x, y)`` the first-order confluent form
    ``(J_nu^2 - J_{nu+1} J_{nu-1})(sqrt t) / 4`` at the midpoint ``t`` is used.

    Parameters
    ----------
    nu : int
    x, y : float or array_like
        Nonnegative arguments, broadcast together.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    out = np.empty(x.shape)
    near = np.abs(x - y) < 1e-6 * np.maximum(x, y)
    near |= (x == y)
    far = ~near
    if np.any(far):
        sx, sy = np.sqrt(x[far]), np.sqrt(y[far])
        num = (sx * bessel_j(nu + 1, sx) * bessel_j(nu, sy)
               - sy * bessel_j(nu + 1, sy) * bessel_j(nu, sx))
        out[far] = (num / (2.0 * (x[far] - y[far]))).real
    if np.any(near):
        s = np.sqrt(0.5 * (x[near] + y[near]))
        j = bessel_j(nu, s)
        out[near] = (0.25 * (j * j - bessel_j(nu + 1, s) * bessel_j(nu - 1, s))).real
    return out.reshape(shape) if shape else float(out[0])


# ---------------------------------------------------------------------------
# single contours around the essential singularity at 0


def _reduce(e, num, den):
    """Cancel equal num/den roots and fold roots at 0 into the power ``w^e``."""
    num, den = list(num), list(den)
    for a in list(num):
        if a in den:
            num.remove(a)
            den.remove(a)
    e += sum(1 for a in num if a == 0.0) - sum(1 for b in den if b == 0.0)
    num = [a for a in num if a != 0.0]
    den = [b for b in den if b != 0.0]
    return e, np.asarray(num, dtype=float), np.asarray(den, dtype=float)


def _clear_radius(r, poles, ratio=1.15):
    # nearest radius r * 1.07^j keeping every |pole| off the band [r/ratio, r*ratio]
    mags = np.abs(np.asarray(poles, dtype=float))
    if mags.size == 0:
        return r
    for j in sorted(range(-40, 41), key=abs):
        rr = r * 1.07**j
        if np.all((mags < rr / ratio) | (mags > rr * ratio)):
            return rr
    raise GeometryError("no clear radius between the poles")


def _log_rational(w, e, num, den):
    out = e * np.log(w)
    for a in num:
        out = out + np.log(w - a)
    for b in den:
        out = out - np.log(w - b)
    return out


def _rational(w, e, num, den):
    return np.exp(_log_rational(w, e, num, den))


def saddle_contour(Z, s, e, num, den, tol=TOL):
    """``\\oint e^{s (Z w - 1/w)} w^e prod(w - num)/prod(w - den) dw/(2 pi i)`` around 0 and ``den``.

    ``s = +1`` gives the ``u``-type integrand ``e^{Zu - 1/u}``, ``s = -1`` the
    ``v``-type ``e^{-Zv + 1/v}``.  Each ``Z`` gets a circle at the saddle
    radius ``1/sqrt|Z|`` (moved off the poles); poles outside it are added
    as residues, so ``den`` must be distinct.

    Returns
    -------
    values, est_error : ndarray
    """
    Z = np.atleast_1d(np.asarray(Z, dtype=complex))
    e, num, den = _reduce(e, num, den)
    if len(set(den.tolist())) != den.size:
        raise GeometryError("repeated poles are not supported")
    absz = np.maximum(np.abs(Z), 1e-8)
    radii = np.array([_clear_radius(min(max(r, 1e-4), 1e4), den) for r in 1.0 / np.sqrt(absz)])

    def trap(n):
        th = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        w = radii[:, None] * np.exp(1j * th)[None, :]
        L = s * (Z[:, None] * w - 1.0 / w) + _log_rational(w, e, num, den)
        return (np.exp(L) * w).mean(axis=1), (np.abs(np.exp(L) * w)).mean(axis=1)

    n = 64
    prev, _ = trap(n)
    while True:
        n *= 2
        val, mass = trap(n)
        err = np.abs(val - prev)
        if np.all(err <= tol * np.maximum(np.abs(val), mass * 1e-3) + 1e-300):
            break
        if n >= _CAP:
            raise AccuracyError("saddle contour did not converge", val, float(np.max(err)))
        prev = val
    # residues of poles outside the circles
    for k, b in enumerate(den):
        out = abs(b) > radii
        if not np.any(out):
            continue
        others = np.delete(den, k)
        logr = s * (Z[out] * b - 1.0 / b) + _log_rational(np.array(b, dtype=complex), e, num, others)
        val[out] += np.exp(logr)
    return val, err


# ---------------------------------------------------------------------------
# kernel III


def _signed_sets(p):
    return np.asarray(p.pi_hat, dtype=float), np.asarray(p.theta_hat, dtype=float)


def _reduce_pair(power, pi, th):
    """Cancel equal pi/theta pairs; a zero pi lowers the power, a zero theta raises it."""
    pi, th = list(pi), list(th)
    for a in list(pi):
        if a in th:
            pi.remove(a)
            th.remove(a)
    power += sum(1 for b in th if b == 0.0) - sum(1 for a in pi if a == 0.0)
    return (power, np.array([a for a in pi if a != 0.0]),
            np.array([b for b in th if b != 0.0]))


def _loss(Z, s, r):
    # log of the largest modulus of e^{s(Zw - 1/w)} on |w| = r
    th = np.linspace(0.0, 2.0 * math.pi, 65)
    w = r * np.exp(1j * th)
    return float(np.max((s * (Z * w - 1.0 / w)).real))


def _pick_radii(X, Y, pi, th):
    poles = np.concatenate([pi, th])
    ru0 = 1.0 / math.sqrt(max(abs(Y), 1e-8))
    rv0 = 1.0 / math.sqrt(max(abs(X), 1e-8))
    ru0, rv0 = min(max(ru0, 1e-3), 1e3), min(max(rv0, 1e-3), 1e3)

    def candidates(r0, Z, s):
        out = []
        for i in range(-25, 26):
            r = r0 * 1.08**i
            if not np.any(np.abs(np.abs(poles) / r - 1.0) < 0.15):
                out.append((r, _loss(Z, s, r)))
        return out

    best = None
    cv = candidates(rv0, X, -1)
    for ru, lu in candidates(ru0, Y, 1):
        for rv, lv in cv:
            if max(ru, rv) / min(ru, rv) >= 1.3 and (best is None or lu + lv < best[0]):
                best = (lu + lv, ru, rv)
    if best is None:
        raise GeometryError("no admissible circle pair for kernel III")
    return best[1], best[2]


def _kernel_III_direct(power, pi, th, X, Y, tol=TOL):
    """Double contour with saddle circles plus residues outside them.

    Because ``V(w) U(w)`` is entire, the two circles may be nested either way.
    """
    power, pi, th = _reduce_pair(power, pi, th)
    if len(set(pi.tolist())) != pi.size or len(set(th.tolist())) != th.size:
        raise GeometryError("repeated perturbation values are not supported")
    ru, rv = _pick_radii(X, Y, pi, th)

    def U_log(u):
        return Y * u - 1.0 / u + _log_rational(u, -power, pi, th)

    def V_log(v):
        return -X * v + 1.0 / v + _log_rational(v, power, th, pi)

    def res_u(k):
        b = th[k]
        return np.exp(Y * b - 1.0 / b + _log_rational(np.array(b, dtype=complex), -power, pi,
                                                      np.delete(th, k)))

    def res_v(l):
        a = pi[l]
        return np.exp(-X * a + 1.0 / a + _log_rational(np.array(a, dtype=complex), power, th,
                                                       np.delete(pi, l)))

    ks = [k for k in range(th.size) if abs(th[k]) > ru]
    ls = [l for l in range(pi.size) if abs(pi[l]) > rv]
    Uk = {k: res_u(k) for k in ks}
    Vl = {l: res_v(l) for l in ls}

    def total(n):
        ang = np.exp(2j * math.pi * (np.arange(n) + 0.5) / n)
        u, v = ru * ang, rv * ang
        Fu = np.exp(U_log(u)) * u / n
        Fv = np.exp(V_log(v)) * v / n
        val = Fv @ (1.0 / (u[None, :] - v[:, None])) @ Fu
        mass = np.abs(Fv).sum() * np.abs(Fu).sum() / abs(ru - rv)
        for k in ks:
            val += Uk[k] * np.sum(Fv / (th[k] - v))
        for l in ls:
            val += Vl[l] * np.sum(Fu / (u - pi[l]))
        for k in ks:
            for l in ls:
                val += Uk[k] * Vl[l] / (th[k] - pi[l])
        return val, mass

    n = 64
    prev, _ = total(n)
    while True:
        n *= 2
        val, mass = total(n)
        err = abs(val - prev)
        if err <= tol * max(abs(val), 1e-6 * mass):
            return val, err
        if n >= _CAP:
            raise AccuracyError("kernel III quadrature did not converge", val, err)
        prev = val


def _III_power(p, nu):
    return int(nu) + p.n - p.m


def kernel_III(p, nu, x, y, tol=TOL, with_error=False):
    """Perturbed Bessel kernel ``K_III^{(n,m)}(x, y)`` as a double contour integral.

    Parameters
    ----------
    p : PerturbationSet
        ``pi_hat >= 0`` and ``theta_hat <= min(pi_hat)``.
    nu : int
    x, y : float
        Positive arguments.
    with_error : bool
        Also return the quadrature error estimate.

    Returns
    -------
    float or (float, float)
    """
    p.check("III")
    if not (x > 0 and y > 0):
        raise DomainError("kernel_III needs positive arguments")
    pi, th = _signed_sets(p)
    val, err = _kernel_III_direct(_III_power(p, nu), pi, th, complex(x), complex(y), tol)
    return (float(val.real), float(err)) if with_error else float(val.real)


# ---------------------------------------------------------------------------
# shared helpers for the Bessel-type double integrals


def _circle_through(left, right, nodes=64):
    # circle on the real diameter [left, right]
    return Contour(0.5 * (left + right), 0.5 * (right - left), nodes)


def _circle_integral(logf, c, tol=TOL, n0=64):
    """``\\oint_c exp(logf(w)) dw/(2 pi i)`` with row-wise log rescaling and doubling.

    ``logf(w)`` returns shape ``(k, len(w))``; the result has shape ``(k,)``.
    """
    def total(n):
        w, wt = c.rule(n)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
            L = np.atleast_2d(logf(w))
            shift = np.max(L.real, axis=1, keepdims=True)
            shift[~np.isfinite(shift)] = 0.0
            F = np.exp(L - shift) * wt[None, :]
        F[~np.isfinite(F)] = 0.0
        scale = np.exp(shift[:, 0])
        return F.sum(axis=1) * scale, np.abs(F).sum(axis=1) * scale

    n = max(n0, c.nodes)
    prev, _ = total(n)
    while True:
        n *= 2
        val, mass = total(n)
        err = np.abs(val - prev)
        if np.all(err <= tol * np.maximum(np.abs(val), 1e-6 * mass) + 1e-300):
            return val, err
        if n >= _CAP:
            raise AccuracyError("contour integral did not converge", val, float(np.max(err)))
        prev = val


def _check_args(x, y):
    if not (np.isfinite(x) and np.isfinite(y) and x > 0 and y > 0):
        raise DomainError("kernel arguments must be positive and finite")


def _inner_radius(th):
    lo = min(float(np.min(th)) if th.size else 0.0, 0.0)
    return max(1.0, 1.25 * abs(lo) + 0.25)


# ---------------------------------------------------------------------------
# kernel II


def _II_contours(tau, pi, th):
    if pi.size and float(np.max(pi)) > 0.8 / tau:
        raise GeometryError("pi_hat above 0.8/tau leaves no room for the u circle")
    tp = max(float(np.max(th)) if th.size else 0.0, 0.0)
    if tp >= 0.9 / tau:
        raise GeometryError("theta_hat too close to 1/tau")
    rin = _inner_radius(th)
    pu = 0.5 * (tp + min(0.9 / tau, tp + 1.0))
    cu = _circle_through(-rin, pu)
    rv = 1.5 * max(rin, pu, float(np.max(pi)) if pi.size else 0.0)
    return cu, Contour(0.0, rv)


def _II_logs(power, tau, kappa, pi, th):
    def lv(v, xs):
        X = (1.0 - tau * v)[None, :] * xs[:, None] / tau**2
        return (log_g_reg(kappa, X)
                + (1.0 / v + _log_rational(v, power, th, pi))[None, :])

    def lu(u, ys):
        Y = (1.0 - tau * u)[None, :] * ys[:, None] / tau**2
        return (log_h_reg(kappa, Y)
                + (-1.0 / u + _log_rational(u, -power, pi, th))[None, :])

    return lv, lu


def _kernel_II_raw(power, tau, kappa, pi, th, xs, ys, tol):
    power, pi, th = _reduce_pair(power, pi, th)
    cu, cv = _II_contours(tau, pi, th)
    lv, lu = _II_logs(power, tau, kappa, pi, th)
    vals, err = double_contour_sum(lv, lu, cv, cu, xs, ys, tol)
    pref = (2.0 / tau) * (xs[:, None] / ys[None, :]) ** (kappa / 2.0)
    # the sum carries 1/(v - u); the kernel has 1/(u - v)
    return -pref * vals, pref * err


def kernel_II(p, tau, kappa, nu, x, y, tol=TOL, with_error=False):
    """Interpolating kernel ``K_II^{(n,m)}(x, y; tau)``.

    ``(2/tau)(x/y)^{kappa/2}`` times the double contour integral of
    ``g_kappa((1 - tau v) x/tau^2) h_kappa((1 - tau u) y/tau^2)`` against the
    same rational and exponential factors as ``kernel_III``.  The ``u``
    circle runs through ``-max(1, 1.25|min theta| + 0.25)`` and a point left
    of ``0.9/tau``, so ``h`` stays off its cut; the ``v`` circle is centred at
    0 and encloses it with a factor 1.5.

    Raises
    ------
    GeometryError
        If ``pi_hat > 0.8/tau``.
    """
    p.check("II", tau)
    _check_args(x, y)
    pi, th = _signed_sets(p)
    v, e = _kernel_II_raw(_III_power(p, nu), float(tau), int(kappa), pi, th,
                          np.array([float(x)]), np.array([float(y)]), tol)
    return (float(v[0, 0]), float(e[0, 0])) if with_error else float(v[0, 0])


# ---------------------------------------------------------------------------
# kernel I


_EPS = 1.0 / 40.0


def _I_contours(th):
    rin = _inner_radius(th)
    # the u circle crosses the positive axis at eps, where exp(-1/u) ~ e^{-40}
    # hides the cut of the K/H Bessel factor
    return _circle_through(-rin, _EPS), Contour(0.0, 1.5 * rin)


def _log_hankel_factor(kappa, W):
    # log[-i pi (z/2)^kappa H2_kappa(z)] with z = -2i sqrt(W); equals log 2 h_kappa(W)
    z = -2j * np.sqrt(W)
    with np.errstate(divide="ignore"):
        return np.log(-1j * math.pi * (0.5 * z) ** kappa * hankel2(kappa, z.ravel()).reshape(z.shape))


def _I_logs(power, kappa, th, route="hankel"):
    def lv(v, xs):
        X = -xs[:, None] * v[None, :]
        return log_g_reg(kappa, X) + (1.0 / v + _log_rational(v, power, th, []))[None, :]

    def lu(u, ys):
        Y = -ys[:, None] * u[None, :]
        if route == "hankel":
            lh = _log_hankel_factor(kappa, Y)
        else:
            lh = math.log(2.0) + log_h_reg(kappa, Y)
        return lh + (-1.0 / u + _log_rational(u, -power, [], th))[None, :]

    return lv, lu


def _kernel_I_raw(power, kappa, th, xs, ys, tol, route="hankel"):
    power, _, th = _reduce_pair(power, np.zeros(0), th)
    cu, cv = _I_contours(th)
    lv, lu = _I_logs(power, kappa, th, route)
    vals, err = double_contour_sum(lv, lu, cv, cu, xs, ys, tol)
    return -vals, err


def _KI_power(p, nu):
    return int(nu) - p.m


def kernel_I(p, kappa, nu, x, y, route="hankel", tol=TOL, with_error=False):
    """Perturbed Meijer G-kernel ``K_I^{(m)}(x, y)``.

    Parameters
    ----------
    p : PerturbationSet
        Only ``theta_hat <= 0`` enters; ``pi_hat`` must be zero (it is absent
        in this regime).
    route : {"hankel", "bessel-composition", "direct"}
        ``hankel``: two contours with ``J_kappa`` and ``H^{(2)}_kappa``.
        ``bessel-composition``: ``s``/``t`` integral transform of the
        perturbed Bessel kernel.  ``direct``: the hankel contours with
        ``g``/``h`` in place of ``J``/``H``.
    """
    p.check("I")
    _check_args(x, y)
    th = np.asarray(p.theta_hat, dtype=float)
    power = _KI_power(p, nu)
    if route in ("hankel", "direct"):
        v, e = _kernel_I_raw(power, int(kappa), th, np.array([float(x)]),
                             np.array([float(y)]), tol, route)
        val, err = float(v[0, 0].real), float(e[0, 0])
    elif route == "bessel-composition":
        val, err = _kernel_I_composition(power, int(kappa), th, float(x), float(y), max(tol, 1e-9))
    else:
        raise DomainError(f"unknown route {route!r}")
    return (val, err) if with_error else val


# ---------------------------------------------------------------------------
# integral transforms of the Bessel-type kernel


def _wynn(partial):
    """Wynn epsilon extrapolation of a sequence of partial sums; returns (limit, error)."""
    s = [complex(v) for v in partial]
    n = len(s)
    e_prev = [0.0] * (n + 1)
    e_cur = list(s)
    estimates = []
    for k in range(1, n):
        e_next = []
        for j in range(len(e_cur) - 1):
            d = e_cur[j + 1] - e_cur[j]
            if d == 0:
                e_next.append(complex(1e300))
            else:
                e_next.append(e_prev[j + 1] + 1.0 / d)
        e_prev, e_cur = e_cur, e_next
        if k % 2 == 0 and e_cur:
            estimates.append(e_cur[-1])
        if len(e_cur) < 2:
            break
    if len(estimates) < 2:
        return s[-1], abs(s[-1] - s[-2])
    return estimates[-1], abs(estimates[-1] - estimates[-2])


def _base_grid(p, Xs, Ys):
    # bessel_base on the outer product, with the Bessel factors computed once per axis
    jx0, jx1 = _jcal(p, Xs), _jcal(p + 1, Xs)
    jy0, jy1 = _jcal(p, Ys), _jcal(p + 1, Ys)
    X, Y = Xs[:, None], Ys[None, :]
    D = X - Y
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Y**p * (X * jx1[:, None] * jy0[None, :] - Y * jy1[None, :] * jx0[:, None]) / D
    near = np.abs(D) <= 1e-6 * np.maximum(1.0, np.maximum(np.abs(X), np.abs(Y)))
    if np.any(near):
        i, j = np.nonzero(near)
        out[i, j] = bessel_base(p, Xs[i], Ys[j])
    return out


class _TNodes:
    """Quadrature for ``\\int_0^infty dt`` of ``t^{kappa-1} e^{-t} F(y/t)`` with oscillatory ``F``.

    ``t >= 1`` uses Gauss-Legendre panels up to 61.  Below 1 the variable
    ``rho = 2 sqrt(y/t)`` turns the oscillation of ``F`` into one with period
    about ``2 pi``; panels of length ``pi`` give alternating partial sums that
    are extrapolated with Wynn's epsilon algorithm.
    """

    def __init__(self, y, kappa, panels=40, order=16):
        self.panels = panels
        g, w = leggauss(order)
        g, w = 0.5 * (g + 1.0), 0.5 * w
        big_t = np.concatenate([1.0 + 4.0 * (j + g) for j in range(15)])
        big_w = np.concatenate([4.0 * w for _ in range(15)])
        rho0 = 2.0 * math.sqrt(y)
        rho = np.concatenate([rho0 + math.pi * (j + g) for j in range(panels)])
        rw = np.concatenate([math.pi * w for _ in range(panels)])
        small_t = 4.0 * y / rho**2
        small_w = rw * 8.0 * y / rho**3
        self.t = np.concatenate([big_t, small_t])
        self.w = np.concatenate([big_w, small_w]) * self.t ** (kappa - 1) * np.exp(-self.t)
        self.nbig = big_t.size
        self.order = order

    def integrate(self, vals):
        """Sum ``w * vals`` along the last axis with extrapolation of the small-``t`` panels."""
        vals = np.asarray(vals)
        head = vals[..., : self.nbig] @ self.w[: self.nbig]
        tail = (vals[..., self.nbig:] * self.w[self.nbig:]).reshape(
            vals.shape[:-1] + (self.panels, self.order)).sum(axis=-1)
        partial = np.cumsum(tail, axis=-1)
        flat = partial.reshape(-1, self.panels)
        lim = np.empty(flat.shape[0], dtype=complex)
        err = np.empty(flat.shape[0])
        for i, row in enumerate(flat):
            lim[i], err[i] = _wynn(row)
        return (head + lim.reshape(head.shape)), err.reshape(np.shape(head))


def _s_circle(x):
    return Contour(0.0, max(1.0, x ** (1.0 / 3.0)))


def _kernel_I_composition(power, kappa, th, x, y, tol):
    """``\\oint ds \\int dt s^{-kappa-1} t^{kappa-1} e^{s-t} K_III^{(0,m)}(x/s, y/t)``.

    The perturbed Bessel kernel is split into its unperturbed part and the
    rank-one terms, so the ``s`` and ``t`` integrals factorise except for the
    unperturbed part, which is done on a product grid.
    """
    power, _, th = _reduce_pair(power, np.zeros(0), th)
    tq = _TNodes(y, kappa)
    Ys = y / tq.t
    c = _s_circle(x)
    # Xi-tilde values along t do not depend on the s resolution
    xis = []
    for i in range(th.size):
        vals, _ = saddle_contour(Ys, 1, -power, [], th[: i + 1], tol=tol * 1e-2)
        xis.append(tq.integrate(vals[None, :]))

    def total(n):
        s, ws = c.rule(n)
        cs = ws * s ** (-kappa - 1) * np.exp(s)
        Xs = x / s
        B = _base_grid(power, Xs, Ys)
        tb, eb = tq.integrate(cs @ B)
        val, err = tb, eb
        for i in range(th.size):
            lam, _ = saddle_contour(Xs, -1, power, th[:i], [], tol=tol * 1e-2)
            S = cs @ lam
            T, eT = xis[i]
            val = val - S * T[0]
            err = err + abs(S) * eT[0]
        return complex(np.ravel(val)[0]), float(np.ravel(err)[0])

    n = 64
    prev, _ = total(n)
    while True:
        n *= 2
        val, qerr = total(n)
        err = abs(val - prev)
        if err <= tol * max(abs(val), 1.0):
            return val.real, err + qerr
        if n >= 2**12:
            raise AccuracyError("composition did not converge", val.real, err)
        prev = val


def _rank_one_III(power, pi, th, Xs, Ys, tol):
    """Lambda-tilde, Xi-tilde, Lambda, Xi of the perturbed Bessel kernel.

    Shapes ``(m, len(Xs))`` etc.; the kernel is
    ``base - sum LtXt + sum LX``.
    """
    m, n = th.size, pi.size
    Lt = np.array([saddle_contour(Xs, -1, power, th[:i], [], tol)[0] for i in range(m)])
    Xt = np.array([saddle_contour(Ys, 1, -power, [], th[: i + 1], tol)[0] for i in range(m)])
    La = np.array([saddle_contour(Xs, -1, power, th, pi[: j + 1], tol)[0] for j in range(n)])
    Xi = np.array([saddle_contour(Ys, 1, -power, pi[:j], th, tol)[0] for j in range(n)])
    shape = (0, len(np.atleast_1d(Xs)))
    return (Lt.reshape(m, -1) if m else np.zeros(shape), Xt.reshape(m, -1) if m else np.zeros(shape),
            La.reshape(n, -1) if n else np.zeros(shape), Xi.reshape(n, -1) if n else np.zeros(shape))


def kernel_II_composition(p, tau, kappa, nu, x, y, tol=1e-9, with_error=False):
    """``kernel_II`` as an ``s``/``t`` integral transform of the perturbed Bessel kernel.

        (1/tau)(x/y)^{kappa/2} \\oint ds \\int_0^infty dt s^{-kappa-1} t^{kappa-1} e^{s-t}
            e^{x/(s tau^2) - y/(t tau^2)} K_III^{(n,m)}(x/(s tau), y/(t tau))

    The ``t`` integrand decays at both ends, so a double-exponential rule is
    used; the ``s`` circle is refined by doubling.
    """
    p.check("II", tau)
    _check_args(x, y)
    pi, th = _signed_sets(p)
    power = _III_power(p, nu)
    c = Contour(0.0, max(1.0, (x / tau) ** (1.0 / 3.0)))
    rate = 1.0 / tau**2

    def t_factor(t):
        with np.errstate(over="ignore", under="ignore"):
            return t ** (kappa - 1) * np.exp(-t - y * rate / t)

    def live(t):
        return (y * rate / t < 700.0) & (t < 700.0)

    def total(n):
        s, ws = c.rule(n)
        cs = ws * s ** (-kappa - 1) * np.exp(s + x * rate / s)
        Xs = x / (s * tau)
        Lt, _, La, _ = _rank_one_III(power, pi, th, Xs, np.array([1.0]), tol * 1e-2)
        SL_t = Lt @ cs
        SL = La @ cs

        def f(t):
            out = np.zeros(t.shape, dtype=complex)
            ok = live(t)
            if np.any(ok):
                tt = t[ok]
                Ys = y / (tt * tau)
                acc = cs @ _base_grid(power, Xs, Ys)
                _, Xt, _, Xi = _rank_one_III(power, pi, th, np.array([1.0]), Ys, tol * 1e-2)
                acc = acc - SL_t @ Xt + SL @ Xi
                out[ok] = acc * t_factor(tt)
            return out

        res = integrate_halfline(f, tol=tol * 1e-2, scale=max(1.0, math.sqrt(y) / tau))
        return complex(res.value), res.est_error

    n = 64
    prev, _ = total(n)
    while True:
        n *= 2
        val, qerr = total(n)
        err = abs(val - prev)
        if err <= tol * max(abs(val), 1.0) or n >= 2**11:
            break
        prev = val
    if err > tol * max(abs(val), 1.0):
        raise AccuracyError("composition did not converge", val.real, err)
    pref = (1.0 / tau) * (x / y) ** (kappa / 2.0)
    out = pref * val.real
    return (out, pref * (err + qerr)) if with_error else out


# ---------------------------------------------------------------------------
# integrable decompositions


@dataclass(frozen=True)
class Decomposition:
    """``total = base - sum(lam_tilde * xi_tilde) + sum(lam * xi)``."""

    which: str
    base: float
    lam_tilde: np.ndarray
    xi_tilde: np.ndarray
    lam: np.ndarray
    xi: np.ndarray

    @property
    def total(self):
        return float((self.base - np.sum(self.lam_tilde * self.xi_tilde)
                      + np.sum(self.lam * self.xi)).real)


def _II_rank_one(power, tau, kappa, pi, th, x, y, tol):
    cu, _ = _II_contours(tau, pi, th)
    rv = 1.5 * max(1.0, float(np.max(pi)) if pi.size else 0.0)
    cv = Contour(0.0, rv)
    xs, ys = np.array([x]), np.array([y])
    px = (x / tau**2) ** (kappa / 2.0)
    py = (2.0 / tau) * (y / tau**2) ** (-kappa / 2.0)

    def gpart(num, den):
        def f(v):
            X = (1.0 - tau * v) * x / tau**2
            return log_g_reg(kappa, X) + 1.0 / v + _log_rational(v, power, num, den)
        return px * _circle_integral(f, cv, tol)[0][0]

    def hpart(num, den):
        def f(u):
            Y = (1.0 - tau * u) * y / tau**2
            return log_h_reg(kappa, Y) - 1.0 / u + _log_rational(u, -power, num, den)
        return py * _circle_integral(f, cu, tol)[0][0]

    m, n = th.size, pi.size
    Lt = np.array([gpart(th[:i], []) for i in range(m)], dtype=complex)
    Xt = np.array([hpart([], th[: i + 1]) for i in range(m)], dtype=complex)
    La = np.array([gpart(th, pi[: j + 1]) for j in range(n)], dtype=complex)
    Xi = np.array([hpart(pi[:j], th) for j in range(n)], dtype=complex)
    return Lt, Xt, La, Xi


def _I_rank_one(power, kappa, th, x, y, tol):
    cu, cv = _I_contours(th)

    def gpart(num):
        def f(v):
            return log_g_reg(kappa, -x * v) + 1.0 / v + _log_rational(v, power, num, [])
        return _circle_integral(f, cv, tol)[0][0]

    def hpart(den):
        def f(u):
            return (_log_hankel_factor(kappa, -y * u) - 1.0 / u
                    + _log_rational(u, -power, [], den))
        return _circle_integral(f, cu, tol)[0][0]

    Lt = np.array([gpart(th[:i]) for i in range(th.size)], dtype=complex)
    Xt = np.array([hpart(th[: i + 1]) for i in range(th.size)], dtype=complex)
    return Lt, Xt


def decompose_integrable(which, p, nu, x, y, kappa=0, tau=None, tol=TOL):
    """Split a perturbed limiting kernel into its unperturbed part and rank-one terms.

    With ``P = nu + n - m`` (``nu - m`` for regime I) the kernel equals

        base_P(x, y) - sum_i Lt_i(x) Xt_i(y) + sum_j L_j(x) X_j(y),

    where ``base_P`` is the unperturbed kernel with ``nu`` replaced by ``P``,
    ``Lt_i`` carries ``prod_{k<i}(v - theta_k)``, ``Xt_i`` carries
    ``1/prod_{k<=i}(u - theta_k)``, ``L_j`` carries
    ``prod_k(v - theta_k)/prod_{l<=j}(v - pi_l)`` and ``X_j`` carries
    ``prod_{l<j}(u - pi_l)/prod_k(u - theta_k)``.  The rank-one contours only
    need to enclose their own poles.

    Parameters
    ----------
    which : {"I", "II", "III"}
    p : PerturbationSet
    nu : int
    x, y : float
    kappa : int
        Regimes I and II.
    tau : float
        Regime II.

    Returns
    -------
    Decomposition
    """
    _check_args(x, y)
    pi, th = _signed_sets(p)
    x, y = float(x), float(y)
    empty = np.zeros(0, dtype=complex)
    if which == "III":
        p.check("III")
        P = _III_power(p, nu)
        base = complex(bessel_base(P, x, y)[0])
        Lt, Xt, La, Xi = _rank_one_III(P, pi, th, np.array([x]), np.array([y]), tol)
        return Decomposition("III", base.real, Lt[:, 0], Xt[:, 0], La[:, 0], Xi[:, 0])
    if which == "II":
        p.check("II", tau)
        P = _III_power(p, nu)
        v, _ = _kernel_II_raw(P, float(tau), int(kappa), np.zeros(0), np.zeros(0),
                              np.array([x]), np.array([y]), tol)
        Lt, Xt, La, Xi = _II_rank_one(P, float(tau), int(kappa), pi, th, x, y, tol)
        return Decomposition("II", float(v[0, 0].real), Lt, Xt, La, Xi)
    if which == "I":
        p.check("I")
        P = _KI_power(p, nu)
        v, _ = _kernel_I_raw(P, int(kappa), np.zeros(0), np.array([x]), np.array([y]), tol)
        Lt, Xt = _I_rank_one(P, int(kappa), th, x, y, tol)
        return Decomposition("I", float(v[0, 0].real), Lt, Xt, empty, empty)
    raise DomainError(f"unknown regime {which!r}")


# ---------------------------------------------------------------------------
# convergence scans


@dataclass(frozen=True)
class ScanRow:
    """One cell of a convergence table; ``error`` holds a message when the cell failed."""

    param: float
    x: float
    y: float
    finite: float
    limit: float
    rel_error: float
    est_error: float
    error: str = None


def _finite_contours(N, mu, p):
    """Nested circles for the finite-N coupled kernel in the scaled variable ``u``.

    ``eta = b0 - N u / mu`` with ``b0 = (1+mu)^2/(4 mu^2)`` maps ``alpha q_j`` to
    ``theta_hat_j`` (``alpha q = b0`` to 0), ``delta_l`` to
    ``max(pi_hat_l, 1/N)`` and the branch point ``eta = 0`` to
    ``bhat = (1+mu)^2/(4 mu N)``.  The inner circle runs from ``-rin`` to a
    point between ``max(theta_hat, 0)`` and ``bhat``; the outer circle is
    centred at 0.
    """
    pi, th = _signed_sets(p)
    b0 = (1.0 + mu) ** 2 / (4.0 * mu**2)
    bhat = (1.0 + mu) ** 2 / (4.0 * mu * N)
    tp = max(float(np.max(th)) if th.size else 0.0, 0.0)
    top = min(bhat, tp + 1.0)
    if not top > tp:
        raise GeometryError("theta_hat beyond the branch point of the finite kernel")
    rin = _inner_radius(th)
    pu = tp + 0.6 * (top - tp)
    rv = 1.5 * max(rin, pu, 1.0 / N + (float(np.max(pi)) if pi.size else 0.0))
    scale = N / mu

    def to_eta(c, r):
        return Contour(b0 - scale * c, scale * r, 64)

    inner = to_eta(0.5 * (pu - rin), 0.5 * (pu + rin))
    outer = to_eta(0.0, rv)
    return ContourPair(inner, outer, "nested")


def _finite_value(N, mu, p, regime, x, y, tol):
    params = build_perturbed_params(N, mu, p, regime.nu, regime.kappa)
    k = FiniteKernel("coupled", params, "contour-quadrature", tol,
                     contours=_finite_contours(N, mu, p))
    kappa = regime.kappa
    if regime.regime == "I":
        xs, ys = mu * x / N, mu * y / N
        pref = (mu / N) * (y / x) ** kappa
    else:
        xs, ys = x / (4.0 * N**2), y / (4.0 * N**2)
        pref = (y / x) ** (kappa / 2.0) / (4.0 * N**2)
        if regime.regime == "III":
            pref *= math.exp((math.sqrt(y) - math.sqrt(x)) / (2.0 * mu * N))
    g = kernel_grid(k, [xs], [ys])
    return pref * float(g.values[0, 0]), abs(pref) * float(g.est_error[0, 0])


def _limit_value(regime, x, y, tol):
    p, kappa, nu = regime.perturbations, regime.kappa, regime.nu
    if regime.regime == "I":
        q = PerturbationSet((), p.theta_hat)
        return kernel_I(q, kappa, nu, x, y, tol=tol, with_error=True)
    if regime.regime == "II":
        return kernel_II(p, regime.tau, kappa, nu, x, y, tol=tol, with_error=True)
    v, e = kernel_III(p, nu, math.sqrt(x), math.sqrt(y), tol=tol, with_error=True)
    c = 0.5 * (x * y) ** -0.25
    return c * v, c * e


def _run_cells(cells, fn, workers):
    def safe(cell):
        try:
            return fn(*cell)
        except Exception as exc:  # a failed cell must not abort the table
            param, x, y = cell
            nan = float("nan")
            return ScanRow(param, x, y, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(safe, cells))
    return [safe(c) for c in cells]


def _row(param, x, y, fin, lim):
    f, fe = fin
    l, le = lim
    return ScanRow(float(param), float(x), float(y), f, l, abs(f / l - 1.0), fe + le)


def hard_edge_scan(regime, schedule, N_list, probe, tol=1e-9, workers=1):
    """Rescaled finite-N kernels against their hard-edge limit.

    For every ``N`` the coupled parameters come from
    ``build_perturbed_params(N, schedule(N), ...)`` and the finite kernel is
    evaluated by contour quadrature on circles adapted to the scaling:

    * regime I:   ``(mu/N) K_N(mu x/N, mu y/N) (y/x)^{kappa}`` against ``kernel_I``;
    * regime II:  ``(1/4N^2) K_N(x/4N^2, y/4N^2) (y/x)^{kappa/2}`` against ``kernel_II``;
    * regime III: the regime II rescaling times ``exp((sqrt y - sqrt x)/(2 mu N))``
      against ``(1/2)(xy)^{-1/4} kernel_III(sqrt x, sqrt y)``.

    ``K_N`` is in the density gauge of ``rmt_kit.kernels``.

    Returns
    -------
    list of ScanRow
        Row-major over ``N`` then probe.
    """
    probe = [(float(a), float(b)) for a, b in probe]
    limits = {}
    for x, y in probe:
        try:
            limits[(x, y)] = _limit_value(regime, x, y, tol)
        except Exception as exc:
            limits[(x, y)] = exc

    def cell(N, x, y):
        lim = limits[(x, y)]
        if isinstance(lim, Exception):
            raise lim
        mu = schedule(N)
        return _row(N, x, y, _finite_value(int(N), mu, regime.perturbations, regime, x, y, tol), lim)

    return _run_cells([(N, x, y) for N in N_list for x, y in probe], cell, workers)


def interpolate_scan(p, kappa, nu, tau_list, direction, probe, tol=1e-9, workers=1):
    """The interpolating kernel against its ``tau -> infinity`` and ``tau -> 0`` limits.

    * ``to-I``:   ``tau K_II(tau x, tau y; tau) (y/x)^{kappa/2}`` against ``kernel_I``
      (``pi_hat`` must vanish);
    * ``to-III``: ``K_II(x, y; tau) exp(2(sqrt y - sqrt x)/tau)`` against
      ``(1/2)(xy)^{-1/4} kernel_III(sqrt x, sqrt y)``.
    """
    probe = [(float(a), float(b)) for a, b in probe]
    if direction == "to-I":
        p.check("I")
        q = PerturbationSet((), p.theta_hat)

        def lim(x, y):
            return kernel_I(q, kappa, nu, x, y, tol=tol, with_error=True)

        def fin(tau, x, y):
            v, e = kernel_II(p, tau, kappa, nu, tau * x, tau * y, tol=tol, with_error=True)
            c = tau * (y / x) ** (kappa / 2.0)
            return c * v, c * e
    elif direction == "to-III":
        p.check("III")

        def lim(x, y):
            v, e = kernel_III(p, nu, math.sqrt(x), math.sqrt(y), tol=tol, with_error=True)
            c = 0.5 * (x * y) ** -0.25
            return c * v, c * e

        def fin(tau, x, y):
            v, e = kernel_II(p, tau, kappa, nu, x, y, tol=tol, with_error=True)
            c = math.exp(2.0 * (math.sqrt(y) - math.sqrt(x)) / tau)
            return c * v, c * e
    else:
        raise DomainError(f"unknown direction {direction!r}")
    limits = {pt: lim(*pt) for pt in probe}

    def cell(tau, x, y):
        return _row(tau, x, y, fin(float(tau), x, y), limits[(x, y)])

    return _run_cells([(t, x, y) for t in tau_list for x, y in probe], cell, workers)


def trend_ok(rows):
    """``True`` when ``rel_error`` strictly decreases along the ladder at every probe."""
    by_probe = {}
    for r in rows:
        by_probe.setdefault((r.x, r.y), []).append(r)
    for seq in by_probe.values():
        errs = [r.rel_error for r in seq]
        if any(not math.isfinite(e) for e in errs):
            return False
        if any(b >= a for a, b in zip(errs, errs[1:])):
            return False
    return True
