"""Integer-order Bessel functions from their integral representations.

Everything here is vectorised over the argument: scalars go in and come back
out as Python complex/float, arrays keep their shape.  Orders are integers.
Because ``I_{-k} = I_k`` and ``K_{-k} = K_k`` for integer ``k``, negative
orders are folded onto their absolute value (``bessel_j`` and ``hankel2``
pick up the usual ``(-1)^k`` instead).

The ``scaled`` variants strip the dominant exponential so callers can carry
it in log space:

* ``bessel_i(k, w, scaled=True)``  returns ``exp(-w) I_k(w)``
* ``bessel_k(k, w, scaled=True)``  returns ``exp(w) K_k(w)``
* ``g_reg(k, z, scaled=True)``     returns ``exp(-2 sqrt z) g_k(z)``
* ``h_reg(k, z, scaled=True)``     returns ``exp(2 sqrt z) h_k(z)``
"""

import math
import threading

import numpy as np

from .errors import AccuracyError, DomainError, RangeError

__all__ = [
    "bessel_i",
    "bessel_k",
    "bessel_j",
    "hankel2",
    "g_reg",
    "h_reg",
    "log_g_reg",
    "log_h_reg",
    "log_gamma_int",
    "OVERFLOW_GUARD",
]

OVERFLOW_GUARD = 700.0
_TOL = 1e-14
_MAX_TRAP_NODES = 2**16
_MIN_STEP = 2.0**-11
_SERIES_RADIUS = 25.0


def _order(k):
    if isinstance(k, bool) or int(k) != k:
        raise DomainError(f"Bessel order must be an integer, got {k!r}")
    return abs(int(k))


def _as_complex(w):
    arr = np.asarray(w, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite Bessel argument")
    return arr


def _finish(out, scalar):
    if scalar:
        return complex(out.reshape(-1)[0])
    return out


def _trapezoid_i(k, w, scaled, tol):
    # (1/pi) int_0^pi exp(w cos t) cos(k t) dt; the integrand is even and
    # 2pi-periodic so the endpoint-halved trapezoid rule is spectrally exact.
    wf = w.reshape(-1)
    if wf.size == 0:
        return w.copy()
    n = 16
    need = float(np.max(np.abs(wf))) + k + 16.0
    while n < 2 * need:
        n *= 2
    shift = 1.0 if scaled else 0.0
    prev = None
    while True:
        theta = np.linspace(0.0, math.pi, n + 1)
        wts = np.full(n + 1, 1.0 / n)
        wts[0] = wts[-1] = 0.5 / n
        f = np.exp(np.outer(wf, np.cos(theta) - shift)) * np.cos(k * theta)
        val = f @ wts
        scale = np.abs(f) @ wts
        if prev is not None:
            diff = np.abs(val - prev)
            if np.all(diff <= tol * np.maximum(scale, np.abs(val)) + 1e-300):
                return val.reshape(w.shape)
        if n >= _MAX_TRAP_NODES:
            raise AccuracyError("I_k trapezoid did not converge", val.reshape(w.shape),
                                float(np.max(diff)))
        prev = val
        n *= 2


def bessel_i(order, w, scaled=False, tol=_TOL, guard=OVERFLOW_GUARD):
    """Modified Bessel function of the first kind for integer order.

    Parameters
    ----------
    order : int
        Integer order; negative orders are folded since ``I_{-k} = I_k``.
    w : complex or array_like
        Argument.
    scaled : bool, optional
        Return ``exp(-w) I_k(w)`` instead.
    tol : float, optional
        Stopping tolerance of the node-doubling loop, measured against the
        integrand's absolute mass.
    guard : float, optional
        Largest admissible ``|Re w|`` (for ``scaled=True`` the largest
        admissible ``-2 Re w``).

    Returns
    -------
    complex or ndarray

    Raises
    ------
    RangeError
        When the overflow guard is exceeded.
    DomainError
        For non-finite input.
    """
    k = _order(order)
    arr = _as_complex(w)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    re = arr.real
    over = np.maximum(0.0, -2.0 * re) if scaled else np.abs(re)
    if over.size and float(np.max(over)) > guard:
        raise RangeError(f"|Re w| beyond overflow guard {guard}")
    out = np.empty(arr.shape, dtype=complex)
    # near the origin the quadrature cancels down to (w/2)^k/k!; the series does not
    small = np.abs(arr) <= 2.0
    if np.any(small):
        ws = arr[small]
        val = (0.5 * ws) ** k * _series_g(k, 0.25 * ws * ws)
        out[small] = val * np.exp(-ws) if scaled else val
    if np.any(~small):
        out[~small] = _trapezoid_i(k, arr[~small], scaled, tol)
    return _finish(out, scalar)


def _k_principal(k, w, scaled, tol):
    # K_k(w) = int_0^inf exp(-w cosh t) cosh(k t) dt along the bent path
    # t(s) = s - i phi tanh(s), phi = arg w, which turns the phase of w into
    # pure decay at large s.  Valid for |arg w| < pi/2.
    wf = w.reshape(-1)
    if wf.size == 0:
        return w.copy()
    r = np.abs(wf)
    phi = np.angle(wf)
    # truncation: |w| sinh(S) ~ 60 + k S is plenty for the double exponential
    S = np.arcsinh(60.0 / np.maximum(r, 1e-300))
    for _ in range(3):
        S = np.arcsinh((60.0 + k * S) / np.maximum(r, 1e-300))
    smax = float(min(max(np.max(S), 3.0), 40.0))
    shift = 1.0 if scaled else 0.0

    def part(s):
        th = np.tanh(s)
        t = s[None, :] - 1j * phi[:, None] * th[None, :]
        dt = 1.0 - 1j * phi[:, None] * (1.0 - th * th)[None, :]
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            f = np.exp(-wf[:, None] * (np.cosh(t) - shift)) * np.cosh(k * t) * dt
        f[~np.isfinite(f)] = 0.0
        return f

    # the integrand's width near s = 0 is about 1/sqrt|w|
    h = 0.25 * min(1.0, 4.0 / math.sqrt(float(np.max(r))))
    s = np.arange(0.0, smax + h, h)
    f = part(s)
    w0 = np.full(s.size, h)
    w0[0] = 0.5 * h
    total = f @ w0
    mass = np.abs(f) @ w0
    while True:
        h *= 0.5
        s_new = np.arange(h, smax + h, 2 * h)
        f_new = part(s_new)
        new_total = 0.5 * total + f_new.sum(axis=1) * h
        mass = 0.5 * mass + np.abs(f_new).sum(axis=1) * h
        diff = np.abs(new_total - total)
        total = new_total
        # rounding noise of the node sum grows like sqrt(nodes)
        noise = 4.0 * np.finfo(float).eps * math.sqrt(smax / h)
        if np.all(diff <= np.maximum(tol, noise) * np.maximum(mass, np.abs(total)) + 1e-300):
            return total.reshape(w.shape)
        if h < _MIN_STEP:
            raise AccuracyError("K_k quadrature did not converge", total.reshape(w.shape),
                                float(np.max(diff)))


def bessel_k(order, w, scaled=False, tol=_TOL):
    """Modified Bessel function of the second kind for integer order.

    Parameters
    ----------
    order : int
        Integer order (``K_{-k} = K_k``).
    w : complex or array_like
        Argument with ``Re w > 0``.
    scaled : bool, optional
        Return ``exp(w) K_k(w)``.
    tol : float, optional
        Step-halving tolerance relative to the integrand mass.

    Returns
    -------
    complex or ndarray

    Raises
    ------
    DomainError
        If ``Re w <= 0`` anywhere.
    AccuracyError
        If the step-halving loop stalls.
    """
    k = _order(order)
    arr = _as_complex(w)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr.real <= 0.0):
        raise DomainError("bessel_k requires Re(w) > 0")
    return _finish(_k_principal(k, arr, scaled, tol), scalar)


def bessel_j(order, w, tol=_TOL):
    """Bessel function of the first kind, ``J_k(w) = i^{-k} I_k(i w)``."""
    k = int(order)
    val = bessel_i(abs(k), 1j * np.asarray(w, dtype=complex), tol=tol)
    factor = (-1j) ** abs(k) * (-1) ** (abs(k) if k < 0 else 0)
    return val * factor


def _hankel2_lower(k, w, tol):
    # K_k(i w) = (pi/2) (-i)^{k+1} H^(2)_k(w) for Im w < 0
    return (2.0 / math.pi) * (1j) ** (k + 1) * _k_principal(k, 1j * w, False, tol)


def hankel2(order, w, tol=_TOL):
    """Hankel function of the second kind for integer order.

    Defined through ``H_k(w) = (2/pi) i^{k+1} K_k(i w)`` for ``Im w < 0``.
    On the positive real axis the value is the limit from below: it is
    evaluated at ``w - i eps`` and ``w - i eps/2`` with
    ``eps = 1e-8 max(1, |w|)`` and linearly Richardson-extrapolated to
    ``eps = 0``.

    Raises
    ------
    DomainError
        For ``Im w > 0`` or ``w`` on the closed negative real axis.
    """
    k = int(order)
    sign = (-1) ** abs(k) if k < 0 else 1
    k = abs(k)
    arr = _as_complex(w)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    on_axis = arr.imag == 0.0
    if np.any(arr.imag > 0.0) or np.any(on_axis & (arr.real <= 0.0)):
        raise DomainError("hankel2 needs Im(w) < 0 or w real positive")
    out = np.empty(arr.shape, dtype=complex)
    below = ~on_axis
    if np.any(below):
        out[below] = _hankel2_lower(k, arr[below], tol)
    if np.any(on_axis):
        x = arr[on_axis]
        eps = 1e-8 * np.maximum(1.0, np.abs(x))
        h1 = _hankel2_lower(k, x - 1j * eps, tol)
        h2 = _hankel2_lower(k, x - 0.5j * eps, tol)
        out[on_axis] = 2.0 * h2 - h1
    return _finish(sign * out, scalar)


def _series_g(k, z, tol=1e-17):
    term = np.full(z.shape, 1.0 / math.factorial(k), dtype=complex)
    total = term.copy()
    mass = np.abs(term)
    n = 0
    while True:
        n += 1
        term = term * z / (n * (n + k))
        total += term
        mass += np.abs(term)
        if np.all(np.abs(term) <= tol * mass) or n > 400:
            return total


def g_reg(order, z, scaled=False):
    """Entire function ``z^{-k/2} I_k(2 sqrt z) = sum_n z^n / (n! (n+k)!)``.

    The power series is summed for ``|z| <= 25``; beyond that its terms cancel
    badly on the negative axis, so the integral route through ``bessel_i`` is
    used.  ``scaled=True`` multiplies by ``exp(-2 sqrt z)`` (principal root).
    """
    k = _order(order)
    arr = _as_complex(z)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty(arr.shape, dtype=complex)
    small = np.abs(arr) <= _SERIES_RADIUS
    if np.any(small):
        zs = arr[small]
        val = _series_g(k, zs)
        if scaled:
            val = val * np.exp(-2.0 * np.sqrt(zs))
        out[small] = val
    if np.any(~small):
        zl = arr[~small]
        s = np.sqrt(zl)
        out[~small] = bessel_i(k, 2.0 * s, scaled=scaled) / s**k
    return _finish(out, scalar)


def _check_cut(arr):
    if np.any((arr.imag == 0.0) & (arr.real <= 0.0)):
        raise DomainError("argument on the branch cut (-inf, 0]")


def h_reg(order, z, scaled=False):
    """``z^{k/2} K_k(2 sqrt z)`` with the principal square root.

    ``scaled=True`` multiplies by ``exp(2 sqrt z)``.

    Raises
    ------
    DomainError
        If ``z`` lies on ``(-inf, 0]``.
    """
    k = _order(order)
    arr = _as_complex(z)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    _check_cut(arr)
    s = np.sqrt(arr)
    return _finish(s**k * _k_principal(k, 2.0 * s, scaled, _TOL), scalar)


def log_g_reg(order, z):
    """Complex logarithm of ``g_reg`` (any branch), safe for huge ``|z|``."""
    arr = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore"):
        return np.log(g_reg(order, arr, scaled=True)) + 2.0 * np.sqrt(arr)


def log_h_reg(order, z):
    """Complex logarithm of ``h_reg`` (any branch), safe for huge ``|z|``."""
    arr = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore"):
        return np.log(h_reg(order, arr, scaled=True)) - 2.0 * np.sqrt(arr)


_lgamma_lock = threading.Lock()
_lgamma_table = np.zeros(1)  # _lgamma_table[n-1] = ln Gamma(n)


def log_gamma_int(n):
    """``ln Gamma(n) = ln (n-1)!`` for positive integers, from a cached cumulative sum."""
    global _lgamma_table
    arr = np.asarray(n)
    if arr.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise DomainError("log_gamma_int needs integers")
        arr = arr.astype(np.int64)
    if arr.size and int(np.min(arr)) < 1:
        raise DomainError("log_gamma_int needs n >= 1")
    top = int(np.max(arr)) if arr.size else 1
    table = _lgamma_table
    if table.size < top:
        with _lgamma_lock:
            table = _lgamma_table
            if table.size < top:
                size = max(top, 2 * table.size)
                table = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, size)))))
                _lgamma_table = table
    out = table[arr - 1]
    if np.ndim(out) == 0:
        return float(out)
    return out
