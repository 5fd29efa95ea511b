"""Circle and half-line quadrature with adaptive refinement.

All contour integrals are normalised, i.e. they return
``(1/2 pi i) \\oint f(z) dz`` over counter-clockwise circles.  Integrands must
be vectorised: ``f`` receives an ndarray of nodes and returns an ndarray of
the same shape.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError, GeometryError

__all__ = [
    "Contour",
    "ContourPair",
    "QuadratureResult",
    "make_enclosing_contour",
    "integrate_contour",
    "integrate_double_contour",
    "integrate_halfline",
    "integrate_interval",
    "NODE_CAP",
]

NODE_CAP = 2**14
DEFAULT_TOL = 1e-10


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Contour:
    """Counter-clockwise circle centred on the real axis.

    Parameters
    ----------
    center : float
        Real centre.
    radius : float
        Positive radius.
    nodes : int
        Starting node count, a power of two and at least 8.
    """

    center: float
    radius: float
    nodes: int = 64

    def __post_init__(self):
        if not (math.isfinite(self.center) and math.isfinite(self.radius)):
            raise GeometryError("contour center/radius must be finite")
        if self.radius <= 0:
            raise GeometryError(f"contour radius must be positive, got {self.radius}")
        if not (_is_pow2(int(self.nodes)) and self.nodes >= 8):
            raise GeometryError(f"node count must be a power of two >= 8, got {self.nodes}")

    @property
    def orientation(self):
        return "counter-clockwise"

    def contains(self, z, strict=True):
        d = np.abs(np.asarray(z) - self.center)
        return d < self.radius if strict else d <= self.radius

    def rule(self, n=None):
        """Nodes and weights of the ``n``-point trapezoid rule.

        The weights already include ``dz/(2 pi i)``, so
        ``sum(w * f(z))`` approximates the normalised contour integral.  Nodes
        sit at half-integer angles, so none lies on the real axis.
        """
        n = self.nodes if n is None else int(n)
        theta = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        e = self.radius * np.exp(1j * theta)
        return self.center + e, e / n

    def as_dict(self):
        return {"center": self.center, "radius": self.radius, "nodes": self.nodes}


@dataclass(frozen=True)
class ContourPair:
    """Two circles used for a double contour integral.

    ``mode="nested"`` requires the outer disk to strictly contain the inner
    one; ``mode="separated"`` requires disjoint closed disks.
    """

    inner: Contour
    outer: Contour
    mode: str = "nested"

    def __post_init__(self):
        d = abs(self.outer.center - self.inner.center)
        if self.mode == "nested":
            if not d + self.inner.radius < self.outer.radius:
                raise GeometryError("outer contour does not strictly contain the inner one")
        elif self.mode == "separated":
            if not d > self.inner.radius + self.outer.radius:
                raise GeometryError("separated contours overlap")
        else:
            raise GeometryError(f"unknown contour mode {self.mode!r}")


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    est_error: float
    nodes_used: int


def make_enclosing_contour(points, exclude=(), margin_policy=0.5, min_gap=1e-9, nodes=64):
    """Circle around ``points`` that keeps every ``exclude`` point outside.

    The circle is centred at the midpoint of the point interval and has
    radius ``spread/2 + margin_policy * gap`` where ``gap`` is the distance
    from the interval to the nearest excluded point (1 when nothing is
    excluded).

    Raises
    ------
    GeometryError
        If an excluded point sits inside the point interval or closer than
        ``min_gap``.
    """
    pts = np.asarray(points, dtype=float).ravel()
    if pts.size == 0:
        raise GeometryError("make_enclosing_contour needs at least one point")
    if not 0.0 < margin_policy < 1.0:
        raise GeometryError("margin_policy must lie in (0, 1)")
    lo, hi = float(pts.min()), float(pts.max())
    exc = np.asarray(exclude, dtype=float).ravel()
    if exc.size:
        dist = np.where(exc < lo, lo - exc, np.where(exc > hi, exc - hi, 0.0))
        gap = float(dist.min())
        if gap < min_gap:
            bad = float(exc[np.argmin(dist)])
            raise GeometryError(f"excluded point {bad} is within {min_gap} of the enclosed set")
    else:
        gap = 1.0
    return Contour(0.5 * (lo + hi), 0.5 * (hi - lo) + margin_policy * gap, nodes)


def _start_nodes(c, n):
    return max(8, c.nodes if n is None else n)


def integrate_contour(f, c, tol=DEFAULT_TOL, max_nodes=NODE_CAP):
    """Normalised contour integral ``(1/2 pi i) \\oint_c f(z) dz``.

    The trapezoid rule is doubled until two successive values differ by at
    most ``tol * max(1, |value|)``.

    Raises
    ------
    AccuracyError
        If ``max_nodes`` is reached first; carries the partial result.
    """
    n = _start_nodes(c, None)
    z, w = c.rule(n)
    prev = complex(np.sum(w * f(z)))
    while True:
        n *= 2
        z, w = c.rule(n)
        val = complex(np.sum(w * f(z)))
        err = abs(val - prev)
        if err <= tol * max(1.0, abs(val)):
            return QuadratureResult(val, err, n)
        if n >= max_nodes:
            raise AccuracyError("contour quadrature hit the node cap", val, err)
        prev = val


def integrate_double_contour(f, pair, tol=DEFAULT_TOL, max_nodes=NODE_CAP):
    """Double normalised contour integral of ``f(u, v)``.

    ``u`` runs over ``pair.inner`` and ``v`` over ``pair.outer``.  Both node
    counts are doubled in lockstep.
    """

    def total(n):
        u, wu = pair.inner.rule(n)
        v, wv = pair.outer.rule(n)
        vals = f(u[:, None], v[None, :])
        return complex(wu @ vals @ wv)

    n = max(_start_nodes(pair.inner, None), _start_nodes(pair.outer, None))
    prev = total(n)
    while True:
        n *= 2
        val = total(n)
        err = abs(val - prev)
        if err <= tol * max(1.0, abs(val)):
            return QuadratureResult(val, err, n)
        if n >= max_nodes:
            raise AccuracyError("double contour quadrature hit the node cap", val, err)
        prev = val


def _refine(rule, f, tol, h0, min_step):
    # generic step-halving driver for the double-exponential rules
    h = h0
    t, w = rule(h, 0)
    vals = f(t)
    if not np.all(np.isfinite(vals)):
        raise DomainError("integrand returned non-finite values")
    total = np.sum(w * vals)
    while True:
        h *= 0.5
        t, w = rule(h, 1)
        vals = f(t)
        if not np.all(np.isfinite(vals)):
            raise DomainError("integrand returned non-finite values")
        new = 0.5 * total + np.sum(w * vals)
        err = abs(new - total)
        total = new
        if err <= tol * max(1.0, abs(total)):
            npts = int(round(2 * rule.span / h)) + 1
            return QuadratureResult(total, float(err), npts)
        if h < min_step:
            raise AccuracyError("double-exponential quadrature did not converge", total, float(err))


def _de_grid(span, h, odd):
    # span is a multiple of the initial step so refined grids nest exactly
    k = int(round(span / h))
    if odd:
        j = np.arange(1, k + 1, 2)
        return h * np.concatenate((-j[::-1], j))
    return h * np.arange(-k, k + 1)


class _ExpSinh:
    # t = scale * exp(pi/2 sinh s) maps the real line onto (0, inf)
    span = 4.0

    def __init__(self, scale):
        self.scale = scale

    def __call__(self, h, odd):
        s = _de_grid(self.span, h, odd)
        e = np.exp(0.5 * math.pi * np.sinh(s))
        t = self.scale * e
        return t, h * t * 0.5 * math.pi * np.cosh(s)


class _TanhSinh:
    # tanh-sinh on [a, b]; node positions measured from a to keep the left
    # endpoint accurate, which is where the kernels' log singularity sits
    span = 3.5

    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, h, odd):
        s = _de_grid(self.span, h, odd)
        u = 0.5 * math.pi * np.sinh(s)
        L = self.b - self.a
        t = self.a + L / (1.0 + np.exp(-2.0 * u))
        w = h * L * 0.5 * 0.5 * math.pi * np.cosh(s) / np.cosh(u) ** 2
        return t, w


def integrate_halfline(f, decay="exponential", tol=DEFAULT_TOL, scale=1.0):
    """``\\int_0^\\infty f(t) dt`` for exponentially decaying ``f``.

    Uses the exp-sinh double-exponential substitution
    ``t = scale * exp(pi/2 sinh s)``, which also absorbs integrable
    algebraic or logarithmic endpoint behaviour at 0, with step halving.

    Parameters
    ----------
    f : callable
        Vectorised integrand; must stay finite at all nodes.
    decay : {"exponential"}
        Decay class at infinity.
    tol : float
    scale : float
        Characteristic length; nodes cluster around it.
    """
    if decay != "exponential":
        raise DomainError(f"unsupported decay class {decay!r}")
    with np.errstate(under="ignore"):
        return _refine(_ExpSinh(float(scale)), f, tol, 0.5, 2.0**-9)


def integrate_interval(f, a, b, tol=DEFAULT_TOL):
    """``\\int_a^b f(t) dt`` by tanh-sinh quadrature (endpoint singularities allowed)."""
    if not b > a:
        raise DomainError("integrate_interval needs b > a")
    with np.errstate(under="ignore"):
        return _refine(_TanhSinh(float(a), float(b)), f, tol, 0.5, 2.0**-9)


def pair_sum(fv, v, u, fu):
    """Separable double sum ``sum_jk fv_j fu_k / (u_k - v_j)``.

    ``fv`` and ``fu`` may carry leading batch axes; the last axis indexes the
    nodes.  Returns ``fv @ (1/(u - v)) @ fu`` broadcast over batch axes.
    """
    cauchy = 1.0 / (u[None, :] - v[:, None])
    return np.einsum("...j,jk,...k->...", fv, cauchy, fu)
