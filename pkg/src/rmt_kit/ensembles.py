"""Ensemble parameters, exact samplers and joint densities.

All matrices are stored in their diagonalising bases: ``Q = diag(q)``,
``Sigma = diag(sigma)`` and ``Omega = diag(sqrt(delta))`` embedded ``N x L``.
A complex Gaussian entry of variance ``v`` has independent real and
imaginary parts of variance ``v/2``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "CoupledParams",
    "WishartParams",
    "ProductParams",
    "MatrixPair",
    "validate",
    "sample_coupled",
    "sample_wishart",
    "sample_product",
    "sample_spectra",
    "squared_singular_values",
    "log_jpdf_coupled",
    "log_jpdf_wishart",
    "log_jpdf_product",
    "make_rng",
]


def _vec(values):
    return tuple(float(v) for v in np.ravel(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class CoupledParams:
    """Coupled product ensemble ``Y = G X`` with ``W = alpha 1``.

    Attributes
    ----------
    N, M, L : int
        ``X`` is ``M x N`` and ``G`` is ``L x M``.
    alpha : float
        Variance scale of ``G``.
    q : tuple of float
        ``M`` eigenvalues of ``Q``.
    delta : tuple of float
        ``N`` squared singular values of the coupling matrix ``Omega``.
    """

    N: int
    M: int
    L: int
    alpha: float
    q: tuple
    delta: tuple

    def __post_init__(self):
        object.__setattr__(self, "q", _vec(self.q))
        object.__setattr__(self, "delta", _vec(self.delta))

    @property
    def nu(self):
        return self.M - self.N

    @property
    def kappa(self):
        return self.L - self.N

    def to_wishart(self):
        """Marginal law of ``X``: generalised Wishart with ``sigma = -delta/alpha``."""
        return WishartParams(self.N, self.M, self.q, [-d / self.alpha for d in self.delta])

    def as_dict(self):
        return {"kind": "coupled", "N": self.N, "M": self.M, "L": self.L,
                "alpha": self.alpha, "q": list(self.q), "delta": list(self.delta)}


@dataclass(frozen=True)
class WishartParams:
    """Generalised Wishart ensemble ``exp[-Tr X Sigma X^* - Tr Q X X^*]``."""

    N: int
    M: int
    q: tuple
    sigma: tuple

    def __post_init__(self):
        object.__setattr__(self, "q", _vec(self.q))
        object.__setattr__(self, "sigma", _vec(self.sigma))

    @property
    def nu(self):
        return self.M - self.N

    @property
    def kappa(self):
        return 0

    def as_dict(self):
        return {"kind": "wishart", "N": self.N, "M": self.M,
                "q": list(self.q), "sigma": list(self.sigma)}


@dataclass(frozen=True)
class ProductParams:
    """Product of independent ``G`` (variance ``1/alpha``) and correlated ``X``."""

    N: int
    M: int
    L: int
    alpha: float
    q: tuple

    def __post_init__(self):
        object.__setattr__(self, "q", _vec(self.q))

    @property
    def nu(self):
        return self.M - self.N

    @property
    def kappa(self):
        return self.L - self.N

    def to_coupled(self):
        """The coupled ensemble with all ``delta = 0``."""
        return CoupledParams(self.N, self.M, self.L, self.alpha, self.q, [0.0] * self.N)

    def as_dict(self):
        return {"kind": "product", "N": self.N, "M": self.M, "L": self.L,
                "alpha": self.alpha, "q": list(self.q)}


@dataclass(frozen=True)
class MatrixPair:
    G: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)


def _check_shape(params):
    errs = []
    for name in ("N", "M") + (("L",) if hasattr(params, "L") else ()):
        val = getattr(params, name)
        if int(val) != val or val < 1:
            errs.append(f"{name} must be a positive integer")
    if params.M < params.N:
        errs.append("M >= N required (nu >= 0)")
    if hasattr(params, "L") and params.L < params.N:
        errs.append("L >= N required (kappa >= 0)")
    if len(params.q) != params.M:
        errs.append(f"q must have M={params.M} entries")
    if hasattr(params, "alpha") and not (math.isfinite(params.alpha) and params.alpha > 0):
        errs.append("alpha must be positive")
    for name in ("q", "delta", "sigma"):
        vec = getattr(params, name, None)
        if vec is not None and not all(math.isfinite(v) for v in vec):
            errs.append(f"{name} must be finite")
    if any(v <= 0 for v in params.q):
        errs.append("q must be positive")
    if errs:
        raise ValidationError("; ".join(errs), "shape")


def validate(params):
    """Check every type invariant and the convergence constraint.

    Coupled parameters need ``alpha q_i - delta_j > 0`` (constraint ``aqd``)
    and ``delta_j >= 0``; Wishart parameters need ``q_i + sigma_j > 0``
    (constraint ``constraint3``).

    Raises
    ------
    ValidationError
        Lists every offending 1-based ``(i, j)`` pair.
    """
    _check_shape(params)
    q = np.asarray(params.q)
    if isinstance(params, CoupledParams):
        d = np.asarray(params.delta)
        if d.size != params.N:
            raise ValidationError(f"delta must have N={params.N} entries", "shape")
        if np.any(d < 0):
            raise ValidationError("delta must be nonnegative", "shape")
        bad = params.alpha * q[:, None] - d[None, :] <= 0
        if np.any(bad):
            pairs = [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(bad))]
            raise ValidationError(f"alpha q_i - delta_j > 0 (aqd) violated at {pairs}", "aqd", pairs)
    elif isinstance(params, WishartParams):
        s = np.asarray(params.sigma)
        if s.size != params.N:
            raise ValidationError(f"sigma must have N={params.N} entries", "shape")
        bad = q[:, None] + s[None, :] <= 0
        if np.any(bad):
            pairs = [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(bad))]
            raise ValidationError(f"q_i + sigma_j > 0 (constraint3) violated at {pairs}",
                                  "constraint3", pairs)
    elif not isinstance(params, ProductParams):
        raise TypeError(f"unsupported params type {type(params).__name__}")


def make_rng(seed):
    """Counter-based generator (Philox) for an integer seed or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def _cgauss(rng, shape, var):
    scale = np.sqrt(np.asarray(var) / 2.0)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * scale


def _draw_coupled(params, rng, batch=None):
    N, M, L, a = params.N, params.M, params.L, params.alpha
    q = np.asarray(params.q)
    d = np.asarray(params.delta)
    lead = () if batch is None else (batch,)
    var_x = 1.0 / (q[:, None] - d[None, :] / a)
    X = _cgauss(rng, lead + (M, N), var_x)
    # G | X has mean (X Omega)^dagger / alpha; only the first N rows are shifted
    G = _cgauss(rng, lead + (L, M), 1.0 / a)
    shift = np.conj(np.swapaxes(X, -1, -2)) * (np.sqrt(d)[:, None] / a)
    G[..., :N, :] += shift
    return G, X


def sample_coupled(params, seed):
    """Exact draw of ``(G, X)`` from the coupled ensemble.

    ``X`` has independent entries of variance ``1/(q_i - delta_j/alpha)``;
    given ``X``, ``G`` is Gaussian with mean ``(X Omega)^dagger/alpha`` and
    entry variance ``1/alpha``.
    """
    validate(params)
    G, X = _draw_coupled(params, make_rng(seed))
    return MatrixPair(G, X)


def sample_product(params, seed):
    """Independent ``G`` and ``X`` (the coupled sampler at ``delta = 0``)."""
    return sample_coupled(params.to_coupled(), seed)


def sample_wishart(params, seed):
    """``M x N`` matrix with independent entries of variance ``1/(q_i + sigma_j)``."""
    validate(params)
    q = np.asarray(params.q)
    s = np.asarray(params.sigma)
    return _cgauss(make_rng(seed), (params.M, params.N), 1.0 / (q[:, None] + s[None, :]))


def squared_singular_values(Y):
    """Squared singular values of ``Y`` (or of a stack of matrices), ascending."""
    Y = np.asarray(Y)
    if not np.all(np.isfinite(Y)):
        raise DomainError("non-finite matrix entries")
    try:
        sv = np.linalg.svd(Y, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"SVD did not converge: {exc}") from exc
    return np.sort(sv**2, axis=-1)


def _spectra_chunk(params, kind, count, ss):
    rng = make_rng(ss)
    if kind == "wishart":
        q = np.asarray(params.q)
        s = np.asarray(params.sigma)
        X = _cgauss(rng, (count, params.M, params.N), 1.0 / (q[:, None] + s[None, :]))
        return squared_singular_values(X)
    coupled = params.to_coupled() if kind == "product" else params
    G, X = _draw_coupled(coupled, rng, batch=count)
    return squared_singular_values(G @ X)


def sample_spectra(params, count, seed, workers=1, chunk=4096):
    """Batch of ``count`` spectra, one row per sample, each ascending.

    For coupled and product parameters the spectrum is that of ``Y = G X``;
    for Wishart parameters that of ``X``.  Chunk ``c`` always uses the
    ``c``-th child of ``SeedSequence(seed)``, so the output is bit-identical
    for any number of ``workers``.
    """
    validate(params)
    kind = {CoupledParams: "coupled", ProductParams: "product", WishartParams: "wishart"}[type(params)]
    sizes = [min(chunk, count - s) for s in range(0, count, chunk)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, children))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _spectra_chunk(params, kind, *job), jobs))
    else:
        parts = [_spectra_chunk(params, kind, *job) for job in jobs]
    if not parts:
        return np.empty((0, params.N))
    return np.concatenate(parts, axis=0)


def _positive(vec, name, n):
    v = np.asarray(vec, dtype=float).ravel()
    if v.size != n:
        raise DomainError(f"{name} must have {n} entries")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DomainError(f"{name} must be positive")
    return v


def _logdet_from_logs(logs):
    # determinant of exp(logs) (real entries) with per-column scaling
    from .gram import logdet

    logs = np.asarray(logs)
    shift = np.max(logs.real, axis=0)
    sign, val = logdet(np.exp(logs - shift).real)
    return sign, val + float(np.sum(shift))


def _monomial_exp_det(q, x, nu):
    # det[1, q, .., q^{nu-1}, exp(-q_i x_j)] as (sign, log)
    from .gram import logdet

    q = np.asarray(q)
    cols = [q**p for p in range(nu)]
    E = np.exp(-q[:, None] * x[None, :])
    return logdet(np.column_stack(cols + [E]) if cols else E)


def log_jpdf_coupled(params, x, y):
    """Log joint density of the squared singular values of ``X`` and ``Y``.

    The ``I_kappa`` determinant is evaluated as ``det[y^kappa g(delta y)]``
    against a normalisation stripped of ``prod delta^{kappa/2}``, which is the
    same density and stays finite when one ``delta`` vanishes.

    Returns
    -------
    float
        ``-inf`` where the density vanishes.

    Raises
    ------
    DegeneracyError
        For coalescing ``q`` or ``delta``.
    DomainError
        For nonpositive ``x`` or ``y``.
    """
    from .gram import _log_z_coupled
    from .specfun import log_g_reg

    validate(params)
    N, nu, k, a = params.N, params.nu, params.kappa, params.alpha
    x = _positive(x, "x", N)
    y = _positive(y, "y", N)
    sz, lz = _log_z_coupled(params, with_delta_power=False)
    d = np.asarray(params.delta)
    logs1 = (k * np.log(y)[:, None] + log_g_reg(k, y[:, None] * d[None, :]).real)
    s1, l1 = _logdet_from_logs(logs1)
    logs2 = (-(k + 1) * np.log(x)[:, None] - a * y[None, :] / x[:, None])
    s2, l2 = _logdet_from_logs(logs2)
    s3, l3 = _monomial_exp_det(params.q, x, nu)
    sign = s1 * s2 * s3 * sz
    if sign == 0:
        return -math.inf
    if sign < 0:
        raise ArithmeticError("joint density evaluated negative; check parameter ordering")
    return l1 + l2 + l3 - lz


def log_jpdf_wishart(params, x):
    """Log joint density of the squared singular values of ``X`` (generalised Wishart)."""
    from .gram import log_normalization, logdet

    validate(params)
    N, nu = params.N, params.nu
    x = _positive(x, "x", N)
    sz, lz = log_normalization("wishart", params)
    s = np.asarray(params.sigma)
    s1, l1 = logdet(np.exp(-s[:, None] * x[None, :]))
    s3, l3 = _monomial_exp_det(params.q, x, nu)
    sign = s1 * s3 * sz
    if sign == 0:
        return -math.inf
    if sign < 0:
        raise ArithmeticError("joint density evaluated negative")
    return l1 + l3 - lz


def log_jpdf_product(params, x, y):
    """Log joint density for the product of independent ``G`` and correlated ``X``."""
    from .gram import log_normalization, log_vandermonde

    validate(params)
    N, nu, k, a = params.N, params.nu, params.kappa, params.alpha
    x = _positive(x, "x", N)
    y = _positive(y, "y", N)
    sz, lz = log_normalization("product", params)
    sv, lv = log_vandermonde(y)
    logs2 = (-(k + 1) * np.log(x)[:, None] - a * y[None, :] / x[:, None])
    s2, l2 = _logdet_from_logs(logs2)
    s3, l3 = _monomial_exp_det(params.q, x, nu)
    sign = sv * s2 * s3 * sz
    if sign == 0:
        return -math.inf
    if sign < 0:
        raise ArithmeticError("joint density evaluated negative")
    return k * float(np.sum(np.log(y))) + lv + l2 + l3 - lz
