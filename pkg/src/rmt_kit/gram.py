"""Gram-type matrices, their inverses and the Cauchy-type determinants.

Three kinds share one layout: ``nu`` monomial columns followed by ``N``
columns of pairing integrals ``\\int phi_i psi_j``.

* ``wishart``: ``psi_j(x) = exp(-sigma_j x)``, ``phi_i(x) = exp(-q_i x)``,
  monomials ``q_i^k``.
* ``product``: ``psi_j(y) = y^{kappa+j-1}``,
  ``phi_i(y) = (q_i/(alpha y))^{kappa/2} K_kappa(2 sqrt(alpha q_i y))``,
  monomials ``q_i^k``.
* ``coupled``: ``psi_j(y) = y^{kappa/2} I_kappa(2 sqrt(delta_j y))``, same
  ``phi`` as ``product``, monomials ``(alpha q_i)^k``.

Determinants and normalisations are returned as ``(sign, log|value|)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import CoupledParams, ProductParams, WishartParams, validate
from .errors import ConditioningError, DegeneracyError, DomainError
from .specfun import log_gamma_int

__all__ = [
    "GramMatrix",
    "GramInverse",
    "pairing_integral",
    "build_gram",
    "cauchy_inverse",
    "invert_gram",
    "block_inverse",
    "cauchy_det_generalized",
    "log_normalization",
    "logdet",
    "log_vandermonde",
    "check_distinct",
    "CONDITION_LIMIT",
]

CONDITION_LIMIT = 1e12
DEGENERACY_GAP = 1e-8


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    nu: int
    kind: str


@dataclass(frozen=True)
class GramInverse:
    entries: np.ndarray
    condition_estimate: float


def _kind_of(params):
    if isinstance(params, CoupledParams):
        return "coupled"
    if isinstance(params, ProductParams):
        return "product"
    if isinstance(params, WishartParams):
        return "wishart"
    raise TypeError(f"unsupported params type {type(params).__name__}")


def check_distinct(values, name):
    """Raise :class:`DegeneracyError` if two entries coincide up to ``1e-8`` of the scale."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size < 2:
        return
    scale = max(1.0, float(np.max(np.abs(v))))
    gaps = np.diff(v)
    if np.any(gaps < DEGENERACY_GAP * scale):
        raise DegeneracyError(f"{name} has coalescing entries (gap {gaps.min():.3g})")


def logdet(matrix):
    """Sign and log-magnitude of a determinant via pivoted LU on column-scaled input."""
    a = np.asarray(matrix)
    if a.shape[0] == 0:
        return 1.0, 0.0
    colmax = np.max(np.abs(a), axis=0)
    if np.any(colmax == 0):
        return 0.0, -math.inf
    sign, logabs = np.linalg.slogdet(a / colmax)
    return sign, float(logabs + np.sum(np.log(colmax)))


def log_vandermonde(x):
    """``Delta(x) = prod_{j<k} (x_k - x_j)`` as ``(sign, log|Delta|)``."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 1.0, 0.0
    d = x[None, :] - x[:, None]
    iu = np.triu_indices(x.size, 1)
    diffs = d[iu]
    if np.any(diffs == 0):
        return 0.0, -math.inf
    return float(np.prod(np.sign(diffs))), float(np.sum(np.log(np.abs(diffs))))


def pairing_integral(kind, params, i, j):
    """Closed-form pairing integral ``I_{ij}`` (1-based indices).

    Parameters
    ----------
    kind : {"wishart", "product", "coupled"}
    params : WishartParams, ProductParams or CoupledParams
    i : int
        Row index ``1 <= i <= M`` (the ``q`` label).
    j : int
        Column index ``1 <= j <= N``.
    """
    if not (1 <= i <= params.M and 1 <= j <= params.N):
        raise IndexError(f"pairing index ({i}, {j}) out of range")
    q = params.q[i - 1]
    if kind == "wishart":
        return 1.0 / (q + params.sigma[j - 1])
    if kind == "product":
        k, a = params.kappa, params.alpha
        lg = log_gamma_int(k + j) + log_gamma_int(j)
        return math.exp(lg - (k + j) * math.log(a) - j * math.log(q)) / 2.0
    if kind == "coupled":
        k, a, d = params.kappa, params.alpha, params.delta[j - 1]
        return d ** (k / 2) / (2.0 * a**k * (a * q - d))
    raise ValueError(f"unknown kind {kind!r}")


def build_gram(kind, params, rescaled=False):
    """Assemble the ``M x M`` Gram-type matrix.

    Parameters
    ----------
    kind : {"wishart", "product", "coupled"}
    params : matching params object
    rescaled : bool, optional
        For ``coupled`` only: drop the factor ``delta_j^{kappa/2}`` from the
        integral columns, i.e. pair against ``y^kappa g_kappa(delta_j y)``.
        This keeps the matrix regular when some ``delta_j = 0``; the kernel
        is unchanged because ``psi`` is rescaled by the same factor.
    """
    validate(params)
    N, M, nu = params.N, params.M, params.nu
    q = np.asarray(params.q, dtype=float)
    A = np.empty((M, M))
    if kind == "wishart":
        base = q
        A[:, nu:] = 1.0 / (q[:, None] + np.asarray(params.sigma)[None, :])
    elif kind == "product":
        base = q
        j = np.arange(1, N + 1)
        k, a = params.kappa, params.alpha
        lg = log_gamma_int(k + j) + log_gamma_int(j)
        A[:, nu:] = 0.5 * np.exp(lg[None, :] - (k + j)[None, :] * math.log(a)
                                 - j[None, :] * np.log(q)[:, None])
    elif kind == "coupled":
        a, k = params.alpha, params.kappa
        d = np.asarray(params.delta, dtype=float)
        base = a * q
        cols = 1.0 / (2.0 * a**k * (a * q[:, None] - d[None, :]))
        if not rescaled:
            cols = cols * d[None, :] ** (k / 2)
        A[:, nu:] = cols
    else:
        raise ValueError(f"unknown kind {kind!r}")
    for p in range(nu):
        A[:, p] = base**p
    return GramMatrix(A, nu, kind)


def cauchy_inverse(q, sigma):
    """Closed-form inverse of ``A_ij = 1/(q_i + sigma_j)``.

    ``C_ij = prod_l (q_l + sigma_i)(q_j + sigma_l) /
    ((q_j + sigma_i) prod_{k != i}(sigma_i - sigma_k) prod_{l != j}(q_j - q_l))``,
    assembled from log-magnitudes and signs.
    """
    q = np.asarray(q, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if q.shape != s.shape or q.ndim != 1:
        raise DomainError("cauchy_inverse needs two vectors of equal length")
    check_distinct(q, "q")
    check_distinct(s, "sigma")
    qs = q[None, :] + s[:, None]  # qs[a, b] = q_b + sigma_a
    if np.any(qs == 0):
        raise DegeneracyError("q_i + sigma_j vanishes")
    n = q.size
    lq = np.log(np.abs(qs))
    sq = np.sign(qs)
    # row factor (depends on i): prod_l (q_l + sigma_i) / prod_{k != i}(sigma_i - sigma_k)
    ds = s[:, None] - s[None, :]
    np.fill_diagonal(ds, 1.0)
    dq = q[:, None] - q[None, :]
    np.fill_diagonal(dq, 1.0)
    log_row = lq.sum(axis=1) - np.log(np.abs(ds)).sum(axis=1)
    sgn_row = np.prod(sq, axis=1) * np.prod(np.sign(ds), axis=1)
    # column factor (depends on j): prod_l (q_j + sigma_l) / prod_{l != j}(q_j - q_l)
    log_col = lq.sum(axis=0) - np.log(np.abs(dq)).sum(axis=1)
    sgn_col = np.prod(sq, axis=0) * np.prod(np.sign(dq), axis=1)
    # C[i, j] carries 1/(q_j + sigma_i) = 1/qs[i, j]
    logC = log_row[:, None] + log_col[None, :] - lq
    sgnC = sgn_row[:, None] * sgn_col[None, :] * sq
    C = sgnC * np.exp(logC)
    A = 1.0 / (q[:, None] + s[None, :])
    return GramInverse(C, float(np.linalg.cond(A, 1)) if n else 1.0)


def invert_gram(A, limit=CONDITION_LIMIT):
    """Pivoted-LU inverse with one step of iterative refinement.

    Raises
    ------
    ConditioningError
        If the 1-norm condition estimate exceeds ``limit`` or the residual
        check fails.
    """
    mat = A.entries if isinstance(A, GramMatrix) else np.asarray(A, dtype=float)
    n = mat.shape[0]
    # equilibrate columns, which leaves the inverse's row scaling explicit
    colmax = np.max(np.abs(mat), axis=0)
    if np.any(colmax == 0):
        raise ConditioningError("Gram matrix has a zero column", math.inf)
    B = mat / colmax
    cond = float(np.linalg.cond(B, 1))
    if not np.isfinite(cond) or cond > limit:
        raise ConditioningError(f"Gram matrix condition {cond:.3g} exceeds {limit:.0e}", cond)
    eye = np.eye(n)
    X = np.linalg.solve(B, eye)
    X = X + np.linalg.solve(B, eye - B @ X)
    resid = float(np.max(np.abs(B @ X - eye))) if n else 0.0
    if resid > 1e-8 * max(1.0, cond * np.finfo(float).eps * 1e4):
        raise ConditioningError(f"Gram inverse residual {resid:.3g} too large", cond)
    return GramInverse(X / colmax[:, None], cond)


def block_inverse(A, nu):
    """Inverse assembled from the Schur-complement blocks ``a, J, b, g``.

    ``A = [[a, J], [b, I]]`` with ``a`` the top-left ``nu x nu`` block and
    ``g = I - b a^{-1} J`` the Schur complement.
    """
    mat = A.entries if isinstance(A, GramMatrix) else np.asarray(A, dtype=float)
    if nu == 0:
        return np.linalg.inv(mat)
    a, J = mat[:nu, :nu], mat[:nu, nu:]
    b, I = mat[nu:, :nu], mat[nu:, nu:]
    ai = np.linalg.inv(a)
    g = I - b @ ai @ J
    gi = np.linalg.inv(g)
    top_left = ai + ai @ J @ gi @ b @ ai
    return np.block([[top_left, -ai @ J @ gi], [-gi @ b @ ai, gi]])


def cauchy_det_generalized(q, sigma_or_delta, variant="plus-sigma", alpha=1.0):
    """Closed form of the Cauchy determinant with ``M - N`` monomial columns.

    ``plus-sigma``:
        ``det[1, q, .., q^{nu-1}, 1/(q_i + sigma_j)]
        = (-1)^{N nu} Delta_N(sigma) Delta_M(q) / prod(q_i + sigma_j)``.
    ``alpha-minus-delta``:
        ``det[1, q, .., q^{nu-1}, 1/(alpha q_i - delta_j)]
        = (-alpha)^{MN - N(N+1)/2} Delta_M(q) Delta_N(delta) / prod(alpha q_i - delta_j)``.

    Returns
    -------
    (sign, logabs)
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(sigma_or_delta, dtype=float)
    M, N = q.size, p.size
    if N > M:
        raise DomainError("need N <= M")
    check_distinct(q, "q")
    check_distinct(p, "sigma" if variant == "plus-sigma" else "delta")
    sq, lq = log_vandermonde(q)
    sp, lp = log_vandermonde(p)
    if variant == "plus-sigma":
        den = q[:, None] + p[None, :]
        sign = (-1.0) ** (N * (M - N)) * sq * sp
        logabs = lq + lp
    elif variant == "alpha-minus-delta":
        den = alpha * q[:, None] - p[None, :]
        power = M * N - N * (N + 1) // 2
        sign = (-1.0) ** power * sq * sp
        logabs = lq + lp + power * math.log(alpha)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if np.any(den == 0):
        raise DegeneracyError("vanishing denominator in Cauchy determinant")
    sign *= float(np.prod(np.sign(den)))
    logabs -= float(np.sum(np.log(np.abs(den))))
    return sign, logabs


def log_normalization(kind, params):
    """Normalising constant ``Z`` (coupled), ``Z_1`` (wishart) or ``Z_2`` (product).

    Returns
    -------
    (sign, logabs)
    """
    validate(params)
    N, M, nu = params.N, params.M, params.nu
    q = np.asarray(params.q, dtype=float)
    check_distinct(q, "q")
    lfac = log_gamma_int(N + 1)
    if kind == "wishart":
        s = np.asarray(params.sigma, dtype=float)
        check_distinct(s, "sigma")
        sq, lq = log_vandermonde(q)
        ss, ls = log_vandermonde(s)
        sign = (-1.0) ** (N * nu) * sq * ss
        return sign, lfac + lq + ls - float(np.sum(np.log(q[:, None] + s[None, :])))
    if kind == "product":
        a, k = params.alpha, params.kappa
        l = np.arange(1, N + 1)
        power = N * nu + N * (N - 1) // 2
        sq, lq = log_vandermonde(q)
        sign = (-1.0) ** power * sq
        logabs = (2 * lfac + power * math.log(a) - (N * k + N * M) * math.log(a)
                  + float(np.sum(log_gamma_int(k + l) + log_gamma_int(l)))
                  + lq - N * float(np.sum(np.log(q))))
        return sign, logabs
    if kind == "coupled":
        return _log_z_coupled(params, with_delta_power=True)
    raise ValueError(f"unknown kind {kind!r}")


def _log_z_coupled(params, with_delta_power=True):
    # Z = (N!)^2 (-alpha)^{N nu + N(N-1)/2} alpha^{-N kappa} Delta_M(q) Delta_N(delta)
    #     prod delta^{kappa/2} prod (alpha q_i - delta_j)^{-1}
    N, nu, a, k = params.N, params.nu, params.alpha, params.kappa
    q = np.asarray(params.q, dtype=float)
    d = np.asarray(params.delta, dtype=float)
    check_distinct(q, "q")
    check_distinct(d, "delta")
    power = N * nu + N * (N - 1) // 2
    sq, lq = log_vandermonde(q)
    sd, ld = log_vandermonde(d)
    sign = (-1.0) ** power * sq * sd
    logabs = (2 * log_gamma_int(N + 1) + power * math.log(a) - N * k * math.log(a)
              + lq + ld - float(np.sum(np.log(a * q[:, None] - d[None, :]))))
    if with_delta_power and k > 0:
        if np.any(d == 0):
            return 0.0, -math.inf
        logabs += 0.5 * k * float(np.sum(np.log(d)))
    return sign, logabs
