"""Symmetric eigen/singular computations and spectrum functionals.

Matrices are dense ``numpy`` arrays; symmetric inputs are checked for exact
symmetry (samplers mirror one stored copy, so this always holds for them).
"""
from dataclasses import dataclass

import numpy as np


class SingularMinorError(ValueError):
    """Raised when a minor that must be inverted is numerically singular."""


def singular_cutoff(n):
    return 1e-10 * np.sqrt(n)


def as_symmetric(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix is not exactly symmetric")
    return a


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted descending with matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self):
        return len(self.eigenvalues)


@dataclass(frozen=True)
class SingularProfile:
    """Singular values descending and ``mus[k-1] = 1 / sigmas[n-k]``.

    ``mus`` holds ``inf`` where the matching singular value is below the
    singularity cutoff.
    """

    sigmas: np.ndarray
    mus: np.ndarray

    @property
    def singular(self):
        return bool(np.isinf(self.mus[0]))


def eigen_sym(a):
    a = as_symmetric(a)
    w, v = np.linalg.eigh(a)
    return Spectrum(w[::-1].copy(), v[:, ::-1].copy())


def eigvals_desc(a):
    """Eigenvalues of a (stack of) symmetric matrices, descending."""
    return np.linalg.eigvalsh(a)[..., ::-1]


def singular_profile(a, cutoff=None):
    a = as_symmetric(a)
    s = np.sort(np.abs(np.linalg.eigvalsh(a)))[::-1]
    cutoff = singular_cutoff(len(s)) if cutoff is None else cutoff
    with np.errstate(divide="ignore"):
        mus = np.where(s[::-1] < cutoff, np.inf, 1.0 / s[::-1])
    return SingularProfile(s, mus)


def sigma_min(a):
    """Least singular value of a symmetric matrix (``min |lambda|``)."""
    return float(np.min(np.abs(np.linalg.eigvalsh(as_symmetric(a)))))


def count_interval(spec, a, b):
    """Number of eigenvalues in the open interval ``(a, b)``."""
    if not a < b:
        raise ValueError("need a < b")
    lam = spec.eigenvalues if isinstance(spec, Spectrum) else np.asarray(spec)
    return int(np.count_nonzero((lam > a) & (lam < b)))


def gap(spec, k, ell):
    """``lambda_k - lambda_{k+ell}`` with 1-based ``k``."""
    lam = spec.eigenvalues if isinstance(spec, Spectrum) else np.asarray(spec)
    n = len(lam)
    if ell < 0 or k < 1 or k + ell > n:
        raise IndexError(f"gap index out of range: k={k}, ell={ell}, n={n}")
    return float(lam[k - 1] - lam[k - 1 + ell])


def norm_star(sigmas):
    """``sqrt(sum_k sigma_k^2 log(1+k)^2)`` over descending ``sigmas``."""
    s = np.asarray(sigmas, float)
    if not np.all(np.isfinite(s)):
        raise ValueError("norm_star needs finite singular values (matrix is singular)")
    w = np.log1p(np.arange(1, len(s) + 1))
    return float(np.sqrt(np.sum((s * w) ** 2)))


def inverse_norm_star(profile):
    """``||A^{-1}||_*`` from the profile of ``A``."""
    return norm_star(profile.mus)


def distortion_ratio(sig_asc):
    """``||A^{-1}||_* / mu_1`` from ascending singular values of ``A``.

    Computed as ``sqrt(sum (sigma_min / sigma_(k))^2 log(1+k)^2)``, which
    never forms ``A^{-1}``.
    """
    s = np.asarray(sig_asc, float)
    r = s[..., :1] / s
    w = np.log1p(np.arange(1, s.shape[-1] + 1))
    return np.sqrt(np.sum((r * w) ** 2, axis=-1))


def dist_to_colspan(a, j):
    """Distance from column ``j`` to the span of the remaining columns."""
    a = np.asarray(a, float)
    x = a[:, j]
    rest = np.delete(a, j, axis=1)
    if rest.shape[1] == 0:
        return float(np.linalg.norm(x))
    u, s, _ = np.linalg.svd(rest, full_matrices=False)
    tol = max(rest.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    basis = u[:, s > tol]
    r = x - basis @ (basis.T @ x)
    return float(np.linalg.norm(r))


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    abs_err: float


def dist_identity_rhs(a):
    """``|<A_n^{-1} X, X> - a_11| / sqrt(1 + ||A_n^{-1} X||^2)`` for the first column."""
    a = as_symmetric(a)
    minor = a[1:, 1:]
    x = a[1:, 0]
    if minor.size == 0:
        return abs(a[0, 0])
    if sigma_min(minor) <= 1e-10:
        raise SingularMinorError("minor is singular; skip this sample")
    y = np.linalg.solve(minor, x)
    return float(abs(y @ x - a[0, 0]) / np.sqrt(1.0 + y @ y))


def dist_identity_check(a):
    """Compare the projection distance ``d_1`` with its closed form."""
    rhs = dist_identity_rhs(a)
    lhs = dist_to_colspan(a, 0)
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))


@dataclass(frozen=True)
class PerturbationResult:
    """Outcome of the eigenvector/minor inequality check.

    ``max_ratio`` is ``max |<v, X>| |u_j| / |lambda - lambda'|`` over pairs with
    ``|lambda - lambda'| > 1e-8``; ``max_excess`` is the largest
    ``|u_j| |<v, X>| - |lambda - lambda'|`` over all pairs, the form that
    stays meaningful when eigenvalues coincide.
    """

    max_ratio: float
    max_excess: float
    pairs: int
    skipped: int


def perturbation_check(a, j, pairs="all"):
    """Check ``|<v, X^(j)>| <= |lambda - lambda'| / |u_j|``.

    ``(lambda, u)`` ranges over eigenpairs of ``a``, ``(lambda', v)`` over
    eigenpairs of the minor with row/column ``j`` removed. ``pairs="least"``
    restricts both to the least-singular pair.
    """
    a = as_symmetric(a)
    lam, u = np.linalg.eigh(a)
    minor = np.delete(np.delete(a, j, 0), j, 1)
    lamp, v = np.linalg.eigh(minor)
    x = np.delete(a[:, j], j)
    if pairs == "least":
        i0 = int(np.argmin(np.abs(lam)))
        i1 = int(np.argmin(np.abs(lamp)))
        lam, u = lam[i0:i0 + 1], u[:, i0:i0 + 1]
        lamp, v = lamp[i1:i1 + 1], v[:, i1:i1 + 1]
    elif pairs != "all":
        raise ValueError("pairs must be 'all' or 'least'")
    uj = np.abs(u[j, :])
    proj = np.abs(v.T @ x)
    keep = uj >= 1e-12
    lhs = np.outer(uj[keep], proj)
    diff = np.abs(lam[keep][:, None] - lamp[None, :])
    excess = float(np.max(lhs - diff)) if lhs.size else 0.0
    big = diff > 1e-8
    ratio = float(np.max(lhs[big] / diff[big])) if np.any(big) else 0.0
    return PerturbationResult(ratio, excess, int(lhs.size), int((~keep).sum() * len(lamp)))


def sigma_min_lower_margins(a):
    """``sigma_min(a) - |v_j| d_j(a)`` for every ``j``; ``v`` the least singular vector."""
    spec = eigen_sym(a)
    i = int(np.argmin(np.abs(spec.eigenvalues)))
    s = abs(spec.eigenvalues[i])
    v = spec.eigenvectors[:, i]
    d = np.array([dist_to_colspan(a, j) for j in range(spec.n)])
    return s - np.abs(v) * d


def sigma_min_lower_check(a, slack=1e-8):
    return bool(np.all(sigma_min_lower_margins(a) >= -slack))


def interlacing_violation(a, j):
    """Largest amount by which minor eigenvalues escape Cauchy interlacing."""
    lam = np.linalg.eigvalsh(as_symmetric(a))
    minor = np.delete(np.delete(a, j, 0), j, 1)
    mu = np.linalg.eigvalsh(minor)
    # ascending: lam[i] <= mu[i] <= lam[i+1]
    return float(max(np.max(lam[:-1] - mu), np.max(mu - lam[1:]), 0.0))
