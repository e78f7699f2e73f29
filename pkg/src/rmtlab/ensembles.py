"""Entry laws and samplers for every random object used in the lab.

All samplers are pure functions of ``(parameters, seed, index)``; see
:mod:`rmtlab.rng` for the addressing scheme.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln, ndtri

from . import rng

TOL = 1e-12


@dataclass(frozen=True)
class DiscreteLaw:
    """Finitely supported law; values ascending, no moment constraints."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("values and probs must be non-empty and aligned")
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability")
        if abs(sum(self.probs) - 1.0) > TOL:
            raise ValueError("probabilities must sum to 1")

    @classmethod
    def from_pairs(cls, pairs, decimals=12):
        acc = {}
        for v, p in pairs:
            if p == 0:
                continue
            key = round(float(v), decimals) + 0.0
            acc[key] = acc.get(key, 0.0) + float(p)
        keys = sorted(acc)
        return cls(tuple(keys), tuple(acc[k] for k in keys))

    @property
    def v(self):
        return np.asarray(self.values, float)

    @property
    def p(self):
        return np.asarray(self.probs, float)

    def moment(self, k):
        return float(np.sum(self.p * self.v**k))

    @property
    def mean(self):
        return self.moment(1)

    @property
    def variance(self):
        return self.moment(2) - self.mean**2

    def quantile(self, u):
        cum = np.cumsum(self.p)
        idx = np.searchsorted(cum, u, side="right")
        return self.v[np.minimum(idx, len(self.values) - 1)]

    def symmetrized(self):
        """Law of ``zeta - zeta'`` for an independent copy ``zeta'``."""
        return DiscreteLaw.from_pairs(
            (a - b, p * q)
            for a, p in zip(self.values, self.probs)
            for b, q in zip(self.values, self.probs)
        )

    def conditioned(self, lo, hi):
        """Condition on ``|x|`` in the open window ``(lo, hi)``.

        Returns ``(law, p)`` with ``p`` the window probability; ``law`` is
        ``None`` when ``p == 0``.
        """
        keep = [(v, q) for v, q in zip(self.values, self.probs) if lo < abs(v) < hi]
        p = sum(q for _, q in keep)
        if p == 0:
            return None, 0.0
        return DiscreteLaw.from_pairs((v, q / p) for v, q in keep), p

    def cf(self, t):
        """``E exp(2 pi i t X)`` for an array of ``t``."""
        t = np.asarray(t, float)
        return np.exp(2j * np.pi * np.multiply.outer(t, self.v)) @ self.p


def _discrete_B(values, probs):
    a = np.abs(np.asarray(values, float))
    q = np.asarray(probs, float)
    keep = (a > 0) & (q > 0)
    a, q = a[keep], q[keep]
    ps = np.geomspace(1.0, 400.0, 600)
    # (E|x|^p)^(1/p) computed in log space
    lm = np.array([np.logaddexp.reduce(np.log(q) + p * np.log(a)) / p for p in ps])
    return float(np.max(np.exp(lm - 0.5 * np.log(ps))))


def _gaussian_B():
    ps = np.geomspace(1.0, 400.0, 600)
    lm = (0.5 * ps * np.log(2) + gammaln((ps + 1) / 2) - 0.5 * np.log(np.pi)) / ps
    return float(np.max(np.exp(lm - 0.5 * np.log(ps))))


KINDS = ("rademacher", "lazy_signed", "sparse_rademacher", "uniform_pm1_0",
         "gaussian", "custom_discrete")


@dataclass(frozen=True)
class Distribution:
    """Mean-zero, variance-one entry law with its subgaussian proxy ``B``.

    ``B`` is the subgaussian moment ``sup_p p^(-1/2) ||zeta||_p`` floored at 1.
    Use the classmethod constructors; they normalise sparse and lazy kinds.
    """

    kind: str
    params: tuple = ()
    law: DiscreteLaw = None
    subgaussian_proxy_B: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.law is not None:
            if abs(self.law.mean) > TOL or abs(self.law.moment(2) - 1.0) > TOL:
                raise ValueError(f"{self.kind}: law must have mean 0 and variance 1")
        elif self.kind != "gaussian":
            raise ValueError("discrete kinds need an atom table")
        if self.subgaussian_proxy_B <= 0:
            raise ValueError("subgaussian proxy must be positive")

    @classmethod
    def _discrete(cls, kind, params, pairs, B=None):
        law = DiscreteLaw.from_pairs(pairs, decimals=15)
        if B is None:
            B = max(1.0, _discrete_B(law.values, law.probs))
        return cls(kind, tuple(params), law, B)

    @classmethod
    def rademacher(cls):
        return cls._discrete("rademacher", (), [(-1.0, 0.5), (1.0, 0.5)])

    @classmethod
    def lazy_signed(cls, nu):
        if not 0 < nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        a = 1.0 / math.sqrt(nu)
        return cls._discrete("lazy_signed", (nu,), [(-a, nu / 2), (0.0, 1 - nu), (a, nu / 2)])

    @classmethod
    def sparse_rademacher(cls, p):
        if not 0 < p <= 1:
            raise ValueError("p must lie in (0, 1]")
        a = 1.0 / math.sqrt(p)
        return cls._discrete("sparse_rademacher", (p,), [(-a, p / 2), (0.0, 1 - p), (a, p / 2)])

    @classmethod
    def uniform_pm1_0(cls, weights=(1.0, 1.0, 1.0)):
        """Law on ``{-1, 0, 1}`` with the given weights, rescaled to variance 1.

        Mean zero forces equal weight on -1 and +1.
        """
        wm, w0, wp = (float(w) for w in weights)
        tot = wm + w0 + wp
        if min(wm, w0, wp) < 0 or tot <= 0 or abs(wm - wp) > TOL * tot or wm == 0:
            raise ValueError("weights must be non-negative with w(-1) == w(+1) > 0")
        q = wm / tot
        a = 1.0 / math.sqrt(2 * q)
        return cls._discrete("uniform_pm1_0", (wm, w0, wp), [(-a, q), (0.0, w0 / tot), (a, q)])

    @classmethod
    def gaussian(cls):
        return cls("gaussian", (), None, max(1.0, _gaussian_B()))

    @classmethod
    def custom_discrete(cls, atoms):
        atoms = [(float(v), float(p)) for v, p in atoms]
        return cls._discrete("custom_discrete", tuple(atoms), atoms)

    @property
    def is_discrete(self):
        return self.law is not None

    def quantile(self, u):
        if self.law is None:
            return ndtri(u)
        return self.law.quantile(u)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind in ("lazy_signed",):
            d["nu"] = self.params[0]
        elif self.kind == "sparse_rademacher":
            d["p"] = self.params[0]
        elif self.kind == "uniform_pm1_0":
            d["weights"] = list(self.params)
        elif self.kind == "custom_discrete":
            d["atoms"] = [list(a) for a in self.params]
        return d

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            d = {"kind": d}
        kind = d["kind"]
        if kind == "rademacher":
            return cls.rademacher()
        if kind == "gaussian":
            return cls.gaussian()
        if kind == "lazy_signed":
            return cls.lazy_signed(d.get("nu", 0.25))
        if kind == "sparse_rademacher":
            return cls.sparse_rademacher(d["p"])
        if kind == "uniform_pm1_0":
            return cls.uniform_pm1_0(d.get("weights", (1, 1, 1)))
        if kind == "custom_discrete":
            return cls.custom_discrete(d["atoms"])
        raise ValueError(f"unknown distribution kind {kind!r}")


def quantile(dist, u):
    """Inverse-CDF transform shared by ``Distribution`` and ``DiscreteLaw``."""
    return dist.quantile(u)


@dataclass(frozen=True)
class LazyParams:
    """Laziness ``nu`` and the truncation window ``(1, 16 B^2)``."""

    nu: float
    p_truncation: float
    window: tuple

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if not 0 < self.p_truncation <= 1:
            raise ValueError("truncation probability must lie in (0, 1]")
        if not self.window[0] < self.window[1]:
            raise ValueError("empty truncation window")


def lazy_params(dist, nu):
    """Truncation data for the symmetrised law of ``dist``."""
    if not dist.is_discrete:
        raise ValueError("truncation probability needs a discrete law")
    B = dist.subgaussian_proxy_B
    window = (1.0, 16.0 * B * B)
    _, p = dist.law.symmetrized().conditioned(*window)
    return LazyParams(nu, p, window)


def truncated_symmetrized(dist):
    """The conditioned law ``zeta_bar`` and its window probability ``p``."""
    B = dist.subgaussian_proxy_B
    return dist.law.symmetrized().conditioned(1.0, 16.0 * B * B)


def sample_entry(dist, word):
    """One draw from ``dist`` using a single 64-bit random word.

    For Rademacher the top bit of ``word`` decides the sign (0 gives -1).
    """
    return float(dist.quantile(rng.to_uniform(np.array([word], dtype=np.uint64)))[0])


def _tri_positions(n):
    i, j = np.triu_indices(n)
    return i, j, j * (j + 1) // 2 + i


def _check_n(n):
    if int(n) < 1:
        raise ValueError("dimension must be at least 1")


def fill_symmetric(values, n):
    """Dense symmetric matrices from packed upper-triangle stream values.

    ``values`` has trailing axis of length ``n(n+1)/2`` in stream order.
    """
    i, j, pos = _tri_positions(n)
    out = np.empty(values.shape[:-1] + (n, n))
    out[..., i, j] = values[..., pos]
    out[..., j, i] = values[..., pos]
    return out


def sample_sym(dist, n, seed, index=None, trial=0):
    """Random symmetric matrix with i.i.d. entries on and above the diagonal.

    Entry ``(i, j)`` is read from stream position ``j(j+1)/2 + i`` (``i <= j``),
    so ``index`` (global row/column labels) returns the principal submatrix of
    any larger sample drawn with the same seed.
    """
    _check_n(n)
    idx = np.arange(n) if index is None else np.asarray(index, int)
    if len(idx) != n:
        raise ValueError("index length must equal n")
    top = int(idx.max()) + 1
    u = rng.uniforms(seed, rng.TAG_SYM, trial, top * (top + 1) // 2)
    full = fill_symmetric(dist.quantile(u), top)
    return full[np.ix_(idx, idx)]


def sample_sym_batch(dist, n, seed, trials):
    """Stack of ``sample_sym(dist, n, seed, trial=t)`` for ``t`` in ``trials``."""
    _check_n(n)
    u = rng.uniform_batch(seed, rng.TAG_SYM, trials, n * (n + 1) // 2)
    return fill_symmetric(dist.quantile(u), n)


def sample_iid_batch(dist, n, seed, trials):
    """Stack of non-symmetric ``n x n`` matrices with i.i.d. entries."""
    _check_n(n)
    u = rng.uniform_batch(seed, rng.TAG_IID, trials, n * n)
    return dist.quantile(u).reshape(len(trials), n, n)


def sample_col(dist, n, seed, trial=0):
    """Vector with i.i.d. coordinates; coordinate ``j`` at stream position ``j``."""
    _check_n(n)
    return dist.quantile(rng.uniforms(seed, rng.TAG_COL, trial, n))


def sample_col_batch(dist, n, seed, trials):
    _check_n(n)
    return dist.quantile(rng.uniform_batch(seed, rng.TAG_COL, trials, n))


def sample_mu_subset(n, mu, seed, trial=0):
    """Indices of a mu-random subset of ``range(n)``."""
    if not 0 <= mu <= 1:
        raise ValueError("mu must lie in [0, 1]")
    u = rng.uniforms(seed, rng.TAG_SUBSET, trial, n)
    return np.flatnonzero(u < mu)


def _tilde_from_uniforms(dist, u, mu):
    # u[..., 3j], u[..., 3j+1] drive X_j, X'_j; u[..., 3j+2] drives membership
    x = dist.quantile(u[..., 0::3])
    xp = dist.quantile(u[..., 1::3])
    return (x - xp) * (u[..., 2::3] < mu)


def sample_tilde_x(dist, n, mu, seed, trial=0):
    """``X_J - X'_J`` for independent ``X, X'`` and a mu-random ``J``."""
    _check_n(n)
    if not 0 <= mu <= 1:
        raise ValueError("mu must lie in [0, 1]")
    return _tilde_from_uniforms(dist, rng.uniforms(seed, rng.TAG_TILDE, trial, 3 * n), mu)


def sample_tilde_x_batch(dist, n, mu, seed, trials):
    _check_n(n)
    return _tilde_from_uniforms(dist, rng.uniform_batch(seed, rng.TAG_TILDE, trials, 3 * n), mu)


@dataclass(frozen=True)
class ZeroedMatrixParams:
    """Shape of the zeroed-out matrix: zero ``[d] x [d]`` and ``[d+1, n]^2`` blocks."""

    n: int
    d: int
    nu: float
    base: Distribution

    def __post_init__(self):
        if not 1 <= self.d <= self.n / 3:
            raise ValueError(f"block size d={self.d} must satisfy 1 <= d <= n/3 (n={self.n})")
        if not 0 <= self.nu <= 1:
            raise ValueError("nu must lie in [0, 1]")


def _zeroed_layout(n, d):
    r, c = np.meshgrid(np.arange(d, n), np.arange(d), indexing="ij")
    r, c = r.ravel(), c.ravel()
    # (c, r) with c < r is an upper-triangle address
    return r, c, r * (r + 1) // 2 + c


def _zeroed_from_uniforms(params, u, r, c, pos):
    base = params.base
    x = base.quantile(u[..., 3 * pos])
    xp = base.quantile(u[..., 3 * pos + 1])
    h = (x - xp) * (u[..., 3 * pos + 2] < params.nu)
    out = np.zeros(u.shape[:-1] + (params.n, params.n))
    out[..., r, c] = h
    out[..., c, r] = h
    return out


def sample_zeroed(params, seed, trial=0):
    """Zeroed-out symmetric matrix with off-block entries ``zeta_tilde * Z_nu``."""
    n = params.n
    r, c, pos = _zeroed_layout(n, params.d)
    u = rng.uniforms(seed, rng.TAG_ZEROED, trial, 3 * (n * (n + 1) // 2))
    return _zeroed_from_uniforms(params, u, r, c, pos)


def sample_zeroed_batch(params, seed, trials):
    n = params.n
    r, c, pos = _zeroed_layout(n, params.d)
    u = rng.uniform_batch(seed, rng.TAG_ZEROED, trials, 3 * (n * (n + 1) // 2))
    return _zeroed_from_uniforms(params, u, r, c, pos)
