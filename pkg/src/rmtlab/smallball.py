"""Small-ball probabilities, characteristic functions and Fourier-side checks."""
from dataclasses import dataclass
from itertools import product
import math

import numpy as np

from . import ensembles, rng
from .arithmetic import min_torus_sq
from .stats import ConcentrationEstimate, Z95, wilson

__all__ = [
    "ConcentrationEstimate", "CharFn", "ThresholdParams", "levy_scalar",
    "small_ball", "charfn_exact", "charfn_lazy", "charfn_xi", "charfn_mc",
    "cosine_bounds_violation", "xi_bounds_check", "lazy_vs_xi_violation", "fact43_check",
    "esseen_bound_check", "decoupling_check", "threshold", "threshold_curve",
]


def _levy_count(x, eps):
    hi = np.searchsorted(x, x + 2 * eps, side="right")
    return int(np.max(hi - np.arange(len(x))))


def levy_scalar(samples, eps):
    """Exact sup over centres of the empirical mass in a closed ``eps``-ball."""
    x = np.sort(np.asarray(samples, float))
    if x.size == 0:
        raise ValueError("no samples")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return ConcentrationEstimate.from_count(_levy_count(x, eps), len(x), "swept")


def _projections(v, dist, trials, seed, threads):
    v = np.asarray(v, float)

    def chunk(idx):
        return ensembles.sample_col_batch(dist, len(v), seed, idx) @ v

    return rng.map_trials(chunk, trials, threads)


def small_ball(v, dist, eps, trials, seed, threads=1):
    """``P(|<X, v>| <= eps)`` at centre 0, and the swept Levy value.

    Returns ``(fixed, swept)`` estimates from the same samples.
    """
    z = _projections(v, dist, trials, seed, threads)
    fixed = ConcentrationEstimate.from_count(int(np.count_nonzero(np.abs(z) <= eps)), len(z))
    return fixed, levy_scalar(z, eps)


@dataclass(frozen=True)
class CharFn:
    """``t -> E exp(2 pi i t Z)`` and how it was obtained."""

    evaluator: object
    form: str

    def __call__(self, t):
        return self.evaluator(np.asarray(t, float))


def _law(dist):
    law = dist.law if isinstance(dist, ensembles.Distribution) else dist
    if law is None:
        raise ValueError("exact characteristic function needs a discrete law")
    return law


def charfn_exact(dist):
    law = _law(dist)
    return CharFn(law.cf, "exact_discrete")


def charfn_lazy(dist, nu):
    """Characteristic function of ``zeta_tilde * Z_nu`` (symmetrised, lazy)."""
    sym = _law(dist).symmetrized()
    return CharFn(lambda t: 1 - nu + nu * sym.cf(t).real, "exact_discrete")


def charfn_xi(dist, nu):
    """Characteristic function of the truncated lazy variable ``xi_nu``."""
    bar, p = ensembles.truncated_symmetrized(dist)
    if bar is None:
        raise ValueError("truncation window carries no mass")
    return CharFn(lambda t: 1 - nu * p + nu * p * bar.cf(t).real, "exact_discrete")


def charfn_mc(dist, trials, seed):
    """Empirical characteristic function from ``trials`` draws."""
    u = rng.uniforms(seed, rng.TAG_MISC, 0, trials)
    x = dist.quantile(u)

    def ev(t):
        return np.exp(2j * np.pi * np.multiply.outer(t, x)).mean(axis=-1)

    return CharFn(ev, f"monte_carlo({trials})")


def torus1(x):
    x = np.asarray(x, float)
    return np.abs(x - np.rint(x))


def cosine_bounds_violation(a):
    """Largest violation of ``1 - 20||a||^2 <= cos(2 pi a) <= 1 - ||a||^2`` on ``a``."""
    a = np.asarray(a, float)
    d2 = torus1(a) ** 2
    c = np.cos(2 * np.pi * a)
    return float(max(np.max(1 - 20 * d2 - c), np.max(c - (1 - d2))))


def _xi_sides(dist, nu, t):
    bar, p = ensembles.truncated_symmetrized(dist)
    if bar is None:
        raise ValueError("truncation window carries no mass")
    t = np.asarray(t, float)
    e = (torus1(np.multiply.outer(t, bar.v)) ** 2) @ bar.p
    phi = charfn_xi(dist, nu)(t).real
    return np.exp(-32 * nu * p * e), phi, np.exp(-nu * p * e)


def xi_bounds_check(dist, nu, t_grid):
    """Largest signed violation of the two-sided bound on ``phi_xi`` over ``t_grid``."""
    lo, phi, hi = _xi_sides(dist, nu, t_grid)
    return float(max(np.max(lo - phi), np.max(phi - hi)))


def lazy_vs_xi_violation(dist, nu, t_grid):
    """Largest violation of ``phi_{zeta_tilde Z_nu} <= phi_xi`` over ``t_grid``."""
    return float(np.max(charfn_lazy(dist, nu)(t_grid) - charfn_xi(dist, nu)(t_grid)))


def fact43_check(dist, a, c=0.1):
    """``(lhs, rhs)`` of ``prod_j E|cos(2 pi xi a_j)| <= exp(-c min_r ||r a||_T^2)``.

    ``xi`` is the symmetrised law and ``r`` ranges over ``[1, 1/c]``.
    """
    sym = _law(dist).symmetrized()
    a = np.asarray(a, float)
    per = np.abs(np.cos(2 * np.pi * np.multiply.outer(a, sym.v))) @ sym.p
    lhs = float(np.prod(per))
    rhs = math.exp(-c * min_torus_sq(a, 1.0, 1.0 / c))
    return lhs, rhs


def projection_law(dist, v, max_atoms=1 << 20):
    """Exact law of ``<X, v>`` for discrete i.i.d. coordinates."""
    law = _law(dist)
    acc = {0.0: 1.0}
    for vj in np.asarray(v, float):
        nxt = {}
        for z, q in acc.items():
            for x, p in zip(law.values, law.probs):
                key = round(z + x * vj, 12) + 0.0
                nxt[key] = nxt.get(key, 0.0) + q * p
        if len(nxt) > max_atoms:
            raise ValueError("projection law has too many atoms")
        acc = nxt
    keys = sorted(acc)
    return np.array(keys), np.array([acc[k] for k in keys])


def levy_exact(values, probs, eps):
    """``sup_t P(|Z - t| <= eps)`` for a finitely supported ``Z``."""
    order = np.argsort(values)
    x, p = np.asarray(values, float)[order], np.asarray(probs, float)[order]
    cum = np.concatenate([[0.0], np.cumsum(p)])
    hi = np.searchsorted(x, x + 2 * eps + 1e-12, side="right")
    return float(np.max(cum[hi] - cum[:-1]))


def simpson(f, a, b, panels):
    if panels % 2:
        panels += 1
    x = np.linspace(a, b, panels + 1)
    y = f(x)
    h = (b - a) / panels
    return float(h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


@dataclass(frozen=True)
class EsseenResult:
    lhs: float
    rhs: float
    ratio: float
    richardson_rel: float


def esseen_bound_check(dist, v, delta, panels=10_000):
    """Small-ball mass of ``<X, v>`` against ``delta * int |phi|`` over ``|theta| <= 1/delta``."""
    law = _law(dist)
    v = np.asarray(v, float)
    vals, probs = projection_law(law, v)
    lhs = levy_exact(vals, probs, delta)

    def absphi(theta):
        out = np.ones_like(theta)
        for vj in v:
            out = out * np.abs(law.cf(theta * vj))
        return out

    coarse = delta * simpson(absphi, -1 / delta, 1 / delta, panels)
    fine = delta * simpson(absphi, -1 / delta, 1 / delta, 2 * panels)
    rel = abs(fine - coarse) / max(abs(fine), 1e-300)
    return EsseenResult(lhs, fine, lhs / fine, rel)


@dataclass(frozen=True)
class DecouplingResult:
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + 1e-9


def decoupling_check(dist, M, u, theta, J):
    """Both sides of the exponentially tilted decoupling inequality, exactly.

    ``J`` is one block of a partition of ``range(n)``; ``I`` is its complement.
    Expectations are full sums over the support of the discrete law.
    """
    law = _law(dist)
    M = np.asarray(M, float)
    n = M.shape[0]
    if M.shape != (n, n) or not np.allclose(M, M.T, atol=0, rtol=0):
        raise ValueError("M must be square and symmetric")
    if n > 14:
        raise ValueError("exhaustive enumeration limited to n <= 14")
    u = np.asarray(u, float)
    J = sorted(set(int(j) for j in J))
    I = [i for i in range(n) if i not in J]
    vals, probs = law.v, law.p

    X = np.array(list(product(vals, repeat=n))).reshape(-1, n)
    W = np.prod(np.array(list(product(probs, repeat=n))).reshape(-1, n), axis=1)
    quad = np.einsum("si,ij,sj->s", X, M, X)
    lhs = abs(np.sum(W * np.exp(2j * np.pi * theta * quad + X @ u))) ** 2

    # group (x_j, x'_j) pairs by their difference d; weight carries exp((x+x') u_j)
    diffs = {}
    for a, pa in zip(vals, probs):
        for b, pb in zip(vals, probs):
            d = round(a - b, 12) + 0.0
            diffs.setdefault(d, []).append((a + b, pa * pb))
    dvals = sorted(diffs)
    if J:
        D = np.array(list(product(dvals, repeat=len(J)))).reshape(-1, len(J))
        wd = np.ones(len(D))
        for col, j in enumerate(J):
            table = {d: sum(w * math.exp(s * u[j]) for s, w in diffs[d]) for d in dvals}
            wd = wd * np.array([table[d] for d in D[:, col]])
    else:
        D = np.zeros((1, 0))
        wd = np.ones(1)
    if I:
        XI = np.array(list(product(vals, repeat=len(I)))).reshape(-1, len(I))
        WI = np.prod(np.array(list(product(probs, repeat=len(I)))).reshape(-1, len(I)), axis=1)
        lin = D @ M[np.ix_(J, I)] if J else np.zeros((1, len(I)))
        phase = 4j * np.pi * theta * (lin @ XI.T) + 2 * (XI @ u[I])[None, :]
        inner = np.abs(np.exp(phase) @ WI)
    else:
        inner = np.ones(len(D))
    rhs = float(np.sum(wd * inner))
    return DecouplingResult(float(lhs), rhs)


@dataclass(frozen=True)
class ThresholdParams:
    L: float
    trials: int
    t_grid: tuple

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("L must be at least 2")
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        g = np.asarray(self.t_grid, float)
        if len(g) == 0 or np.any(np.diff(g) <= 0) or g[0] <= 0 or g[-1] > 1:
            raise ValueError("t_grid must be ascending inside (0, 1]")


@dataclass(frozen=True)
class ThresholdPoint:
    t: float
    estimate: ConcentrationEstimate
    log_target: float
    passes: bool


def threshold_curve(v, zeroed, tparams, seed, threads=1):
    """Per-grid-point data behind :func:`threshold`."""
    v = np.asarray(v, float)
    n = zeroed.n
    if len(v) != n:
        raise ValueError("vector length must match the matrix dimension")

    def chunk(idx):
        return np.linalg.norm(ensembles.sample_zeroed_batch(zeroed, seed, idx) @ v, axis=1)

    norms = np.sort(rng.map_trials(chunk, tparams.trials, threads))
    out = []
    for t in tparams.t_grid:
        count = int(np.searchsorted(norms, t * math.sqrt(n), side="right"))
        est = ConcentrationEstimate.from_count(count, tparams.trials)
        low = wilson(count, tparams.trials, Z95)[0]
        target = n * math.log(4 * tparams.L * t)
        ok = low > 0 and math.log(low) >= target
        out.append(ThresholdPoint(float(t), est, target, ok))
    return out


def threshold(v, zeroed, tparams, seed, threads=1):
    """Largest grid ``t`` whose Wilson lower bound on ``P(||Mv|| <= t sqrt n)`` beats ``(4Lt)^n``.

    Returns 0 when no grid point qualifies.
    """
    best = 0.0
    for pt in threshold_curve(v, zeroed, tparams, seed, threads):
        if pt.passes:
            best = pt.t
    return best
