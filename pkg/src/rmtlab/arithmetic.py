"""Arithmetic structure of vectors: torus distance, LCD, compressibility."""
from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np

GAMMA_BRANCH = "gamma_branch"
ALPHA_BRANCH = "alpha_branch"
NONE = "none"

_CHUNK_ELEMS = 1 << 20


def torus_dist(v):
    """Euclidean distance from ``v`` to the integer lattice."""
    v = np.asarray(v, float)
    return float(np.sqrt(np.sum((v - np.rint(v)) ** 2)))


def _torus_rows(x):
    return np.sqrt(np.sum((x - np.rint(x)) ** 2, axis=-1))


@dataclass(frozen=True)
class LcdParams:
    alpha: float
    gamma: float
    cap: float = 1e6
    grid_step: float = None

    def __post_init__(self):
        if not 0 < self.alpha < 1 or not 0 < self.gamma < 1:
            raise ValueError("alpha and gamma must lie in (0, 1)")
        if not self.cap > 0:
            raise ValueError("cap must be positive")
        if self.grid_step is not None and not self.grid_step > 0:
            raise ValueError("grid_step must be positive")

    def step_for(self, norm):
        limit = self.gamma / (4 * max(1.0, norm))
        if self.grid_step is None:
            return self.gamma / (8 * max(1.0, norm))
        if self.grid_step > limit:
            raise ValueError(f"grid_step {self.grid_step} exceeds resolution limit {limit}")
        return self.grid_step


@dataclass(frozen=True)
class LcdResult:
    """Least admissible dilation, or ``value = inf`` when none lies below ``cap``."""

    value: float
    witness_t: float
    binding_constraint: str
    cap: float

    @property
    def bounded(self):
        return math.isfinite(self.value)


def lcd_condition(v, phi, alpha, gamma):
    """Slack ``min{gamma phi |v|, sqrt(alpha n)} - ||phi v||_T`` (>= 0 means admissible)."""
    v = np.asarray(v, float)
    return min(gamma * phi * np.linalg.norm(v), math.sqrt(alpha * len(v))) - torus_dist(phi * v)


def _quad_interval(a, b, c):
    """Solution set of ``a s^2 + 2 b s + c <= 0`` for ``a > 0`` as ``(lo, hi)`` or None."""
    disc = b * b - a * c
    if disc < 0:
        return None
    r = math.sqrt(disc)
    q = -(b + math.copysign(r, b)) if b != 0 else r
    if q == 0:
        return (0.0, 0.0)
    x1, x2 = q / a, c / q
    return (min(x1, x2), max(x1, x2))


def _first_in_cell(v, norm, lo, hi, gamma, thr):
    """Exact least admissible phi in ``[lo, hi]`` or None.

    Between half-integer crossings the integer nearest to each ``phi v_j`` is
    fixed, so both constraints are quadratic inequalities in ``phi``.
    """
    cuts = [lo, hi]
    for vj in v:
        if vj == 0:
            continue
        a, b = sorted((lo * vj, hi * vj))
        m = math.ceil(a - 0.5)
        while m + 0.5 <= b:
            phi = (m + 0.5) / vj
            if lo < phi < hi:
                cuts.append(phi)
            m += 1
    cuts = sorted(set(cuts))
    n2 = norm * norm
    g2 = gamma * gamma
    for p, q in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (p + q)
        k = np.rint(mid * v)
        if not np.any(k):
            # only phi = 0 is admissible while phi v rounds to the origin
            continue
        e = mid * v - k
        ev = float(e @ v)
        ee = float(e @ e)
        # phi = mid + s; Q(s) = n2 s^2 + 2 ev s + ee
        i1 = _quad_interval((1 - g2) * n2, ev - g2 * n2 * mid, ee - g2 * n2 * mid * mid)
        i2 = _quad_interval(n2, ev, ee - thr * thr)
        if i1 is None or i2 is None:
            continue
        s_lo = max(p - mid, i1[0], i2[0])
        s_hi = min(q - mid, i1[1], i2[1])
        if s_lo <= s_hi:
            return max(mid + s_lo, p)
    return None


def lcd(v, params):
    """Least common denominator of ``v`` under ``params``.

    A grid scan flags every cell in which the admissibility slack could turn
    non-negative (using the Lipschitz bound ``(1 + gamma)|v|``); flagged cells
    are then solved exactly, in increasing order.
    """
    v = np.asarray(v, float)
    norm = float(np.linalg.norm(v))
    if norm == 0:
        raise ValueError("LCD of the zero vector is undefined")
    h = params.step_for(norm)
    gamma = params.gamma
    n = len(v)
    thr = math.sqrt(params.alpha * n)
    lip = norm * (1 + gamma)
    rows = max(1024, _CHUNK_ELEMS // max(1, n))
    total = int(math.ceil(params.cap / h))
    k0 = 0
    while k0 < total:
        k1 = min(total, k0 + rows)
        phis = np.arange(k0, k1 + 1) * h
        phis[-1] = min(phis[-1], params.cap)
        g = _torus_rows(np.multiply.outer(phis, v)) - np.minimum(gamma * phis * norm, thr)
        widths = np.diff(phis)
        flag = 0.5 * (g[:-1] + g[1:]) <= 0.5 * lip * widths + 1e-12
        for c in np.flatnonzero(flag):
            lo, hi = phis[c], phis[c + 1]
            phi = _first_in_cell(v, norm, lo, hi, gamma, thr)
            if phi is not None:
                branch = GAMMA_BRANCH if gamma * phi * norm <= thr else ALPHA_BRANCH
                return LcdResult(float(phi), float(phi), branch, params.cap)
        k0 = k1
    return LcdResult(math.inf, math.nan, NONE, params.cap)


@dataclass(frozen=True)
class SubvectorLcd:
    value: float
    subset: tuple
    result: LcdResult = field(repr=False)


def _sub_lcd(v, keep, params, normalize):
    w = v[list(keep)]
    nw = np.linalg.norm(w)
    if nw == 0:
        return None
    return lcd(w / nw if normalize else w, params)


def subvector_lcd(v, params, mu, mode="exact", normalize=True, restarts=8, seed=0,
                  max_subsets=10**6):
    """Minimum LCD over subvectors keeping at least ``(1 - 2 mu) n`` coordinates.

    ``mode="exact"`` enumerates every admissible subset; ``"heuristic"``
    greedily drops the coordinates farthest from the lattice at the full
    vector's witness, plus ``restarts`` random removals, and so returns an
    upper bound. Subvectors that vanish are skipped.
    """
    v = np.asarray(v, float)
    n = len(v)
    m = int(math.floor(2 * mu * n + 1e-12))
    m = min(m, n - 1)
    best = None

    def consider(keep):
        nonlocal best
        res = _sub_lcd(v, keep, params, normalize)
        if res is None:
            return
        if best is None or res.value < best.value:
            best = SubvectorLcd(res.value, tuple(int(i) for i in keep), res)

    if mode == "exact":
        if m > 0 and math.comb(n, m) > max_subsets:
            raise ValueError(f"exact mode infeasible: C({n},{m}) exceeds {max_subsets}")
        for r in range(m + 1):
            for drop in combinations(range(n), r):
                consider([i for i in range(n) if i not in drop])
    elif mode == "heuristic":
        consider(range(n))
        full = best.result if best is not None else None
        if full is not None and full.bounded and m > 0:
            t = full.witness_t
            far = np.argsort(-np.abs(t * v - np.rint(t * v)), kind="stable")
            for r in range(1, m + 1):
                drop = set(far[:r].tolist())
                consider([i for i in range(n) if i not in drop])
        if m > 0:
            gen = np.random.default_rng(seed)
            for _ in range(restarts):
                drop = set(gen.choice(n, size=m, replace=False).tolist())
                consider([i for i in range(n) if i not in drop])
    else:
        raise ValueError("mode must be 'exact' or 'heuristic'")
    if best is None:
        raise ValueError("every admissible subvector vanishes")
    return best


@dataclass(frozen=True)
class CompressParams:
    delta: float
    rho: float

    def __post_init__(self):
        if not 0 < self.delta < 1 or not 0 < self.rho < 1:
            raise ValueError("delta and rho must lie in (0, 1)")

    def support(self, n):
        k = math.ceil(self.delta * n - 1e-12)
        if k < 1:
            raise ValueError("delta * n must allow at least one coordinate")
        return k


def compress_dist(v, delta):
    """Distance from ``v`` to the set of ``ceil(delta n)``-sparse vectors."""
    v = np.asarray(v, float)
    k = CompressParams(delta, 0.5).support(len(v))
    order = np.argsort(-np.abs(v), kind="stable")
    rest = v[order[k:]]
    return float(np.sqrt(np.sum(rest * rest)))


def is_compressible(v, params):
    return compress_dist(v, params.delta) <= params.rho


def flat_count(v, c):
    """Number of coordinates with ``|v_j| sqrt(n)`` in ``[c, 1/c]``."""
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    v = np.asarray(v, float)
    s = np.abs(v) * math.sqrt(len(v))
    return int(np.count_nonzero((s >= c) & (s <= 1 / c)))


def min_torus_sq(a, r_lo, r_hi):
    """Exact ``min_{r in [r_lo, r_hi]} ||r a||_T^2``."""
    a = np.asarray(a, float)
    cuts = [r_lo, r_hi]
    for aj in a:
        if aj == 0:
            continue
        lo, hi = sorted((r_lo * aj, r_hi * aj))
        m = math.ceil(lo - 0.5)
        while m + 0.5 <= hi:
            r = (m + 0.5) / aj
            if r_lo < r < r_hi:
                cuts.append(r)
            m += 1
    cuts = sorted(set(cuts))
    aa = float(a @ a)
    best = min(torus_dist(r_lo * a) ** 2, torus_dist(r_hi * a) ** 2)
    if aa == 0:
        return best
    for p, q in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (p + q)
        k = np.rint(mid * a)
        r = float(a @ k) / aa
        for x in (p, q, min(max(r, p), q)):
            best = min(best, float(np.sum((x * a - k) ** 2)))
    return best
