import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sst

from rmtlab import ensembles, smallball
from rmtlab.ensembles import Distribution, ZeroedMatrixParams
from rmtlab.smallball import ThresholdParams

RAD = Distribution.rademacher()
LAWS = [RAD, Distribution.lazy_signed(0.25), Distribution.uniform_pm1_0((1.0, 2.0, 1.0)),
        Distribution.sparse_rademacher(0.3)]


def brute_levy(x, eps):
    x = np.asarray(x)
    # an optimal closed window can be slid until its left end hits a sample
    return max(int(np.count_nonzero((x >= a) & (x <= a + 2 * eps))) for a in x)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=300), st.floats(0, 3))
def test_levy_scalar_matches_brute_force(xs, eps):
    est = smallball.levy_scalar(xs, eps)
    assert est.count == brute_levy(xs, eps)


def test_levy_scalar_brute_force_large():
    x = np.random.default_rng(1).standard_normal(2000).round(2)
    for eps in (0.0, 0.01, 0.3):
        assert smallball.levy_scalar(x, eps).count == brute_levy(x, eps)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=100), st.floats(0, 1), st.floats(0, 1))
def test_levy_monotone_in_eps(xs, e1, e2):
    lo, hi = sorted((e1, e2))
    assert smallball.levy_scalar(xs, lo).count <= smallball.levy_scalar(xs, hi).count


def test_small_ball_constant_vector_vs_binomial():
    n, trials = 10, 40_000
    v = np.full(n, 1 / math.sqrt(n))
    fixed, swept = smallball.small_ball(v, RAD, 1e-3, trials, seed=3)
    exact = math.comb(10, 5) / 2**10  # 252/1024
    assert fixed.ci_low - fixed.half_width <= exact <= fixed.ci_high + fixed.half_width
    assert swept.p_hat >= fixed.p_hat


def test_small_ball_e1_half():
    fixed, _ = smallball.small_ball(np.eye(5)[0], RAD, 0.5, 1000, seed=1)
    assert fixed.count == 0


@pytest.mark.parametrize("dist", LAWS, ids=lambda d: d.kind)
def test_charfn_exact_vs_monte_carlo(dist):
    t = np.linspace(0, 3, 200)
    trials = 20_000
    ex = smallball.charfn_exact(dist)(t)
    mc = smallball.charfn_mc(dist, trials, seed=2)(t)
    assert np.all(np.abs(ex) <= 1 + 1e-12)
    assert np.all(np.abs(mc) <= 1 + 1e-12)
    assert np.max(np.abs(ex - mc)) <= 4 / math.sqrt(trials)


def test_charfn_gaussian_closed_form():
    t = np.linspace(0, 1, 50)
    mc = smallball.charfn_mc(Distribution.gaussian(), 50_000, seed=4)(t)
    assert np.max(np.abs(mc - np.exp(-2 * math.pi**2 * t**2))) <= 4 / math.sqrt(50_000)


@pytest.mark.parametrize("dist", LAWS, ids=lambda d: d.kind)
@pytest.mark.parametrize("nu", [2.0**-15, 0.01, 0.25])
def test_xi_bounds_hold(dist, nu):
    t = np.linspace(0, 5, 1000)
    assert smallball.xi_bounds_check(dist, nu, t) <= 1e-12
    assert smallball.lazy_vs_xi_violation(dist, nu, t) <= 1e-12


def test_cosine_inequality():
    a = np.linspace(-3, 3, 1000)
    assert smallball.cosine_bounds_violation(a) <= 0


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=6))
def test_untilted_cf_bound(a):
    lhs, rhs = smallball.fact43_check(RAD, np.asarray(a), c=0.1)
    assert lhs <= rhs + 1e-12


def test_projection_law_constant_vector():
    vals, probs = smallball.projection_law(RAD, np.ones(4))
    assert np.allclose(vals, [-4, -2, 0, 2, 4])
    assert np.allclose(probs, np.array([1, 4, 6, 4, 1]) / 16)


def test_esseen_constant_vector_atom():
    res = smallball.esseen_bound_check(RAD, np.ones(10), 0.5)
    assert res.lhs == pytest.approx(252 / 1024)
    assert res.rhs > 0 and res.ratio == pytest.approx(res.lhs / res.rhs)


def test_simpson_exact_on_cubics():
    assert smallball.simpson(lambda x: x**3 - x + 1, -1, 2, 10) == pytest.approx(5.25)


def brute_decoupling(law_vals, law_probs, M, u, theta, J):
    n = M.shape[0]
    I = [i for i in range(n) if i not in J]
    states = list(product(range(len(law_vals)), repeat=n))
    lhs = 0j
    for s in states:
        x = np.array([law_vals[k] for k in s])
        w = np.prod([law_probs[k] for k in s])
        lhs += w * np.exp(2j * math.pi * theta * x @ M @ x + x @ u)
    rhs = 0.0
    sub = list(product(range(len(law_vals)), repeat=len(J)))
    subI = list(product(range(len(law_vals)), repeat=len(I)))
    for s1 in sub:
        for s2 in sub:
            x, xp = np.zeros(n), np.zeros(n)
            x[J] = [law_vals[k] for k in s1]
            xp[J] = [law_vals[k] for k in s2]
            w = np.prod([law_probs[k] for k in s1]) * np.prod([law_probs[k] for k in s2])
            inner = 0j
            for s3 in subI:
                y = np.zeros(n)
                y[I] = [law_vals[k] for k in s3]
                wi = np.prod([law_probs[k] for k in s3])
                inner += wi * np.exp(4j * math.pi * theta * (M @ (x - xp)) @ y + 2 * y @ u)
            rhs += w * math.exp((x + xp) @ u) * abs(inner)
    return abs(lhs) ** 2, rhs


def random_instance(g, n):
    m = g.standard_normal((n, n))
    M = (m + m.T) / 2
    u = g.standard_normal(n) * 0.3
    theta = g.uniform(-1, 1)
    J = sorted(g.choice(n, size=g.integers(1, n), replace=False).tolist())
    return M, u, theta, J


def test_decoupling_matches_naive_enumeration():
    g = np.random.default_rng(5)
    law = RAD.law
    for _ in range(5):
        M, u, theta, J = random_instance(g, 4)
        res = smallball.decoupling_check(RAD, M, u, theta, J)
        lhs, rhs = brute_decoupling(law.values, law.probs, M, u, theta, J)
        assert res.lhs == pytest.approx(lhs, rel=1e-10)
        assert res.rhs == pytest.approx(rhs, rel=1e-10)


def test_decoupling_trivial_and_factorised_cases():
    res = smallball.decoupling_check(RAD, np.zeros((4, 4)), np.zeros(4), 0.0, [0, 1])
    assert res.lhs == pytest.approx(1) and res.rhs == pytest.approx(1)
    u = np.array([0.3, -0.2, 0.5, 0.1])
    res = smallball.decoupling_check(RAD, np.zeros((4, 4)), u, 0.7, [1, 3])
    assert res.lhs == pytest.approx(np.prod(np.cosh(u)) ** 2)
    assert res.holds


@given(st.sampled_from([4, 6]), st.integers(0, 10**6))
def test_decoupling_holds(n, seed):
    M, u, theta, J = random_instance(np.random.default_rng(seed), n)
    assert smallball.decoupling_check(RAD, M, u, theta, J).holds


def test_decoupling_rejects_large_n():
    with pytest.raises(ValueError):
        smallball.decoupling_check(RAD, np.zeros((15, 15)), np.zeros(15), 0.1, [0])


def test_threshold_with_zero_matrix():
    n = 9
    zp = ZeroedMatrixParams(n, 3, 0.0, RAD)
    grid = tuple(np.linspace(0.01, 1, 100))
    for L in (2.0, 4.0):
        t = smallball.threshold(np.ones(n) / 3, zp, ThresholdParams(L, 500, grid), seed=1)
        # P = 1, so the bound is the Wilson lower limit at p_hat = 1
        low = 500 / (500 + 1.959963984540054**2)
        expected = max(x for x in grid if n * math.log(4 * L * x) <= math.log(low))
        assert t == pytest.approx(expected)
        assert t <= 1 / (4 * L)
    assert smallball.threshold(np.zeros(n), ZeroedMatrixParams(n, 3, 0.5, RAD),
                               ThresholdParams(2.0, 500, grid), seed=1) == pytest.approx(
        max(x for x in grid if n * math.log(8 * x) <= math.log(500 / (500 + 1.959963984540054**2))))


@given(st.integers(0, 1000))
def test_threshold_monotone_in_L(seed):
    n = 9
    zp = ZeroedMatrixParams(n, 3, 0.25, RAD)
    grid = tuple(np.geomspace(1e-3, 1, 25))
    v = ensembles.sample_col(Distribution.gaussian(), n, seed)
    v /= np.linalg.norm(v)
    ts = [smallball.threshold(v, zp, ThresholdParams(L, 300, grid), seed) for L in (2, 4, 8)]
    assert ts[0] >= ts[1] >= ts[2]


def test_threshold_params_validation():
    with pytest.raises(ValueError):
        ThresholdParams(1.0, 10, (0.5,))
    with pytest.raises(ValueError):
        ThresholdParams(2.0, 10, (0.5, 0.2))
