import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sst

from rmtlab import ensembles
from rmtlab.ensembles import Distribution, DiscreteLaw, ZeroedMatrixParams

DISCRETE = [
    Distribution.rademacher(),
    Distribution.lazy_signed(0.25),
    Distribution.sparse_rademacher(0.1),
    Distribution.uniform_pm1_0((1.0, 2.0, 1.0)),
    Distribution.custom_discrete([(-2.0, 0.1), (-0.5, 0.4), (0.5, 0.4), (2.0, 0.1)]),
]


@pytest.mark.parametrize("dist", DISCRETE, ids=lambda d: d.kind)
def test_discrete_laws_are_standardised(dist):
    assert dist.law.mean == pytest.approx(0, abs=1e-12)
    assert dist.law.variance == pytest.approx(1, abs=1e-12)
    assert dist.subgaussian_proxy_B >= 1


def test_lazy_signed_atoms():
    d = Distribution.lazy_signed(0.25)
    vals = dict(zip(d.law.values, d.law.probs))
    assert vals == {-2.0: 0.125, 0.0: 0.75, 2.0: 0.125}


def test_uniform_pm1_0_needs_symmetric_weights():
    with pytest.raises(ValueError):
        Distribution.uniform_pm1_0((1.0, 1.0, 2.0))


@pytest.mark.parametrize("pairs", [[(1.0, 0.5), (0.0, 0.5)], [(-1.0, 0.5), (1.0, 0.6)],
                                   [(-1.0, 0.5), (1.0, 0.5), (0.0, -0.1)]])
def test_invalid_custom_laws(pairs):
    with pytest.raises(ValueError):
        Distribution.custom_discrete(pairs)


@pytest.mark.parametrize("kind,kw", [("lazy_signed", {"nu": 1.5}), ("sparse_rademacher", {"p": 0})])
def test_invalid_parameters(kind, kw):
    with pytest.raises(ValueError):
        getattr(Distribution, kind)(**kw)


@given(st.sampled_from(DISCRETE + [Distribution.gaussian()]))
def test_dict_round_trip(dist):
    again = Distribution.from_dict(dist.to_dict())
    assert again.to_dict() == dist.to_dict()
    assert again.subgaussian_proxy_B == dist.subgaussian_proxy_B


def test_quantile_sampling_matches_probabilities():
    d = Distribution.uniform_pm1_0((1.0, 2.0, 1.0))
    x = ensembles.sample_col(d, 40_000, seed=5)
    for value, p in zip(d.law.values, d.law.probs):
        k = int(np.count_nonzero(np.isclose(x, value)))
        assert sst.binomtest(k, len(x), p).pvalue > 1e-4


def test_gaussian_sampler_passes_ks():
    x = ensembles.sample_col(Distribution.gaussian(), 20_000, seed=2)
    assert sst.kstest(x, "norm").pvalue > 1e-4


def test_symmetrized_and_conditioned():
    law = Distribution.rademacher().law
    sym = law.symmetrized()
    assert dict(zip(sym.values, sym.probs)) == {-2.0: 0.25, 0.0: 0.5, 2.0: 0.25}
    cond, p = sym.conditioned(1.0, 16.0)
    assert p == pytest.approx(0.5)
    assert dict(zip(cond.values, cond.probs)) == {-2.0: 0.5, 2.0: 0.5}


@pytest.mark.parametrize("dist", DISCRETE[:3], ids=lambda d: d.kind)
def test_sym_matrix_is_symmetric_with_law_entries(dist):
    a = ensembles.sample_sym(dist, 30, seed=1)
    assert np.array_equal(a, a.T)
    assert set(np.unique(a)) <= set(dist.law.values)


@given(st.integers(2, 25), st.integers(0, 2**32))
def test_minor_consistency(n, seed):
    big = ensembles.sample_sym(Distribution.rademacher(), n, seed, trial=3)
    small = ensembles.sample_sym(Distribution.rademacher(), n - 1, seed, trial=3)
    assert np.array_equal(big[:-1, :-1], small)


def test_batch_equals_single():
    d = Distribution.gaussian()
    batch = ensembles.sample_sym_batch(d, 7, 9, np.arange(5))
    for t in range(5):
        assert np.array_equal(batch[t], ensembles.sample_sym(d, 7, 9, trial=t))


def test_mu_subset_and_tilde_x():
    J = ensembles.sample_mu_subset(10_000, 0.3, seed=4)
    assert sst.binomtest(len(J), 10_000, 0.3).pvalue > 1e-4
    assert len(ensembles.sample_mu_subset(50, 0.0, 1)) == 0
    tx = ensembles.sample_tilde_x(Distribution.rademacher(), 20_000, 0.25, seed=4)
    assert set(np.unique(tx)) <= {-2.0, 0.0, 2.0}
    # nonzero iff in J and X != X': probability mu/2
    k = int(np.count_nonzero(tx))
    assert sst.binomtest(k, len(tx), 0.125).pvalue > 1e-4


@given(st.integers(3, 24).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n // 3))))
def test_zeroed_matrix_block_structure(nd):
    n, d = nd
    params = ZeroedMatrixParams(n, d, 0.5, Distribution.rademacher())
    m = ensembles.sample_zeroed(params, seed=3, trial=1)
    assert np.array_equal(m, m.T)
    assert not m[:d, :d].any() and not m[d:, d:].any()
    assert set(np.unique(m)) <= {-2.0, 0.0, 2.0}


def test_zeroed_nu_zero_is_zero_matrix_and_bounds():
    params = ZeroedMatrixParams(9, 3, 0.0, Distribution.rademacher())
    assert not ensembles.sample_zeroed(params, 1).any()
    with pytest.raises(ValueError):
        ZeroedMatrixParams(9, 4, 0.5, Distribution.rademacher())
    with pytest.raises(ValueError):
        ZeroedMatrixParams(9, 0, 0.5, Distribution.rademacher())


def test_lazy_params_and_truncation():
    lp = ensembles.lazy_params(Distribution.rademacher(), 0.25)
    assert lp.nu == 0.25
    bar, p = ensembles.truncated_symmetrized(Distribution.rademacher())
    # zeta - zeta' is +-2 with probability 1/2; window (1, 16 B^2) keeps it
    assert p == pytest.approx(0.5)
    assert set(bar.values) == {-2.0, 2.0}


def test_discrete_law_cf_and_moments():
    law = DiscreteLaw.from_pairs([(-1.0, 0.5), (1.0, 0.5)])
    t = np.linspace(0, 2, 9)
    assert np.allclose(law.cf(t), np.cos(2 * math.pi * t))
    assert law.moment(4) == 1.0
