import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from growthlab.lattice import SiteCoord
from growthlab.noise import NoiseField


def test_determinism_repeated_queries():
    nf = NoiseField(seed=99, replica=2)
    s = SiteCoord(t=7, x=(3, -4))
    a = nf.gaussian_at(s)
    # interleave other queries; the value must not move
    nf.gaussian_at(SiteCoord(t=1, x=(0, 0)))
    nf.gaussian_block(7, (0, 0), (4, 4))
    assert nf.gaussian_at(s) == a


def test_block_matches_pointwise():
    nf = NoiseField(seed=5, replica=1)
    block = nf.gaussian_block(3, (-2, 4), (5, 3))
    for i in range(5):
        for j in range(3):
            assert block[i, j] == nf.gaussian_at(SiteCoord(t=3, x=(-2 + i, 4 + j)))


def test_block_length_invariance():
    # per-site values must not depend on how large a block they came from
    nf = NoiseField(seed=8)
    big = nf.gaussian_block(2, (-500,), (1001,))
    small = nf.gaussian_block(2, (-3,), (7,))
    assert np.array_equal(big[497:504], small)


def test_batch_matches_single_replica():
    nf3 = NoiseField(seed=17, replica=3)
    base = NoiseField(seed=17)
    batch = base.gaussian_block_batch(4, (-5,), (11,), np.array([0, 3, 9], dtype=np.uint64))
    assert np.array_equal(batch[1], nf3.gaussian_block(4, (-5,), (11,)))


def test_distinct_indices_differ():
    nf = NoiseField(seed=1)
    vals = {
        nf.gaussian_at(SiteCoord(t=1, x=(0,))),
        nf.gaussian_at(SiteCoord(t=2, x=(0,))),
        nf.gaussian_at(SiteCoord(t=1, x=(1,))),
        NoiseField(seed=1, replica=1).gaussian_at(SiteCoord(t=1, x=(0,))),
        NoiseField(seed=2).gaussian_at(SiteCoord(t=1, x=(0,))),
    }
    assert len(vals) == 5


def test_overlay_shifts_only_target_site():
    nf = NoiseField(seed=3)
    s = SiteCoord(t=2, x=(1,))
    other = SiteCoord(t=2, x=(0,))
    shifted = nf.with_overlay(s, 0.5)
    assert shifted.gaussian_at(s) == nf.gaussian_at(s) + 0.5
    assert shifted.gaussian_at(other) == nf.gaussian_at(other)
    assert nf.overlays == {}  # original untouched


def test_overlay_zero_and_cancellation():
    nf = NoiseField(seed=3)
    s = SiteCoord(t=2, x=(1,))
    assert nf.with_overlay(s, 0.0).gaussian_at(s) == nf.gaussian_at(s)
    stacked = nf.with_overlay(s, 1e-3).with_overlay(s, -1e-3)
    assert stacked.gaussian_at(s) == nf.gaussian_at(s)


@given(
    d1=st.floats(-10, 10, allow_nan=False),
    d2=st.floats(-10, 10, allow_nan=False),
)
@settings(max_examples=50, deadline=None)
def test_overlay_additive_commutative(d1, d2):
    nf = NoiseField(seed=11)
    s1 = SiteCoord(t=4, x=(0,))
    s2 = SiteCoord(t=4, x=(2,))
    ab = nf.with_overlay(s1, d1).with_overlay(s2, d2)
    ba = nf.with_overlay(s2, d2).with_overlay(s1, d1)
    assert ab.gaussian_at(s1) == ba.gaussian_at(s1)
    assert ab.gaussian_at(s2) == ba.gaussian_at(s2)
    assert ab.gaussian_at(s1) == nf.gaussian_at(s1) + d1


def test_overlay_inside_block():
    nf = NoiseField(seed=13).with_overlay(SiteCoord(t=2, x=(1,)), 0.25)
    block = nf.gaussian_block(2, (0,), (3,))
    clean = NoiseField(seed=13).gaussian_block(2, (0,), (3,))
    assert block[1] == clean[1] + 0.25
    assert block[0] == clean[0] and block[2] == clean[2]


def test_moments_million_sites():
    nf = NoiseField(seed=20240811)
    z = nf.gaussian_block(1, (-500_000,), (1_000_000,))
    assert abs(z.mean()) <= 4.0 / 1000.0
    assert abs(z.var() - 1.0) <= 0.01


def test_uniformity_chi_square():
    # CDF-transformed variates over 1e5 distinct (replica, t, x) triples:
    # chi-square on 100 bins at significance 1e-3
    base = NoiseField(seed=31337)
    replicas = np.arange(20, dtype=np.uint64)
    blocks = [base.gaussian_block_batch(t, (-500,), (1000,), replicas)
              for t in range(1, 6)]
    z = np.concatenate([b.reshape(-1) for b in blocks])
    assert z.size == 100_000
    u = sps.norm.cdf(z)
    counts, _ = np.histogram(u, bins=100, range=(0.0, 1.0))
    expected = len(u) / 100
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < sps.chi2.ppf(1 - 1e-3, df=99)


def test_index_bounds_are_errors():
    nf = NoiseField(seed=1)
    with pytest.raises(ValueError):
        nf.gaussian_at(SiteCoord(t=2**32, x=(0,)))
    with pytest.raises(ValueError):
        nf.gaussian_at(SiteCoord(t=1, x=(2**31,)))
    with pytest.raises(ValueError):
        SiteCoord(t=0, x=(0,))
    with pytest.raises(ValueError):
        nf.gaussian_block(1, (2**31 - 3,), (10,))  # upper corner out of range


def test_batch_rejects_overlays():
    nf = NoiseField(seed=1).with_overlay(SiteCoord(t=1, x=(0,)), 1.0)
    with pytest.raises(ValueError):
        nf.gaussian_block_batch(1, (0,), (4,), np.array([0, 1], dtype=np.uint64))
