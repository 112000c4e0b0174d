from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sparse_isac as si
from sparse_isac.alloc import nested_params_for


def brute_force_differences(indices):
    """Independent oracle: enumerate every ordered pair."""
    return Counter(int(a) - int(b) for a in indices for b in indices)


def make_params(n, m=4):
    return si.OfdmParams(
        n_subcarriers=n, n_symbols=m, subcarrier_spacing_hz=120e3, carrier_freq_hz=24e9
    )


class TestOfdmParams:
    def test_derived_quantities(self):
        p = make_params(256, 32)
        assert p.symbol_core_s == 1.0 / 120e3
        assert p.symbol_dur_s == p.symbol_core_s  # no CP
        assert p.bandwidth_hz == 256 * 120e3
        assert p.total_dur_s == 32 * p.symbol_dur_s

    def test_cp_adds_to_duration(self):
        p = si.OfdmParams(64, 4, 120e3, 24e9, cp_len_s=1e-6)
        assert p.symbol_dur_s == pytest.approx(1.0 / 120e3 + 1e-6)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_subcarriers=1),
            dict(n_symbols=0),
            dict(subcarrier_spacing_hz=0.0),
            dict(carrier_freq_hz=-1.0),
            dict(cp_len_s=-1e-9),
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        base = dict(
            n_subcarriers=64, n_symbols=4, subcarrier_spacing_hz=120e3, carrier_freq_hz=24e9
        )
        base.update(kwargs)
        with pytest.raises(ValueError):
            si.OfdmParams(**base)


class TestMakeAllocation:
    def test_full_pattern(self):
        alloc = si.make_allocation(make_params(8), "full")
        for idx in alloc.per_symbol_indices:
            assert np.array_equal(idx, np.arange(8))

    def test_nested_example(self):
        alloc = si.make_allocation(make_params(12), "nested", inner=3, outer=3)
        assert np.array_equal(alloc.indices, [0, 1, 2, 3, 7, 11])

    def test_nested_difference_coverage(self):
        # canonical nested construction fills every lag (brute-force check)
        alloc = si.make_allocation(make_params(12), "nested", inner=3, outer=3)
        diffs = brute_force_differences(alloc.indices)
        assert all(s in diffs for s in range(-11, 12))

    def test_random_contains_band_edges(self):
        alloc = si.make_allocation(make_params(1000), "random", n_active=200, seed=3)
        assert alloc.n_active == 200
        assert alloc.indices[0] == 0
        assert alloc.indices[-1] == 999

    def test_random_deterministic_per_seed(self):
        p = make_params(128)
        a = si.make_allocation(p, "random", n_active=32, seed=5)
        b = si.make_allocation(p, "random", n_active=32, seed=5)
        c = si.make_allocation(p, "random", n_active=32, seed=6)
        assert np.array_equal(a.indices, b.indices)
        assert not np.array_equal(a.indices, c.indices)

    def test_random_cardinality_bounds(self):
        p = make_params(16)
        with pytest.raises(ValueError):
            si.make_allocation(p, "random", n_active=1, seed=0)
        with pytest.raises(ValueError):
            si.make_allocation(p, "random", n_active=17, seed=0)

    def test_comb_pattern(self):
        alloc = si.make_allocation(make_params(16), "comb", stride=4)
        assert np.array_equal(alloc.indices, [0, 4, 8, 12])

    def test_coprime_pattern_union(self):
        alloc = si.make_allocation(make_params(36), "coprime", p=4, q=9)
        expect = np.union1d(np.arange(0, 36, 4), np.arange(0, 36, 9))
        assert np.array_equal(alloc.indices, expect)

    def test_coprime_rejects_common_factor(self):
        with pytest.raises(ValueError):
            si.make_allocation(make_params(36), "coprime", p=4, q=6)

    def test_nested_overflow_rejected(self):
        with pytest.raises(ValueError):
            si.make_allocation(make_params(12), "nested", inner=3, outer=4)

    def test_custom_deduplicates_and_sorts(self):
        alloc = si.make_allocation(make_params(16), "custom", indices=[5, 1, 5, 9])
        assert np.array_equal(alloc.indices, [1, 5, 9])

    def test_same_set_every_symbol(self):
        alloc = si.make_allocation(make_params(64, m=7), "random", n_active=10, seed=0)
        assert alloc.n_symbols == 7
        assert alloc.is_constant

    def test_nested_params_helper_fits(self):
        inner, outer = nested_params_for(64, 256)
        assert inner + outer == 64
        assert (inner + 1) * outer - 1 <= 255


class TestDifferenceSet:
    def test_perfect_four_element_set(self):
        alloc = si.ResourceAllocation.constant([0, 1, 4, 6], 1, 7)
        ap = si.difference_set(alloc)
        assert np.array_equal(ap.lags, np.arange(-6, 7))
        assert ap.count(0) == 4
        for s in range(1, 7):
            assert ap.count(s) == 1
            assert ap.count(-s) == 1
        assert ap.holes.size == 0

    def test_two_element_set(self):
        n = 32
        alloc = si.ResourceAllocation.constant([0, n - 1], 1, n)
        ap = si.difference_set(alloc)
        assert np.array_equal(ap.lags, [-(n - 1), 0, n - 1])
        assert ap.holes.size == 2 * n - 1 - 3

    def test_nested_set_hole_free(self):
        alloc = si.ResourceAllocation.constant([0, 1, 2, 3, 7, 11], 1, 12)
        ap = si.difference_set(alloc)
        assert ap.holes.size == 0
        assert ap.n_lags == 23

    def test_matches_brute_force_enumeration(self, rng):
        for _ in range(50):
            n = int(rng.integers(8, 128))
            k = int(rng.integers(2, min(n, 40)))
            idx = np.sort(rng.choice(n, size=k, replace=False))
            alloc = si.ResourceAllocation.constant(idx, 1, n)
            ap = si.difference_set(alloc)
            oracle = brute_force_differences(idx)
            assert set(ap.lags.tolist()) == set(oracle.keys())
            for lag, cnt in zip(ap.lags, ap.pair_counts):
                assert oracle[int(lag)] == int(cnt)

    def test_requires_two_indices(self):
        alloc = si.ResourceAllocation.constant([3], 1, 8)
        with pytest.raises(ValueError):
            si.difference_set(alloc)

    def test_varying_allocation_rejected(self):
        alloc = si.ResourceAllocation(
            per_symbol_indices=(np.array([0, 1]), np.array([0, 2])), n_subcarriers=4
        )
        with pytest.raises(ValueError):
            si.difference_set(alloc)

    @settings(max_examples=60, deadline=None)
    @given(
        idx=st.lists(st.integers(0, 63), min_size=2, max_size=24, unique=True),
    )
    def test_symmetry_and_count_conservation(self, idx):
        alloc = si.ResourceAllocation.constant(sorted(idx), 1, 64)
        ap = si.difference_set(alloc)
        k = len(set(idx))
        assert int(ap.pair_counts.sum()) == k * k
        assert ap.count(0) == k
        for lag, cnt in zip(ap.lags, ap.pair_counts):
            assert ap.count(int(-lag)) == int(cnt)

    def test_csv_export(self, tmp_path):
        alloc = si.ResourceAllocation.constant([0, 1, 4, 6], 1, 7)
        ap = si.difference_set(alloc)
        path = tmp_path / "aperture.csv"
        ap.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "lag,pair_count"
        assert len(lines) == 1 + ap.n_lags
        assert lines[1] == "-6,1"


class TestCoverageFraction:
    def test_perfect_set_full_coverage(self):
        alloc = si.ResourceAllocation.constant([0, 1, 4, 6], 1, 7)
        assert si.coverage_fraction(si.difference_set(alloc), 7) == 1.0

    def test_full_allocation(self):
        p = make_params(16)
        ap = si.difference_set(si.make_allocation(p, "full"))
        assert si.coverage_fraction(ap, 16) == 1.0

    def test_endpoints_only(self):
        n = 20
        alloc = si.ResourceAllocation.constant([0, n - 1], 1, n)
        ap = si.difference_set(alloc)
        assert si.coverage_fraction(ap, n) == pytest.approx(3 / (2 * n - 1))


class TestHoleFillProbability:
    def test_full_cardinality_always_fills(self):
        for lag in (1, 7, 15):
            p, hw = si.hole_fill_probability(16, 16, lag, n_trials=10, seed=0)
            assert p == 1.0 and hw == 0.0

    def test_endpoints_only_cardinality(self):
        n = 16
        p, _ = si.hole_fill_probability(n, 2, n - 1, n_trials=50, seed=0)
        assert p == 1.0
        p, _ = si.hole_fill_probability(n, 2, 5, n_trials=50, seed=0)
        assert p == 0.0

    def test_monotone_in_cardinality_within_bands(self):
        lag = 40
        prev_p, prev_hw = 0.0, 0.0
        for n_active in (8, 16, 32, 64, 128):
            p, hw = si.hole_fill_probability(128, n_active, lag, n_trials=400, seed=11)
            assert p + hw >= prev_p - prev_hw
            prev_p, prev_hw = p, hw

    def test_deterministic_per_seed(self):
        a = si.hole_fill_probability(64, 12, 17, n_trials=200, seed=9)
        b = si.hole_fill_probability(64, 12, 17, n_trials=200, seed=9)
        assert a == b

    def test_invalid_ranges(self):
        with pytest.raises(ValueError):
            si.hole_fill_probability(16, 1, 3)
        with pytest.raises(ValueError):
            si.hole_fill_probability(16, 4, 16)
        with pytest.raises(ValueError):
            si.hole_fill_probability(16, 4, 0)

    def test_curve_consistent_with_single_lag(self):
        curve = si.hole_fill_curve(64, 16, n_trials=300, seed=21)
        assert curve.lags[0] == 1 and curve.lags[-1] == 63
        # pinned endpoints make the extreme lag always available
        assert curve.fill_probability[-1] == 1.0
        assert 0.0 <= curve.all_filled_probability <= curve.min_fill_probability


class TestVirtualApertureSize:
    def test_virtual_larger_than_physical_for_random_sets(self, rng):
        # the difference set has at least as many entries as the set itself,
        # and strictly more in the well-filled regime
        for seed in range(10):
            alloc = si.make_allocation(make_params(256), "random", n_active=64, seed=seed)
            ap = si.difference_set(alloc)
            assert ap.n_lags > alloc.n_active
