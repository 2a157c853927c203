import math

import numpy as np
import pytest

from helpers import random_joint
from osrb_lab.measures import GuardError, JointPmf, cond_renyi_entropy
from osrb_lab.binning import (
    BinningMap,
    Composition,
    PowerSums,
    compositions,
    derive_seed,
    distinct_tuple_sum,
    divergence_for_binning,
    expected_divergence_enum,
    expected_divergence_mc,
    expected_tsallis_exact,
    expected_tsallis_exact_iid,
    induced_joint,
    m_from_rate,
    philox_rng,
    sample_binning,
    set_partitions,
)

FLIP = JointPmf(("x0", "x1"), ("z0", "z1"),
                np.array([[0.75, 0.25], [0.25, 0.75]]) * 0.5)


class TestSampling:
    def test_assignment_range_and_determinism(self):
        b1 = sample_binning(100, 7, seed=42)
        b2 = sample_binning(100, 7, seed=42)
        assert b1.assignment.min() >= 1
        assert b1.assignment.max() <= 7
        assert np.array_equal(b1.assignment, b2.assignment)
        b3 = sample_binning(100, 7, seed=43)
        assert not np.array_equal(b1.assignment, b3.assignment)

    def test_rejects_zero_counts(self):
        with pytest.raises(ValueError):
            sample_binning(0, 2, seed=1)
        with pytest.raises(ValueError):
            sample_binning(2, 0, seed=1)

    def test_single_bin(self):
        b = sample_binning(10, 1, seed=5)
        assert set(b.assignment.tolist()) == {1}

    def test_round_trip(self, tmp_path):
        b = sample_binning(12, 3, seed=9)
        path = tmp_path / "b.json"
        b.save(path)
        again = BinningMap.load(path)
        assert again.m == b.m
        assert np.array_equal(again.assignment, b.assignment)

    def test_label_frequencies_roughly_uniform(self):
        b = sample_binning(30000, 3, seed=0)
        counts = np.bincount(b.assignment, minlength=4)[1:]
        expected = 10000.0
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < 13.8  # df=2, far tail

    def test_derive_seed_distinct_labels(self):
        seeds = {derive_seed(1, "a", i) for i in range(10)}
        seeds |= {derive_seed(1, "b", i) for i in range(10)}
        assert len(seeds) == 20
        assert derive_seed(1, "a", 3) == derive_seed(1, "a", 3)

    def test_philox_streams_differ(self):
        a = philox_rng(1, 0).integers(0, 1 << 30, size=4)
        b = philox_rng(1, 1).integers(0, 1 << 30, size=4)
        assert not np.array_equal(a, b)

    def test_m_from_rate_ceiling(self):
        assert m_from_rate(4, 0.5) == 4
        assert m_from_rate(3, 0.5) == 3  # ceil(2^1.5)
        assert m_from_rate(5, 0.0) == 1


class TestInduced:
    def test_mass_conserved(self, rng):
        j = random_joint(rng, 4, 3)
        b = sample_binning(4, 2, seed=3)
        ind = induced_joint(b, j)
        assert math.isclose(ind.probs.sum(), 1.0, abs_tol=1e-12)
        assert np.allclose(ind.col_marginal().probs, j.col_marginal().probs)

    def test_single_bin_divergence_zero(self, rng):
        j = random_joint(rng, 3, 2)
        b = sample_binning(3, 1, seed=1)
        assert divergence_for_binning(b, j, 2.0) == 0.0
        assert divergence_for_binning(b, j, math.inf) == 0.0

    def test_matches_direct_formula(self, rng):
        j = random_joint(rng, 3, 2)
        b = sample_binning(3, 2, seed=8)
        agg = np.zeros((2, 2))
        for i, lab in enumerate(b.assignment):
            agg[lab - 1] += j.probs[i]
        pz = j.probs.sum(axis=0)
        ref = pz / 2.0
        direct = (sum(agg[m, z] ** 2 / ref[z]
                      for m in range(2) for z in range(2) if ref[z] > 0) - 1.0)
        assert divergence_for_binning(b, j, 2.0) == pytest.approx(direct, rel=1e-12)


class TestPartitionMachinery:
    def test_compositions_count(self):
        # ordered positive integer splittings of 4 over all lengths: 2^(4-1)
        combos = [c for ell in range(1, 5) for c in compositions(4, ell)]
        assert len(combos) == 8
        assert all(c.total == 4 for c in combos)
        assert len(compositions(4, 2)) == 3

    def test_set_partition_bell_numbers(self):
        for k, bell in [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52)]:
            assert len(list(set_partitions(k))) == bell

    def test_power_sums_basic(self, rng):
        j = random_joint(rng, 3, 2)
        ps = PowerSums.from_joint(j, 4)
        for z in range(2):
            assert ps.value(1, z) == pytest.approx(1.0, abs=1e-12)
            vals = [ps.value(k, z) for k in range(1, 5)]
            for hi, lo in zip(vals, vals[1:]):
                assert hi >= lo - 1e-12

    def test_distinct_tuple_sum_small_case(self):
        # two distinct items with p(x|z) = (0.75, 0.25): the distinct-pair
        # sum for parts (1, 1) is 2 * 0.75 * 0.25
        j = JointPmf(("a", "b"), ("z",), [[0.75], [0.25]])
        ps = PowerSums.from_joint(j, 2)
        val = distinct_tuple_sum(ps, Composition((1, 1)), 0)
        assert val == pytest.approx(2 * 0.75 * 0.25, abs=1e-12)


class TestExactExpectation:
    def test_worked_four_binning_case(self):
        # two items, two bins: the four equally likely binnings average to
        # (M - 1) * 2^(-H2) = 0.625 at order two
        assert expected_tsallis_exact(FLIP, 2, 2) == pytest.approx(0.625, abs=1e-12)
        assert expected_divergence_enum(FLIP, 2, 2) == pytest.approx(0.625, abs=1e-12)

    def test_closed_form_order_two(self, rng):
        for _ in range(20):
            j = random_joint(rng, 3, 3)
            for m in (2, 3):
                closed = (m - 1) * 2.0 ** (-cond_renyi_entropy(j, 2))
                assert expected_tsallis_exact(j, m, 2) == pytest.approx(closed, rel=1e-12)

    @pytest.mark.parametrize("alpha", [2, 3, 5])
    def test_exact_matches_enumeration(self, rng, alpha):
        for _ in range(8):
            j = random_joint(rng, 3, 2)
            for m in (2, 3):
                exact = expected_tsallis_exact(j, m, alpha)
                enum = expected_divergence_enum(j, m, alpha)
                assert exact == pytest.approx(enum, rel=1e-10)

    def test_iid_matches_materialized_product(self, rng):
        for _ in range(5):
            j = random_joint(rng, 2, 2)
            for n in (2, 3):
                jn = j.product_power(n)
                for m in (2, 3):
                    fast = expected_tsallis_exact_iid(j, n, m, 2)
                    slow = expected_tsallis_exact(jn, m, 2)
                    assert fast == pytest.approx(slow, rel=1e-10)

    def test_iid_rejects_bad_orders(self):
        with pytest.raises(ValueError):
            expected_tsallis_exact_iid(FLIP, 2, 2, 6)
        with pytest.raises(ValueError):
            expected_tsallis_exact(FLIP, 2, 1)

    def test_enum_guard(self):
        big = JointPmf(tuple(f"x{i}" for i in range(8)), ("z",),
                       np.full((8, 1), 0.125))
        with pytest.raises(GuardError):
            expected_divergence_enum(big, 10, 2)

    def test_large_order_stability(self):
        # the log-domain path keeps huge orders finite on the exact side
        v = expected_tsallis_exact(FLIP, 2, 5)
        assert math.isfinite(v)
        assert v > 0


class TestMonteCarlo:
    def test_mean_matches_enum_within_sigma(self, rng):
        j = random_joint(rng, 2, 2)
        exact = expected_tsallis_exact_iid(j, 2, 2, 2)
        mean, se = expected_divergence_mc(j, 2, 0.5, 2, trials=400, seed=3)
        assert abs(mean - exact) < 5 * max(se, 1e-6)

    def test_thread_count_invariance(self, rng):
        j = random_joint(rng, 2, 2)
        runs = [expected_divergence_mc(j, 3, 0.6, 2, trials=64, seed=11, threads=t)
                for t in (1, 2, 7)]
        assert runs[0] == runs[1] == runs[2]

    def test_seed_sensitivity(self, rng):
        j = random_joint(rng, 2, 2)
        a = expected_divergence_mc(j, 3, 0.6, 2, trials=64, seed=1)
        b = expected_divergence_mc(j, 3, 0.6, 2, trials=64, seed=2)
        assert a != b

    def test_infinite_order_supported(self, rng):
        j = random_joint(rng, 2, 2)
        mean, se = expected_divergence_mc(j, 2, 0.5, math.inf, trials=64, seed=4)
        assert mean >= 0.0
        assert se >= 0.0

    def test_below_order_one_vanishing_split(self):
        """Order 0.5 divergence decays under the conditional-entropy
        threshold and stays bounded away from zero above it."""
        above = [expected_divergence_mc(FLIP, n, 1.0, 0.5, trials=200, seed=9)[0]
                 for n in range(2, 7)]
        below = [expected_divergence_mc(FLIP, n, 0.55, 0.5, trials=200, seed=9)[0]
                 for n in range(2, 7)]
        assert all(v >= 0.3 for v in above)
        assert all(later >= earlier for earlier, later in zip(above, above[1:]))
        assert all(later < earlier for earlier, later in zip(below, below[1:]))
        assert below[-1] < 0.5 * below[0]
