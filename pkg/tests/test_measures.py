import json
import math

import numpy as np
import pytest

from helpers import random_channel, random_joint, random_pmf
from osrb_lab.measures import (
    AlphabetMismatchError,
    Channel,
    InfiniteOrderError,
    JointPmf,
    NormalizationError,
    Pmf,
    binary_entropy,
    check_alpha,
    cond_renyi_entropy,
    conditional_entropy,
    d_infinity,
    is_singleton,
    kl_divergence,
    mutual_information,
    parse_alpha,
    renyi_divergence,
    renyi_entropy,
    shannon_entropy,
    sibson_mi,
    total_variation,
    tsallis_divergence,
)

HALF = Pmf(("a", "b"), (0.5, 0.5))
SKEW = Pmf(("a", "b"), (0.25, 0.75))


def make_cond_joint(pz, conds):
    """Joint from p(z) and per-z columns p(x|z)."""
    pz = np.asarray(pz, dtype=float)
    conds = np.asarray(conds, dtype=float)  # shape (|X|, |Z|)
    probs = conds * pz[None, :]
    rows = tuple(f"x{i}" for i in range(conds.shape[0]))
    cols = tuple(f"z{i}" for i in range(conds.shape[1]))
    return JointPmf(rows, cols, probs)


# the running conditional: p(z) uniform, p(x|z=0)=(0.75,0.25), p(x|z=1)=(0.25,0.75)
FLIP_JOINT = make_cond_joint([0.5, 0.5], [[0.75, 0.25], [0.25, 0.75]])


class TestTypes:
    def test_pmf_normalizes_and_freezes(self):
        p = Pmf(("a", "b", "c"), (0.2, 0.3, 0.5))
        assert math.fsum(p.probs.tolist()) == 1.0
        with pytest.raises(ValueError):
            p.probs[0] = 0.9

    def test_pmf_rejects_bad_mass(self):
        with pytest.raises(NormalizationError):
            Pmf(("a", "b"), (0.6, 0.6))

    def test_pmf_rejects_negative(self):
        with pytest.raises(ValueError):
            Pmf(("a", "b"), (-0.1, 1.1))

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            Pmf(("a", "a"), (0.5, 0.5))

    def test_point_mass_and_uniform(self):
        assert Pmf.point_mass(["a", "b"], "b").prob("b") == 1.0
        u = Pmf.uniform(["a", "b", "c", "d"])
        assert np.allclose(u.probs, 0.25)

    def test_pmf_round_trip(self, tmp_path):
        p = Pmf(("a", "b"), (0.3, 0.7))
        path = tmp_path / "p.json"
        p.save(path)
        q = Pmf.load(path)
        assert q.labels == p.labels
        assert np.array_equal(q.probs, p.probs)

    def test_load_renormalizes_within_window_only(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"labels": ["a", "b"], "probs": [0.5, 0.5 + 5e-10]}))
        p = Pmf.load(path)
        assert math.fsum(p.probs.tolist()) == 1.0
        path.write_text(json.dumps({"labels": ["a", "b"], "probs": [0.5, 0.51]}))
        with pytest.raises(NormalizationError):
            Pmf.load(path)

    def test_joint_marginals(self, rng):
        j = random_joint(rng, 3, 2)
        assert math.isclose(j.row_marginal().probs.sum(), 1.0, abs_tol=1e-12)
        assert math.isclose(j.col_marginal().probs.sum(), 1.0, abs_tol=1e-12)

    def test_channel_rows_are_distributions(self):
        with pytest.raises(ValueError):
            Channel(("a",), ("x", "y"), [[0.6, 0.6]])

    def test_channel_bsc_output(self):
        out = Channel.bsc(0.3).output(Pmf.uniform(["0", "1"]))
        assert np.allclose(out.probs, 0.5)

    def test_channel_round_trip(self, tmp_path):
        ch = Channel.bsc(0.25)
        path = tmp_path / "ch.json"
        ch.save(path)
        again = Channel.load(path)
        assert np.array_equal(again.rows, ch.rows)

    def test_product_power_orders_msb_first(self):
        j = JointPmf(("a", "b"), ("u", "v"), [[0.4, 0.1], [0.2, 0.3]])
        j2 = j.product_power(2)
        assert j2.row_labels[1] == "a,b"
        idx = j2.row_labels.index("a,b")
        cdx = j2.col_labels.index("u,v")
        assert math.isclose(j2.probs[idx, cdx], 0.4 * 0.3, rel_tol=1e-12)

    def test_alpha_parsing(self):
        assert parse_alpha("inf") == math.inf
        assert parse_alpha("2") == 2.0
        with pytest.raises(ValueError):
            check_alpha(0.0)
        with pytest.raises(ValueError):
            check_alpha(-2)


class TestEntropies:
    def test_uniform_binary(self):
        assert shannon_entropy(HALF) == 1.0

    def test_point_mass(self):
        assert shannon_entropy(Pmf.point_mass(["a", "b"], "a")) == 0.0

    def test_skewed(self):
        assert abs(shannon_entropy(Pmf(("a", "b"), (0.1, 0.9))) - 0.4690) < 1e-4

    def test_conditional_entropy_independent(self):
        j = JointPmf(("a", "b"), ("u", "v"), [[0.25, 0.25], [0.25, 0.25]])
        assert math.isclose(conditional_entropy(j), 1.0, abs_tol=1e-12)

    def test_conditional_entropy_functional(self):
        j = JointPmf(("a", "b"), ("u", "v"), [[0.5, 0.0], [0.0, 0.5]])
        assert conditional_entropy(j) == 0.0

    def test_conditional_entropy_bsc(self):
        j = make_cond_joint([0.5, 0.5], [[0.75, 0.25], [0.25, 0.75]])
        assert abs(conditional_entropy(j) - 0.8113) < 1e-4

    def test_mutual_information_cases(self):
        prod = JointPmf(("a", "b"), ("u", "v"), [[0.25, 0.25], [0.25, 0.25]])
        assert mutual_information(prod) == 0.0
        ident = JointPmf(("a", "b"), ("u", "v"), [[0.5, 0.0], [0.0, 0.5]])
        assert math.isclose(mutual_information(ident), 1.0, abs_tol=1e-12)
        j = Channel.bsc(0.3).joint(Pmf.uniform(["0", "1"]))
        assert abs(mutual_information(j) - (1.0 - binary_entropy(0.3))) < 1e-12

    @pytest.mark.parametrize("alpha", [0.5, 2, 7, math.inf])
    def test_renyi_entropy_uniform(self, alpha):
        p = Pmf.uniform([f"s{i}" for i in range(8)])
        assert abs(renyi_entropy(p, alpha) - 3.0) < 1e-12

    def test_renyi_entropy_values(self):
        p = Pmf(("a", "b"), (0.75, 0.25))
        assert abs(renyi_entropy(p, 2) - 0.6781) < 1e-4
        assert abs(renyi_entropy(p, math.inf) - math.log2(4.0 / 3.0)) < 1e-6

    def test_cond_renyi_independent_equals_renyi(self, rng):
        for _ in range(25):
            px = random_pmf(rng, 3)
            pz = random_pmf(rng, 2)
            j = JointPmf(px.labels, pz.labels, np.outer(px.probs, pz.probs))
            for a in (0.5, 2.0, 5.0, math.inf):
                assert abs(cond_renyi_entropy(j, a) - renyi_entropy(px, a)) < 1e-9

    def test_cond_renyi_worked_values(self):
        assert abs(cond_renyi_entropy(FLIP_JOINT, 2) + math.log2(0.625)) < 1e-6
        assert abs(cond_renyi_entropy(FLIP_JOINT, math.inf) - math.log2(4.0 / 3.0)) < 1e-6

    def test_cond_renyi_order_one_is_shannon(self):
        assert cond_renyi_entropy(FLIP_JOINT, 1.0) == conditional_entropy(FLIP_JOINT)

    def test_is_singleton(self):
        uni = JointPmf(("a", "b"), ("u", "v"), [[0.25, 0.25], [0.25, 0.25]])
        assert is_singleton(uni)
        assert not is_singleton(FLIP_JOINT)
        single_x = JointPmf(("a",), ("u", "v"), [[0.5, 0.5]])
        assert is_singleton(single_x)


class TestDivergences:
    def test_total_variation(self):
        assert total_variation(HALF, HALF) == 0.0
        p1 = Pmf.point_mass(["a", "b"], "a")
        p2 = Pmf.point_mass(["a", "b"], "b")
        assert total_variation(p1, p2) == 1.0
        assert abs(total_variation(HALF, SKEW) - 0.25) < 1e-12

    def test_kl_divergence(self):
        assert kl_divergence(HALF, HALF) == 0.0
        point = Pmf(("a", "b"), (1.0, 0.0))
        assert math.isclose(kl_divergence(point, HALF), 1.0, abs_tol=1e-12)
        degenerate = Pmf(("a", "b"), (0.0, 1.0))
        assert kl_divergence(HALF, degenerate) == math.inf

    def test_renyi_divergence_worked(self):
        assert renyi_divergence(HALF, SKEW, 2) == pytest.approx(math.log2(4.0 / 3.0), abs=1e-6)
        assert renyi_divergence(HALF, HALF, 3.7) == 0.0

    def test_renyi_divergence_alpha_one_window(self):
        kl = renyi_divergence(HALF, SKEW, 1.0)
        for a in (1.0 - 1e-4, 1.0 + 1e-4):
            assert abs(renyi_divergence(HALF, SKEW, a) - kl) < 1e-3

    def test_tsallis_worked(self):
        assert tsallis_divergence(HALF, SKEW, 2) == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert tsallis_divergence(HALF, SKEW, 1) == pytest.approx(0.1438, abs=1e-4)

    def test_tsallis_rejects_infinite_order(self):
        with pytest.raises(InfiniteOrderError):
            tsallis_divergence(HALF, SKEW, math.inf)

    def test_d_infinity_worked(self):
        assert d_infinity(HALF, SKEW) == pytest.approx(1.0, abs=1e-12)
        degenerate = Pmf(("a", "b"), (0.0, 1.0))
        assert d_infinity(HALF, degenerate) == math.inf

    def test_alphabet_mismatch(self):
        other = Pmf(("x", "y"), (0.5, 0.5))
        with pytest.raises(AlphabetMismatchError):
            kl_divergence(HALF, other)

    def test_identity_is_exactly_zero(self, rng):
        for _ in range(25):
            p = random_pmf(rng, 4)
            for a in (0.5, 1.0, 2.0, 9.0):
                assert tsallis_divergence(p, p, a) == 0.0
                assert renyi_divergence(p, p, a) == 0.0
            assert d_infinity(p, p) == 0.0

    def test_nonnegative(self, rng):
        for _ in range(50):
            p = random_pmf(rng, 3)
            q = random_pmf(rng, 3, floor=1e-3)
            for a in (0.5, 1.0, 2.0, 4.0):
                assert tsallis_divergence(p, q, a) >= 0.0
                assert renyi_divergence(p, q, a) >= 0.0
            assert d_infinity(p, q) >= 0.0

    def test_support_conventions(self):
        p = Pmf(("a", "b", "c"), (0.5, 0.5, 0.0))
        q = Pmf(("a", "b", "c"), (0.5, 0.0, 0.5))
        assert tsallis_divergence(p, q, 2) == math.inf
        assert renyi_divergence(p, q, 2) == math.inf
        # below order one the q=0 term is dropped, the value stays finite
        assert math.isfinite(tsallis_divergence(p, q, 0.5))

    def test_extreme_order_stays_finite(self):
        v = renyi_divergence(HALF, SKEW, 1e4)
        assert math.isfinite(v)
        assert abs(v - d_infinity(HALF, SKEW)) < 1e-3


class TestSibson:
    def test_independence_gives_zero(self):
        j = JointPmf(("a", "b"), ("u", "v"), [[0.25, 0.25], [0.25, 0.25]])
        assert abs(sibson_mi(j, 2)) < 1e-12

    def test_identity_channel(self):
        j = JointPmf(("a", "b"), ("u", "v"), [[0.5, 0.0], [0.0, 0.5]])
        assert sibson_mi(j, 2) == pytest.approx(1.0, abs=1e-12)

    def test_matches_defining_sum(self):
        j = Channel.bsc(0.25).joint(Pmf.uniform(["0", "1"]))
        px, rows = j.row_conditionals()
        inner = [math.sqrt(sum(px[x] * rows[x, y] ** 2 for x in range(2))) for y in range(2)]
        expected = 2.0 * math.log2(sum(inner))
        assert sibson_mi(j, 2) == pytest.approx(expected, abs=1e-12)

    def test_rejected_orders(self):
        j = Channel.bsc(0.25).joint(Pmf.uniform(["0", "1"]))
        with pytest.raises(ValueError):
            sibson_mi(j, 1.0)
        with pytest.raises(InfiniteOrderError):
            sibson_mi(j, math.inf)


ALPHAS = (0.5, 0.9, 1.1, 2.0, 3.0, 8.0)


class TestCondRenyiProperties:
    """The conditional Renyi entropy property suite on random joints."""

    def test_nonincreasing_in_alpha(self, rng):
        for _ in range(40):
            j = random_joint(rng, 3, 3)
            vals = [cond_renyi_entropy(j, a) for a in ALPHAS]
            for lo, hi in zip(vals, vals[1:]):
                assert lo >= hi - 1e-9
            if not is_singleton(j):
                assert vals[0] - vals[-1] > 1e-9

    def test_alpha_near_one_continuity(self, rng):
        for _ in range(40):
            j = random_joint(rng, 3, 2)
            h = conditional_entropy(j)
            for a in (1.0 - 1e-4, 1.0 + 1e-4):
                assert abs(cond_renyi_entropy(j, a) - h) < 1e-3

    def test_data_processing(self, rng):
        # Markov chain X - Y - Z: degrading the side information can only
        # raise the conditional entropy.
        for _ in range(40):
            px = random_pmf(rng, 3)
            ch_xy = random_channel(rng, px.labels, ("y0", "y1", "y2"), floor=1e-3)
            ch_yz = random_channel(rng, ("y0", "y1", "y2"), ("z0", "z1"), floor=1e-3)
            j_xy = ch_xy.joint(px)
            j_xz = ch_xy.then(ch_yz).joint(px)
            for a in (1.1, 2.0, 8.0):
                assert cond_renyi_entropy(j_xy, a) <= cond_renyi_entropy(j_xz, a) + 1e-9

    def test_convexity_in_pz(self, rng):
        for _ in range(40):
            conds = np.array([random_pmf(rng, 3).probs for _ in range(2)]).T
            pz0 = random_pmf(rng, 2).probs
            pz1 = random_pmf(rng, 2).probs
            lam = rng.uniform()
            mix = lam * pz0 + (1.0 - lam) * pz1
            for a in (1.1, 2.0, 8.0):
                blend = lam * cond_renyi_entropy(make_cond_joint(pz0, conds), a) \
                    + (1.0 - lam) * cond_renyi_entropy(make_cond_joint(pz1, conds), a)
                assert cond_renyi_entropy(make_cond_joint(mix, conds), a) <= blend + 1e-9

    def test_large_order_approaches_min_entropy(self, rng):
        for _ in range(20):
            j = random_joint(rng, 3, 2)
            pz, cond = j.col_conditionals()
            target = -math.log2(float(np.max(cond[:, pz > 0])))
            assert abs(cond_renyi_entropy(j, 1e4) - target) < 1e-3

    def test_additivity_over_products(self, rng):
        for _ in range(15):
            j = random_joint(rng, 3, 2)
            for n in (2, 3):
                jn = j.product_power(n)
                for a in (0.5, 2.0, 8.0):
                    assert abs(cond_renyi_entropy(jn, a) - n * cond_renyi_entropy(j, a)) < 1e-9

    def test_nonnegative(self, rng):
        for _ in range(40):
            j = random_joint(rng, 3, 3)
            for a in ALPHAS:
                assert cond_renyi_entropy(j, a) >= 0.0

    def test_singleton_constant_in_alpha(self, rng):
        for _ in range(10):
            pz = random_pmf(rng, 3)
            j = JointPmf(("a", "b"), pz.labels,
                         np.outer([0.5, 0.5], pz.probs))
            vals = [cond_renyi_entropy(j, a) for a in ALPHAS]
            assert max(vals) - min(vals) < 1e-12


class TestInequalities:
    def test_tsallis_vs_renyi_in_nats(self, rng):
        for _ in range(60):
            p = random_pmf(rng, 4)
            q = random_pmf(rng, 4, floor=1e-3)
            for a in (1.5, 2.0, 6.0):
                assert tsallis_divergence(p, q, a) >= renyi_divergence(p, q, a, bits=False) - 1e-12
            for a in (0.3, 0.7):
                assert tsallis_divergence(p, q, a) <= renyi_divergence(p, q, a, bits=False) + 1e-12

    def test_renyi_monotone_in_alpha(self, rng):
        orders = (0.3, 0.8, 1.0, 1.5, 3.0, 10.0, math.inf)
        for _ in range(60):
            p = random_pmf(rng, 4)
            q = random_pmf(rng, 4, floor=1e-3)
            vals = [renyi_divergence(p, q, a) for a in orders]
            for lo, hi in zip(vals, vals[1:]):
                assert lo <= hi + 1e-9

    def test_pinsker(self, rng):
        for _ in range(60):
            j = random_joint(rng, 3, 3)
            prod = JointPmf(j.row_labels, j.col_labels,
                            np.outer(j.row_marginal().probs, j.col_marginal().probs))
            tv = 0.5 * float(np.abs(j.probs - prod.probs).sum())
            assert tv <= math.sqrt(0.5 * mutual_information(j) * math.log(2.0)) + 1e-9

    def test_entropy_vs_output_divergence_bound(self, rng):
        # H~_a(X|Z) <= H(X) - sum_x p(x) D_a(p(z|x) || p(z)), a > 1
        for _ in range(60):
            j = random_joint(rng, 3, 3)
            px, rows = j.row_conditionals()
            pz = j.col_marginal()
            for a in (1.5, 2.0, 4.0, math.inf):
                mean_div = sum(
                    px[x] * renyi_divergence(Pmf(pz.labels, rows[x]), pz, a)
                    for x in range(3) if px[x] > 0)
                lhs = cond_renyi_entropy(j, a)
                rhs = shannon_entropy(j.row_marginal()) - mean_div
                assert lhs <= rhs + 1e-9

    def test_product_correlation_of_monotone_steps(self, rng):
        # nondecreasing nonnegative functions of a common random symbol are
        # positively correlated under any pmf on the reals
        for _ in range(60):
            k = 5
            p = random_pmf(rng, k)
            fs = np.sort(rng.uniform(0.0, 2.0, size=(3, k)), axis=1)
            mean_prod = float(np.sum(p.probs * np.prod(fs, axis=0)))
            prod_means = float(np.prod(fs @ p.probs))
            assert mean_prod >= prod_means - 1e-12
