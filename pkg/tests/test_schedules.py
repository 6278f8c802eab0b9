"""Schedule distributions, sampling, and descriptions."""

import math

import numpy as np
import pytest
from scipy import stats

from emcl import ConfigError, SyntheticSpec, generate_synthetic
from emcl.errors import DataError
from emcl.schedules import (
    class_distribution,
    describe,
    gaussian_weight,
    make_schedule,
    sample_batch,
    task_boundaries,
)


def sched_of(kind, m=10, total=1000, batch=10, seed=0, **kw):
    return make_schedule(kind, m, total, batch, seed, **kw)


class TestSplit:
    def test_first_task_uniform_over_its_two_labels(self):
        s = sched_of("split", subsets=5)
        probs = class_distribution(s, 0)
        active = s.class_order[:2]
        assert probs[active].tolist() == [0.5, 0.5]
        mask = np.ones(10, bool)
        mask[active] = False
        assert not probs[mask].any()

    def test_piecewise_constant_equal_pieces(self):
        s = sched_of("split", subsets=5, total=1000)
        rows = np.stack([class_distribution(s, b) for b in range(1000)])
        changes = np.flatnonzero((np.diff(rows, axis=0) != 0).any(axis=1)) + 1
        assert changes.tolist() == [200, 400, 600, 800]
        assert len({tuple(r) for r in rows.tolist()}) == 5

    def test_probabilities_sum_to_one(self):
        for kind, kw in (
            ("split", {"subsets": 5}),
            ("incremental", {}),
            ("gaussian", {}),
            ("iid", {}),
        ):
            s = sched_of(kind, **kw)
            for b in (0, 123, 999):
                assert abs(class_distribution(s, b).sum() - 1.0) < 1e-12

    def test_incremental_is_singleton_split(self):
        s = sched_of("incremental")
        assert s.subsets == 10
        for b in (0, 150, 990):
            probs = class_distribution(s, b)
            task = b // 100
            assert probs[s.class_order[task]] == 1.0
            assert np.count_nonzero(probs) == 1

    def test_uneven_partitions_rejected(self):
        with pytest.raises(ConfigError):
            sched_of("split", subsets=3)  # 3 does not divide 10 classes
        with pytest.raises(ConfigError):
            sched_of("split", subsets=5, total=999)
        with pytest.raises(ConfigError):
            sched_of("nope")

    def test_batch_index_range_checked(self):
        s = sched_of("iid")
        with pytest.raises(ConfigError):
            class_distribution(s, -1)
        with pytest.raises(ConfigError):
            class_distribution(s, 1000)


class TestGaussian:
    def test_unit_weight_at_every_peak(self):
        s = sched_of("gaussian")
        for pos in range(10):
            peak = int(pos * 1000 / 10)
            assert gaussian_weight(s, pos, peak) == 1.0

    def test_half_log_drop_at_one_width(self):
        s = sched_of("gaussian")
        for pos in (1, 4, 9):
            peak = int(pos * 1000 / 10)
            for B in (peak - 50, peak + 50):
                assert abs(gaussian_weight(s, pos, B) - math.exp(-0.5)) < 1e-9

    def test_distribution_changes_smoothly(self):
        s = sched_of("gaussian")
        prev = class_distribution(s, 0)
        worst = 0.0
        for b in range(1, 1000):
            cur = class_distribution(s, b)
            worst = max(worst, np.abs(cur - prev).max())
            prev = cur
        assert worst < 0.05

    def test_peak_class_dominates_at_its_peak(self):
        s = sched_of("gaussian")
        for pos in range(10):
            probs = class_distribution(s, int(pos * 100))
            assert np.argmax(probs) == s.class_order[pos]


class TestSampling:
    def test_split_batches_stay_inside_task_subset(self):
        ds = generate_synthetic(SyntheticSpec(d=8, train_per_class=20, test_per_class=5))
        s = sched_of("split", subsets=5, total=100, batch=16)
        rng = np.random.default_rng(0)
        for b in (0, 25, 99):
            _, labels = sample_batch(s, b, ds, rng)
            task = b // 20
            allowed = set(s.class_order[task * 2 : task * 2 + 2].tolist())
            assert set(labels.tolist()) <= allowed

    def test_incremental_batches_are_single_class(self):
        ds = generate_synthetic(SyntheticSpec(d=8, train_per_class=20, test_per_class=5))
        s = sched_of("incremental", total=100, batch=8)
        rng = np.random.default_rng(1)
        for b in (0, 55, 99):
            _, labels = sample_batch(s, b, ds, rng)
            assert set(labels.tolist()) == {int(s.class_order[b // 10])}

    def test_iid_frequencies_uniform(self):
        # chi-square over 10,000 draws, plus 3-sigma multinomial bounds
        ds = generate_synthetic(SyntheticSpec(d=4, train_per_class=30, test_per_class=5))
        s = sched_of("iid", total=100, batch=100)
        rng = np.random.default_rng(2)
        counts = np.zeros(10)
        for b in range(100):
            _, labels = sample_batch(s, b, ds, rng)
            counts += np.bincount(labels, minlength=10)
        assert counts.sum() == 10_000
        assert stats.chisquare(counts).pvalue > 1e-3
        sigma = math.sqrt(10_000 * 0.1 * 0.9)
        assert (np.abs(counts - 1_000) <= 3 * sigma).all()

    def test_reseeding_reproduces_sample_sequence(self):
        ds = generate_synthetic(SyntheticSpec(d=8, train_per_class=20, test_per_class=5))
        s = sched_of("gaussian", total=50, batch=6)
        batches1 = [sample_batch(s, b, ds, np.random.default_rng([9, b])) for b in range(50)]
        batches2 = [sample_batch(s, b, ds, np.random.default_rng([9, b])) for b in range(50)]
        for (z1, l1), (z2, l2) in zip(batches1, batches2):
            assert np.array_equal(z1, z2)
            assert np.array_equal(l1, l2)

    def test_empty_class_pool_named_in_error(self):
        from emcl.data import EmbeddingDataset

        rng = np.random.default_rng(3)
        labels = np.array([0, 0, 1, 1])  # class 2 missing from train
        ds = EmbeddingDataset(
            d=4,
            m=3,
            train_z=rng.standard_normal((4, 4)),
            train_labels=labels,
            test_z=rng.standard_normal((3, 4)),
            test_labels=np.array([0, 1, 2]),
        )
        s = make_schedule("iid", 3, 10, 64, 0)
        with pytest.raises(DataError, match="class 2"):
            for b in range(10):
                sample_batch(s, b, ds, np.random.default_rng(4))


class TestDescribe:
    def test_split_five_lists_five_ranges_of_200(self):
        text = describe(sched_of("split", subsets=5))
        assert text.count("task") == 5
        assert "batches 0-199" in text and "batches 800-999" in text

    def test_incremental_lists_ten_ranges_of_100(self):
        text = describe(sched_of("incremental"))
        assert text.count("task") == 10
        assert "batches 0-99" in text and "batches 900-999" in text

    def test_iid_single_range(self):
        text = describe(sched_of("iid"))
        assert "0-999" in text
        assert "task" not in text

    def test_boundaries(self):
        assert task_boundaries(sched_of("split", subsets=5)) == [199, 399, 599, 799, 999]
        assert task_boundaries(sched_of("gaussian")) == []

    def test_class_order_varies_with_seed(self):
        a = sched_of("split", subsets=5, seed=0)
        b = sched_of("split", subsets=5, seed=1)
        assert not np.array_equal(a.class_order, b.class_order)
        c = sched_of("split", subsets=5, seed=0)
        assert np.array_equal(a.class_order, c.class_order)
