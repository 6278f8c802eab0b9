"""Core model operations: forward, lookup, loss, gradients, sign update.

Analytic gradients are checked against central finite differences of
the loss through the full forward pass, computed entry by entry here
(independent of the production gradient path).
"""

import math

import numpy as np
import pytest

from emcl import (
    ConfigError,
    EnsembleMemory,
    Hyperparams,
    NumericError,
    cosine_similarity,
    dot_loss,
    t_forward,
)
from emcl.model import truncated_normal
from oracles import fd_loss_gradients


def small_memory(rng, d=None, m=None, n=None, k=None, **kw):
    d = d or int(rng.integers(1, 9))
    m = m or int(rng.integers(1, 5))
    n = n or int(rng.integers(1, 5))
    k = k or int(rng.integers(1, n + 1))
    hp = Hyperparams(d=d, m=m, n=n, k=k, seed=int(rng.integers(1 << 30)), **kw)
    return EnsembleMemory(hp)


class TestTForward:
    def test_zero_classifier_gives_zero(self):
        out = t_forward(np.zeros((3, 4)), np.zeros(3), np.ones(4), 250.0)
        assert np.array_equal(out, np.zeros(3))

    def test_scalar_instance_matches_tanh(self):
        # tau*tanh(psi/tau) with psi = 250, tau = 250 -> 250*tanh(1)
        out = t_forward([[1.0]], [0.0], [250.0], 250.0)
        assert out.shape == (1,)
        assert abs(out[0] - 250.0 * math.tanh(1.0)) < 1e-9

    def test_outputs_strictly_inside_tau(self):
        # strict in exact arithmetic; in float64 tanh(x) rounds to 1.0
        # once x exceeds ~19, so the sweep stays inside that range
        rng = np.random.default_rng(0)
        for _ in range(50):
            m, d = int(rng.integers(1, 6)), int(rng.integers(1, 10))
            out = t_forward(
                rng.standard_normal((m, d)) * 10,
                rng.standard_normal(m) * 10,
                rng.standard_normal(d) * 10,
                250.0,
            )
            assert (np.abs(out) < 250.0).all()
        out = t_forward([[1.0]], [0.0], [15.0 * 250.0], 250.0)
        assert abs(out[0]) < 250.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            t_forward(np.zeros((3, 4)), np.zeros(3), np.ones(5), 250.0)
        with pytest.raises(ConfigError):
            t_forward(np.zeros((3, 4)), np.zeros(2), np.ones(4), 250.0)


class TestCosineSimilarity:
    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_parallel(self):
        assert abs(cosine_similarity([1.0, 2.0], [2.0, 4.0]) - 1.0) < 1e-12

    def test_analytic_value(self):
        assert abs(cosine_similarity([1, 0], [1, 1]) - 1 / math.sqrt(2)) < 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(NumericError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(NumericError):
            cosine_similarity([1.0, 0.0], [0.0, 0.0])

    def test_range(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a, b = rng.standard_normal((2, 8))
            assert -1.0 - 1e-12 <= cosine_similarity(a, b) <= 1.0 + 1e-12


def memory_with_keys(keys, m=2, k=None, seed=0, **kw):
    keys = np.asarray(keys, dtype=np.float64)
    n, d = keys.shape
    hp = Hyperparams(d=d, m=m, n=n, k=k or n, seed=seed, **kw)
    mem = EnsembleMemory(hp)
    fresh = keys.copy()
    mem.keys = fresh
    mem.keys.setflags(write=False)
    mem._keys_unit = fresh / np.linalg.norm(fresh, axis=1)[:, None]
    return mem


class TestTopKSelect:
    def test_example_orthogonal_keys(self, backend):
        mem = memory_with_keys([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], k=2)
        idx, sims = mem.top_k([1.0, 0.0], k=2)
        assert idx.tolist() == [0, 1]
        np.testing.assert_allclose(sims, [1.0, 0.0], atol=1e-15)

    def test_tie_breaks_to_lower_index(self, backend):
        mem = memory_with_keys([[1.0, 0.0], [1.0, 0.0]])
        idx, _ = mem.top_k([1.0, 0.0], k=1)
        assert idx.tolist() == [0]

    def test_matching_key_ranks_first(self, backend):
        rng = np.random.default_rng(2)
        keys = rng.standard_normal((6, 5))
        mem = memory_with_keys(keys, k=3)
        j = 4
        idx, sims = mem.top_k(keys[j], k=3)
        assert idx[0] == j
        assert abs(sims[0] - 1.0) < 1e-12

    def test_k_larger_than_n_rejected(self):
        mem = memory_with_keys([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ConfigError):
            mem.top_k([1.0, 0.0], k=3)

    def test_similarities_sorted_indices_distinct(self, backend):
        rng = np.random.default_rng(3)
        mem = small_memory(rng, d=6, m=2, n=8, k=5)
        for _ in range(20):
            idx, sims = mem.top_k(rng.standard_normal(6))
            assert len(set(idx.tolist())) == len(idx)
            assert (np.diff(sims) <= 0).all()

    def test_selection_invariant_under_positive_scaling(self, backend):
        rng = np.random.default_rng(4)
        mem = small_memory(rng, d=8, m=2, n=10, k=4)
        for _ in range(25):
            z = rng.standard_normal(8)
            base_idx, base_sims = mem.top_k(z)
            for c in (2.0, 0.5, 1024.0):
                # powers of two scale the normalization exactly
                idx, sims = mem.top_k(c * z)
                assert np.array_equal(idx, base_idx)
                assert np.array_equal(sims, base_sims)
            idx, sims = mem.top_k(3.7 * z)
            assert np.array_equal(idx, base_idx)
            np.testing.assert_allclose(sims, base_sims, rtol=1e-12)


class TestEnsembleForward:
    def test_single_member_reduces_to_t_forward(self, backend):
        rng = np.random.default_rng(5)
        for _ in range(20):
            mem = small_memory(rng, n=1, k=1)
            z = rng.standard_normal(mem.hp.d)
            out = mem.forward(z)
            direct = t_forward(mem.W[0], mem.b[0], z, mem.hp.tau)
            assert np.max(np.abs(out.y_hat - direct)) < 1e-12

    def test_identical_members_average_to_common_output(self, backend):
        mem = memory_with_keys([[2.0, 1.0], [1.0, 2.0]], m=3, k=2, seed=7)
        mem.W[1] = mem.W[0]
        mem.b[1] = mem.b[0]
        z = np.array([1.0, 1.0])
        out = mem.forward(z)
        expected = t_forward(mem.W[0], mem.b[0], z, mem.hp.tau)
        np.testing.assert_allclose(out.y_hat, expected, rtol=1e-12)

    def test_two_member_weighted_average(self, backend):
        # keys built to give cosine similarities 0.8 and 0.4 against e_0
        keys = [[0.8, 0.6], [0.4, math.sqrt(1 - 0.16)]]
        mem = memory_with_keys(keys, m=3, k=2, seed=8)
        z = np.array([1.0, 0.0])
        out = mem.forward(z)
        np.testing.assert_allclose(out.similarities, [0.8, 0.4], rtol=1e-12)
        u = t_forward(mem.W[0], mem.b[0], z, mem.hp.tau)
        w = t_forward(mem.W[1], mem.b[1], z, mem.hp.tau)
        np.testing.assert_allclose(out.y_hat, (0.8 * u + 0.4 * w) / 1.2, rtol=1e-9)
        # independent scalar recomputation of the weighted average
        for c in range(3):
            num = den = 0.0
            for j, sim in zip((0, 1), (0.8, 0.4)):
                psi = sum(mem.W[j, c, l] * z[l] for l in range(2)) + mem.b[j, c]
                num += sim * (250.0 * math.tanh(psi / 250.0))
                den += sim
            assert abs(out.y_hat[c] - num / den) < 1e-9

    def test_degenerate_similarity_sum_raises(self, backend):
        mem = memory_with_keys([[1.0, 0.0], [-1.0, 0.0]], k=2)
        with pytest.raises(NumericError):
            mem.forward([0.0, 1.0])

    def test_output_bound_under_nonnegative_similarities(self, backend):
        rng = np.random.default_rng(6)
        for _ in range(20):
            d, m, n = 6, 3, 5
            hp = Hyperparams(d=d, m=m, n=n, k=3, seed=int(rng.integers(1 << 30)))
            mem = EnsembleMemory(hp)
            # positive-orthant keys and embeddings: all similarities >= 0,
            # so aggregation is convex and the tanh bound survives it
            keys = np.abs(rng.standard_normal((n, d)))
            mem.keys = keys
            mem._keys_unit = keys / np.linalg.norm(keys, axis=1)[:, None]
            # big pre-activations, but below the float64 tanh saturation
            mem.W *= 400.0
            z = np.abs(rng.standard_normal(d)) + 1e-3
            out = mem.forward(z)
            assert (np.abs(out.y_hat) < hp.tau).all()

    def test_zero_embedding_rejected(self):
        rng = np.random.default_rng(7)
        mem = small_memory(rng, d=4)
        with pytest.raises(NumericError):
            mem.forward(np.zeros(4))

    def test_nonfinite_embedding_rejected(self):
        rng = np.random.default_rng(8)
        mem = small_memory(rng, d=4)
        with pytest.raises(NumericError):
            mem.forward([1.0, np.nan, 0.0, 0.0])


class TestDotLoss:
    def test_picks_true_class_component(self):
        assert dot_loss([0.0, 0.0, 1.0], [1.0, 2.0, 3.0]) == -3.0

    def test_zero_output(self):
        assert dot_loss([1.0, 0.0], [0.0, 0.0]) == 0.0

    def test_bounded_below_by_minus_tau(self, backend):
        rng = np.random.default_rng(9)
        for _ in range(20):
            mem = small_memory(rng, n=1, k=1)
            z = rng.standard_normal(mem.hp.d)
            y = np.zeros(mem.hp.m)
            y[rng.integers(mem.hp.m)] = 1.0
            val = dot_loss(y, mem.forward(z).y_hat)
            assert val > -mem.hp.tau

    def test_non_one_hot_rejected(self):
        for bad in ([0.5, 0.5], [1.0, 1.0], [0.0, 0.0], [2.0, 0.0], [-1.0, 1.0]):
            with pytest.raises(ConfigError):
                dot_loss(bad, [0.0, 0.0])


class TestGradients:
    def test_non_target_rows_and_unselected_members_exactly_zero(self, backend):
        rng = np.random.default_rng(10)
        for _ in range(30):
            mem = small_memory(rng, m=int(rng.integers(2, 5)))
            z = rng.standard_normal(mem.hp.d)
            label = int(rng.integers(mem.hp.m))
            gW, gb = mem.batch_gradients(z[None], [label])
            _, idx, _ = mem.forward_batch(z[None])
            selected = set(idx[0].tolist())
            for i in range(mem.hp.n):
                for c in range(mem.hp.m):
                    if i in selected and c == label:
                        continue
                    assert not gW[i, c].any()
                    assert gb[i, c] == 0.0

    def test_zero_weight_single_member_gradient_is_minus_one(self, backend):
        hp = Hyperparams(d=1, m=2, n=1, k=1, seed=0)
        mem = EnsembleMemory(hp)
        mem.W[:] = 0.0
        for label in (0, 1):
            gW, gb = mem.batch_gradients(np.array([[1.0]]), [label])
            assert gW[0, label, 0] == -1.0
            assert gb[0, label] == -1.0

    def test_aggregation_weights_scale_gradients(self, backend):
        keys = [[0.8, 0.6], [0.4, math.sqrt(1 - 0.16)]]
        mem = memory_with_keys(keys, m=2, k=2, seed=11)
        mem.W[:] = 0.0
        z = np.array([1.0, 0.0])
        gW, _ = mem.batch_gradients(z[None], [0])
        # zero weights make sech^2 = 1, so each selected gradient row is
        # -alpha_j * z with alpha = (0.8, 0.4)/1.2
        np.testing.assert_allclose(gW[0, 0], -(0.8 / 1.2) * z, rtol=1e-12)
        np.testing.assert_allclose(gW[1, 0], -(0.4 / 1.2) * z, rtol=1e-12)

    def test_matches_finite_differences(self, backend):
        rng = np.random.default_rng(12)
        for _ in range(15):
            mem = small_memory(rng, d=int(rng.integers(1, 9)), m=int(rng.integers(1, 5)))
            z = rng.standard_normal(mem.hp.d)
            label = int(rng.integers(mem.hp.m))
            analytic_W, analytic_b = mem.batch_gradients(z[None], [label])
            fd_W, fd_b = fd_loss_gradients(mem, z, label)
            np.testing.assert_allclose(analytic_W, fd_W, rtol=1e-3, atol=1e-6)
            np.testing.assert_allclose(analytic_b, fd_b, rtol=1e-3, atol=1e-6)

    def test_batch_gradient_is_sum_of_sample_gradients(self, backend):
        rng = np.random.default_rng(13)
        mem = small_memory(rng, d=6, m=3, n=4, k=2)
        Z = rng.standard_normal((5, 6))
        labels = rng.integers(0, 3, 5)
        gW, gb = mem.batch_gradients(Z, labels)
        sW = np.zeros_like(gW)
        sb = np.zeros_like(gb)
        for s in range(5):
            a, b_ = mem.batch_gradients(Z[s][None], labels[s][None])
            sW += a
            sb += b_
        np.testing.assert_allclose(gW, sW, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(gb, sb, rtol=1e-12, atol=1e-15)


class TestSignUpdate:
    def _one_param_update(self, theta, g, lr, decay, backend):
        hp = Hyperparams(d=1, m=1, n=1, k=1, lr=lr, decay=decay, seed=0,
                         decay_biases=False)
        mem = EnsembleMemory(hp)
        mem.W[0, 0, 0] = theta
        mem._gW[:] = 0.0
        from emcl import kernels

        kernels.sign_step(mem.W.reshape(-1), np.array([g]), lr, decay)
        return mem.W[0, 0, 0]

    def test_positive_gradient_steps_down(self, backend):
        new = self._one_param_update(1.0, 3.7, 1e-4, 0.0, backend)
        assert new == 1.0 - 1e-4

    def test_zero_gradient_decays_only(self, backend):
        new = self._one_param_update(1.0, 0.0, 1e-4, 1e-4, backend)
        assert new == 1.0 - 1e-4 * 1.0
        assert abs(new - 0.9999) < 1e-15

    def test_negative_gradient_step_cancels_decay(self, backend):
        new = self._one_param_update(1.0, -2.0, 1e-4, 1e-4, backend)
        assert new == (1.0 + 1e-4) - 1e-4 * 1.0
        assert abs(new - 1.0) < 1e-15

    def test_step_magnitude_exact(self, backend):
        rng = np.random.default_rng(14)
        mem = small_memory(rng, d=5, m=3, n=4, k=2, decay=0.0)
        before_W, before_b = mem.W.copy(), mem.b.copy()
        Z = rng.standard_normal((4, 5))
        labels = rng.integers(0, 3, 4)
        gW, gb = mem.batch_gradients(Z, labels)
        mem.train_step(Z, labels)
        lr = mem.hp.lr
        assert np.array_equal(mem.W, before_W - lr * np.sign(gW))
        assert np.array_equal(mem.b, before_b - lr * np.sign(gb))

    def test_keys_untouched_by_training(self, backend):
        rng = np.random.default_rng(15)
        mem = small_memory(rng, d=6, m=3, n=5, k=2)
        fp = mem.key_fingerprint()
        for _ in range(30):
            Z = rng.standard_normal((3, 6))
            mem.train_step(Z, rng.integers(0, 3, 3))
        assert mem.key_fingerprint() == fp
        with pytest.raises(ValueError):
            mem.keys[0, 0] = 1.0

    def test_parameters_stay_finite(self, backend):
        rng = np.random.default_rng(16)
        mem = small_memory(rng, d=4, m=2, n=3, k=2)
        for _ in range(50):
            mem.train_step(rng.standard_normal((2, 4)), rng.integers(0, 2, 2))
        mem.check_finite()


class TestPredict:
    def test_argmax_of_output(self, backend):
        rng = np.random.default_rng(17)
        mem = small_memory(rng, d=5, m=4)
        z = rng.standard_normal(5)
        out = mem.forward(z)
        assert mem.predict(z) == int(np.argmax(out.y_hat))

    def test_all_equal_output_predicts_class_zero(self, backend):
        rng = np.random.default_rng(18)
        mem = small_memory(rng, d=5, m=3)
        mem.W[:] = 0.0
        assert mem.predict(rng.standard_normal(5)) == 0


class TestInitialization:
    def test_truncated_normal_bounds_and_scale(self):
        rng = np.random.default_rng(19)
        x = truncated_normal(rng, (200_000,), std=0.5)
        assert np.abs(x).max() <= 2 * 0.5
        assert abs(x.std() - 0.5 * 0.8796) < 0.01  # clipped-normal std shrink

    def test_weight_init_uses_fan_in_scale(self):
        hp = Hyperparams(d=64, m=10, n=32, k=4, seed=20, init_scale=1.0)
        mem = EnsembleMemory(hp)
        assert np.abs(mem.W).max() <= 2.0 / 8.0
        assert not mem.b.any()

    def test_keys_standard_normal(self):
        hp = Hyperparams(d=100, m=2, n=500, k=4, seed=21)
        mem = EnsembleMemory(hp)
        assert abs(mem.keys.mean()) < 0.02
        assert abs(mem.keys.std() - 1.0) < 0.02

    def test_same_seed_same_model(self):
        hp = Hyperparams(d=8, m=3, n=4, k=2, seed=22)
        a, b = EnsembleMemory(hp), EnsembleMemory(hp)
        assert np.array_equal(a.keys, b.keys)
        assert np.array_equal(a.W, b.W)

    def test_hyperparam_validation(self):
        good = dict(d=4, m=2)
        assert Hyperparams(**good).validate() is None
        for bad in (
            dict(d=0, m=2),
            dict(d=4, m=0),
            dict(d=4, m=2, k=0),
            dict(d=4, m=2, n=4, k=5),
            dict(d=4, m=2, tau=0.0),
            dict(d=4, m=2, lr=0.0),
            dict(d=4, m=2, decay=-1e-9),
        ):
            with pytest.raises(ConfigError):
                Hyperparams(**bad).validate()

    def test_defaults_match_reference_configuration(self):
        hp = Hyperparams(d=512, m=10)
        assert (hp.n, hp.k, hp.tau, hp.lr, hp.decay) == (1024, 32, 250.0, 1e-4, 1e-4)
