from __future__ import annotations

import numpy as np
import pytest

from synthmeter import nnet
from synthmeter.errors import DimensionMismatch, NonFiniteLoss


def tiny_model(layers, head, seed=0):
    return nnet.init_model(layers, head=head, seed=seed)


class TestForward:
    def test_zero_weights_sigmoid_gives_half(self):
        model = tiny_model([4, 3, 1], nnet.SIGMOID)
        for w in model.weights:
            w[:] = 0.0
        out = nnet.forward(model, np.random.default_rng(0).normal(size=(10, 4)))
        np.testing.assert_array_equal(out, np.full(10, 0.5))

    def test_identity_linear_layer(self):
        model = tiny_model([3, 3], nnet.LINEAR)
        model.weights[0][:] = np.eye(3)
        model.biases[0][:] = 0.0
        x = np.array([[1.0, -2.0, 3.0]])
        np.testing.assert_array_equal(nnet.forward(model, x), x)

    def test_hand_computed_chain(self):
        # 2-2-1 with hand-set weights: relu then sigmoid, no normalisation
        model = tiny_model([2, 2, 1], nnet.SIGMOID)
        model.weights[0][:] = np.array([[1.0, -1.0], [0.5, 2.0]])
        model.biases[0][:] = np.array([0.1, -0.2])
        model.weights[1][:] = np.array([[2.0], [-1.0]])
        model.biases[1][:] = np.array([0.3])
        x = np.array([1.0, 2.0])
        h = np.maximum(x @ model.weights[0] + model.biases[0], 0.0)
        z = h @ model.weights[1] + model.biases[1]
        expected = 1.0 / (1.0 + np.exp(-z[0]))
        assert nnet.forward(model, x) == pytest.approx(expected, abs=1e-15)

    def test_dimension_mismatch(self):
        model = tiny_model([4, 1], nnet.LINEAR)
        with pytest.raises(DimensionMismatch):
            nnet.forward(model, np.zeros((2, 5)))


class TestPinballLoss:
    def test_exact_prediction_is_zero(self):
        assert nnet.pinball_loss(2.0, 2.0, 0.95) == 0.0

    def test_under_prediction(self):
        assert nnet.pinball_loss(3.0, 2.0, 0.95) == pytest.approx(0.95)

    def test_over_prediction(self):
        assert nnet.pinball_loss(2.0, 3.0, 0.95) == pytest.approx(0.05)


class TestTrain:
    def test_bit_reproducible(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(64, 6))
        y = (x[:, 0] > 0).astype(float)
        config = nnet.TrainConfig(loss=nnet.BCE, epochs=5, batch_size=16, seed=3)
        runs = []
        for _ in range(2):
            model = tiny_model([6, 8, 1], nnet.SIGMOID, seed=1)
            runs.append(nnet.train(model, x, y, config))
        for w_a, w_b in zip(runs[0].model.weights, runs[1].model.weights):
            np.testing.assert_array_equal(w_a, w_b)
        assert runs[0].loss_trace == runs[1].loss_trace

    def test_separable_blobs_high_accuracy(self):
        rng = np.random.default_rng(5)
        a = rng.normal((-2.0, -2.0), 0.3, size=(100, 2))
        b = rng.normal((2.0, 2.0), 0.3, size=(100, 2))
        x = np.vstack([a, b])
        y = np.concatenate([np.zeros(100), np.ones(100)])
        config = nnet.TrainConfig(loss=nnet.BCE, epochs=50, batch_size=32, seed=0)
        result = nnet.train(tiny_model([2, 8, 1], nnet.SIGMOID, seed=0), x, y, config)
        accuracy = ((nnet.forward(result.model, x) > 0.5) == (y > 0.5)).mean()
        assert accuracy >= 0.99

    def test_constant_target_mse(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(80, 4))
        y = np.full(80, 0.7)
        config = nnet.TrainConfig(loss=nnet.MSE, epochs=100, batch_size=20, seed=1, learning_rate=0.02)
        result = nnet.train(tiny_model([4, 8, 1], nnet.LINEAR, seed=2), x, y, config)
        assert result.loss_trace[-1] < 1e-3

    def test_pinball_converges_to_quantile(self):
        # constant inputs: the loss minimiser is the empirical q-quantile
        rng = np.random.default_rng(9)
        x = np.ones((400, 3))
        y = rng.normal(1.0, 0.5, size=400)
        config = nnet.TrainConfig(
            loss=nnet.PINBALL, pinball_q=0.95, epochs=300, batch_size=100, seed=0, learning_rate=0.02
        )
        result = nnet.train(tiny_model([3, 4, 1], nnet.LINEAR, seed=1), x, y, config, standardize=False)
        prediction = float(np.atleast_1d(nnet.forward(result.model, x[:1]))[0])
        target = np.quantile(y, 0.95)
        assert abs(prediction - target) < 0.15

    def test_full_batch_mse_trace_non_increasing(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 3))
        y = x @ np.array([0.5, -0.2, 0.1])
        config = nnet.TrainConfig(loss=nnet.MSE, epochs=60, batch_size=50, seed=0, learning_rate=0.0005)
        result = nnet.train(tiny_model([3, 6, 1], nnet.LINEAR, seed=3), x, y, config)
        trace = result.loss_trace
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_non_finite_loss_aborts(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(32, 3)) * 1e6
        y = rng.normal(size=32) * 1e6
        config = nnet.TrainConfig(loss=nnet.MSE, epochs=50, batch_size=8, learning_rate=100.0, seed=0)
        with pytest.raises(NonFiniteLoss):
            nnet.train(tiny_model([3, 8, 1], nnet.LINEAR, seed=0), x, y, config, standardize=False)

    def test_epoch_callback_sees_each_epoch(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(30, 2))
        y = np.zeros(30)
        seen = []
        config = nnet.TrainConfig(loss=nnet.MSE, epochs=4, batch_size=10, seed=0)
        nnet.train(
            tiny_model([2, 2, 1], nnet.LINEAR, seed=0),
            x,
            y,
            config,
            epoch_callback=lambda model, epoch: seen.append(epoch),
        )
        assert seen == [0, 1, 2, 3]

    def test_head_loss_pairing_enforced(self):
        x, y = np.zeros((8, 2)), np.zeros(8)
        with pytest.raises(ValueError):
            nnet.train(
                tiny_model([2, 1], nnet.LINEAR),
                x,
                y,
                nnet.TrainConfig(loss=nnet.BCE, batch_size=8),
            )


class TestGradientCheck:
    def test_bce_small_network(self):
        rng = np.random.default_rng(0)
        for seed in range(3):
            model = tiny_model([2, 4, 1], nnet.SIGMOID, seed=seed)
            x = rng.normal(size=(16, 2))
            y = rng.integers(0, 2, size=16).astype(float)
            error = nnet.gradient_check(model, nnet.TrainConfig(loss=nnet.BCE), x, y)
            assert error < 1e-4

    def test_mse_at_perfect_fit(self):
        # zero weights, zero targets: stationary point, both gradients ~ 0
        model = tiny_model([3, 2, 1], nnet.LINEAR, seed=0)
        for w in model.weights:
            w[:] = 0.0
        x = np.random.default_rng(1).normal(size=(10, 3))
        y = np.zeros(10)
        error = nnet.gradient_check(model, nnet.TrainConfig(loss=nnet.MSE), x, y)
        assert error < 1e-6

    def test_pinball_off_kink(self):
        rng = np.random.default_rng(3)
        for seed in range(3):
            model = tiny_model([2, 4, 1], nnet.LINEAR, seed=seed)
            x = rng.normal(size=(12, 2))
            logits = np.atleast_1d(nnet.logits(model, x))
            y = logits + np.where(rng.random(12) > 0.5, 1.0, -1.0)  # |u| = 1 >> step
            error = nnet.gradient_check(
                model, nnet.TrainConfig(loss=nnet.PINBALL, pinball_q=0.95), x, y
            )
            assert error < 1e-4


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 5))
        y = (x.sum(axis=1) > 0).astype(float)
        result = nnet.train(
            tiny_model([5, 6, 1], nnet.SIGMOID, seed=2),
            x,
            y,
            nnet.TrainConfig(loss=nnet.BCE, epochs=3, batch_size=10, seed=0),
        )
        path = tmp_path / "model.json"
        nnet.save(result.model, path)
        loaded = nnet.load(path)
        np.testing.assert_array_equal(
            nnet.forward(loaded, x), nnet.forward(result.model, x)
        )
