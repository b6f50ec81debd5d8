"""
Tests for the numpy CNN: layer kernels against finite differences, loss and
optimizer oracles, shape algebra, training determinism and checkpoints.
"""

import json

import numpy as np
import pytest

from errors import ChecksumError, DataFormatError, NumericError, ShapeError
from nnet import (
    PARAM_ORDER,
    AdamState,
    TrainConfig,
    adam_step,
    backward,
    check_input_shape,
    batch_indices,
    batchnorm,
    batchnorm_backward,
    bce_logit_gradient,
    bce_loss,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout,
    extract_features,
    feature_matrix,
    init_model,
    load_model,
    maxpool2x2,
    maxpool2x2_backward,
    model_forward,
    predict_labels,
    save_model,
    sigmoid,
    train_multilabel,
)

H = 1e-6


def numeric_gradient(f, x):
    """Central differences of scalar f() w.r.t. every entry of x (modified in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = x[idx]
        x[idx] = original + H
        plus = f()
        x[idx] = original - H
        minus = f()
        x[idx] = original
        grad[idx] = (plus - minus) / (2 * H)
    return grad


class TestConvolution:
    def test_matches_direct_sum(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 5, 6, 3))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        out = conv2d_forward(x, w, b)
        assert out.shape == (2, 3, 4, 4)
        expected = np.sum(x[1, 2:5, 1:4, :] * w[3]) + b[3]
        assert out[1, 2, 1, 3] == pytest.approx(expected)

    def test_single_instance_has_no_batch_axis(self):
        x = np.ones((4, 4, 1))
        out = conv2d_forward(x, np.ones((2, 3, 3, 1)), np.zeros(2))
        assert out.shape == (2, 2, 2)
        assert np.allclose(out, 9.0)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d_forward(np.ones((1, 5, 5, 2)), np.ones((1, 3, 3, 3)), np.zeros(1))

    def test_input_smaller_than_kernel(self):
        with pytest.raises(ShapeError):
            conv2d_forward(np.ones((1, 2, 5, 1)), np.ones((1, 3, 3, 1)), np.zeros(1))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 5, 5, 2))
        w = rng.normal(size=(3, 3, 3, 2))
        b = rng.normal(size=3)
        r = rng.normal(size=(2, 3, 3, 3))

        def loss():
            return float(np.sum(conv2d_forward(x, w, b) * r))

        dx, dw, db = conv2d_backward(r, x, w)
        assert np.allclose(dx, numeric_gradient(loss, x), atol=1e-6)
        assert np.allclose(dw, numeric_gradient(loss, w), atol=1e-6)
        assert np.allclose(db, numeric_gradient(loss, b), atol=1e-6)


class TestPooling:
    def test_odd_trailing_rows_and_columns_dropped(self):
        x = np.arange(25, dtype=float).reshape(5, 5)
        pooled, _ = maxpool2x2(x)
        assert pooled.tolist() == [[6.0, 8.0], [16.0, 18.0]]

    def test_ties_route_to_first_position(self):
        pooled, cache = maxpool2x2(np.ones((1, 2, 2, 1)))
        assert pooled.shape == (1, 1, 1, 1)
        grad = maxpool2x2_backward(np.ones((1, 1, 1, 1)), cache)
        assert grad[0, :, :, 0].tolist() == [[1.0, 0.0], [0.0, 0.0]]

    def test_too_small(self):
        with pytest.raises(ShapeError):
            maxpool2x2(np.ones((1, 1, 4, 1)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 5, 7, 3))
        r = rng.normal(size=(2, 2, 3, 3))
        _, cache = maxpool2x2(x)

        def loss():
            return float(np.sum(maxpool2x2(x)[0] * r))

        assert np.allclose(maxpool2x2_backward(r, cache), numeric_gradient(loss, x), atol=1e-6)


class TestBatchNorm:
    def test_train_mode_normalizes_per_channel(self):
        rng = np.random.default_rng(3)
        x = rng.normal(5.0, 3.0, size=(6, 4, 4, 2))
        result = batchnorm(x, np.ones(2), np.zeros(2))
        assert np.allclose(result.out.mean(axis=(0, 1, 2)), 0.0, atol=1e-12)
        assert np.allclose(result.out.var(axis=(0, 1, 2)), 1.0, atol=1e-4)

    def test_running_statistics_update(self):
        x = np.array([[1.0], [3.0]])
        result = batchnorm(x, np.ones(1), np.zeros(1), running_mean=np.zeros(1), running_var=np.ones(1))
        assert result.running_mean[0] == pytest.approx(0.1 * 2.0)
        assert result.running_var[0] == pytest.approx(0.9 + 0.1 * 1.0)

    def test_running_statistics_converge_to_batch(self):
        """After 100 train passes over one batch, infer output matches train output to 1e-3."""
        rng = np.random.default_rng(11)
        x = rng.normal(5.0, 3.0, size=(64, 6, 6, 4))
        gamma = rng.uniform(0.5, 2.0, size=4)
        beta = rng.normal(size=4)
        running_mean, running_var = np.zeros(4), np.ones(4)
        for _ in range(100):
            trained = batchnorm(x, gamma, beta, running_mean=running_mean, running_var=running_var)
            running_mean, running_var = trained.running_mean, trained.running_var
        inferred = batchnorm(x, gamma, beta, mode="infer", running_mean=running_mean, running_var=running_var)
        assert np.max(np.abs(inferred.out - trained.out)) < 1e-3

    def test_infer_mode_uses_running_statistics(self):
        x = np.array([[4.0]])
        result = batchnorm(x, np.array([2.0]), np.array([1.0]), eps=0.0, mode="infer",
                           running_mean=np.array([2.0]), running_var=np.array([4.0]))
        assert result.out[0, 0] == pytest.approx(2.0 * (4.0 - 2.0) / 2.0 + 1.0)

    def test_batch_of_one_in_train_mode(self):
        with pytest.raises(ValueError):
            batchnorm(np.ones((1, 3, 3, 2)), np.ones(2), np.zeros(2))

    def test_unknown_mode(self):
        with pytest.raises(ValueError) as exc_info:
            batchnorm(np.ones((2, 2)), np.ones(2), np.zeros(2), mode="eval")
        assert "Must be one of" in str(exc_info.value)

    @pytest.mark.parametrize("mode", ["train", "infer"])
    def test_gradients_match_finite_differences(self, mode):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 2, 3, 2))
        gamma = rng.normal(size=2)
        beta = rng.normal(size=2)
        r = rng.normal(size=x.shape)
        stats = dict(running_mean=np.array([0.3, -0.2]), running_var=np.array([1.5, 0.7]))

        def loss():
            return float(np.sum(batchnorm(x, gamma, beta, mode=mode, **stats).out * r))

        dx, dgamma, dbeta = batchnorm_backward(r, batchnorm(x, gamma, beta, mode=mode, **stats).cache)
        assert np.allclose(dx, numeric_gradient(loss, x), atol=1e-5)
        assert np.allclose(dgamma, numeric_gradient(loss, gamma), atol=1e-5)
        assert np.allclose(dbeta, numeric_gradient(loss, beta), atol=1e-5)


class TestDenseAndActivations:
    def test_dense_gradients(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(4, 6))
        w = rng.normal(size=(6, 3))
        b = rng.normal(size=3)
        r = rng.normal(size=(4, 3))

        def loss():
            return float(np.sum(dense_forward(x, w, b) * r))

        dx, dw, db = dense_backward(r, x, w)
        assert np.allclose(dx, numeric_gradient(loss, x), atol=1e-6)
        assert np.allclose(dw, numeric_gradient(loss, w), atol=1e-6)
        assert np.allclose(db, numeric_gradient(loss, b), atol=1e-6)

    def test_dense_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dense_forward(np.ones((2, 5)), np.ones((4, 3)), np.zeros(3))

    def test_sigmoid_stays_strictly_inside_unit_interval(self):
        p = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        assert 0.0 < p[0] < 1e-300
        assert p[1] == 0.5
        assert p[2] < 1.0

    def test_inverted_dropout_scaling(self):
        rng = np.random.default_rng(6)
        out, mask = dropout(np.ones(10000), 0.1, rng)
        kept = mask > 0
        assert np.allclose(out[kept], 1.0 / 0.9)
        assert 0.85 < kept.mean() < 0.95

    def test_zero_dropout_is_identity(self):
        x = np.arange(5.0)
        out, mask = dropout(x, 0.0, np.random.default_rng(0))
        assert np.array_equal(out, x)


class TestLossAndOptimizer:
    def test_bce_at_one_half(self):
        assert bce_loss(np.full((2, 3), 0.5), np.array([[0, 1, 0], [1, 1, 0]])) == pytest.approx(np.log(2.0))

    def test_bce_clamps_probabilities(self):
        assert bce_loss(np.array([[0.0]]), np.array([[1]])) == pytest.approx(-np.log(1e-7))

    def test_bce_rejects_bad_labels_and_shapes(self):
        with pytest.raises(ValueError):
            bce_loss(np.full((1, 3), 0.5), np.array([[0, 2, 1]]))
        with pytest.raises(ShapeError):
            bce_loss(np.full((1, 3), 0.5), np.array([[0, 1]]))

    def test_logit_gradient(self):
        p = np.array([[0.25, 0.5], [0.0, 0.9]])
        y = np.array([[1, 0], [1, 1]])
        grad = bce_logit_gradient(p, y)
        assert grad[0, 0] == pytest.approx((0.25 - 1) / 4)
        assert grad[0, 1] == pytest.approx(0.5 / 4)
        assert grad[1, 0] == 0.0

    def test_adam_first_step_moves_by_learning_rate(self):
        """With bias correction the first update is lr * g / (|g| + eps)."""
        params = {"w": np.array([1.0, -2.0, 0.5])}
        grads = {"w": np.array([0.3, -4.0, 2.0])}
        state = AdamState.for_params(params, learning_rate=0.01)
        adam_step(params, grads, state)
        assert np.allclose(params["w"], [0.99, -1.99, 0.49], atol=1e-9)
        assert state.step == 1

    def test_adam_second_step_oracle(self):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params, learning_rate=0.1)
        adam_step(params, {"w": np.array([1.0])}, state)
        adam_step(params, {"w": np.array([3.0])}, state)
        m_hat = (0.9 * 0.1 * 1.0 + 0.1 * 3.0) / (1 - 0.9 ** 2)
        v_hat = (0.999 * 0.001 * 1.0 + 0.001 * 9.0) / (1 - 0.999 ** 2)
        expected = -0.1 * (1.0 / (1.0 + 1e-8)) - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert params["w"][0] == pytest.approx(expected, rel=1e-9)

    def test_adam_rejects_non_finite_gradient(self):
        params = {"conv_w": np.zeros(2)}
        state = AdamState.for_params(params)
        with pytest.raises(NumericError) as exc_info:
            adam_step(params, {"conv_w": np.array([1.0, np.inf])}, state)
        assert "conv_w" in str(exc_info.value)
        assert np.array_equal(params["conv_w"], np.zeros(2))


class TestModel:
    def test_shape_algebra(self):
        """16 x 251 x 3 input, 4 filters: conv 14 x 249, pooled 7 x 124, 3472 features."""
        model = init_model((16, 251, 3), n_filters=4, seed=0)
        assert model.conv_shape == (14, 249)
        assert model.pooled_shape == (7, 124)
        assert model.feature_length == 3472
        assert model.params["dense_w"].shape == (3472, 4)
        assert model.params["out_w"].shape == (4, 3)

    def test_init_is_seeded(self):
        a = init_model((8, 12, 3), 2, seed=5)
        b = init_model((8, 12, 3), 2, seed=5)
        c = init_model((8, 12, 3), 2, seed=6)
        assert a.model_id == b.model_id
        assert a.model_id != c.model_id
        assert a.model_id.startswith("cnn-2f-")

    def test_init_rejects_tiny_input(self):
        with pytest.raises(ShapeError):
            init_model((3, 12, 3))

    def test_forward_outputs_probabilities(self):
        model = init_model((8, 12, 3), 2, seed=1)
        x = np.random.default_rng(0).normal(size=(5, 8, 12, 3))
        p = model_forward(model, x)
        assert p.shape == (5, 3)
        assert np.all((p > 0) & (p < 1))
        assert predict_labels(model, x).dtype == np.int8

    def test_forward_rejects_wrong_shape(self):
        model = init_model((8, 12, 3), 2)
        with pytest.raises(ShapeError):
            model_forward(model, np.zeros((2, 8, 11, 3)))

    def test_train_mode_needs_rng_for_dropout(self):
        model = init_model((8, 12, 3), 2, dropout_rate=0.5)
        with pytest.raises(ValueError):
            model_forward(model, np.zeros((2, 8, 12, 3)), mode="train")

    def test_backward_needs_cache(self):
        with pytest.raises(ValueError):
            backward(init_model((8, 12, 3), 2), None, np.zeros((1, 3)))

    def test_full_backward_matches_finite_differences(self):
        """Every trainable parameter, train mode, dropout off."""
        rng = np.random.default_rng(7)
        model = init_model((6, 7, 2), n_filters=2, seed=3, dropout_rate=0.0)
        for name in PARAM_ORDER:
            model.params[name] = model.params[name] + rng.normal(scale=0.1, size=model.params[name].shape)
        x = rng.normal(size=(4, 6, 7, 2))
        y = np.array([[1, 0, 1], [0, 0, 1], [1, 1, 0], [0, 1, 0]])

        def loss():
            return bce_loss(model_forward(model, x, "train"), y)

        _, cache = model_forward(model, x, "train", return_cache=True)
        grads = backward(model, cache, y)
        for name in PARAM_ORDER:
            expected = numeric_gradient(loss, model.params[name])
            assert np.allclose(grads[name], expected, atol=1e-6), name

    def test_feature_extraction(self):
        model = init_model((8, 12, 3), 2, seed=1)
        x = np.random.default_rng(1).normal(size=(3, 8, 12, 3))
        features = feature_matrix(model, x, batch_size=2)
        assert features.shape == (3, model.feature_length)
        one = extract_features(model, x[1], segment_id="s1")
        assert np.allclose(one.values, features[1])
        assert one.model_id == model.model_id
        assert len(one) == model.feature_length


class TestTraining:
    def test_trailing_single_instance_joins_previous_batch(self):
        batches = batch_indices(np.arange(65), 32)
        assert [len(b) for b in batches] == [32, 33]
        assert [len(b) for b in batch_indices(np.arange(64), 32)] == [32, 32]
        assert [len(b) for b in batch_indices(np.arange(66), 32)] == [32, 32, 2]

    def test_training_is_deterministic(self, tiny_dataset):
        cfg = TrainConfig(epochs=2, batch_size=16, seed=11)
        a, history_a = train_multilabel(init_model(tiny_dataset.segment_shape, 2, seed=1), tiny_dataset, cfg)
        b, history_b = train_multilabel(init_model(tiny_dataset.segment_shape, 2, seed=1), tiny_dataset, cfg)
        for name in PARAM_ORDER:
            assert np.array_equal(a.params[name], b.params[name])
        assert history_a.train_losses == history_b.train_losses
        assert a.model_id == b.model_id
        assert a.train_config["seed"] == 11

    def test_history_records_every_epoch(self, tiny_dataset):
        model, history = train_multilabel(init_model(tiny_dataset.segment_shape, 2, seed=2), tiny_dataset,
                                          TrainConfig(epochs=3, batch_size=20))
        assert [r.epoch for r in history.epochs] == [1, 2, 3]
        assert all(np.isfinite(loss) for loss in history.train_losses)
        assert len(history.final.validation_label_accuracy) == 3
        assert 0.0 <= history.final.validation_subset_accuracy <= 1.0
        assert history.to_dict()["epochs"][0]["epoch"] == 1

    def test_parameters_snapped_to_float32(self, tiny_dataset):
        model, _ = train_multilabel(init_model(tiny_dataset.segment_shape, 2), tiny_dataset,
                                    TrainConfig(epochs=1, batch_size=30))
        for name in PARAM_ORDER:
            assert np.array_equal(model.params[name], model.params[name].astype(np.float32))

    def test_shape_mismatch_rejected(self, tiny_dataset):
        with pytest.raises(ValueError):
            train_multilabel(init_model((8, 11, 3), 2), tiny_dataset, TrainConfig(epochs=1))


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        model = init_model((8, 12, 3), 2, seed=4)
        model.running_mean = np.array([0.5, -0.25])
        model.fingerprint = "abc"
        path = save_model(model, tmp_path / "model.json")
        loaded = load_model(path)
        for name in PARAM_ORDER:
            assert np.array_equal(loaded.params[name], model.params[name])
        assert np.array_equal(loaded.running_mean, model.running_mean)
        assert loaded.model_id == model.model_id
        assert loaded.fingerprint == "abc"
        x = np.random.default_rng(2).normal(size=(3, 8, 12, 3))
        assert np.array_equal(model_forward(loaded, x), model_forward(model, x))

    def test_truncated_payload_rejected(self, tmp_path):
        path = save_model(init_model((8, 12, 3), 2), tmp_path / "model.json")
        payload = path.with_suffix(".f32")
        payload.write_bytes(payload.read_bytes()[:100])
        with pytest.raises(ChecksumError):
            load_model(path)

    @pytest.mark.parametrize("field", ["n_filters", "input_shape", "dropout_rate"])
    def test_manifest_missing_field_is_format_error(self, tmp_path, field):
        """A manifest that parses but lacks an architecture field names the field."""
        path = save_model(init_model((8, 12, 3), 2), tmp_path / "model.json")
        manifest = json.loads(path.read_text())
        del manifest["architecture"][field]
        path.write_text(json.dumps(manifest))
        with pytest.raises(DataFormatError) as exc_info:
            load_model(path)
        assert field in str(exc_info.value)

    def test_manifest_without_payload_fields(self, tmp_path):
        path = save_model(init_model((8, 12, 3), 2), tmp_path / "model.json")
        manifest = json.loads(path.read_text())
        del manifest["payload_sha256"]
        path.write_text(json.dumps(manifest))
        with pytest.raises(DataFormatError) as exc_info:
            load_model(path)
        assert "payload_sha256" in str(exc_info.value)

    def test_check_input_shape(self):
        assert check_input_shape((16, 251, 3)) == (16, 251, 3)
        with pytest.raises(ShapeError):
            check_input_shape((1, 251, 3))
        with pytest.raises(ShapeError):
            check_input_shape((16, 251))
