import numpy as np
import pytest

from oodlab.errors import CheckpointError, DivergenceError, ShapeError, StateError
from oodlab.model import (
    MlpModel,
    backward,
    forward,
    forward_cached,
    init_mlp,
    init_sgd_state,
    load_checkpoint,
    lr_at_epoch,
    save_checkpoint,
    sgd_step,
)
from oodlab.numeric import make_rng


def small_model(seed=0, dims=(3, 5, 4)):
    return init_mlp(dims, make_rng(seed))


def naive_forward(model, x):
    """Independent pure-python reference for the layer recursion."""
    h = [list(row) for row in x]
    for layer in range(model.n_layers):
        w, b = model.weights[layer], model.biases[layer]
        out = []
        for row in h:
            vals = []
            for j in range(w.shape[1]):
                acc = b[j]
                for i, v in enumerate(row):
                    acc += v * w[i, j]
                if layer < model.n_layers - 1:
                    acc = max(acc, 0.0)
                vals.append(acc)
            out.append(vals)
        h = out
    return np.asarray(h)


class TestForward:
    def test_zero_weight_model_gives_zero_logits(self):
        m = small_model()
        m.weights = [np.zeros_like(w) for w in m.weights]
        m.biases = [np.zeros_like(b) for b in m.biases]
        logits, _ = forward(m, make_rng(1).standard_normal((4, 3)))
        np.testing.assert_array_equal(logits, np.zeros((4, 4)))

    def test_single_layer_identity_pads_input(self):
        w = np.zeros((2, 4))
        w[0, 0] = w[1, 1] = 1.0
        m = MlpModel(layer_dims=(2, 4), weights=[w], biases=[np.zeros(4)])
        x = make_rng(2).standard_normal((5, 2))
        logits, penultimate = forward(m, x)
        np.testing.assert_array_equal(logits[:, :2], x)
        np.testing.assert_array_equal(logits[:, 2:], np.zeros((5, 2)))
        np.testing.assert_array_equal(penultimate, x)

    def test_matches_naive_reference(self):
        m = small_model(seed=3, dims=(4, 6, 5, 3))
        x = make_rng(4).standard_normal((7, 4))
        logits, _ = forward(m, x)
        np.testing.assert_allclose(logits, naive_forward(m, x), atol=1e-12)

    def test_seeded_model_pinned_input(self):
        m = small_model(seed=11, dims=(2, 3, 2))
        logits, _ = forward(m, np.array([[0.5, -1.5]]))
        np.testing.assert_allclose(logits, naive_forward(m, [[0.5, -1.5]]), atol=1e-12)

    def test_deterministic(self):
        m = small_model(seed=5)
        x = make_rng(6).standard_normal((8, 3))
        a, _ = forward(m, x)
        b, _ = forward(m, x)
        np.testing.assert_array_equal(a, b)

    def test_penultimate_reconstructs_logits(self):
        m = small_model(seed=7, dims=(3, 8, 8, 4))
        x = make_rng(8).standard_normal((6, 3))
        logits, penultimate = forward(m, x)
        rebuilt = penultimate @ m.weights[-1] + m.biases[-1]
        np.testing.assert_allclose(rebuilt, logits, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            forward(small_model(), np.ones((2, 5)))


def loss_and_grad_through(model, x, dl_fn):
    logits, _, cache = forward_cached(model, x)
    value, dlogits = dl_fn(logits)
    return value, backward(model, cache, dlogits)


def sum_squares_loss(logits):
    return float((logits ** 2).sum()), 2.0 * logits


class TestBackward:
    def test_zero_loss_gradient_gives_zero_param_gradients(self):
        m = small_model()
        _, _, cache = forward_cached(m, make_rng(1).standard_normal((4, 3)))
        grads = backward(m, cache, np.zeros((4, 4)))
        for dw, db in grads:
            np.testing.assert_array_equal(dw, np.zeros_like(dw))
            np.testing.assert_array_equal(db, np.zeros_like(db))

    def test_missing_cache_is_state_error(self):
        with pytest.raises(StateError):
            backward(small_model(), None, np.zeros((1, 4)))

    def test_dead_relu_blocks_gradient(self):
        # One hidden unit with a strongly negative pre-activation: no gradient
        # may flow into its incoming weights.
        m = small_model(seed=9, dims=(2, 2, 1))
        m.biases[0] = np.array([-100.0, 1.0])
        x = np.array([[0.3, -0.2]])
        _, _, cache = forward_cached(m, x)
        grads = backward(m, cache, np.ones((1, 1)))
        dw0 = grads[0][0]
        np.testing.assert_array_equal(dw0[:, 0], np.zeros(2))
        assert np.any(dw0[:, 1] != 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_central_finite_differences(self, seed):
        rng = make_rng(seed)
        dims = (int(rng.integers(2, 8)), int(rng.integers(2, 16)), int(rng.integers(2, 5)))
        m = init_mlp(dims, rng)
        x = rng.standard_normal((int(rng.integers(1, 8)), dims[0]))
        _, grads = loss_and_grad_through(m, x, sum_squares_loss)
        step = 1e-5
        for layer in range(m.n_layers):
            for arrs, g in ((m.weights, grads[layer][0]), (m.biases, grads[layer][1])):
                flat = arrs[layer].ravel()
                fd = np.zeros_like(flat)
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + step
                    up, _ = loss_and_grad_through(m, x, sum_squares_loss)
                    flat[i] = orig - step
                    down, _ = loss_and_grad_through(m, x, sum_squares_loss)
                    flat[i] = orig
                    fd[i] = (up - down) / (2 * step)
                denom = max(np.linalg.norm(g.ravel()), np.linalg.norm(fd), 1e-12)
                assert np.linalg.norm(g.ravel() - fd) / denom < 1e-4


class TestSgd:
    def test_zero_gradient_zero_decay_is_noop(self):
        m = small_model()
        state = init_sgd_state(m, 0.1)
        zeros = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(m.weights, m.biases)]
        updated, _ = sgd_step(m, zeros, state)
        for a, b in zip(updated.weights, m.weights):
            np.testing.assert_array_equal(a, b)

    def test_plain_sgd_step(self):
        m = small_model()
        state = init_sgd_state(m, 0.1, momentum=0.0, weight_decay=0.0)
        grads = [(np.ones_like(w), np.ones_like(b)) for w, b in zip(m.weights, m.biases)]
        updated, _ = sgd_step(m, grads, state)
        for a, b in zip(updated.weights, m.weights):
            np.testing.assert_allclose(a, b - 0.1, atol=1e-15)

    def test_two_momentum_steps_on_constant_gradient(self):
        # v1 = g, v2 = 0.9 g + g = 1.9 g, so the cumulative delta is 2.9 lr g.
        m = small_model()
        state = init_sgd_state(m, 0.1, momentum=0.9, weight_decay=0.0)
        grads = [(np.ones_like(w), np.ones_like(b)) for w, b in zip(m.weights, m.biases)]
        one, state = sgd_step(m, grads, state)
        two, _ = sgd_step(one, grads, state)
        for a, b in zip(two.weights, m.weights):
            np.testing.assert_allclose(a, b - 0.1 * 2.9, atol=1e-12)

    def test_lr_zero_leaves_parameters_unchanged(self):
        m = small_model(seed=13)
        state = init_sgd_state(m, 0.1, momentum=0.9, weight_decay=1e-4)
        grads = [(np.full_like(w, 3.0), np.full_like(b, -2.0))
                 for w, b in zip(m.weights, m.biases)]
        updated, _ = sgd_step(m, grads, state, lr=0.0)
        for a, b in zip(updated.weights + updated.biases, m.weights + m.biases):
            np.testing.assert_array_equal(a, b)

    def test_non_finite_gradient_is_divergence(self):
        m = small_model()
        state = init_sgd_state(m, 0.1)
        grads = [(np.full_like(w, np.nan), np.zeros_like(b))
                 for w, b in zip(m.weights, m.biases)]
        with pytest.raises(DivergenceError):
            sgd_step(m, grads, state)


class TestLrSchedule:
    def test_paper_schedule_values(self):
        state = init_sgd_state(small_model(), 0.1, milestones=(75, 90))
        assert lr_at_epoch(state, 0) == pytest.approx(0.1)
        assert lr_at_epoch(state, 74) == pytest.approx(0.1)
        assert lr_at_epoch(state, 75) == pytest.approx(0.01)
        assert lr_at_epoch(state, 89) == pytest.approx(0.01)
        assert lr_at_epoch(state, 90) == pytest.approx(0.001)
        assert lr_at_epoch(state, 200) == pytest.approx(0.001)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        m = small_model(seed=21, dims=(4, 7, 3))
        state = init_sgd_state(m, 0.05, momentum=0.9, weight_decay=1e-4)
        state.velocities = [(make_rng(1).standard_normal(vw.shape), vb + 0.5)
                            for vw, vb in state.velocities]
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, m, state, epoch=3, seed=42, config_hash=777)
        ckpt = load_checkpoint(path)
        assert ckpt.layer_dims == m.layer_dims
        assert ckpt.epoch == 3 and ckpt.seed == 42 and ckpt.config_hash == 777
        for a, b in zip(ckpt.weights, m.weights):
            np.testing.assert_array_equal(a, b)
        for (avw, avb), (bvw, bvb) in zip(ckpt.velocities, state.velocities):
            np.testing.assert_array_equal(avw, bvw)
            np.testing.assert_array_equal(avb, bvb)

    def test_truncated_file_is_rejected(self, tmp_path):
        m = small_model()
        state = init_sgd_state(m, 0.1)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, m, state, epoch=0, seed=0)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_bad_magic_is_rejected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"DOSCKPT9" + b"\x00" * 64)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_trailing_garbage_is_rejected(self, tmp_path):
        m = small_model()
        state = init_sgd_state(m, 0.1)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, m, state, epoch=0, seed=0)
        path.write_bytes(path.read_bytes() + b"\x01")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
