import math

import numpy as np
import pytest

from hht_forecast import lstm
from hht_forecast.lstm import CellState, TrainConfig


def _zero_params(ins=2, hid=3, out=1):
    p = lstm.init_params(ins, hid, out, 0)
    for arr in p.tensors().values():
        arr[:] = 0.0
    return p


def _zero_state(hid):
    return CellState(s=np.zeros(hid), h=np.zeros(hid))


def scalar_cell(p, x, h_prev, s_prev):
    """Plain-python per-element oracle of the gate equations."""
    hid, ins = p.hidden_size, p.input_size

    def affine(wx, wh, b, r):
        return (b[r] + sum(wx[r][c] * x[c] for c in range(ins))
                + sum(wh[r][c] * h_prev[c] for c in range(hid)))

    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    i = [sig(affine(p.w_ix, p.w_ih, p.b_i, r)) for r in range(hid)]
    f = [sig(affine(p.w_fx, p.w_fh, p.b_f, r)) for r in range(hid)]
    o = [sig(affine(p.w_ox, p.w_oh, p.b_o, r)) for r in range(hid)]
    g = [math.tanh(affine(p.w_cx, p.w_ch, p.b_c, r)) for r in range(hid)]
    s = [f[r] * s_prev[r] + i[r] * g[r] for r in range(hid)]
    h = [o[r] * math.tanh(s[r]) for r in range(hid)]
    return h, s


class TestCellStep:
    def test_all_zero_parameters(self):
        p = _zero_params()
        state, cache = lstm.cell_step(p, np.array([0.7, -0.3]), _zero_state(3))
        assert np.allclose(cache.i, 0.5) and np.allclose(cache.f, 0.5)
        assert np.allclose(cache.o, 0.5) and np.allclose(cache.g, 0.0)
        assert np.allclose(state.s, 0.0) and np.allclose(state.h, 0.0)

    def test_saturated_forget_gate_carries_state(self):
        p = _zero_params(2, 3, 1)
        p.b_f[:] = 50.0
        prev = CellState(s=np.array([0.4, -1.2, 2.0]), h=np.zeros(3))
        state, _ = lstm.cell_step(p, np.zeros(2), prev)
        assert np.allclose(state.s, prev.s, atol=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(31)
        p = lstm.init_params(3, 4, 2, init_seed=8)
        x = rng.normal(size=3)
        prev = CellState(s=rng.normal(size=4), h=np.tanh(rng.normal(size=4)))
        state, _ = lstm.cell_step(p, x, prev)
        h_ref, s_ref = scalar_cell(p, x, prev.h, prev.s)
        assert np.max(np.abs(state.h - h_ref)) < 1e-12
        assert np.max(np.abs(state.s - s_ref)) < 1e-12

    def test_gate_ranges(self):
        rng = np.random.default_rng(5)
        p = lstm.init_params(2, 6, 1, init_seed=2)
        state = _zero_state(6)
        for _ in range(20):
            state, cache = lstm.cell_step(p, rng.normal(size=2), state)
            for gate in (cache.i, cache.f, cache.o):
                assert np.all((gate > 0) & (gate < 1))
            assert np.all((state.h > -1) & (state.h < 1))

    def test_shape_and_finite_checks(self):
        p = lstm.init_params(3, 4, 1, 0)
        with pytest.raises(ValueError):
            lstm.cell_step(p, np.zeros(2), _zero_state(4))
        with pytest.raises(ValueError):
            lstm.cell_step(p, np.array([1.0, np.nan, 0.0]), _zero_state(4))


class TestForward:
    def test_length_one_equals_cell_step_plus_projection(self):
        p = lstm.init_params(2, 5, 3, init_seed=4)
        x = np.array([[0.3, -0.8]])
        outputs, final, _ = lstm.forward(p, x)
        state, _ = lstm.cell_step(p, x[0], _zero_state(5))
        assert np.allclose(outputs[0], p.w_t @ state.h, atol=1e-14)
        assert np.allclose(final.h, state.h, atol=1e-14)

    def test_zero_params_zero_outputs(self):
        p = _zero_params(2, 3, 2)
        outputs, _, _ = lstm.forward(p, np.random.default_rng(0).normal(size=(4, 2)))
        assert np.allclose(outputs, 0.0)

    def test_sequence_matches_unrolled_oracle(self):
        rng = np.random.default_rng(77)
        p = lstm.init_params(3, 4, 2, init_seed=19)
        seq = rng.normal(size=(3, 3))
        outputs, final, _ = lstm.forward(p, seq)
        h = [0.0] * 4
        s = [0.0] * 4
        for t in range(3):
            h, s = scalar_cell(p, seq[t], h, s)
            y_ref = [sum(p.w_t[r][c] * h[c] for c in range(4)) for r in range(2)]
            assert np.max(np.abs(outputs[t] - y_ref)) < 1e-12
        assert np.max(np.abs(final.h - h)) < 1e-12

    def test_empty_sequence_rejected(self):
        p = lstm.init_params(2, 3, 1, 0)
        with pytest.raises(ValueError):
            lstm.forward(p, np.zeros((0, 2)))

    def test_forward_determinism(self):
        p = lstm.init_params(2, 8, 1, init_seed=3)
        seq = np.random.default_rng(12).normal(size=(6, 2))
        a, _, _ = lstm.forward(p, seq)
        b, _, _ = lstm.forward(p, seq)
        assert np.array_equal(a, b)


class TestMseLoss:
    def test_exact_cases(self):
        assert lstm.mse_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert lstm.mse_loss([0.0], [2.0]) == 4.0

    def test_summation_oracle(self):
        rng = np.random.default_rng(6)
        p = rng.normal(size=(40, 3))
        t = rng.normal(size=(40, 3))
        ref = sum((p[i, j] - t[i, j]) ** 2 for i in range(40) for j in range(3)) / 120
        assert abs(lstm.mse_loss(p, t) - ref) < 1e-12

    def test_mismatch(self):
        with pytest.raises(ValueError):
            lstm.mse_loss([1.0, 2.0], [1.0])


def _fd_check(p, seq, target, eps=1e-5, tol=1e-4):
    def loss_fn():
        out, _, _ = lstm.forward(p, seq)
        return float(np.mean((out - target) ** 2))

    out, _, caches = lstm.forward(p, seq)
    grads = lstm.backward(p, caches, 2.0 * (out - target) / out.size)
    worst = 0.0
    for name, arr in p.tensors().items():
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = arr[ix]
            arr[ix] = orig + eps
            up = loss_fn()
            arr[ix] = orig - eps
            down = loss_fn()
            arr[ix] = orig
            fd = (up - down) / (2 * eps)
            a = grads[name][ix]
            rel = abs(a - fd) / max(abs(a) + abs(fd), 1e-6)
            worst = max(worst, rel)
    return worst


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        p = lstm.init_params(3, 4, 2, init_seed=1)
        seq = np.random.default_rng(2).normal(size=(5, 3))
        _, _, caches = lstm.forward(p, seq)
        grads = lstm.backward(p, caches, np.zeros((5, 2)))
        assert all(np.all(g == 0) for g in grads.values())

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(123)
        p = lstm.init_params(3, 4, 1, init_seed=55)
        seq = rng.normal(size=(5, 3))
        target = rng.normal(size=(5, 1))
        assert _fd_check(p, seq, target) < 1e-4

    def test_projection_gradient_hand_derivation(self):
        # dL/dW_t = sum_t dy_t (outer) h_t, straight from the caches.
        rng = np.random.default_rng(3)
        p = lstm.init_params(2, 3, 2, init_seed=9)
        seq = rng.normal(size=(4, 2))
        _, _, caches = lstm.forward(p, seq)
        d_out = rng.normal(size=(4, 2))
        grads = lstm.backward(p, caches, d_out)
        ref = np.zeros_like(p.w_t)
        for t, cache in enumerate(caches):
            ref += np.outer(d_out[t], cache.h[0])
        assert np.max(np.abs(grads["w_t"] - ref)) < 1e-12


class TestRmsprop:
    def test_zero_gradient_leaves_params_and_decays_accumulator(self):
        p = lstm.init_params(2, 3, 1, init_seed=7)
        before = {k: v.copy() for k, v in p.tensors().items()}
        state = lstm.init_rmsprop_state(p)
        for a in state.values():
            a[:] = 0.04
        grads = {k: np.zeros_like(v) for k, v in p.tensors().items()}
        lstm.rmsprop_step(p, grads, state, TrainConfig())
        for name, arr in p.tensors().items():
            assert np.array_equal(arr, before[name])
            assert np.allclose(state[name], 0.036)

    def test_first_step_magnitude(self):
        # g=1, a0=0, rho=0.9, lr=0.01 -> update ~ -0.01/sqrt(0.1)
        p = _zero_params(1, 1, 1)
        state = lstm.init_rmsprop_state(p)
        grads = {k: np.ones_like(v) for k, v in p.tensors().items()}
        cfg = TrainConfig(learning_rate=0.01, rmsprop_decay=0.9, rmsprop_epsilon=1e-8)
        lstm.rmsprop_step(p, grads, state, cfg)
        assert p.w_t[0, 0] == pytest.approx(-0.03162, abs=1e-5)

    def test_quadratic_loss_monotone_decrease(self):
        # Convex oracle: L = (w - 3)^2 on the scalar projection weight.
        p = _zero_params(1, 1, 1)
        state = lstm.init_rmsprop_state(p)
        cfg = TrainConfig(learning_rate=0.01)
        losses = []
        for _ in range(100):
            w = p.w_t[0, 0]
            losses.append((w - 3.0) ** 2)
            grads = {k: np.zeros_like(v) for k, v in p.tensors().items()}
            grads["w_t"][0, 0] = 2.0 * (w - 3.0)
            lstm.rmsprop_step(p, grads, state, cfg)
        assert all(a >= b for a, b in zip(losses, losses[1:]))
        assert losses[-1] < losses[0]

    def test_non_finite_gradient_rejected(self):
        p = _zero_params()
        grads = {k: np.zeros_like(v) for k, v in p.tensors().items()}
        grads["b_i"][0] = np.inf
        with pytest.raises(ValueError, match="b_i"):
            lstm.rmsprop_step(p, grads, lstm.init_rmsprop_state(p), TrainConfig())


def _sine_windows(n_pairs=32, lookback=3, period=10.0):
    t = np.arange(n_pairs + lookback)
    s = np.sin(2 * np.pi * t / period)
    x = np.stack([s[i:i + lookback] for i in range(n_pairs)])[:, :, None]
    y = s[lookback:lookback + n_pairs][:, None]
    return x, y


class TestTrain:
    def test_memorizes_fixed_pairs(self):
        x, y = _sine_windows()
        params = lstm.init_params(1, 8, 1, init_seed=1)
        cfg = TrainConfig(epochs=500, batch_size=4, shuffle_seed=9, early_stop_patience=0)
        best, history = lstm.train(params, (x, y), (x, y), cfg)
        assert min(h["val_loss"] for h in history) < 1e-4
        assert lstm.mse_loss(lstm.predict_last(best, x), y) < 1e-4

    def test_identical_pairs_collapse_fast(self):
        rng = np.random.default_rng(2)
        x = np.tile(rng.uniform(-1, 1, size=(1, 3, 2)), (16, 1, 1))
        y = np.full((16, 1), 0.37)
        params = lstm.init_params(2, 8, 1, init_seed=1)
        cfg = TrainConfig(epochs=200, batch_size=4, shuffle_seed=3, early_stop_patience=0)
        _, history = lstm.train(params, (x, y), (x, y), cfg)
        assert history[-1]["train_loss"] < 1e-4

    def test_zero_epochs_is_identity(self):
        x, y = _sine_windows(8)
        params = lstm.init_params(1, 4, 1, init_seed=5)
        before = {k: v.copy() for k, v in params.tensors().items()}
        out, history = lstm.train(params, (x, y), (x, y), TrainConfig(epochs=0))
        assert history == []
        assert all(np.array_equal(out.tensors()[k], before[k]) for k in before)

    def test_seeded_determinism(self):
        x, y = _sine_windows(16)
        cfg = TrainConfig(epochs=20, batch_size=4, shuffle_seed=11, early_stop_patience=0)
        a, ha = lstm.train(lstm.init_params(1, 6, 1, 3), (x, y), (x, y), cfg)
        b, hb = lstm.train(lstm.init_params(1, 6, 1, 3), (x, y), (x, y), cfg)
        assert ha == hb
        assert all(np.array_equal(a.tensors()[k], b.tensors()[k]) for k in a.tensors())

    def test_zero_learning_rate_keeps_params_bit_identical(self):
        x, y = _sine_windows(8)
        params = lstm.init_params(1, 4, 1, init_seed=5)
        before = {k: v.copy() for k, v in params.tensors().items()}
        out, history = lstm.train(
            params, (x, y), (x, y),
            TrainConfig(learning_rate=0.0, epochs=3, early_stop_patience=0))
        assert len(history) == 3
        assert all(np.array_equal(out.tensors()[k], before[k]) for k in before)

    def test_early_stopping_stops_on_plateau(self):
        x, y = _sine_windows(16)
        params = lstm.init_params(1, 4, 1, init_seed=5)
        # learning_rate 0: no progress, so validation stalls immediately.
        cfg = TrainConfig(learning_rate=0.0, epochs=50, early_stop_patience=3)
        _, history = lstm.train(params, (x, y), (x, y), cfg)
        assert len(history) == 4  # best at epoch 0, then 3 stagnant epochs

    def test_non_finite_loss_reports_location(self):
        x, y = _sine_windows(8)
        y = y.copy()
        y[0] = np.inf
        params = lstm.init_params(1, 4, 1, init_seed=5)
        with pytest.raises(ValueError, match="epoch 0"):
            lstm.train(params, (x, y), (x, y),
                       TrainConfig(epochs=1, batch_size=8, early_stop_patience=0))

    def test_input_mutation_avoided(self):
        x, y = _sine_windows(8)
        params = lstm.init_params(1, 4, 1, init_seed=5)
        before = {k: v.copy() for k, v in params.tensors().items()}
        lstm.train(params, (x, y), (x, y), TrainConfig(epochs=2, early_stop_patience=0))
        assert all(np.array_equal(params.tensors()[k], before[k]) for k in before)


class TestInitParams:
    def test_seed_determinism(self):
        a = lstm.init_params(3, 5, 2, init_seed=42)
        b = lstm.init_params(3, 5, 2, init_seed=42)
        assert all(np.array_equal(a.tensors()[k], b.tensors()[k]) for k in a.tensors())

    def test_weight_range(self):
        p = lstm.init_params(4, 9, 2, init_seed=0)
        k = 1.0 / np.sqrt(9)
        for name, arr in p.tensors().items():
            if name.startswith("w"):
                assert np.all(np.abs(arr) <= k)

    def test_bias_values(self):
        p = lstm.init_params(2, 6, 1, init_seed=1)
        assert np.all(p.b_f == 1.0)
        assert np.all(p.b_i == 0.0) and np.all(p.b_o == 0.0) and np.all(p.b_c == 0.0)


class TestParamsSerialization:
    def test_round_trip_exact(self):
        p = lstm.init_params(3, 4, 2, init_seed=13)
        import json
        blob = json.loads(json.dumps(lstm.params_to_dict(p)))
        q = lstm.params_from_dict(blob)
        assert all(np.array_equal(p.tensors()[k], q.tensors()[k]) for k in p.tensors())

    def test_dim_mismatch_rejected(self):
        p = lstm.init_params(3, 4, 2, init_seed=13)
        blob = lstm.params_to_dict(p)
        blob["dims"]["hidden_size"] = 8
        with pytest.raises(ValueError):
            lstm.params_from_dict(blob)
