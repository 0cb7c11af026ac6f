"""Single-layer LSTM regressor built on numpy.

Gates follow the standard formulation: input, forget and output gates are
sigmoids of affine maps of (x_t, h_{t-1}); a tanh candidate feeds the cell
state s_t = f*s_{t-1} + i*g; the hidden state is h_t = o*tanh(s_t) and a
linear projection produces the per-step output. Training is full
backpropagation through time with an rmsprop update.

Internally all passes are batched over the leading axis; the public
``cell_step``/``forward`` operate on single sequences.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

_GATE_TENSORS = (
    "w_ix", "w_ih", "b_i",
    "w_fx", "w_fh", "b_f",
    "w_ox", "w_oh", "b_o",
    "w_cx", "w_ch", "b_c",
    "w_t",
)


@dataclass
class LstmParams:
    input_size: int
    hidden_size: int
    output_size: int
    w_ix: np.ndarray
    w_ih: np.ndarray
    b_i: np.ndarray
    w_fx: np.ndarray
    w_fh: np.ndarray
    b_f: np.ndarray
    w_ox: np.ndarray
    w_oh: np.ndarray
    b_o: np.ndarray
    w_cx: np.ndarray
    w_ch: np.ndarray
    b_c: np.ndarray
    w_t: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _GATE_TENSORS}

    def validate(self) -> None:
        ins, hid, out = self.input_size, self.hidden_size, self.output_size
        expected = {
            "w_ix": (hid, ins), "w_ih": (hid, hid), "b_i": (hid,),
            "w_fx": (hid, ins), "w_fh": (hid, hid), "b_f": (hid,),
            "w_ox": (hid, ins), "w_oh": (hid, hid), "b_o": (hid,),
            "w_cx": (hid, ins), "w_ch": (hid, hid), "b_c": (hid,),
            "w_t": (out, hid),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"{name} has shape {actual}, expected {shape}")

    def copy(self) -> "LstmParams":
        return LstmParams(
            self.input_size, self.hidden_size, self.output_size,
            **{name: arr.copy() for name, arr in self.tensors().items()},
        )


@dataclass
class CellState:
    s: np.ndarray  # cell state
    h: np.ndarray  # hidden state


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    epochs: int = 120
    batch_size: int = 32
    shuffle_seed: int = 0
    early_stop_patience: int = 25  # 0 disables early stopping
    clip_norm: float | None = None  # optional global gradient-norm cap

    def __post_init__(self):
        # 0 is allowed so a no-op training run stays expressible.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0.0 < self.rmsprop_decay < 1.0:
            raise ValueError("rmsprop_decay must lie in (0, 1)")


def init_params(input_size: int, hidden_size: int, output_size: int,
                init_seed: int = 0) -> LstmParams:
    """Uniform init in [-k, k] with k = 1/sqrt(hidden); biases zero except the
    forget-gate bias, which starts at 1 so early training retains state."""
    if min(input_size, hidden_size, output_size) < 1:
        raise ValueError("all dimensions must be positive")
    rng = np.random.default_rng(init_seed)
    k = 1.0 / np.sqrt(hidden_size)

    def w(rows, cols):
        return rng.uniform(-k, k, size=(rows, cols))

    params = LstmParams(
        input_size, hidden_size, output_size,
        w_ix=w(hidden_size, input_size), w_ih=w(hidden_size, hidden_size),
        b_i=np.zeros(hidden_size),
        w_fx=w(hidden_size, input_size), w_fh=w(hidden_size, hidden_size),
        b_f=np.ones(hidden_size),
        w_ox=w(hidden_size, input_size), w_oh=w(hidden_size, hidden_size),
        b_o=np.zeros(hidden_size),
        w_cx=w(hidden_size, input_size), w_ch=w(hidden_size, hidden_size),
        b_c=np.zeros(hidden_size),
        w_t=w(output_size, hidden_size),
    )
    params.validate()
    return params


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    s_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tanh_s: np.ndarray
    h: np.ndarray


def _step_batch(p: LstmParams, x: np.ndarray, h_prev: np.ndarray,
                s_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray, StepCache]:
    i = _sigmoid(x @ p.w_ix.T + h_prev @ p.w_ih.T + p.b_i)
    f = _sigmoid(x @ p.w_fx.T + h_prev @ p.w_fh.T + p.b_f)
    o = _sigmoid(x @ p.w_ox.T + h_prev @ p.w_oh.T + p.b_o)
    g = np.tanh(x @ p.w_cx.T + h_prev @ p.w_ch.T + p.b_c)
    s = f * s_prev + i * g
    tanh_s = np.tanh(s)
    h = o * tanh_s
    return h, s, StepCache(x, h_prev, s_prev, i, f, o, g, tanh_s, h)


def _forward_batch(p: LstmParams, x: np.ndarray,
                   state: CellState | None = None):
    """x: (batch, steps, input) -> outputs (batch, steps, output), final
    (h, s), caches."""
    batch, steps, _ = x.shape
    if state is None:
        h = np.zeros((batch, p.hidden_size))
        s = np.zeros((batch, p.hidden_size))
    else:
        h = np.broadcast_to(state.h, (batch, p.hidden_size)).copy()
        s = np.broadcast_to(state.s, (batch, p.hidden_size)).copy()
    outputs = np.empty((batch, steps, p.output_size))
    caches: list[StepCache] = []
    for t in range(steps):
        h, s, cache = _step_batch(p, x[:, t, :], h, s)
        caches.append(cache)
        outputs[:, t, :] = h @ p.w_t.T
    return outputs, (h, s), caches


def _backward_batch(p: LstmParams, caches: list[StepCache],
                    d_outputs: np.ndarray) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients of Σ d_outputs·outputs w.r.t. every
    parameter tensor."""
    grads = {name: np.zeros_like(arr) for name, arr in p.tensors().items()}
    batch = caches[0].x.shape[0]
    dh_next = np.zeros((batch, p.hidden_size))
    ds_next = np.zeros((batch, p.hidden_size))
    for t in range(len(caches) - 1, -1, -1):
        c = caches[t]
        dy = d_outputs[:, t, :]
        grads["w_t"] += dy.T @ c.h
        dh = dy @ p.w_t + dh_next
        do = dh * c.tanh_s
        ds = dh * c.o * (1.0 - c.tanh_s**2) + ds_next
        di = ds * c.g
        dg = ds * c.i
        df = ds * c.s_prev
        ds_next = ds * c.f

        da_i = di * c.i * (1.0 - c.i)
        da_f = df * c.f * (1.0 - c.f)
        da_o = do * c.o * (1.0 - c.o)
        da_g = dg * (1.0 - c.g**2)

        grads["w_ix"] += da_i.T @ c.x
        grads["w_ih"] += da_i.T @ c.h_prev
        grads["b_i"] += da_i.sum(axis=0)
        grads["w_fx"] += da_f.T @ c.x
        grads["w_fh"] += da_f.T @ c.h_prev
        grads["b_f"] += da_f.sum(axis=0)
        grads["w_ox"] += da_o.T @ c.x
        grads["w_oh"] += da_o.T @ c.h_prev
        grads["b_o"] += da_o.sum(axis=0)
        grads["w_cx"] += da_g.T @ c.x
        grads["w_ch"] += da_g.T @ c.h_prev
        grads["b_c"] += da_g.sum(axis=0)

        dh_next = da_i @ p.w_ih + da_f @ p.w_fh + da_o @ p.w_oh + da_g @ p.w_ch
    return grads


def cell_step(params: LstmParams, x_t, prev: CellState) -> tuple[CellState, StepCache]:
    """Advance one time step for a single input vector."""
    x = np.asarray(x_t, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != params.input_size:
        raise ValueError(f"input has size {x.shape[1]}, expected {params.input_size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    h, s, cache = _step_batch(params, x, prev.h.reshape(1, -1), prev.s.reshape(1, -1))
    return CellState(s=s[0], h=h[0]), cache


def forward(params: LstmParams, sequence, initial: CellState | None = None):
    """Run a single sequence; returns per-step projected outputs, the final
    cell state and the caches needed by :func:`backward`."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ValueError("sequence must be a non-empty (steps, input_size) array")
    state = initial if initial is not None else CellState(
        s=np.zeros(params.hidden_size), h=np.zeros(params.hidden_size))
    outputs, (h, s), caches = _forward_batch(params, seq[None, :, :], state)
    return outputs[0], CellState(s=s[0], h=h[0]), caches


def backward(params: LstmParams, caches: list[StepCache], d_outputs) -> dict[str, np.ndarray]:
    """Gradients w.r.t. all parameter tensors for a single sequence, given
    upstream gradients of each per-step output."""
    d = np.asarray(d_outputs, dtype=np.float64)
    if d.ndim == 2:
        d = d[None, :, :]
    if len(caches) != d.shape[1]:
        raise ValueError("caches and upstream gradients disagree on step count")
    return _backward_batch(params, caches, d)


def mse_loss(predictions, targets) -> float:
    """Mean squared error over samples, averaged over output dimensions."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape} vs targets {t.shape}")
    if p.size == 0:
        raise ValueError("empty inputs")
    return float(np.mean((p - t) ** 2))


def init_rmsprop_state(params: LstmParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.tensors().items()}


def rmsprop_step(params: LstmParams, grads: dict[str, np.ndarray],
                 opt_state: dict[str, np.ndarray], config: TrainConfig):
    """In-place rmsprop update: a <- rho*a + (1-rho)*g^2,
    p <- p - lr*g/(sqrt(a)+eps)."""
    rho = config.rmsprop_decay
    for name, arr in params.tensors().items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in {name}")
        a = opt_state[name]
        a *= rho
        a += (1.0 - rho) * g * g
        arr -= config.learning_rate * g / (np.sqrt(a) + config.rmsprop_epsilon)
    return params, opt_state


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor


def _as_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(dataset, "inputs"):
        x, y = dataset.inputs, dataset.targets
    else:
        x, y = dataset
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if x.ndim != 3 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("dataset must pair a non-empty (m, steps, input) array with m targets")
    return x, y


def predict_last(params: LstmParams, inputs) -> np.ndarray:
    """Final-step outputs for a batch of windows: (m, output_size)."""
    x = np.asarray(inputs, dtype=np.float64)
    outputs, _, _ = _forward_batch(params, x)
    return outputs[:, -1, :]


def train(params: LstmParams, dataset, val, config: TrainConfig
          ) -> tuple[LstmParams, list[dict[str, float]]]:
    """Mini-batch training loop with seeded shuffling and rmsprop.

    Only the final-step output of each window contributes to the loss. The
    returned parameters are the snapshot with the best validation loss;
    training stops early after ``early_stop_patience`` epochs without
    improvement.
    """
    if config.epochs == 0:
        return params, []
    x_train, y_train = _as_arrays(dataset)
    x_val, y_val = _as_arrays(val)
    if y_train.shape[1] != params.output_size:
        raise ValueError(
            f"targets have {y_train.shape[1]} dims, model outputs {params.output_size}")

    work = params.copy()
    opt_state = init_rmsprop_state(work)
    rng = np.random.default_rng(config.shuffle_seed)
    m = x_train.shape[0]
    out_dims = y_train.shape[1]
    steps = x_train.shape[1]

    best_params = work.copy()
    best_val = np.inf
    stagnant = 0
    history: list[dict[str, float]] = []

    for epoch in range(config.epochs):
        perm = rng.permutation(m)
        total_sq = 0.0
        for batch_no, start in enumerate(range(0, m, config.batch_size)):
            idx = perm[start:start + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            outputs, _, caches = _forward_batch(work, xb)
            err = outputs[:, -1, :] - yb
            batch_sq = float(np.sum(err * err))
            if not np.isfinite(batch_sq):
                raise ValueError(f"non-finite loss at epoch {epoch}, batch {batch_no}")
            total_sq += batch_sq

            d_outputs = np.zeros((len(idx), steps, out_dims))
            d_outputs[:, -1, :] = 2.0 * err / (len(idx) * out_dims)
            grads = _backward_batch(work, caches, d_outputs)
            if config.clip_norm is not None:
                _clip_gradients(grads, config.clip_norm)
            rmsprop_step(work, grads, opt_state, config)

        train_loss = total_sq / (m * out_dims)
        val_loss = mse_loss(predict_last(work, x_val), y_val)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})

        if val_loss < best_val:
            best_val = val_loss
            best_params = work.copy()
            stagnant = 0
        else:
            stagnant += 1
            if config.early_stop_patience > 0 and stagnant >= config.early_stop_patience:
                break
    return best_params, history


def params_to_dict(params: LstmParams) -> dict:
    """JSON-ready container: dims plus row-major float64 tensors."""
    return {
        "dims": {
            "input_size": params.input_size,
            "hidden_size": params.hidden_size,
            "output_size": params.output_size,
        },
        "tensors": {name: arr.tolist() for name, arr in params.tensors().items()},
    }


def params_from_dict(blob: dict) -> LstmParams:
    dims = blob["dims"]
    tensors = {name: np.asarray(blob["tensors"][name], dtype=np.float64)
               for name in _GATE_TENSORS}
    params = LstmParams(
        input_size=int(dims["input_size"]),
        hidden_size=int(dims["hidden_size"]),
        output_size=int(dims["output_size"]),
        **tensors,
    )
    params.validate()  # rejects any tensor/dim mismatch
    return params
