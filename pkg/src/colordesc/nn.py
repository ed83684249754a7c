"""Minimal numeric kernel: fused peephole LSTM, dense/softmax ops,
inverted dropout, Adagrad, initializers, and hand-derived gradients.

Parameters live in flat ``dict[str, np.ndarray]`` maps so the optimizer,
checkpointing, and finite-difference verification can treat every model
uniformly. float32 is the working precision; float64 is available for
gradient checks (``TrainingConfig.dtype``).

LSTM formulation (Graves 2013, peephole variant), gates fused into
single matrices with column blocks ordered [input, forget, candidate,
output]:

    a  = x W_x + h_prev W_h + b
    i  = sigmoid(a_i + w_ci * c_prev)
    f  = sigmoid(a_f + w_cf * c_prev)
    c  = f * c_prev + i * tanh(a_g)
    o  = sigmoid(a_o + w_co * c)
    h  = o * tanh(c)
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, TrainingDivergence

ADAGRAD_EPS = 1e-8

Params = dict  # str -> np.ndarray


@dataclass
class TrainingConfig:
    """Hyperparameters for model construction and training."""

    learning_rate: float = 0.1
    dropout: float = 0.2
    hidden_size: int = 20
    embedding_dim: int = 20
    bucket_embedding_dim: int = 10
    atomic_hidden: int = 20
    embedding_sigma: float = 0.01
    lstm_sigma: float = 0.1
    forget_bias: float = 5.0
    batch_size: int = 128
    max_epochs: int = 10
    patience: int = 2
    evals_per_epoch: int = 2
    seed: int = 0
    conditioning: str = "every-step"  # or "init-state"
    dtype: str = "float32"
    adagrad_eps: float = ADAGRAD_EPS

    def validate(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must be in [0, 1)")
        for name in ("hidden_size", "embedding_dim", "bucket_embedding_dim",
                     "atomic_hidden", "batch_size", "max_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.conditioning not in ("every-step", "init-state"):
            raise ConfigError(f"unknown conditioning mode {self.conditioning!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        return self

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known}).validate()


# ---------------------------------------------------------------------------
# elementwise ops

def sigmoid(x: np.ndarray) -> np.ndarray:
    # exp overflow for very negative inputs saturates to the correct 0.0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def dense_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """x W + b for x of shape (..., fan_in)."""
    return x @ W + b


def cross_entropy(p: np.ndarray, target_id: int) -> float:
    """Negative log probability of the target under distribution p."""
    return float(-np.log(p[target_id]))


def dropout_apply(x, rate, rng=None, training=False, mask=None):
    """Inverted dropout: zero units with probability ``rate`` and scale
    survivors by 1/(1-rate) in training mode; identity at inference."""
    if not training or rate == 0.0:
        return x
    if mask is None:
        mask = dropout_mask(rng, x.shape, rate, x.dtype)
    return x * mask


def dropout_mask(rng, shape, rate, dtype):
    if rate == 0.0:
        return np.ones(shape, dtype=dtype)
    keep = (rng.random(shape) >= rate).astype(dtype)
    keep /= np.asarray(1.0 - rate, dtype=dtype)
    return keep


# ---------------------------------------------------------------------------
# initializers

def glorot_uniform(rng, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def normal_init(rng, shape, sigma: float, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * sigma).astype(dtype)


def init_lstm_params(rng, input_dim: int, hidden: int, cfg: TrainingConfig) -> Params:
    """LSTM weights ~ N(0, lstm_sigma^2), biases 0 except forget bias."""
    dt = cfg.np_dtype
    H = hidden
    b = np.zeros(4 * H, dtype=dt)
    b[H : 2 * H] = cfg.forget_bias
    return {
        "lstm.W_x": normal_init(rng, (input_dim, 4 * H), cfg.lstm_sigma, dt),
        "lstm.W_h": normal_init(rng, (H, 4 * H), cfg.lstm_sigma, dt),
        "lstm.w_ci": normal_init(rng, (H,), cfg.lstm_sigma, dt),
        "lstm.w_cf": normal_init(rng, (H,), cfg.lstm_sigma, dt),
        "lstm.w_co": normal_init(rng, (H,), cfg.lstm_sigma, dt),
        "lstm.b": b,
    }


# ---------------------------------------------------------------------------
# LSTM step

def lstm_step(params: Params, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    """One peephole LSTM step for a batch. Returns (h, c)."""
    h, c, _ = _lstm_step_full(params, x, h_prev, c_prev)
    return h, c


def _lstm_step_full(params, x, h_prev, c_prev, a=None):
    """Step returning the intermediate values backprop needs.

    ``a`` may carry the precomputed x W_x contribution (plus bias)."""
    H = h_prev.shape[-1]
    if a is None:
        a = x @ params["lstm.W_x"] + params["lstm.b"]
    a = a + h_prev @ params["lstm.W_h"]
    i = sigmoid(a[..., :H] + c_prev * params["lstm.w_ci"])
    f = sigmoid(a[..., H : 2 * H] + c_prev * params["lstm.w_cf"])
    g = np.tanh(a[..., 2 * H : 3 * H])
    c = f * c_prev + i * g
    o = sigmoid(a[..., 3 * H :] + c * params["lstm.w_co"])
    tc = np.tanh(c)
    h = o * tc
    return h, c, (i, f, g, o, tc)


# ---------------------------------------------------------------------------
# Adagrad

def adagrad_update(param: np.ndarray, grad: np.ndarray, accum: np.ndarray,
                   lr: float, eps: float = ADAGRAD_EPS) -> None:
    """In place: accum += grad^2; param -= lr * grad / (sqrt(accum) + eps)."""
    accum += grad * grad
    param -= lr * grad / (np.sqrt(accum) + eps)


class Adagrad:
    """Per-parameter squared-gradient accumulators, initialized to zero."""

    def __init__(self, params: Params, lr: float, eps: float = ADAGRAD_EPS):
        self.lr = lr
        self.eps = eps
        self.accum = {k: np.zeros_like(v) for k, v in params.items()}

    def update(self, params: Params, grads: Params) -> None:
        for name, g in grads.items():
            adagrad_update(params[name], g, self.accum[name], self.lr, self.eps)


# ---------------------------------------------------------------------------
# conditional sequence decoder graph
#
# Step input is [color features ; previous-token embedding] in every-step
# mode, or the embedding alone in init-state mode (where a learned linear
# map of the features initializes h0 and c0). Output layer + softmax over
# the full vocabulary at every step. Loss: cross-entropy summed over a
# description's tokens, averaged over descriptions in the batch, with
# padded positions masked out.

def init_sequence_params(rng, cfg: TrainingConfig, vocab_size: int,
                         feature_width: int) -> Params:
    dt = cfg.np_dtype
    H = cfg.hidden_size
    E = cfg.embedding_dim
    input_dim = feature_width + E if cfg.conditioning == "every-step" else E
    params: Params = {
        "emb": normal_init(rng, (vocab_size, E), cfg.embedding_sigma, dt),
    }
    params.update(init_lstm_params(rng, input_dim, H, cfg))
    params["out.W"] = glorot_uniform(rng, H, vocab_size, dt)
    params["out.b"] = np.zeros(vocab_size, dtype=dt)
    if cfg.conditioning == "init-state":
        params["cond.W_h0"] = glorot_uniform(rng, feature_width, H, dt)
        params["cond.b_h0"] = np.zeros(H, dtype=dt)
        params["cond.W_c0"] = glorot_uniform(rng, feature_width, H, dt)
        params["cond.b_c0"] = np.zeros(H, dtype=dt)
    return params


def sequence_initial_state(params: Params, cfg: TrainingConfig, feats: np.ndarray):
    """(h0, c0) for a batch of featurized colors."""
    B = feats.shape[0]
    H = cfg.hidden_size
    if cfg.conditioning == "init-state":
        h0 = feats @ params["cond.W_h0"] + params["cond.b_h0"]
        c0 = feats @ params["cond.W_c0"] + params["cond.b_c0"]
        return h0, c0
    dt = params["lstm.b"].dtype
    return np.zeros((B, H), dtype=dt), np.zeros((B, H), dtype=dt)


def _sequence_inputs(params, cfg, feats, in_ids):
    """Build the (B, T, D) step-input tensor."""
    emb = params["emb"][in_ids]  # (B, T, E)
    if cfg.conditioning == "every-step":
        B, T = in_ids.shape
        tiled = np.broadcast_to(feats[:, None, :], (B, T, feats.shape[1]))
        return np.concatenate([tiled, emb], axis=2)
    return emb


def sequence_forward(params: Params, cfg: TrainingConfig, feats: np.ndarray,
                     in_ids: np.ndarray, targets: np.ndarray, mask: np.ndarray,
                     train: bool = False, rng=None, drop_masks=None):
    """Teacher-forced forward pass.

    feats: (B, F) featurized colors; in_ids/targets/mask: (B, T).
    Returns (loss, cache); loss is the batch-mean summed cross-entropy.
    ``drop_masks`` (B, T, H) may be supplied to pin the dropout draw
    (used by the finite-difference tests).
    """
    B, T = in_ids.shape
    H = cfg.hidden_size
    dt = cfg.np_dtype
    X = _sequence_inputs(params, cfg, feats, in_ids)

    # input contribution for all steps in one GEMM
    AX = X.reshape(B * T, -1) @ params["lstm.W_x"] + params["lstm.b"]
    AX = AX.reshape(B, T, 4 * H)

    h, c = sequence_initial_state(params, cfg, feats)
    h_prev = np.empty((B, T, H), dtype=dt)
    c_prev = np.empty((B, T, H), dtype=dt)
    gates_i = np.empty((B, T, H), dtype=dt)
    gates_f = np.empty((B, T, H), dtype=dt)
    gates_g = np.empty((B, T, H), dtype=dt)
    gates_o = np.empty((B, T, H), dtype=dt)
    cells = np.empty((B, T, H), dtype=dt)
    tanh_c = np.empty((B, T, H), dtype=dt)
    hidden = np.empty((B, T, H), dtype=dt)
    for t in range(T):
        h_prev[:, t] = h
        c_prev[:, t] = c
        h, c, (i, f, g, o, tc) = _lstm_step_full(params, None, h, c, a=AX[:, t])
        gates_i[:, t], gates_f[:, t] = i, f
        gates_g[:, t], gates_o[:, t] = g, o
        cells[:, t], tanh_c[:, t], hidden[:, t] = c, tc, h

    if train and cfg.dropout > 0.0:
        if drop_masks is None:
            drop_masks = dropout_mask(rng, (B, T, H), cfg.dropout, dt)
        dropped = hidden * drop_masks
    else:
        drop_masks = None
        dropped = hidden

    logits = dropped.reshape(B * T, H) @ params["out.W"] + params["out.b"]
    logits = logits.reshape(B, T, -1)
    logp = log_softmax(logits, axis=2)
    rows = np.arange(B)[:, None]
    cols = np.arange(T)[None, :]
    nll = -logp[rows, cols, targets] * mask
    loss = float(nll.sum(dtype=np.float64) / B)
    if not np.isfinite(loss):
        raise TrainingDivergence("non-finite loss in sequence forward pass")

    cache = {
        "cfg": cfg, "params": params, "feats": feats, "X": X,
        "in_ids": in_ids, "targets": targets, "mask": mask,
        "h_prev": h_prev, "c_prev": c_prev, "i": gates_i, "f": gates_f,
        "g": gates_g, "o": gates_o, "c": cells, "tanh_c": tanh_c,
        "hidden": hidden, "dropped": dropped, "drop_masks": drop_masks,
        "probs": np.exp(logp),
    }
    return loss, cache


def sequence_backward(cache) -> Params:
    """Exact gradients of the sequence loss for every parameter.

    Also returns key "feats": the gradient w.r.t. the featurized color
    input (used to train bucket embeddings and the init-state maps'
    upstream, zero cost for fixed featurizers).
    """
    cfg: TrainingConfig = cache["cfg"]
    params = cache["params"]
    B, T = cache["in_ids"].shape
    H = cfg.hidden_size
    dt = cfg.np_dtype
    V = params["out.b"].shape[0]

    # softmax cross-entropy gradient, masked and batch-averaged
    dlogits = cache["probs"].copy()
    rows = np.arange(B)[:, None]
    cols = np.arange(T)[None, :]
    dlogits[rows, cols, cache["targets"]] -= 1.0
    dlogits *= (cache["mask"] / B)[:, :, None].astype(dt)

    dropped = cache["dropped"]
    grads: Params = {}
    dflat = dlogits.reshape(B * T, V)
    grads["out.W"] = dropped.reshape(B * T, H).T @ dflat
    grads["out.b"] = dflat.sum(axis=0)
    dH_out = (dflat @ params["out.W"].T).reshape(B, T, H)
    if cache["drop_masks"] is not None:
        dH_out = dH_out * cache["drop_masks"]

    w_ci, w_cf, w_co = params["lstm.w_ci"], params["lstm.w_cf"], params["lstm.w_co"]
    da = np.empty((B, T, 4 * H), dtype=dt)
    dw_ci = np.zeros(H, dtype=dt)
    dw_cf = np.zeros(H, dtype=dt)
    dw_co = np.zeros(H, dtype=dt)
    dh_next = np.zeros((B, H), dtype=dt)
    dc_next = np.zeros((B, H), dtype=dt)
    i, f, g, o = cache["i"], cache["f"], cache["g"], cache["o"]
    c, tc, c_prev = cache["c"], cache["tanh_c"], cache["c_prev"]
    for t in range(T - 1, -1, -1):
        dh = dH_out[:, t] + dh_next
        do = dh * tc[:, t]
        dao = do * o[:, t] * (1.0 - o[:, t])
        dc = dh * o[:, t] * (1.0 - tc[:, t] ** 2) + dc_next + dao * w_co
        dw_co += (dao * c[:, t]).sum(axis=0)
        di = dc * g[:, t]
        dai = di * i[:, t] * (1.0 - i[:, t])
        df = dc * c_prev[:, t]
        daf = df * f[:, t] * (1.0 - f[:, t])
        dg = dc * i[:, t]
        dag = dg * (1.0 - g[:, t] ** 2)
        dw_ci += (dai * c_prev[:, t]).sum(axis=0)
        dw_cf += (daf * c_prev[:, t]).sum(axis=0)
        dc_next = dc * f[:, t] + dai * w_ci + daf * w_cf
        da[:, t, :H] = dai
        da[:, t, H : 2 * H] = daf
        da[:, t, 2 * H : 3 * H] = dag
        da[:, t, 3 * H :] = dao
        dh_next = da[:, t] @ params["lstm.W_h"].T

    da_flat = da.reshape(B * T, 4 * H)
    X = cache["X"]
    grads["lstm.W_x"] = X.reshape(B * T, -1).T @ da_flat
    grads["lstm.W_h"] = cache["h_prev"].reshape(B * T, H).T @ da_flat
    grads["lstm.b"] = da_flat.sum(axis=0)
    grads["lstm.w_ci"], grads["lstm.w_cf"], grads["lstm.w_co"] = dw_ci, dw_cf, dw_co

    dX = (da_flat @ params["lstm.W_x"].T).reshape(B, T, -1)
    feats = cache["feats"]
    F = feats.shape[1]
    grads["emb"] = np.zeros_like(params["emb"])
    if cfg.conditioning == "every-step":
        np.add.at(grads["emb"], cache["in_ids"], dX[:, :, F:])
        dfeats = dX[:, :, :F].sum(axis=1)
    else:
        np.add.at(grads["emb"], cache["in_ids"], dX)
        # gradient reaching h0/c0 closes the recurrences above
        grads["cond.W_h0"] = feats.T @ dh_next
        grads["cond.b_h0"] = dh_next.sum(axis=0)
        grads["cond.W_c0"] = feats.T @ dc_next
        grads["cond.b_c0"] = dc_next.sum(axis=0)
        dfeats = dh_next @ params["cond.W_h0"].T + dc_next @ params["cond.W_c0"].T
    grads["feats"] = dfeats
    return grads


def sequence_logprobs(params: Params, cfg: TrainingConfig, feats: np.ndarray,
                      in_ids: np.ndarray, targets: np.ndarray,
                      mask: np.ndarray) -> np.ndarray:
    """Per-item log probability (nats) of the target sequences, dropout off.

    Summation over steps is per item, accumulated in float64.
    """
    B, T = in_ids.shape
    H = cfg.hidden_size
    X = _sequence_inputs(params, cfg, feats, in_ids)
    AX = X.reshape(B * T, -1) @ params["lstm.W_x"] + params["lstm.b"]
    AX = AX.reshape(B, T, 4 * H)
    h, c = sequence_initial_state(params, cfg, feats)
    total = np.zeros(B, dtype=np.float64)
    rows = np.arange(B)
    for t in range(T):
        h, c, _ = _lstm_step_full(params, None, h, c, a=AX[:, t])
        logits = (h @ params["out.W"] + params["out.b"]).astype(np.float64)
        logp = log_softmax(logits, axis=1)
        total += logp[rows, targets[:, t]] * mask[:, t]
    return total


def sequence_step_probs(params: Params, cfg: TrainingConfig, feats: np.ndarray,
                        prev_ids: np.ndarray, h: np.ndarray, c: np.ndarray):
    """Incremental decode step: next-token distribution and new state."""
    emb = params["emb"][prev_ids]
    if cfg.conditioning == "every-step":
        x = np.concatenate([feats, emb], axis=1)
    else:
        x = emb
    h, c, _ = _lstm_step_full(params, x, h, c)
    logits = (h @ params["out.W"] + params["out.b"]).astype(np.float64)
    return softmax(logits, axis=1), h, c


# ---------------------------------------------------------------------------
# atomic (whole-description classifier) graph
#
# Two hidden layers with a ReLU after the first, softmax over the
# inventory of distinct training descriptions. Dropout after each hidden
# layer in training mode.

def init_atomic_params(rng, cfg: TrainingConfig, feature_width: int,
                       n_classes: int) -> Params:
    dt = cfg.np_dtype
    Hd = cfg.atomic_hidden
    return {
        "fc1.W": glorot_uniform(rng, feature_width, Hd, dt),
        "fc1.b": np.zeros(Hd, dtype=dt),
        "fc2.W": glorot_uniform(rng, Hd, Hd, dt),
        "fc2.b": np.zeros(Hd, dtype=dt),
        "out.W": glorot_uniform(rng, Hd, n_classes, dt),
        "out.b": np.zeros(n_classes, dtype=dt),
    }


def atomic_forward(params: Params, cfg: TrainingConfig, feats: np.ndarray,
                   targets: np.ndarray, train: bool = False, rng=None,
                   drop_masks=None):
    """Returns (loss, cache); loss is mean cross-entropy over the batch."""
    dt = cfg.np_dtype
    B = feats.shape[0]
    a1 = feats @ params["fc1.W"] + params["fc1.b"]
    h1 = np.maximum(a1, 0.0)
    if train and cfg.dropout > 0.0:
        if drop_masks is None:
            drop_masks = (
                dropout_mask(rng, h1.shape, cfg.dropout, dt),
                dropout_mask(rng, (B, cfg.atomic_hidden), cfg.dropout, dt),
            )
        d1 = h1 * drop_masks[0]
    else:
        drop_masks = None
        d1 = h1
    h2 = d1 @ params["fc2.W"] + params["fc2.b"]
    d2 = h2 * drop_masks[1] if drop_masks is not None else h2
    logits = d2 @ params["out.W"] + params["out.b"]
    logp = log_softmax(logits, axis=1)
    nll = -logp[np.arange(B), targets]
    loss = float(nll.sum(dtype=np.float64) / B)
    if not np.isfinite(loss):
        raise TrainingDivergence("non-finite loss in atomic forward pass")
    cache = {
        "cfg": cfg, "params": params, "feats": feats, "targets": targets,
        "a1": a1, "d1": d1, "d2": d2, "drop_masks": drop_masks,
        "probs": np.exp(logp),
    }
    return loss, cache


def atomic_backward(cache) -> Params:
    params = cache["params"]
    B = cache["feats"].shape[0]
    dlogits = cache["probs"].copy()
    dlogits[np.arange(B), cache["targets"]] -= 1.0
    dlogits /= B
    grads: Params = {}
    grads["out.W"] = cache["d2"].T @ dlogits
    grads["out.b"] = dlogits.sum(axis=0)
    dd2 = dlogits @ params["out.W"].T
    if cache["drop_masks"] is not None:
        dh2 = dd2 * cache["drop_masks"][1]
    else:
        dh2 = dd2
    grads["fc2.W"] = cache["d1"].T @ dh2
    grads["fc2.b"] = dh2.sum(axis=0)
    dd1 = dh2 @ params["fc2.W"].T
    if cache["drop_masks"] is not None:
        dh1 = dd1 * cache["drop_masks"][0]
    else:
        dh1 = dd1
    da1 = dh1 * (cache["a1"] > 0)
    grads["fc1.W"] = cache["feats"].T @ da1
    grads["fc1.b"] = da1.sum(axis=0)
    grads["feats"] = da1 @ params["fc1.W"].T
    return grads


def atomic_logprobs(params: Params, cfg: TrainingConfig,
                    feats: np.ndarray) -> np.ndarray:
    """(B, C) log class probabilities, dropout off, float64."""
    h1 = np.maximum(feats @ params["fc1.W"] + params["fc1.b"], 0.0)
    h2 = h1 @ params["fc2.W"] + params["fc2.b"]
    logits = (h2 @ params["out.W"] + params["out.b"]).astype(np.float64)
    return log_softmax(logits, axis=1)
