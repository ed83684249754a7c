"""The three model families over color-conditioned descriptions:

* ``sequence``: LSTM decoder emitting one token at a time, softmax over
  the full vocabulary at every step (the conditional language model).
* ``atomic``: feed-forward classifier whose output classes are the
  distinct full descriptions seen in training.
* ``histogram``: smoothed per-bucket description counts with strict
  finest-first backoff (90x10x10 -> 45x5x5 -> 1x1x1).

All families expose score_description / sample / predict_top1 and a
common checkpoint container. Scores are natural-log probabilities;
metric code converts to bits where needed.
"""

from __future__ import annotations

import math

import numpy as np

from . import nn
from .checkpoint import read_checkpoint, write_checkpoint
from .colors import ColorHSV
from .corpus import (
    Dataset,
    Description,
    END_ID,
    START_ID,
    UNK_ID,
    Vocabulary,
    encode_dataset,
    tokenize,
)
from .errors import CheckpointError, ConfigError
from .features import (
    BUCKET_GRIDS,
    BUCKET_SIZES,
    FOURIER_DIM,
    SCHEMES,
    bucket_index_array,
    dense_feature_array,
    feature_dim,
)
from .nn import TrainingConfig

FAMILIES = ("sequence", "atomic", "histogram")

DEFAULT_BEAM_WIDTH = 10
DEFAULT_MAX_LEN = 20

BUCKET_PARAM_NAMES = ("buckets.fine", "buckets.mid", "buckets.global")

# featurizer constants are stamped into checkpoints so a file trained
# under different conventions is rejected instead of silently misread
FEATURE_CONSTANTS = {
    "raw_scale": [360.0, 100.0, 100.0],
    "fourier_dim": FOURIER_DIM,
    "bucket_grids": [list(g) for g in BUCKET_GRIDS],
}

_SCORE_BATCH = 512


def _as_color_array(c) -> np.ndarray:
    if isinstance(c, ColorHSV):
        return np.array([c.as_tuple()], dtype=np.float64)
    arr = np.asarray(c, dtype=np.float64)
    return arr.reshape(1, 3) if arr.ndim == 1 else arr


def _as_tokens(d) -> list:
    if isinstance(d, Description):
        return list(d.tokens)
    if isinstance(d, str):
        return tokenize(d)
    return list(d)


def _featurize(params: dict, scheme: str, dtype, colors: np.ndarray):
    """(feats, bucket_ids) for an (N, 3) HSV array. bucket_ids is None
    for the continuous schemes."""
    if scheme == "buckets":
        idx = bucket_index_array(colors)
        feats = np.concatenate(
            [params[name][idx[:, r]] for r, name in enumerate(BUCKET_PARAM_NAMES)],
            axis=1,
        )
        return feats, idx
    return dense_feature_array(colors, scheme).astype(dtype), None


def _init_bucket_tables(rng, cfg: TrainingConfig) -> dict:
    dt = cfg.np_dtype
    return {
        name: nn.normal_init(rng, (size, cfg.bucket_embedding_dim),
                             cfg.embedding_sigma, dt)
        for name, size in zip(BUCKET_PARAM_NAMES, BUCKET_SIZES)
    }


def _scatter_bucket_grads(grads: dict, params: dict, dfeats: np.ndarray,
                          idx: np.ndarray, emb_dim: int) -> None:
    for r, name in enumerate(BUCKET_PARAM_NAMES):
        g = np.zeros_like(params[name])
        np.add.at(g, idx[:, r], dfeats[:, r * emb_dim : (r + 1) * emb_dim])
        grads[name] = g


def _pad_batch(id_seqs: list, dtype_i=np.int64):
    """Teacher-forcing tensors for encoded sequences (with sentinels):
    inputs ids[:-1], targets ids[1:], mask over real target positions."""
    B = len(id_seqs)
    T = max(len(s) for s in id_seqs) - 1
    in_ids = np.full((B, T), END_ID, dtype=dtype_i)
    targets = np.full((B, T), END_ID, dtype=dtype_i)
    mask = np.zeros((B, T), dtype=np.float64)
    for b, seq in enumerate(id_seqs):
        L = len(seq) - 1
        in_ids[b, :L] = seq[:-1]
        targets[b, :L] = seq[1:]
        mask[b, :L] = 1.0
    return in_ids, targets, mask


# ---------------------------------------------------------------------------
# sequence decoder


class SequenceDecoderModel:
    """Color-conditioned LSTM token decoder.

    Conditioning per ``config.conditioning``: the featurized color is
    concatenated to the token embedding at every step, or mapped through
    a dense layer to the initial (h0, c0).
    """

    family = "sequence"

    def __init__(self, config: TrainingConfig, vocab: Vocabulary, scheme: str,
                 params: dict, epochs_trained: float = 0.0):
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown feature scheme {scheme!r}")
        self.config = config
        self.vocab = vocab
        self.scheme = scheme
        self.params = params
        self.epochs_trained = epochs_trained

    @classmethod
    def build(cls, config: TrainingConfig, vocab: Vocabulary, scheme: str,
              rng=None) -> "SequenceDecoderModel":
        config.validate()
        if rng is None:
            rng = np.random.default_rng(config.seed)
        width = feature_dim(scheme, config.bucket_embedding_dim)
        params = nn.init_sequence_params(rng, config, len(vocab), width)
        if scheme == "buckets":
            params.update(_init_bucket_tables(rng, config))
        return cls(config, vocab, scheme, params)

    @property
    def feature_width(self) -> int:
        return feature_dim(self.scheme, self.config.bucket_embedding_dim)

    @property
    def param_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def featurize(self, colors: np.ndarray):
        return _featurize(self.params, self.scheme, self.config.np_dtype, colors)

    # -- scoring

    def score_description(self, c, d) -> float:
        """Natural-log probability of the full description given c,
        </s> included. OOV tokens score as <unk>."""
        tokens = _as_tokens(d)
        if not tokens:
            raise ValueError("cannot score an empty description")
        return float(self.score_token_batch(_as_color_array(c), [tokens])[0])

    def score_token_batch(self, colors: np.ndarray, token_seqs: list) -> np.ndarray:
        ids = [np.asarray(self.vocab.encode(t), dtype=np.int64) for t in token_seqs]
        out = np.empty(len(ids), dtype=np.float64)
        for lo in range(0, len(ids), _SCORE_BATCH):
            hi = min(lo + _SCORE_BATCH, len(ids))
            feats, _ = self.featurize(colors[lo:hi])
            in_ids, targets, mask = _pad_batch(ids[lo:hi])
            out[lo:hi] = nn.sequence_logprobs(
                self.params, self.config, feats, in_ids, targets, mask)
        return out

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        return self.score_token_batch(ds.colors, [d.tokens for d in ds.descriptions])

    def score_color_array(self, colors: np.ndarray, tokens) -> np.ndarray:
        """One description scored against many colors (grid queries)."""
        return self.score_token_batch(np.asarray(colors, dtype=np.float64),
                                      [list(tokens)] * len(colors))

    # -- incremental decoding (also the enumeration probe used in tests)

    def initial_state(self, c):
        feats, _ = self.featurize(_as_color_array(c))
        h, c0 = nn.sequence_initial_state(self.params, self.config, feats)
        return (feats, h, c0)

    def step(self, state, prev_id: int):
        """Next-token distribution (float64, sums to 1) after feeding
        prev_id, plus the advanced state."""
        feats, h, c = state
        probs, h2, c2 = nn.sequence_step_probs(
            self.params, self.config, feats,
            np.array([prev_id], dtype=np.int64), h, c)
        return probs[0], (feats, h2, c2)

    # -- generation

    def sample(self, c, rng, max_len: int = DEFAULT_MAX_LEN) -> Description:
        """Ancestral sampling; <s> and <unk> are never emitted (their
        mass is renormalized away). Stops at </s> or max_len tokens."""
        state = self.initial_state(c)
        prev = START_ID
        ids: list = []
        for _ in range(max_len):
            probs, state = self.step(state, prev)
            p = probs.copy()
            p[START_ID] = 0.0
            p[UNK_ID] = 0.0
            p /= p.sum()
            tok = int(rng.choice(len(p), p=p))
            if tok == END_ID:
                break
            ids.append(tok)
            prev = tok
        tokens = self.vocab.decode(ids)
        return Description(raw=" ".join(tokens), tokens=tokens)

    def predict_top1(self, c, beam_width: int = DEFAULT_BEAM_WIDTH,
                     max_len: int = DEFAULT_MAX_LEN) -> Description:
        """Highest-probability complete description found by beam search.

        A width-1 (greedy) pass runs alongside wider beams and the better
        completion wins, so widening the beam never hurts the returned
        score. Ties break toward the lexicographically smaller id tuple.
        """
        if beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        best = self._beam(c, beam_width, max_len)
        if beam_width > 1:
            greedy = self._beam(c, 1, max_len)
            if (-greedy[0], greedy[1]) < (-best[0], best[1]):
                best = greedy
        tokens = self.vocab.decode(best[1])
        return Description(raw=" ".join(tokens), tokens=tokens)

    def _beam(self, c, width: int, max_len: int):
        """Returns (logp, content token ids) of the best completed
        hypothesis; every score includes the </s> step."""
        feats1, _ = self.featurize(_as_color_array(c))
        h, c0 = nn.sequence_initial_state(self.params, self.config, feats1)
        V = len(self.vocab)
        live_ids: list = [()]
        live_logp = np.zeros(1, dtype=np.float64)
        prev = np.array([START_ID], dtype=np.int64)
        h_arr, c_arr = h, c0
        completed: list = []  # (logp, ids)

        for depth in range(max_len + 1):
            n = len(live_ids)
            feats_n = np.repeat(feats1, n, axis=0)
            probs, h_new, c_new = nn.sequence_step_probs(
                self.params, self.config, feats_n, prev, h_arr, c_arr)
            with np.errstate(divide="ignore"):
                step_logp = np.log(probs)
            for i in range(n):
                completed.append((live_logp[i] + step_logp[i, END_ID], live_ids[i]))
            if depth == max_len:
                break
            scores = live_logp[:, None] + step_logp
            scores[:, START_ID] = -np.inf
            scores[:, UNK_ID] = -np.inf
            scores[:, END_ID] = -np.inf
            flat = scores.ravel()
            if flat.size > 4096:
                k = min(width + 64, flat.size)
                cand_pos = np.argpartition(-flat, k - 1)[:k]
            else:
                cand_pos = np.arange(flat.size)
            cands = []
            for j in cand_pos:
                if not np.isfinite(flat[j]):
                    continue
                i, v = divmod(int(j), V)
                cands.append((-flat[j], live_ids[i] + (v,), i, v))
            cands.sort(key=lambda t: (t[0], t[1]))
            cands = cands[:width]
            if not cands:
                break
            best_completed = max(completed)[0]
            if best_completed > -cands[0][0]:
                break
            sel = np.array([t[2] for t in cands])
            live_ids = [t[1] for t in cands]
            live_logp = np.array([-t[0] for t in cands])
            prev = np.array([t[3] for t in cands], dtype=np.int64)
            h_arr, c_arr = h_new[sel], c_new[sel]

        return min(completed, key=lambda t: (-t[0], t[1]))

    # -- persistence

    def save(self, path) -> None:
        save_checkpoint(self, path)

    @classmethod
    def load(cls, path) -> "SequenceDecoderModel":
        return load_checkpoint(path, expect_family=cls.family)


# ---------------------------------------------------------------------------
# atomic classifier


class AtomicModel:
    """Softmax over the inventory of distinct training descriptions.

    Descriptions outside the inventory have probability zero; metric
    code decides how to surface that.
    """

    family = "atomic"

    def __init__(self, config: TrainingConfig, inventory: list, scheme: str,
                 params: dict, epochs_trained: float = 0.0):
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown feature scheme {scheme!r}")
        self.config = config
        self.inventory = [tuple(k) for k in inventory]
        self.index = {k: i for i, k in enumerate(self.inventory)}
        self.scheme = scheme
        self.params = params
        self.epochs_trained = epochs_trained

    @classmethod
    def build(cls, config: TrainingConfig, inventory: list, scheme: str,
              rng=None) -> "AtomicModel":
        config.validate()
        if not inventory:
            raise ConfigError("atomic model needs a nonempty description inventory")
        if rng is None:
            rng = np.random.default_rng(config.seed)
        width = feature_dim(scheme, config.bucket_embedding_dim)
        params = nn.init_atomic_params(rng, config, width, len(inventory))
        if scheme == "buckets":
            params.update(_init_bucket_tables(rng, config))
        return cls(config, list(inventory), scheme, params)

    @property
    def param_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def featurize(self, colors: np.ndarray):
        return _featurize(self.params, self.scheme, self.config.np_dtype, colors)

    def class_logprobs(self, colors: np.ndarray) -> np.ndarray:
        feats, _ = self.featurize(colors)
        return nn.atomic_logprobs(self.params, self.config, feats)

    def score_description(self, c, d) -> float:
        tokens = _as_tokens(d)
        if not tokens:
            raise ValueError("cannot score an empty description")
        cls_id = self.index.get(tuple(tokens))
        if cls_id is None:
            return -math.inf
        return float(self.class_logprobs(_as_color_array(c))[0, cls_id])

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        out = np.full(len(ds), -np.inf, dtype=np.float64)
        keys = [self.index.get(d.key()) for d in ds.descriptions]
        known = [i for i, k in enumerate(keys) if k is not None]
        for lo in range(0, len(known), _SCORE_BATCH):
            chunk = known[lo : lo + _SCORE_BATCH]
            lp = self.class_logprobs(ds.colors[chunk])
            out[chunk] = lp[np.arange(len(chunk)), [keys[i] for i in chunk]]
        return out

    def score_color_array(self, colors: np.ndarray, tokens) -> np.ndarray:
        colors = np.asarray(colors, dtype=np.float64)
        cls_id = self.index.get(tuple(tokens))
        if cls_id is None:
            return np.full(len(colors), -np.inf, dtype=np.float64)
        out = np.empty(len(colors), dtype=np.float64)
        for lo in range(0, len(colors), _SCORE_BATCH):
            hi = min(lo + _SCORE_BATCH, len(colors))
            out[lo:hi] = self.class_logprobs(colors[lo:hi])[:, cls_id]
        return out

    def _description(self, cls_id: int) -> Description:
        tokens = list(self.inventory[cls_id])
        return Description(raw=" ".join(tokens), tokens=tokens)

    def sample(self, c, rng, max_len: int = DEFAULT_MAX_LEN) -> Description:
        p = np.exp(self.class_logprobs(_as_color_array(c))[0])
        p /= p.sum()
        return self._description(int(rng.choice(len(p), p=p)))

    def predict_top1(self, c, beam_width: int = DEFAULT_BEAM_WIDTH,
                     max_len: int = DEFAULT_MAX_LEN) -> Description:
        lp = self.class_logprobs(_as_color_array(c))[0]
        return self._description(int(np.argmax(lp)))

    def save(self, path) -> None:
        save_checkpoint(self, path)

    @classmethod
    def load(cls, path) -> "AtomicModel":
        return load_checkpoint(path, expect_family=cls.family)


# ---------------------------------------------------------------------------
# histogram baseline


class HistogramModel:
    """Add-one-smoothed description counts per color bucket with strict
    backoff to the first resolution whose bucket is nonempty."""

    family = "histogram"
    scheme = "buckets"

    def __init__(self, config: TrainingConfig, inventory: list, counts: list,
                 epochs_trained: float = 1.0):
        # counts[r]: dict bucket id -> {class id: count}
        self.config = config
        self.inventory = [tuple(k) for k in inventory]
        self.index = {k: i for i, k in enumerate(self.inventory)}
        self.counts = counts
        self.totals = [
            {b: sum(cc.values()) for b, cc in level.items()} for level in counts
        ]
        self.epochs_trained = epochs_trained

    @classmethod
    def build(cls, config: TrainingConfig, train: Dataset) -> "HistogramModel":
        if len(train) == 0:
            raise ConfigError("histogram model needs a nonempty dataset")
        inventory = sorted({d.key() for d in train.descriptions})
        index = {k: i for i, k in enumerate(inventory)}
        idx = bucket_index_array(train.colors)
        counts = [dict() for _ in BUCKET_GRIDS]
        for i, d in enumerate(train.descriptions):
            cls_id = index[d.key()]
            for r in range(len(BUCKET_GRIDS)):
                bucket = counts[r].setdefault(int(idx[i, r]), {})
                bucket[cls_id] = bucket.get(cls_id, 0) + 1
        return cls(config, inventory, counts)

    @property
    def param_count(self) -> int:
        """(inventory - 1) free probabilities per nonempty bucket."""
        nonempty = sum(len(level) for level in self.counts)
        return (len(self.inventory) - 1) * nonempty

    def _resolve_bucket(self, c):
        idx = bucket_index_array(_as_color_array(c))[0]
        for r in range(len(BUCKET_GRIDS)):
            b = int(idx[r])
            if self.totals[r].get(b, 0) > 0:
                return self.counts[r][b], self.totals[r][b]
        return {}, 0

    def hm_probability(self, c, d) -> float:
        tokens = _as_tokens(d)
        bucket, total = self._resolve_bucket(c)
        C = len(self.inventory)
        cls_id = self.index.get(tuple(tokens))
        count = bucket.get(cls_id, 0) if cls_id is not None else 0
        return (count + 1.0) / (total + C)

    def score_description(self, c, d) -> float:
        tokens = _as_tokens(d)
        if not tokens:
            raise ValueError("cannot score an empty description")
        return math.log(self.hm_probability(c, tokens))

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        return np.array(
            [self.score_description(ds.colors[i], ds.descriptions[i])
             for i in range(len(ds))],
            dtype=np.float64,
        )

    def score_color_array(self, colors: np.ndarray, tokens) -> np.ndarray:
        idx = bucket_index_array(np.asarray(colors, dtype=np.float64))
        C = len(self.inventory)
        cls_id = self.index.get(tuple(tokens))
        out = np.empty(len(idx), dtype=np.float64)
        for i in range(len(idx)):
            for r in range(len(BUCKET_GRIDS)):
                total = self.totals[r].get(int(idx[i, r]), 0)
                if total > 0:
                    bucket = self.counts[r][int(idx[i, r])]
                    count = bucket.get(cls_id, 0) if cls_id is not None else 0
                    out[i] = math.log((count + 1.0) / (total + C))
                    break
            else:
                out[i] = -math.log(C)
        return out

    def _bucket_distribution(self, c) -> np.ndarray:
        bucket, total = self._resolve_bucket(c)
        C = len(self.inventory)
        p = np.ones(C, dtype=np.float64)
        for cls_id, count in bucket.items():
            p[cls_id] += count
        return p / (total + C)

    def _description(self, cls_id: int) -> Description:
        tokens = list(self.inventory[cls_id])
        return Description(raw=" ".join(tokens), tokens=tokens)

    def sample(self, c, rng, max_len: int = DEFAULT_MAX_LEN) -> Description:
        return self._description(int(rng.choice(len(self.inventory),
                                                 p=self._bucket_distribution(c))))

    def predict_top1(self, c, beam_width: int = DEFAULT_BEAM_WIDTH,
                     max_len: int = DEFAULT_MAX_LEN) -> Description:
        # inventory is sorted, so argmax ties go to the smaller key
        return self._description(int(np.argmax(self._bucket_distribution(c))))

    def save(self, path) -> None:
        save_checkpoint(self, path)

    @classmethod
    def load(cls, path) -> "HistogramModel":
        return load_checkpoint(path, expect_family=cls.family)


# ---------------------------------------------------------------------------
# training


def _monitor_perplexity(model, ds: Dataset) -> float:
    """Per-description perplexity for the training monitor. Items the
    model cannot represent (atomic dev OOV) are excluded here; the
    evaluation module handles them by policy instead."""
    logs = model.score_dataset(ds)
    finite = logs[np.isfinite(logs)]
    if finite.size == 0:
        return math.inf
    bits = -finite / math.log(2.0)
    return float(2.0 ** bits.mean())


def _neural_train_loop(model, config: TrainingConfig, make_batch, n_items: int,
                       monitor_ds: Dataset, monitor_name: str):
    """Shared minibatch/Adagrad/early-stopping driver.

    ``make_batch(index_array, rng)`` runs forward+backward and returns
    grads. Dev perplexity is checked ``evals_per_epoch`` times per epoch;
    training stops after ``patience`` consecutive non-improving checks
    and the best parameters are restored.
    """
    opt = nn.Adagrad(model.params, config.learning_rate, config.adagrad_eps)
    rng = np.random.default_rng([config.seed, 1])
    history = []
    best_ppl = math.inf
    best_params = None
    best_epoch = 0.0
    stale = 0
    n_batches = max(1, math.ceil(n_items / config.batch_size))
    eval_points = {
        math.ceil(n_batches * k / config.evals_per_epoch) - 1
        for k in range(1, config.evals_per_epoch + 1)
    }
    stop = False
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n_items)
        for b in range(n_batches):
            batch = order[b * config.batch_size : (b + 1) * config.batch_size]
            grads = make_batch(batch, rng)
            opt.update(model.params, grads)
            if b in eval_points:
                frac = epoch - 1 + (b + 1) / n_batches
                ppl = _monitor_perplexity(model, monitor_ds)
                history.append({"epoch": round(frac, 4), "split": monitor_name,
                                "perplexity": ppl})
                if ppl < best_ppl:
                    best_ppl = ppl
                    best_params = {k: v.copy() for k, v in model.params.items()}
                    best_epoch = frac
                    stale = 0
                else:
                    stale += 1
                    if stale >= config.patience:
                        stop = True
                        break
        if stop:
            break
    if best_params is not None:
        model.params.update(best_params)
        model.epochs_trained = best_epoch
    else:
        model.epochs_trained = float(epoch)
    return history


def _train_sequence(train: Dataset, config: TrainingConfig, scheme: str,
                    dev: Dataset | None):
    vocab = Vocabulary.build(train)
    model = SequenceDecoderModel.build(config, vocab, scheme)
    enc = encode_dataset(train, vocab)
    seqs = [enc.ids(i) for i in range(len(enc))]
    monitor = dev if dev is not None and len(dev) else train
    monitor_name = "dev" if monitor is dev else "train"
    emb_dim = config.bucket_embedding_dim

    def make_batch(batch, rng):
        colors = train.colors[batch]
        feats, idx = model.featurize(colors)
        in_ids, targets, mask = _pad_batch([seqs[i] for i in batch])
        _, cache = nn.sequence_forward(model.params, config, feats, in_ids,
                                       targets, mask, train=True, rng=rng)
        grads = nn.sequence_backward(cache)
        dfeats = grads.pop("feats")
        if scheme == "buckets":
            _scatter_bucket_grads(grads, model.params, dfeats, idx, emb_dim)
        return grads

    history = _neural_train_loop(model, config, make_batch, len(train),
                                 monitor, monitor_name)
    return model, history


def _train_atomic(train: Dataset, config: TrainingConfig, scheme: str,
                  dev: Dataset | None):
    inventory = sorted({d.key() for d in train.descriptions})
    model = AtomicModel.build(config, inventory, scheme)
    targets_all = np.array([model.index[d.key()] for d in train.descriptions],
                           dtype=np.int64)
    monitor = dev if dev is not None and len(dev) else train
    monitor_name = "dev" if monitor is dev else "train"
    emb_dim = config.bucket_embedding_dim

    def make_batch(batch, rng):
        feats, idx = model.featurize(train.colors[batch])
        _, cache = nn.atomic_forward(model.params, config, feats,
                                     targets_all[batch], train=True, rng=rng)
        grads = nn.atomic_backward(cache)
        dfeats = grads.pop("feats")
        if scheme == "buckets":
            _scatter_bucket_grads(grads, model.params, dfeats, idx, emb_dim)
        return grads

    history = _neural_train_loop(model, config, make_batch, len(train),
                                 monitor, monitor_name)
    return model, history


def train_model(family: str, train: Dataset, config: TrainingConfig,
                scheme: str = "fourier", dev: Dataset | None = None):
    """Train a model of the given family; returns (model, history) where
    history is a list of {epoch, split, perplexity} records."""
    config.validate()
    if len(train) == 0:
        raise ConfigError("training dataset is empty")
    if family == "sequence":
        return _train_sequence(train, config, scheme, dev)
    if family == "atomic":
        return _train_atomic(train, config, scheme, dev)
    if family == "histogram":
        if scheme != "buckets":
            raise ConfigError("histogram family is defined over buckets only")
        model = HistogramModel.build(config, train)
        monitor = dev if dev is not None and len(dev) else train
        name = "dev" if monitor is dev else "train"
        history = [{"epoch": 1.0, "split": name,
                    "perplexity": _monitor_perplexity(model, monitor)}]
        return model, history
    raise ConfigError(f"unknown model family {family!r}")


# ---------------------------------------------------------------------------
# checkpoint persistence


def _expected_shapes(header: dict) -> dict:
    cfg = TrainingConfig.from_dict(header["config"])
    family = header["family"]
    scheme = header.get("scheme")
    shapes = {}
    if family in ("sequence", "atomic"):
        F = feature_dim(scheme, cfg.bucket_embedding_dim)
        if scheme == "buckets":
            for name, size in zip(BUCKET_PARAM_NAMES, BUCKET_SIZES):
                shapes[name] = (size, cfg.bucket_embedding_dim)
    if family == "sequence":
        V = len(header["vocab"])
        H, E = cfg.hidden_size, cfg.embedding_dim
        D = F + E if cfg.conditioning == "every-step" else E
        shapes.update({
            "emb": (V, E),
            "lstm.W_x": (D, 4 * H), "lstm.W_h": (H, 4 * H),
            "lstm.w_ci": (H,), "lstm.w_cf": (H,), "lstm.w_co": (H,),
            "lstm.b": (4 * H,),
            "out.W": (H, V), "out.b": (V,),
        })
        if cfg.conditioning == "init-state":
            shapes.update({
                "cond.W_h0": (F, H), "cond.b_h0": (H,),
                "cond.W_c0": (F, H), "cond.b_c0": (H,),
            })
    elif family == "atomic":
        C = len(header["inventory"])
        Hd = cfg.atomic_hidden
        shapes.update({
            "fc1.W": (F, Hd), "fc1.b": (Hd,),
            "fc2.W": (Hd, Hd), "fc2.b": (Hd,),
            "out.W": (Hd, C), "out.b": (C,),
        })
    return shapes


def save_checkpoint(model, path) -> None:
    header = {
        "family": model.family,
        "scheme": model.scheme,
        "config": model.config.to_dict(),
        "features": FEATURE_CONSTANTS,
        "meta": {
            "seed": model.config.seed,
            "prng": "numpy.PCG64",
            "epochs_trained": model.epochs_trained,
        },
    }
    if model.family == "sequence":
        header["vocab"] = model.vocab.id_to_token
        tensors = model.params
    elif model.family == "atomic":
        header["inventory"] = [" ".join(k) for k in model.inventory]
        tensors = model.params
    elif model.family == "histogram":
        header["inventory"] = [" ".join(k) for k in model.inventory]
        tensors = {}
        for r, name in enumerate(("fine", "mid", "global")):
            triples = [
                (b, cls_id, n)
                for b in sorted(model.counts[r])
                for cls_id, n in sorted(model.counts[r][b].items())
            ]
            tensors[f"counts.{name}"] = np.array(triples, dtype=np.int32).reshape(-1, 3)
    else:
        raise CheckpointError(f"cannot serialize family {model.family!r}")
    write_checkpoint(path, header, tensors)


def load_checkpoint(path, expect_family: str | None = None):
    header, tensors = read_checkpoint(path)
    family = header.get("family")
    if family not in FAMILIES:
        raise CheckpointError(f"checkpoint has unknown family tag {family!r}")
    if expect_family is not None and family != expect_family:
        raise CheckpointError(
            f"checkpoint holds a {family} model, expected {expect_family}")
    if header.get("features") != FEATURE_CONSTANTS:
        raise CheckpointError(
            "checkpoint was written with different featurizer constants")
    cfg = TrainingConfig.from_dict(header["config"])
    epochs = float(header.get("meta", {}).get("epochs_trained", 0.0))

    if family == "histogram":
        inventory = [tuple(s.split(" ")) for s in header["inventory"]]
        counts = []
        for name in ("fine", "mid", "global"):
            arr = tensors[f"counts.{name}"]
            level: dict = {}
            for b, cls_id, n in arr:
                level.setdefault(int(b), {})[int(cls_id)] = int(n)
            counts.append(level)
        return HistogramModel(cfg, inventory, counts, epochs_trained=epochs)

    expected = _expected_shapes(header)
    if set(expected) != set(tensors):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise CheckpointError(
            f"checkpoint tensor set mismatch (missing {missing}, extra {extra})")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise CheckpointError(
                f"tensor {name!r} has shape {tensors[name].shape}, "
                f"expected {shape}")
    if family == "sequence":
        vocab = Vocabulary(header["vocab"])
        return SequenceDecoderModel(cfg, vocab, header["scheme"], tensors,
                                    epochs_trained=epochs)
    inventory = [tuple(s.split(" ")) for s in header["inventory"]]
    return AtomicModel(cfg, inventory, header["scheme"], tensors,
                       epochs_trained=epochs)
