"""Shared builders for the test suite: tiny datasets, hand-set models,
and the finite-difference gradient oracle."""

import numpy as np
import pytest

from colordesc import Dataset, Description, TrainingConfig, Vocabulary
from colordesc.corpus import RESERVED_TOKENS
from colordesc.models import SequenceDecoderModel


def disjoint_pairs(n: int, seed: int = 0) -> Dataset:
    """n distinct colors, each with its own single-token description."""
    rng = np.random.default_rng(seed)
    colors = np.column_stack([
        rng.uniform(0.0, 360.0, n),
        rng.uniform(0.0, 100.0, n),
        rng.uniform(0.0, 100.0, n),
    ])
    descs = [Description.from_text(f"color{i}") for i in range(n)]
    return Dataset(colors=colors, descriptions=descs, split="train")


def make_vocab(content_tokens) -> Vocabulary:
    return Vocabulary(list(RESERVED_TOKENS) + list(content_tokens))


def constant_step_model(content_tokens, logits, hidden: int = 4) -> SequenceDecoderModel:
    """A sequence model whose per-step distribution is softmax(logits)
    at every step, independent of color and history: all weights zero,
    output bias carries the logits."""
    vocab = make_vocab(content_tokens)
    cfg = TrainingConfig(hidden_size=hidden, embedding_dim=3, dropout=0.0,
                         seed=0).validate()
    model = SequenceDecoderModel.build(cfg, vocab, "raw")
    for name, p in model.params.items():
        p[...] = 0.0
    model.params["out.b"][...] = np.asarray(logits, dtype=np.float32)
    return model


def random_tiny_model(seed: int, n_content: int = 3, scheme: str = "fourier",
                      conditioning: str = "every-step") -> SequenceDecoderModel:
    """A small untrained model with random weights, for enumeration and
    search tests. Weights are scaled up so step distributions are not
    near-uniform."""
    vocab = make_vocab([f"w{i}" for i in range(n_content)])
    cfg = TrainingConfig(hidden_size=6, embedding_dim=4, dropout=0.0,
                         seed=seed, conditioning=conditioning).validate()
    model = SequenceDecoderModel.build(cfg, vocab, scheme)
    rng = np.random.default_rng(seed + 1000)
    model.params["out.W"][...] = rng.standard_normal(
        model.params["out.W"].shape).astype(np.float32) * 1.5
    model.params["out.b"][...] = rng.standard_normal(
        model.params["out.b"].shape).astype(np.float32)
    return model


def enumerate_sequences(model, color, max_len: int):
    """Brute-force (logp, ids) for every complete description of up to
    max_len content tokens, via the incremental step API."""
    from colordesc.corpus import END_ID, START_ID, UNK_ID

    V = len(model.vocab)
    content = [i for i in range(V) if i not in (START_ID, END_ID, UNK_ID)]
    results = []

    def walk(state, prev, ids, logp):
        probs, nxt = model.step(state, prev)
        results.append((logp + float(np.log(probs[END_ID])), ids))
        if len(ids) == max_len:
            return
        for tok in content:
            walk(nxt, tok, ids + (tok,), logp + float(np.log(probs[tok])))

    walk(model.initial_state(color), START_ID, (), 0.0)
    return results


def fd_max_relative_error(params, loss_fn, grads, delta: float = 1e-4) -> float:
    """Max relative disagreement between analytic grads and central
    finite differences over every parameter component."""
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        gflat = grads[name].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + delta
            lp = loss_fn()
            flat[j] = orig - delta
            lm = loss_fn()
            flat[j] = orig
            fd = (lp - lm) / (2.0 * delta)
            rel = abs(gflat[j] - fd) / max(abs(gflat[j]) + abs(fd), 1e-3)
            worst = max(worst, rel)
    return worst


@pytest.fixture
def tmp_corpus(tmp_path):
    """A small on-disk corpus + manifest: 8 train pairs, 4 dev pairs."""
    train_lines = ["h,s,v,description"]
    dev_lines = ["h,s,v,description"]
    rng = np.random.default_rng(5)
    words = ["red", "green", "blue", "dark red", "light green", "teal",
             "olive", "mauve"]
    for i, w in enumerate(words):
        h = float(rng.uniform(0, 360))
        s = float(rng.uniform(20, 100))
        v = float(rng.uniform(20, 100))
        train_lines.append(f"{h:.2f},{s:.2f},{v:.2f},{w}")
        if i < 4:
            dev_lines.append(f"{h:.2f},{s:.2f},{v:.2f},{w}")
    train_path = tmp_path / "train.csv"
    dev_path = tmp_path / "dev.csv"
    train_path.write_text("\n".join(train_lines) + "\n", encoding="utf-8")
    dev_path.write_text("\n".join(dev_lines) + "\n", encoding="utf-8")
    manifest = tmp_path / "splits.manifest"
    manifest.write_text(
        f"train={train_path.name}\ndev={dev_path.name}\nspace=hsv\n",
        encoding="utf-8")
    return manifest
