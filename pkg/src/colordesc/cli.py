"""Command-line entry points.

Subcommands: train, eval, compare, sample, top1, denotation.

Exit codes are a stable scripting contract: 0 success, 2 for bad usage,
configuration, or input files, 3 for runtime/numeric failures (training
divergence, undefined metrics, unwritable outputs).
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .colors import ColorHSL, ColorHSV, hsl_to_hsv
from .corpus import Description, load_manifest, tokenize
from .errors import ColordescError, ConfigError
from .evaluation import EvalReport, evaluate, permutation_test
from .models import load_checkpoint, save_checkpoint, train_model
from .nn import TrainingConfig
from .viz import GridSpec, cross_sections, describe_slug, probability_field, render

FAMILY_ALIASES = {
    "rnn": "sequence",
    "sequence": "sequence",
    "atomic": "atomic",
    "hm": "histogram",
    "histogram": "histogram",
}

PRNG_ID = "numpy.PCG64"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_run_meta(outdir: Path, command: str, settings: dict) -> None:
    meta = {
        "command": command,
        "settings": settings,
        "prng": PRNG_ID,
        "version": __version__,
        "timestamp": _now(),
    }
    with open(outdir / "run-meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_triple(text: str, what: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--{what} expects three comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--{what} expects numbers, got {text!r}") from exc


def _color_from_args(args) -> ColorHSV:
    if getattr(args, "hsv", None) and getattr(args, "hsl", None):
        raise ConfigError("give either --hsv or --hsl, not both")
    if getattr(args, "hsv", None):
        h, s, v = _parse_triple(args.hsv, "hsv")
        try:
            return ColorHSV(h, s, v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if getattr(args, "hsl", None):
        h, s, l = _parse_triple(args.hsl, "hsl")
        try:
            return hsl_to_hsv(ColorHSL(h, s, l))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError("a color is required: --hsv h,s,v or --hsl h,s,l")


# -- config-file handling (train only): plain key=value lines, flags win


def _read_config_file(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_BOOL_STRINGS = {"true": True, "1": True, "yes": True,
                 "false": False, "0": False, "no": False}


def _coerce_like(key: str, text: str, default):
    if isinstance(default, bool):
        flag = _BOOL_STRINGS.get(text.lower())
        if flag is None:
            raise ConfigError(f"config key {key}: expected a boolean, got {text!r}")
        return flag
    try:
        if isinstance(default, int) and not isinstance(default, bool):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: bad value {text!r}") from exc
    return text


def _apply_config_file(args, parser_defaults: dict) -> None:
    """File values fill in any option still at its parser default."""
    if not args.config:
        return
    values = _read_config_file(Path(args.config))
    unknown = set(values) - set(parser_defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, text in values.items():
        default = parser_defaults[key]
        if getattr(args, key) == default:
            setattr(args, key, _coerce_like(key, text, default))


# -- subcommands


def cmd_train(args, parser_defaults: dict) -> int:
    _apply_config_file(args, parser_defaults)
    if not args.data:
        raise ConfigError("missing required option: data (split manifest path)")
    if not args.out:
        raise ConfigError("missing required option: out (output directory)")
    family = FAMILY_ALIASES.get(args.family)
    if family is None:
        raise ConfigError(f"unknown family {args.family!r}")
    splits = load_manifest(args.data)
    if "train" not in splits:
        raise ConfigError(f"manifest {args.data} does not define a train split")
    train_ds = splits["train"]
    dev_ds = splits.get("dev")
    if args.subsample_train:
        train_ds = train_ds.subsample(args.subsample_train, args.seed)

    config = TrainingConfig(
        learning_rate=args.lr,
        dropout=args.dropout,
        hidden_size=args.hidden,
        embedding_dim=args.embedding_dim,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        evals_per_epoch=args.evals_per_epoch,
        seed=args.seed,
        conditioning=args.conditioning,
    ).validate()

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    model, history = train_model(family, train_ds, config,
                                 scheme=args.features, dev=dev_ds)
    ckpt_path = outdir / "model.ckpt"
    save_checkpoint(model, ckpt_path)
    log_path = outdir / "train-log.txt"
    with open(log_path, "w", encoding="utf-8") as fh:
        for rec in history:
            line = (f"epoch={rec['epoch']:.4f} split={rec['split']} "
                    f"perplexity={rec['perplexity']:.6f}")
            fh.write(line + "\n")
            print(line)
    settings = {
        "family": family, "features": args.features, "data": str(args.data),
        "out": str(outdir), "subsample_train": args.subsample_train,
        "deterministic": args.deterministic, "config": config.to_dict(),
    }
    _write_run_meta(outdir, "train", settings)
    print(f"checkpoint: {ckpt_path}")
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.ckpt)
    splits = load_manifest(args.data)
    if args.split not in splits:
        raise ConfigError(f"manifest {args.data} does not define split {args.split!r}")
    ds = splits[args.split]
    beam = None if args.skip_accuracy else args.beam
    report = evaluate(model, ds, split=args.split, beam_width=beam,
                      on_zero="exclude" if args.allow_zero else "error",
                      timestamp=_now())
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report_path = outdir / f"eval-{args.split}.json"
    report.save(report_path)
    _write_run_meta(outdir, "eval", {
        "ckpt": str(args.ckpt), "data": str(args.data), "split": args.split,
        "beam": args.beam, "skip_accuracy": args.skip_accuracy,
        "allow_zero": args.allow_zero, "out": str(outdir),
    })
    print(report.summary_line())
    print(f"report: {report_path}")
    return 0


def _paired_vectors(ra: EvalReport, rb: EvalReport, metric: str):
    if ra.n_items != rb.n_items:
        raise ConfigError(
            f"reports cover different item counts ({ra.n_items} vs {rb.n_items})")
    if metric == "perplexity":
        a = np.asarray(ra.log2_probs, dtype=np.float64)
        b = np.asarray(rb.log2_probs, dtype=np.float64)
    elif metric == "accuracy":
        if ra.hits is None or rb.hits is None:
            raise ConfigError("both reports need per-item hits; rerun eval without --skip-accuracy")
        a = np.asarray(ra.hits, dtype=np.float64)
        b = np.asarray(rb.hits, dtype=np.float64)
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    finite = np.isfinite(a) & np.isfinite(b)
    return a[finite], b[finite], int((~finite).sum())


def cmd_compare(args) -> int:
    ra = EvalReport.load(args.report_a)
    rb = EvalReport.load(args.report_b)
    a, b, dropped = _paired_vectors(ra, rb, args.metric)
    p = permutation_test(a, b, rounds=args.rounds, seed=args.seed)
    record = {
        "metric": args.metric,
        "n_pairs": int(a.size),
        "dropped_pairs": dropped,
        "mean_a": float(a.mean()),
        "mean_b": float(b.mean()),
        "mean_difference": float((a - b).mean()),
        "p_value": p,
        "rounds": args.rounds,
        "seed": args.seed,
        "report_a": str(args.report_a),
        "report_b": str(args.report_b),
    }
    text = json.dumps(record, indent=2, sort_keys=True)
    print(text)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "compare.json").write_text(text + "\n", encoding="utf-8")
        _write_run_meta(outdir, "compare", {k: record[k] for k in
                                            ("metric", "rounds", "seed",
                                             "report_a", "report_b")})
    return 0


def cmd_sample(args) -> int:
    model = load_checkpoint(args.ckpt)
    color = _color_from_args(args)
    rng = np.random.default_rng(args.seed)
    for _ in range(args.n):
        desc = model.sample(color, rng, max_len=args.max_len)
        print(" ".join(desc.tokens))
    return 0


def cmd_top1(args) -> int:
    model = load_checkpoint(args.ckpt)
    color = _color_from_args(args)
    desc = model.predict_top1(color, beam_width=args.beam, max_len=args.max_len)
    print(" ".join(desc.tokens))
    return 0


def cmd_denotation(args) -> int:
    model = load_checkpoint(args.ckpt)
    tokens = tokenize(args.desc)
    if not tokens:
        raise ConfigError("description is empty after tokenization")
    if model.family == "sequence":
        known = [t for t in tokens if t in model.vocab.token_to_id]
        if not known:
            raise ConfigError(
                f"every token of {args.desc!r} is out of vocabulary")
    else:
        if tuple(tokens) not in model.index:
            raise ConfigError(
                f"description {args.desc!r} is not in the model inventory")
    grid = GridSpec.parse(args.grid)
    desc = Description(raw=args.desc, tokens=tokens)
    field = probability_field(model, desc, grid)
    sec_l, sec_r = cross_sections(field)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    slug = describe_slug(desc)
    path_l = outdir / f"{slug}-L.pgm"
    path_r = outdir / f"{slug}-R.pgm"
    render(sec_l, path_l)
    render(sec_r, path_r)
    meta = {
        "description": args.desc,
        "tokens": tokens,
        "grid": list(grid.dims),
        "checkpoint": str(args.ckpt),
        "files": {"L": path_l.name, "R": path_r.name},
        "prng": PRNG_ID,
        "version": __version__,
        "timestamp": _now(),
    }
    with open(outdir / f"{slug}-meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path_l} and {path_r}")
    return 0


# -- parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="colordesc",
        description="Train, evaluate, and probe color-description models.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a split manifest")
    p_train.add_argument("--config", default="", help="key=value defaults file")
    p_train.add_argument("--family", default="rnn",
                         choices=sorted(FAMILY_ALIASES))
    p_train.add_argument("--features", default="fourier",
                         choices=("raw", "fourier", "buckets"))
    p_train.add_argument("--data", default="", help="split manifest path")
    p_train.add_argument("--out", default="", help="output directory")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--epochs", type=int, default=10)
    p_train.add_argument("--batch-size", type=int, default=128)
    p_train.add_argument("--lr", type=float, default=0.1)
    p_train.add_argument("--dropout", type=float, default=0.2)
    p_train.add_argument("--hidden", type=int, default=20)
    p_train.add_argument("--embedding-dim", type=int, default=20)
    p_train.add_argument("--patience", type=int, default=2)
    p_train.add_argument("--evals-per-epoch", type=int, default=2)
    p_train.add_argument("--conditioning", default="every-step",
                         choices=("every-step", "init-state"))
    p_train.add_argument("--subsample-train", type=int, default=0,
                         help="train on a seeded random subsample of this size")
    p_train.add_argument("--deterministic", action="store_true",
                         help="recorded in run metadata; reductions are "
                              "fixed-order in either case")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--split", default="dev",
                        choices=("train", "dev", "test"))
    p_eval.add_argument("--beam", type=int, default=10)
    p_eval.add_argument("--skip-accuracy", action="store_true")
    p_eval.add_argument("--allow-zero", action="store_true",
                        help="exclude zero-probability items instead of failing")
    p_eval.add_argument("--out", required=True, help="output directory")

    p_cmp = sub.add_parser("compare", help="paired permutation test on two reports")
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.add_argument("--metric", default="perplexity",
                       choices=("perplexity", "accuracy"))
    p_cmp.add_argument("--rounds", type=int, default=10000)
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--out", default="")

    p_sample = sub.add_parser("sample", help="sample descriptions for a color")
    p_sample.add_argument("--ckpt", required=True)
    p_sample.add_argument("--hsv", default="")
    p_sample.add_argument("--hsl", default="")
    p_sample.add_argument("--n", type=int, default=1)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--max-len", type=int, default=20)

    p_top1 = sub.add_parser("top1", help="most likely description for a color")
    p_top1.add_argument("--ckpt", required=True)
    p_top1.add_argument("--hsv", default="")
    p_top1.add_argument("--hsl", default="")
    p_top1.add_argument("--beam", type=int, default=10)
    p_top1.add_argument("--max-len", type=int, default=20)

    p_den = sub.add_parser("denotation",
                           help="render cross-section images for a description")
    p_den.add_argument("--ckpt", required=True)
    p_den.add_argument("--desc", required=True)
    p_den.add_argument("--grid", default="120x50x50")
    p_den.add_argument("--outdir", required=True)

    return parser, {a.dest: a.default for a in p_train._actions
                    if a.dest != "help"}


def main(argv=None) -> int:
    parser, train_defaults = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args, train_defaults)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "sample":
            return cmd_sample(args)
        if args.command == "top1":
            return cmd_top1(args)
        if args.command == "denotation":
            return cmd_denotation(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ColordescError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
