"""Command-line interface for the text-only detection pipeline.

Subcommands::

    synth    render corpus words through prompt templates into caption text
    train    fit the trainable embeddings from .hemb stores
    score    score a store with a trained detector or a zero-shot baseline
    eval     turn two score CSVs into AUROC / FPR-at-TPR metrics
    theory   run the synthetic two-modality fixture end to end

Exit codes: 0 success, 1 I/O failure, 2 validation or format problem,
3 numerical failure.  ``HFTT_SEED`` provides a seed fallback when neither
a flag nor a config file sets one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

from . import __version__
from .errors import HFTTError, NumericalError, ValidationError
from .metrics import eval_report
from .scoring import SCORE_METHODS, export_scores, read_scores, score_baseline, score_hftt
from .store import TaskEmbeddings, load_store, save_store
from .synth import DEFAULT_TEMPLATE, PromptTemplate, load_templates, load_word_set, word2data
from .theory import (
    closed_form_classifier,
    default_bimodal_config,
    fit_quadratic_classifier,
    sample_bimodal,
    verify_corollary,
)
from .trainer import TrainConfig, load_model, save_model, train

_CONFIG_KEYS = (
    "batch_size",
    "learning_rate",
    "epochs",
    "n_trainable",
    "lam",
    "gamma",
    "seed",
    "loss_variant",
    "init",
    "renormalize",
    "shuffle",
)
_CONFIG_ALIASES = {"lambda": "lam", "lr": "learning_rate"}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONFIG_TYPES = {
    "batch_size": int,
    "learning_rate": float,
    "epochs": int,
    "n_trainable": int,
    "lam": float,
    "gamma": float,
    "seed": int,
    "loss_variant": str,
    "init": str,
    "renormalize": _parse_bool,
    "shuffle": _parse_bool,
}


def parse_config_file(path) -> dict:
    """Read ``key = value`` training options; ``#`` starts a comment.

    Keys are :class:`TrainConfig` field names (plus the ``lambda`` and
    ``lr`` aliases); anything else is rejected with its line number.
    """
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}, line {lineno}: expected key=value, got {raw!r}")
        key = _CONFIG_ALIASES.get(key.strip(), key.strip())
        if key not in _CONFIG_TYPES:
            raise ValidationError(f"{path}, line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_TYPES[key](value.strip())
        except ValueError as exc:
            raise ValidationError(f"{path}, line {lineno}: {exc}") from exc
    return values


def _resolve_seed(flag_value) -> int:
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get("HFTT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"HFTT_SEED must be an integer, got {env!r}") from None
    return 0


def _stem(path) -> str:
    return os.path.splitext(os.path.basename(os.fspath(path)))[0]


def _task_from_store_path(path) -> TaskEmbeddings:
    store = load_store(path)
    return TaskEmbeddings(store.matrix, store.labels or [])


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_synth(args) -> int:
    words = load_word_set(args.words)
    if args.templates:
        templates = load_templates(args.templates)
    else:
        templates = [PromptTemplate(DEFAULT_TEMPLATE)]
    texts = word2data(words, templates)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("".join(text + "\n" for text in texts))
    print(len(texts))
    return 0


def _build_train_config(args) -> TrainConfig:
    values = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    if "seed" not in values:
        values["seed"] = _resolve_seed(None)
    return TrainConfig(**values)


def cmd_train(args) -> int:
    config = _build_train_config(args)
    task = _task_from_store_path(args.task)
    in_texts = load_store(args.in_texts)
    corpus = load_store(args.corpus)
    report = train(config, task, in_texts, corpus)
    save_model(report.model, args.out, config=config)
    _write_json(
        os.path.join(args.out, "train_report.json"),
        {
            "steps": report.steps,
            "clamp_events": report.clamp_events,
            "final_loss": report.loss_trace[-1],
            "loss_trace": report.loss_trace,
            "config": asdict(config),
        },
    )
    print(
        f"{report.steps} steps, final loss {report.loss_trace[-1]:.6g}, "
        f"{report.clamp_events} clamp events"
    )
    print(f"model written to {args.out}")
    return 0


def cmd_score(args) -> int:
    store = load_store(args.input)
    name = _stem(args.input)
    if args.method == "hftt":
        if not args.model:
            raise ValidationError("--model is required for method hftt")
        if args.temperature is not None:
            raise ValidationError("--temperature only applies to the zero-shot baselines")
        model = load_model(args.model)
        score_set = score_hftt(model, store, name=name)
    else:
        if args.task:
            task = _task_from_store_path(args.task)
        elif args.model:
            task = load_model(args.model).task
        else:
            raise ValidationError(f"method {args.method} needs --task or --model")
        score_set = score_baseline(
            args.method, task, store, temperature=args.temperature, name=name
        )
    export_scores(score_set, args.out)
    print(f"wrote {len(score_set)} {args.method} scores to {args.out}")
    return 0


def cmd_eval(args) -> int:
    id_set = read_scores(args.id_scores)
    ood_set = read_scores(args.ood_scores)
    report = eval_report(id_set, ood_set, tpr=args.tpr)
    print(report.render())
    if args.out:
        _write_json(args.out, report.to_dict())
    return 0


def cmd_theory(args) -> int:
    config = default_bimodal_config(
        dim=args.dim,
        samples_per_class=args.samples,
        noise_scale=args.noise,
        seed=_resolve_seed(args.seed),
    )
    sample = sample_bimodal(config)
    theta_closed = closed_form_classifier(
        sample.u_minus.matrix.mean(axis=0), sample.u_plus.matrix.mean(axis=0)
    )
    theta_fitted = fit_quadratic_classifier(
        sample.u_minus, sample.u_plus, steps=args.steps, lr=args.lr
    )
    corollary = verify_corollary(theta_fitted, sample.v_minus, sample.v_plus)
    payload = {
        "dim": config.dim,
        "samples_per_class": config.samples_per_class,
        "noise_scale": config.noise_scale,
        "seed": config.seed,
        "cosine": float(theta_closed @ theta_fitted),
        "corollary": {
            "mean_minus": corollary.mean_minus,
            "mean_plus": corollary.mean_plus,
            "holds": corollary.holds,
        },
        "theta_closed": theta_closed.tolist(),
        "theta_fitted": theta_fitted.tolist(),
    }
    if args.dump_dir:
        os.makedirs(args.dump_dir, exist_ok=True)
        for key in ("u_minus", "u_plus", "v_minus", "v_plus"):
            save_store(getattr(sample, key), os.path.join(args.dump_dir, f"{key}.hemb"))
    print(json.dumps(payload, indent=2))
    if args.out:
        _write_json(args.out, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hftt",
        description="Train and evaluate unwanted-content detectors from text embeddings only.",
    )
    parser.add_argument("--version", action="version", version=f"hftt {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="render corpus words through prompt templates")
    p.add_argument("--words", required=True, help="newline-delimited word list")
    p.add_argument(
        "--templates",
        help=f"newline-delimited prompt templates (default: {DEFAULT_TEMPLATE!r})",
    )
    p.add_argument("--out", required=True, help="output text file, one caption per line")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit trainable embeddings from .hemb stores")
    p.add_argument("--corpus", required=True, help="mixed corpus embeddings (.hemb)")
    p.add_argument("--in-texts", required=True, dest="in_texts",
                   help="in-distribution text embeddings (.hemb)")
    p.add_argument("--task", required=True, help="task anchor embeddings (.hemb)")
    p.add_argument("--out", required=True, help="model output directory")
    p.add_argument("--config", help="key=value options file; flags override it")
    p.add_argument("--batch-size", type=int, dest="batch_size",
                   help="corpus batch size (default: 256)")
    p.add_argument("--lr", type=float, dest="learning_rate",
                   help="SGD learning rate (default: 1.0)")
    p.add_argument("--epochs", type=int, help="passes over the corpus (default: 1)")
    p.add_argument("--n-trainable", type=int, dest="n_trainable",
                   help="number of trainable embeddings (default: 10)")
    p.add_argument("--lambda", type=float, dest="lam",
                   help="in-term weight trade-off (default: 0.0)")
    p.add_argument("--gamma", type=float, help="focal exponent (default: 1.0)")
    p.add_argument("--seed", type=int, help="RNG seed (default: HFTT_SEED or 0)")
    p.add_argument("--loss-variant", choices=("union", "disjoint"), dest="loss_variant",
                   help="objective variant (default: union)")
    p.add_argument("--init", choices=("random_unit", "corpus_mean_perturbed"),
                   help="trainable initialization (default: random_unit)")
    p.add_argument("--renormalize", action=argparse.BooleanOptionalAction, default=None,
                   help="renormalize after every step (default: on)")
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=None,
                   help="shuffle the corpus every epoch (default: on)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a store with a detector or baseline")
    p.add_argument("--input", required=True, help="embeddings to score (.hemb)")
    p.add_argument("--method", choices=SCORE_METHODS, default="hftt",
                   help="scoring method (default: hftt)")
    p.add_argument("--model", help="trained model directory")
    p.add_argument("--task", help="task embeddings (.hemb) for the baselines")
    p.add_argument("--temperature", type=float,
                   help="baseline temperature override (mcm default: 1.0)")
    p.add_argument("--out", required=True, help="output CSV (id,score)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compare id/ood score CSVs")
    p.add_argument("--id", required=True, dest="id_scores", help="in-distribution score CSV")
    p.add_argument("--ood", required=True, dest="ood_scores", help="out-distribution score CSV")
    p.add_argument("--tpr", type=float, default=0.95,
                   help="recall level for the FPR metric (default: 0.95)")
    p.add_argument("--out", help="write the report as JSON here as well")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("theory", help="run the synthetic two-modality fixture")
    p.add_argument("--dim", type=int, default=64, help="embedding dimension (default: 64)")
    p.add_argument("--samples", type=int, default=10_000,
                   help="samples per mode (default: 10000)")
    p.add_argument("--noise", type=float, default=0.3,
                   help="Gaussian noise scale (default: 0.3)")
    p.add_argument("--seed", type=int, help="RNG seed (default: HFTT_SEED or 0)")
    p.add_argument("--steps", type=int, default=500,
                   help="gradient steps for the empirical fit (default: 500)")
    p.add_argument("--lr", type=float, default=0.1,
                   help="learning rate for the empirical fit (default: 0.1)")
    p.add_argument("--dump-dir", dest="dump_dir",
                   help="also write the four sampled stores here as .hemb")
    p.add_argument("--out", help="write the JSON report here as well")
    p.set_defaults(func=cmd_theory)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return int(args.func(args) or 0)
    except NumericalError as exc:
        return _fail(exc, 3)
    except HFTTError as exc:
        return _fail(exc, 2)
    except OSError as exc:
        return _fail(exc, 1)


def _fail(exc, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
