"""Command-line interface: data generation, training, evaluation, tracing,
single-question inference, and gradient validation.

Config precedence is built-in defaults < --config file < explicit flags.
Every run that writes outputs also writes a manifest.json next to them.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .data import Instance, load_dataset, save_dataset
from .deduction import run_chain, trace_record
from .encoder import EncoderConfig
from .generator import GenConfig, generate_synthetic_corpus
from .losses import LossWeights
from .metrics import emit_trace, format_report, module_eval, qa_accuracy
from .model import load_model, save_model
from .answering import predict_answer
from .training import AnswerTrainConfig, TrainConfig, train_answerer, train_reasoning, write_metric_log
from .validate import gradcheck_full_stack, gradcheck_linear_heads


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _merge(defaults: dict, file_cfg: dict, flags: dict) -> dict:
    merged = dict(defaults)
    for k, v in file_cfg.items():
        if k not in merged:
            raise UsageError(f"unknown config key {k!r}")
        merged[k] = v
    for k, v in flags.items():
        if v is not None:
            merged[k] = v
    return merged


def write_manifest(out_dir, command: str, config: dict, seed, inputs: dict, outputs: list, elapsed: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": inputs,
        "outputs": outputs,
        "artifact_version": __version__,
        "elapsed_seconds": round(elapsed, 3),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resolve_data_file(path) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    alt = p.with_suffix(".jsonl")
    if alt.is_file():
        return alt
    raise FileNotFoundError(f"no dataset file at {path}")


def _encoder_config(merged: dict) -> EncoderConfig:
    return EncoderConfig(
        d=merged["d"], layers=merged["layers"], heads=merged["heads"], ff=merged["ff"],
        n_max=merged["n_max"], m_max=merged["m_max"],
    )


def _add_encoder_flags(p):
    p.add_argument("--d", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--ff", type=int)
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--m-max", type=int, dest="m_max")


def cmd_gen_data(args) -> int:
    start = time.time()
    defaults = GenConfig().to_dict()
    flags = {
        "n_train": args.n_train, "n_dev": args.n_dev, "n_test": args.n_test,
        "ratio": args.ratio, "seed": args.seed,
        "two_relation_fraction": args.two_relation_frac, "lexicon_path": args.lexicon,
    }
    merged = _merge(defaults, _load_config_file(args.config), flags)
    cfg = GenConfig(**merged)
    corpus = generate_synthetic_corpus(cfg)
    out = Path(args.out)
    outputs = []
    for split, instances in corpus.items():
        path = out / f"{split}.jsonl"
        save_dataset(path, instances)
        outputs.append(str(path))
        print(f"wrote {len(instances)} instances to {path}")
    write_manifest(out, "gen-data", cfg.to_dict(), cfg.seed, {}, outputs, time.time() - start)
    return 0


def cmd_train_reason(args) -> int:
    start = time.time()
    defaults = {
        "lr": 1e-3, "batch_size": 32, "epochs": 12, "grad_accum": 1, "seed": 0,
        "threshold": 0.15, "min_count": 1, "disabled_heads": [],
        "d": 64, "layers": 2, "heads": 4, "ff": 256, "n_max": 64, "m_max": 64,
        "weights": LossWeights().to_dict(),
    }
    flags = {
        "lr": args.lr, "batch_size": args.batch_size, "epochs": args.epochs,
        "grad_accum": args.grad_accum, "seed": args.seed, "threshold": args.threshold,
        "d": args.d, "layers": args.layers, "heads": args.heads, "ff": args.ff,
        "n_max": args.n_max, "m_max": args.m_max,
        "disabled_heads": args.ablate.split(",") if args.ablate else None,
    }
    merged = _merge(defaults, _load_config_file(args.config), flags)
    config = TrainConfig(
        lr=merged["lr"], batch_size=merged["batch_size"], epochs=merged["epochs"],
        grad_accum=merged["grad_accum"], seed=merged["seed"], threshold=merged["threshold"],
        min_count=merged["min_count"], weights=LossWeights(**merged["weights"]),
        disabled_heads=tuple(h for h in merged["disabled_heads"] if h),
        encoder=_encoder_config(merged),
    )
    data_dir = Path(args.data)
    train = load_dataset(data_dir / "train.jsonl")
    dev_path = data_dir / "dev.jsonl"
    dev = load_dataset(dev_path) if dev_path.exists() else None
    model, records = train_reasoning(train, dev, config)
    out = Path(args.out)
    save_model(out, model)
    write_metric_log(out / "metrics.jsonl", records)
    if records:
        last = records[-1]
        print(f"final epoch: loss={last['loss']:.4f}" +
              (f" dev_average={last['dev_average']:.4f}" if "dev_average" in last else ""))
    write_manifest(out, "train-reason", config.to_dict(), config.seed,
                   {"data": str(data_dir)}, [str(out / "params.qrck"), str(out / "metrics.jsonl")],
                   time.time() - start)
    return 0


def cmd_train_answer(args) -> int:
    start = time.time()
    defaults = {
        "lr": 1e-3, "batch_size": 32, "epochs": 8, "grad_accum": 1, "seed": 0,
        "min_count": 1, "text_source": "gold", "threshold": 0.15,
        "d": 64, "layers": 2, "heads": 4, "ff": 256, "n_max": 32, "m_max": 64,
    }
    flags = {
        "lr": args.lr, "batch_size": args.batch_size, "epochs": args.epochs,
        "grad_accum": args.grad_accum, "seed": args.seed, "text_source": args.text_source,
        "threshold": args.threshold,
        "d": args.d, "layers": args.layers, "heads": args.heads, "ff": args.ff,
        "n_max": args.n_max, "m_max": args.m_max,
    }
    merged = _merge(defaults, _load_config_file(args.config), flags)
    config = AnswerTrainConfig(
        lr=merged["lr"], batch_size=merged["batch_size"], epochs=merged["epochs"],
        grad_accum=merged["grad_accum"], seed=merged["seed"], min_count=merged["min_count"],
        text_source=merged["text_source"], threshold=merged["threshold"],
        encoder=_encoder_config(merged),
    )
    reasoning = load_model(args.reason) if args.reason else None
    data_dir = Path(args.data)
    train = load_dataset(data_dir / "train.jsonl")
    dev_path = data_dir / "dev.jsonl"
    dev = load_dataset(dev_path) if dev_path.exists() else None
    model, records = train_answerer(train, dev, config, reasoning)
    out = Path(args.out)
    save_model(out, model)
    write_metric_log(out / "metrics.jsonl", records)
    if records:
        last = records[-1]
        print(f"final epoch: loss={last['loss']:.4f}" +
              (f" dev_accuracy={last['dev_accuracy']:.4f}" if "dev_accuracy" in last else ""))
    write_manifest(out, "train-answer", config.to_dict(), config.seed,
                   {"data": str(data_dir)}, [str(out / "params.qrck"), str(out / "metrics.jsonl")],
                   time.time() - start)
    return 0


def cmd_eval(args) -> int:
    start = time.time()
    reason = load_model(args.reason)
    answer = load_model(args.answer)
    data_path = _resolve_data_file(args.data)
    dataset = load_dataset(data_path)
    tau = args.threshold if args.threshold is not None else 0.15
    report = module_eval(reason, dataset, tau)
    accuracy, _ = qa_accuracy(reason, answer, dataset, tau)
    print(format_report(report))
    print(f"QA accuracy: {accuracy:.4f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = {"modules": report.to_dict(), "qa_accuracy": accuracy, "threshold": tau}
    (out / "report.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "eval", {"threshold": tau}, None,
                   {"reason": args.reason, "answer": args.answer, "data": str(data_path)},
                   [str(out / "report.json")], time.time() - start)
    return 0


def cmd_trace(args) -> int:
    start = time.time()
    reason = load_model(args.reason)
    answer = load_model(args.answer)
    data_path = _resolve_data_file(args.data)
    dataset = load_dataset(data_path)
    tau = args.threshold if args.threshold is not None else 0.15
    wanted = set(args.id) if args.id else None
    lines = []
    for instance, _ in dataset:
        if wanted is not None and instance.id not in wanted:
            continue
        trace = run_chain(instance, reason, tau)
        prediction = predict_answer(instance, trace.synthetic.text, answer)
        lines.append(emit_trace(instance, trace, prediction))
    if wanted is not None:
        missing = wanted - {json.loads(l)["id"] for l in lines}
        if missing:
            raise ValueError(f"ids not found in dataset: {sorted(missing)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces.jsonl").write_text("".join(line + "\n" for line in lines))
    for line in lines:
        print(line)
    write_manifest(out, "trace", {"threshold": tau, "ids": sorted(wanted) if wanted else None}, None,
                   {"reason": args.reason, "answer": args.answer, "data": str(data_path)},
                   [str(out / "traces.jsonl")], time.time() - start)
    return 0


def cmd_infer(args) -> int:
    start = time.time()
    reason = load_model(args.reason)
    answer = load_model(args.answer)
    tau = args.threshold if args.threshold is not None else 0.15
    if args.file:
        dataset = load_dataset(_resolve_data_file(args.file))
        if not len(dataset):
            raise ValueError("input file contains no instances")
        instance, _ = dataset.items[0]
    else:
        for flag in ("knowledge", "question", "option_a", "option_b"):
            if getattr(args, flag) is None:
                raise UsageError(f"--{flag.replace('_', '-')} is required without --file")
        instance = Instance(
            id="cli", knowledge=args.knowledge, question=args.question,
            options=(args.option_a, args.option_b), answer=0,
        )
    trace = run_chain(instance, reason, tau)
    prediction = predict_answer(instance, trace.synthetic.text, answer)
    record = trace_record(trace, prediction.index)
    print(json.dumps(record, sort_keys=True))
    print(f"answer: {prediction.index} ({instance.options[prediction.index]})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.json").write_text(json.dumps(record, sort_keys=True) + "\n")
        write_manifest(out, "infer", {"threshold": tau}, None,
                       {"reason": args.reason, "answer": args.answer},
                       [str(out / "trace.json")], time.time() - start)
    return 0


def cmd_gradcheck(args) -> int:
    start = time.time()
    full = gradcheck_full_stack(n=args.n, m=args.m, d=args.d, seed=args.seed or 0)
    linear = gradcheck_linear_heads(d=args.d, seed=args.seed or 0)
    ok_full = full < 1e-3
    ok_linear = linear < 1e-6
    print(f"full reasoning stack: max rel err {full:.3e} ({'PASS' if ok_full else 'FAIL'} < 1e-3)")
    print(f"linear scoring heads: max rel err {linear:.3e} ({'PASS' if ok_linear else 'FAIL'} < 1e-6)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gradcheck.json").write_text(json.dumps(
            {"full_stack": full, "linear_heads": linear}, indent=2, sort_keys=True) + "\n")
        write_manifest(out, "gradcheck", {"n": args.n, "m": args.m, "d": args.d}, args.seed,
                       {}, [str(out / "gradcheck.json")], time.time() - start)
    if not (ok_full and ok_linear):
        raise RuntimeError("gradient validation failed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="qreason", description="qualitative reasoning QA pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-dev", type=int, dest="n_dev")
    p.add_argument("--n-test", type=int, dest="n_test")
    p.add_argument("--ratio", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--two-relation-frac", type=float, dest="two_relation_frac")
    p.add_argument("--lexicon")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-reason", help="train the reasoning model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--grad-accum", type=int, dest="grad_accum")
    p.add_argument("--threshold", type=float)
    p.add_argument("--ablate", help="comma-separated heads to drop from the loss")
    _add_encoder_flags(p)
    p.add_argument("--config")
    p.set_defaults(func=cmd_train_reason)

    p = sub.add_parser("train-answer", help="train the answer model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reason", help="reasoning model dir (for --text-source model)")
    p.add_argument("--text-source", choices=("gold", "model", "knowledge"), dest="text_source")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--grad-accum", type=int, dest="grad_accum")
    p.add_argument("--threshold", type=float)
    _add_encoder_flags(p)
    p.add_argument("--config")
    p.set_defaults(func=cmd_train_answer)

    p = sub.add_parser("eval", help="module metrics plus end-to-end QA accuracy")
    p.add_argument("--reason", required=True)
    p.add_argument("--answer", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", help="emit reasoning traces")
    p.add_argument("--reason", required=True)
    p.add_argument("--answer", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--id", action="append")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("infer", help="answer a single question")
    p.add_argument("--reason", required=True)
    p.add_argument("--answer", required=True)
    p.add_argument("--knowledge")
    p.add_argument("--question")
    p.add_argument("--option-a", dest="option_a")
    p.add_argument("--option-b", dest="option_b")
    p.add_argument("--file", help="JSONL file; the first record is used")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--m", type=int, default=12)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        # argparse --version / --help exit through here
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
