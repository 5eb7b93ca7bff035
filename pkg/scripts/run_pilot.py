"""End-to-end pilot: generate the default corpus, train both models, and
report module metrics, QA accuracy, and wall-clock timings.

Usage: python scripts/run_pilot.py [workdir] [--epochs-reason N] [--epochs-answer N] [--seed S]
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from qreason.data import load_dataset, save_dataset
from qreason.generator import GenConfig, generate_synthetic_corpus
from qreason.metrics import format_report, module_eval, qa_accuracy, random_baseline
from qreason.model import save_model
from qreason.training import AnswerTrainConfig, TrainConfig, train_answerer, train_reasoning, write_metric_log


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("workdir", nargs="?", default="pilot_run")
    ap.add_argument("--epochs-reason", type=int, default=TrainConfig().epochs)
    ap.add_argument("--epochs-answer", type=int, default=AnswerTrainConfig().epochs)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--two-relation-frac", type=float, default=GenConfig().two_relation_fraction)
    ap.add_argument("--grad-accum", type=int, default=1)
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    gen = GenConfig(n_train=args.n_train, n_dev=400, n_test=400, seed=args.seed,
                    two_relation_fraction=args.two_relation_frac)
    corpus = generate_synthetic_corpus(gen)
    for split, instances in corpus.items():
        save_dataset(work / f"{split}.jsonl", instances)
    train = load_dataset(work / "train.jsonl")
    dev = load_dataset(work / "dev.jsonl")
    test = load_dataset(work / "test.jsonl")
    t_gen = time.time() - t0
    print(f"[gen] {len(train)}/{len(dev)}/{len(test)} instances in {t_gen:.1f}s", flush=True)

    t1 = time.time()
    rc = TrainConfig(epochs=args.epochs_reason, seed=args.seed, grad_accum=args.grad_accum)
    reason, rlog = train_reasoning(train, dev, rc)
    save_model(work / "reason", reason)
    write_metric_log(work / "reason" / "metrics.jsonl", rlog)
    t_reason = time.time() - t1
    for rec in rlog:
        print(json.dumps({k: round(v, 4) if isinstance(v, float) else v for k, v in rec.items()
                          if k in ("epoch", "loss", "dev_average")}), flush=True)
    print(f"[train-reason] {t_reason:.1f}s", flush=True)

    t2 = time.time()
    ac = AnswerTrainConfig(epochs=args.epochs_answer, seed=args.seed)
    answer, alog = train_answerer(train, dev, ac)
    save_model(work / "answer", answer)
    write_metric_log(work / "answer" / "metrics.jsonl", alog)
    t_answer = time.time() - t2
    for rec in alog:
        print(json.dumps({k: round(v, 4) if isinstance(v, float) else v for k, v in rec.items()
                          if k in ("epoch", "loss", "dev_accuracy")}), flush=True)
    print(f"[train-answer] {t_answer:.1f}s", flush=True)

    t3 = time.time()
    report = module_eval(reason, test, rc.threshold)
    acc, _ = qa_accuracy(reason, answer, test, rc.threshold)
    t_eval = time.time() - t3
    print(format_report(report))
    print(f"QA accuracy (test): {acc:.4f}")
    print(f"random baseline:    {random_baseline(test, seed=args.seed):.4f}")
    print(f"[eval] {t_eval:.1f}s")
    print(f"[total] {time.time() - t0:.1f}s")

    summary = {
        "modules": report.to_dict(),
        "qa_accuracy": acc,
        "timings": {"gen": t_gen, "train_reason": t_reason, "train_answer": t_answer, "eval": t_eval,
                    "total": time.time() - t0},
    }
    (work / "pilot_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
