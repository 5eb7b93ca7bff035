"""Span-supervision ablation: train with and without the cause/effect span
losses over several seeds and compare dev polarity accuracy.

Usage: python scripts/run_ablation.py [--seeds 0 1 2] [--epochs 8] [--n-train 800]
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from qreason.validate import ablation_polarity_comparison


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--two-relation-frac", type=float, default=1.0)
    args = ap.parse_args()

    joint, ablated = ablation_polarity_comparison(
        seeds=tuple(args.seeds), n_train=args.n_train, epochs=args.epochs,
        two_relation_fraction=args.two_relation_frac,
    )
    for seed, j, a in zip(args.seeds, joint, ablated):
        print(f"seed {seed}: joint polarity {j:.4f} | no span supervision {a:.4f}")
    mj, ma = float(np.mean(joint)), float(np.mean(ablated))
    print(f"mean:   joint polarity {mj:.4f} | no span supervision {ma:.4f}")
    print("span supervision helps polarity" if mj > ma else "NO degradation observed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
