"""
Decision-threshold sweep of the forest on a held-out synthetic event set:
TPR/FPR/PPV/F1 per threshold, plus the ROC area.

    python scripts/threshold_sweep.py --out results/sweep.csv
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from pulsetrain.benchmark import build_event_dataset, holdout_forest
from pulsetrain.classifier import predict_scores
from pulsetrain.config import RunConfig, derive_seed
from pulsetrain.evaluation import ConfusionMatrix, compute_metrics, roc_auc, split_train_test


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--events-per-class", type=int, default=200)
    ap.add_argument("--snr-range", type=float, nargs=2, default=[5.0, 15.0])
    ap.add_argument("--out", default="results/sweep.csv")
    args = ap.parse_args()

    cfg = RunConfig(seed=args.seed)
    events = build_event_dataset(args.events_per_class, args.seed, cfg, tuple(args.snr_range))
    run = holdout_forest(events, args.seed, cfg)
    labels = [d.features.label for d in events]
    _, test_idx = split_train_test(labels, cfg.eval.train_fraction, derive_seed(args.seed, "split"))
    X = np.array([events[i].features.to_array() for i in test_idx])
    y = np.array([labels[i] == "minke" for i in test_idx])
    scores = predict_scores(run.model, X)

    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "tpr", "fpr", "ppv", "f1"])
        for thr in np.linspace(0.0, 1.0, 11):
            pred = scores >= thr
            cm = ConfusionMatrix(int(np.sum(pred & y)), int(np.sum(pred & ~y)),
                                 int(np.sum(~pred & ~y)), int(np.sum(~pred & y)))
            m = compute_metrics(cm, need_fp_per_hour=False)
            w.writerow([f"{thr:.1f}", f"{m.tpr:.4f}", f"{m.fpr:.4f}", f"{m.ppv:.4f}", f"{m.f1:.4f}"])
            print(f"threshold {thr:.1f}: TPR {m.tpr:.3f} FPR {m.fpr:.3f} PPV {m.ppv:.3f} F1 {m.f1:.3f}")
    print(f"AUC {roc_auc(scores, y)[3]:.4f}; wrote {path}")


if __name__ == "__main__":
    main()
