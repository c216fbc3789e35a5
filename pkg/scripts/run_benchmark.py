"""
Synthetic benchmark: detector recall vs SNR, false events on pure noise, and the
held-out forest scores on a balanced minke/distractor event set.

    python scripts/run_benchmark.py --out results/benchmark.json
"""

import argparse
import json
import time
from pathlib import Path

from pulsetrain.benchmark import build_event_dataset, detector_recall, holdout_forest, noise_false_events
from pulsetrain.config import RunConfig, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--clips", type=int, default=100)
    ap.add_argument("--snr", type=float, nargs="+", default=[5.0, 10.0, 15.0, 20.0])
    ap.add_argument("--noise-hours", type=float, default=1.0)
    ap.add_argument("--noise-kind", choices=("white", "pink"), default="white")
    ap.add_argument("--events-per-class", type=int, default=200)
    ap.add_argument("--out", default="results/benchmark.json")
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else RunConfig()
    out = {"seed": args.seed, "noise_kind": args.noise_kind, "recall": {}}
    t0 = time.perf_counter()
    for snr in args.snr:
        r = detector_recall(args.clips, snr, args.seed, cfg, args.noise_kind)
        out["recall"][str(snr)] = {"detected": r.n_detected, "trains": r.n_trains, "recall": r.recall}
        print(f"SNR {snr:5.1f} dB: recall {r.n_detected}/{r.n_trains}")
    noise = noise_false_events(args.noise_hours, args.seed, cfg, args.noise_kind)
    out["noise"] = {"hours": args.noise_hours, "false_events": len(noise)}
    print(f"{len(noise)} false events in {args.noise_hours} h of {args.noise_kind} noise")

    events = build_event_dataset(args.events_per_class, args.seed, cfg)
    run = holdout_forest(events, args.seed, cfg)
    out["forest"] = dict(run.metrics, n_train=run.n_train, n_test=run.n_test,
                         oob_accuracy=run.model.oob_accuracy)
    print("held-out: " + ", ".join(f"{k} {v:.3f}" for k, v in run.metrics.items()
                                   if isinstance(v, float)))
    out["seconds"] = time.perf_counter() - t0

    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
