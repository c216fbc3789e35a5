"""
Command line entry point: ``pulsetrain {synth,detect,train,classify,eval,run}``.

Exit codes: 0 ok, 2 usage, 3 data error, 4 schema/config error.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import synth as synth_mod
from .audio_io import AudioError
from .classifier import ClassifierError, SchemaMismatchError, load_model, save_model, train_forest
from .config import ConfigError, RunConfig, derive_seed, load_config
from .evaluation import EvaluationError, split_train_test
from .pipeline import (NoInputsError, classify_events, detect_inputs, evaluate_events, holdout_metrics,
                       label_events, load_truth, read_events_csv, write_diagnostics_csv,
                       write_events_csv, write_projections_csv, write_roc_csv)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SCHEMA = 0, 2, 3, 4

log = logging.getLogger("pulsetrain")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    audio = cfg.audio
    for flag, key in (("channel", "channel"), ("window_s", "window_s"), ("hop_s", "hop_s")):
        value = getattr(args, flag, None)
        if value is not None:
            audio = replace(audio, **{key: value})
    cfg.audio = audio
    if getattr(args, "threshold", None) is not None and args.command in ("classify", "run"):
        cfg.forest = replace(cfg.forest, decision_threshold=args.threshold)
    return cfg


def _write_report(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_synth(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    if args.spec:
        with open(args.spec) as fh:
            spec = synth_mod.SynthSpec.from_dict(json.load(fh))
        stream, truth = synth_mod.generate_clip(spec)
        synth_mod.write_clip(out, Path(args.spec).stem, stream, truth)
        return EXIT_OK
    base = derive_seed(cfg.seed, "synth")
    for i in range(args.count):
        seed = (base + i) % 2 ** 63
        if args.preset == "minke":
            spec = synth_mod.minke_preset(seed, args.snr_db)
        elif args.preset == "distractor":
            spec = synth_mod.distractor_preset(seed, args.snr_db)
        else:
            spec = synth_mod.noise_preset(seed, args.duration_s)
        stream, truth = synth_mod.generate_clip(spec)
        synth_mod.write_clip(out, f"{args.preset}_{i:04d}", stream, truth)
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    run = detect_inputs(args.input, cfg, args.workers, keep_projections=bool(args.dump_projections))
    if args.truth:
        label_events(run.events, load_truth(args.truth, run.sources), cfg.eval.match_fraction)
    write_events_csv(args.out, run.events)
    if args.diagnostics:
        write_diagnostics_csv(args.diagnostics, run.slices)
    if args.dump_projections:
        write_projections_csv(args.dump_projections, run.slices)
    log.info("%d slices, %d events -> %s", len(run.slices), len(run.events), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    events = [d for d in read_events_csv(args.features) if d.label in ("minke", "non-minke")]
    if not events:
        raise ClassifierError(f"{args.features}: no labeled rows")
    fvs = [d.features for d in events]
    params = cfg.forest_params()
    report = {}
    if args.split:
        train_idx, test_idx = split_train_test([f.label for f in fvs], cfg.eval.train_fraction,
                                               derive_seed(cfg.seed, "split"))
        model = train_forest([fvs[i] for i in train_idx], params)
        report = holdout_metrics(model, [fvs[i] for i in test_idx], cfg.forest.decision_threshold)
        report.update(n_train=len(train_idx), n_test=len(test_idx))
    else:
        model = train_forest(fvs, params)
    report["oob_accuracy"] = model.oob_accuracy
    save_model(model, args.out)
    if args.report:
        _write_report(args.report, report)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    model = load_model(args.model)
    events = read_events_csv(args.events)
    classify_events(events, model, cfg.forest.decision_threshold)
    write_events_csv(args.out or args.events, events)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    events = read_events_csv(args.pred)
    sources = sorted({d.event.source_path for d in events})
    truth = load_truth(args.truth, sources)
    result = evaluate_events(events, truth, args.slices, args.hours, cfg.eval.match_fraction,
                             predicted_only=args.classified)
    _write_report(args.out, _eval_payload(result))
    if args.roc:
        _write_roc(args.roc, result)
    return EXIT_OK


def _eval_payload(result) -> dict:
    cm = result.confusion
    metrics = result.metrics.as_dict()
    if np.isnan(metrics["auc"]):
        metrics["auc"] = None
    return {"confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn, "hours": cm.hours},
            "metrics": metrics}


def _write_roc(path, result) -> None:
    if result.roc is None:
        raise EvaluationError("ROC needs scored events of both outcomes")
    write_roc_csv(path, *result.roc[:3])


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.eval and not args.truth:
        raise EvaluationError("--eval requires --truth")
    model = load_model(args.model)
    run = detect_inputs(args.input, cfg, args.workers)
    classify_events(run.events, model, cfg.forest.decision_threshold)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = load_truth(args.truth, run.sources) if args.truth else None
    if truth is not None:
        label_events(run.events, truth, cfg.eval.match_fraction)
    write_events_csv(out / "events.csv", run.events)
    write_diagnostics_csv(out / "slices.csv", run.slices)
    if truth is None:
        return EXIT_OK
    system = evaluate_events(run.events, truth, len(run.slices), run.hours,
                             cfg.eval.match_fraction, predicted_only=True)
    detector = evaluate_events(run.events, truth, len(run.slices), run.hours,
                               cfg.eval.match_fraction, predicted_only=False)
    payload = _eval_payload(system)
    payload["detector_only"] = _eval_payload(detector)
    payload["n_slices"] = len(run.slices)
    _write_report(out / "report.json", payload)
    if args.sweep:
        _write_roc(out / "roc.csv", system)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulsetrain", description=__doc__.strip().splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, audio=False):
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--seed", type=int)
        if audio:
            sp.add_argument("--input", required=True, help="WAV file or directory of WAV files")
            sp.add_argument("--channel", type=int)
            sp.add_argument("--window-s", dest="window_s", type=float)
            sp.add_argument("--hop-s", dest="hop_s", type=float)
            sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("synth", help="write synthetic clips with truth CSVs")
    common(sp)
    sp.add_argument("--spec", help="JSON SynthSpec")
    sp.add_argument("--preset", choices=("minke", "distractor", "noise"), default="minke")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--snr-db", dest="snr_db", type=float, default=15.0)
    sp.add_argument("--duration-s", dest="duration_s", type=float, default=3600.0,
                    help="noise preset length")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("detect", help="run the detector and extract features")
    common(sp, audio=True)
    sp.add_argument("--out", required=True, help="events + features CSV")
    sp.add_argument("--truth", help="truth CSV or directory of <stem>.truth.csv, to label events")
    sp.add_argument("--diagnostics", help="per-slice diagnostics CSV")
    sp.add_argument("--dump-projections", dest="dump_projections", help="per-slice P(n) CSV")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("train", help="train the random forest on labeled events")
    common(sp)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--split", action="store_true", help="hold out a stratified test part")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("classify", help="score events with a trained model")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--events", required=True)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("eval", help="score events against truth")
    common(sp)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--slices", type=int, required=True)
    sp.add_argument("--hours", type=float, required=True)
    sp.add_argument("--classified", action="store_true",
                    help="count only events predicted minke")
    sp.add_argument("--out", required=True)
    sp.add_argument("--roc")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("run", help="detect, classify and optionally evaluate")
    common(sp, audio=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--truth")
    sp.add_argument("--eval", action="store_true")
    sp.add_argument("--sweep", action="store_true", help="also write roc.csv")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--out-dir", dest="out_dir", required=True)
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SchemaMismatchError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NoInputsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AudioError, ClassifierError, EvaluationError, synth_mod.SynthSpecError,
            FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
