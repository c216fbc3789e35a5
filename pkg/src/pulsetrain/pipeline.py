"""
Batch orchestration shared by the CLI and the experiment scripts.

Slices are independent: each is filtered, binarized, projected and ruled on,
and accepted events get their features straight away. Events from
overlapping slices are then merged in time order; a merged event keeps the
features of its member with the most peaks (earliest on ties).
"""

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .audio_io import AudioStream, SignalSlice, iter_file_slices, slice_windows, wav_info
from .classifier import CLASSES, ForestModel, SchemaMismatchError, predict_scores
from .config import RunConfig
from .detector import DetectorConfig, PulseTrainEvent, analyze_slice, merge_groups, _union
from .evaluation import (ConfusionMatrix, Interval, MetricsReport, compute_metrics,
                         match_events_to_truth, overlaps_enough, roc_auc)
from .features import FEATURE_NAMES, FeatureVector, extract_features

EVENT_COLUMNS = ("source", "slice_id", "start_s", "end_s", "n_peaks", "n_slices",
                 "f_lo_hz", "f_hi_hz", "reason", "score", "predicted", "label")
DIAGNOSTIC_COLUMNS = ("source", "slice_id", "start_s", "n_peaks", "conformity", "gamma",
                      "mu", "sigma", "white_fraction", "reason")


class NoInputsError(FileNotFoundError):
    pass


@dataclass
class DetectedEvent:
    event: PulseTrainEvent
    features: FeatureVector
    label: str = "unlabeled"
    predicted: str = ""


@dataclass
class SliceOutcome:
    slice_id: str
    source: str
    start_time: float
    n_peaks: int
    conformity: float
    gamma: float
    mu: float
    sigma: float
    white_fraction: float
    reason: str
    events: List[DetectedEvent]
    projection: Optional[np.ndarray] = None
    time_bin_s: float = 0.0
    frame_offset_s: float = 0.0


@dataclass
class DetectionRun:
    events: List[DetectedEvent] = field(default_factory=list)
    slices: List[SliceOutcome] = field(default_factory=list)
    hours: float = 0.0
    sources: List[str] = field(default_factory=list)


def process_slice(slc: SignalSlice, det: DetectorConfig, extent_s: float = 0.05,
                  keep_projection: bool = False) -> SliceOutcome:
    r = analyze_slice(slc, det)
    detected = []
    for ev in r.events:
        fv = extract_features(ev, r.filtered, r.binary, extent_s)
        ev.f_lo, ev.f_hi = fv.f2_freq_min_hz, fv.f3_freq_max_hz
        detected.append(DetectedEvent(ev, fv))
    d = r.decision
    return SliceOutcome(slc.slice_id, Path(slc.source_path).name, slc.start_time, d.n_peaks,
                        d.conformity, r.level.gamma, r.level.mu, r.level.sigma,
                        float(r.binary.bits.mean()), d.reason, detected,
                        r.projection.values.copy() if keep_projection else None,
                        r.projection.time_bin_s, r.projection.frame_offset_s)


def _process_args(args):
    return process_slice(*args)


def merge_detected(raw: List[DetectedEvent], merge_overlap: float,
                   edge_allowance_s: float) -> List[DetectedEvent]:
    evs = [d.event for d in raw]
    merged = []
    for group in merge_groups(evs, merge_overlap, edge_allowance_s):
        ev = evs[group[0]]
        for i in group[1:]:
            ev = _union(ev, evs[i], None)
        rep = max(group, key=lambda i: (evs[i].n_peaks, -evs[i].start_time))
        ev.f_lo = raw[rep].features.f2_freq_min_hz
        ev.f_hi = raw[rep].features.f3_freq_max_hz
        merged.append(DetectedEvent(ev, raw[rep].features))
    return merged


def find_inputs(path) -> List[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(q for q in p.iterdir() if q.suffix.lower() == ".wav")
    elif p.exists():
        files = [p]
    else:
        files = []
    if not files:
        raise NoInputsError(f"no inputs: no .wav files at {path}")
    return files


def detect_slices(slices: Iterable[SignalSlice], cfg: RunConfig, sample_rate: int,
                  source: str, hours: float, workers: int = 1,
                  keep_projections: bool = False) -> DetectionRun:
    det = cfg.detector_config()
    jobs = ((s, det, cfg.features.pulse_extent_s, keep_projections) for s in slices)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_process_args, jobs, chunksize=4))
    else:
        outcomes = [_process_args(j) for j in jobs]
    raw = [d for o in outcomes for d in o.events]
    for d in raw:
        d.event.source_path = source
    # a slice cannot hold peaks within half a frame of either edge
    edge = cfg.stft.nfft / sample_rate
    merged = merge_detected(raw, cfg.detector.merge_overlap, edge)
    return DetectionRun(merged, outcomes, hours, [source])


def detect_file(path, cfg: RunConfig, workers: int = 1,
                keep_projections: bool = False) -> DetectionRun:
    path = Path(path)
    info = wav_info(path)
    slices = iter_file_slices(path, cfg.audio.channel, cfg.audio.window_s, cfg.audio.hop_s)
    return detect_slices(slices, cfg, info["sample_rate"], path.name,
                         info["duration_s"] / 3600.0, workers, keep_projections)


def detect_stream(stream: AudioStream, cfg: RunConfig, source: str = "stream",
                  workers: int = 1) -> DetectionRun:
    slices = slice_windows(stream, cfg.audio.window_s, cfg.audio.hop_s)
    return detect_slices(slices, cfg, stream.sample_rate, source, stream.duration / 3600.0,
                         workers)


def detect_inputs(path, cfg: RunConfig, workers: int = 1,
                  keep_projections: bool = False) -> DetectionRun:
    run = DetectionRun()
    for f in find_inputs(path):
        r = detect_file(f, cfg, workers, keep_projections)
        run.events.extend(r.events)
        run.slices.extend(r.slices)
        run.hours += r.hours
        run.sources.extend(r.sources)
    return run


# -- truth handling -------------------------------------------------------

def read_truth_csv(path) -> Dict[str, List[Interval]]:
    """Truth intervals keyed by source file name ('' when the CSV has no source column)."""
    out: Dict[str, List[Interval]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"start_s", "end_s"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: truth CSV lacks columns {sorted(missing)}")
        for row in reader:
            src = Path(row.get("source") or "").name
            out.setdefault(src, []).append(
                Interval(float(row["start_s"]), float(row["end_s"]), row.get("label") or "minke"))
    return out


def load_truth(path, sources: Sequence[str] = ()) -> Dict[str, List[Interval]]:
    """Read a truth CSV, or every ``<stem>.truth.csv`` for ``sources`` in a directory."""
    p = Path(path)
    if p.is_dir():
        out: Dict[str, List[Interval]] = {}
        for src in sources:
            f = p / f"{Path(src).stem}.truth.csv"
            if not f.exists():
                raise FileNotFoundError(f"missing truth file {f}")
            for ivs in read_truth_csv(f).values():
                out.setdefault(src, []).extend(ivs)
        return out
    if not p.exists():
        raise FileNotFoundError(f"truth file {p} not found")
    return read_truth_csv(p)


def truth_for(truth: Dict[str, List[Interval]], source: str) -> List[Interval]:
    return truth.get(Path(source).name, []) + truth.get("", [])


def label_events(events: List[DetectedEvent], truth: Dict[str, List[Interval]],
                 fraction: float = 0.25) -> None:
    """Label each event with the label of the truth interval it overlaps, else non-minke."""
    for d in events:
        label = "non-minke"
        for iv in truth_for(truth, d.event.source_path):
            if overlaps_enough(d.event, iv, fraction):
                label = iv.label
                if label == "minke":
                    break
        d.label = label
        d.features.label = label


def classify_events(events: List[DetectedEvent], model: ForestModel,
                    threshold: float = 0.5) -> None:
    if tuple(model.feature_order) != FEATURE_NAMES:
        raise SchemaMismatchError("model feature_order does not match the current feature schema")
    if not events:
        return
    X = np.array([d.features.to_array() for d in events])
    scores = predict_scores(model, X)
    for d, s in zip(events, scores):
        d.event.score = float(s)
        d.predicted = CLASSES[1] if s >= threshold else CLASSES[0]


# -- CSV I/O ---------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_events_csv(path, events: Iterable[DetectedEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS + FEATURE_NAMES)
        for d in events:
            ev = d.event
            row = [ev.source_path, ev.slice_id, ev.start_time, ev.end_time, ev.n_peaks,
                   ev.n_slices, ev.f_lo, ev.f_hi, "accepted", ev.score, d.predicted, d.label]
            row += list(d.features.to_array())
            w.writerow([_fmt(v) for v in row])


def read_events_csv(path) -> List[DetectedEvent]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(FEATURE_NAMES + ("start_s", "end_s")) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            label = row.get("label") or "unlabeled"
            fv = FeatureVector.from_array([row[n] for n in FEATURE_NAMES], label)
            score = row.get("score")
            ev = PulseTrainEvent(float(row["start_s"]), float(row["end_s"]), np.zeros(0),
                                 np.zeros(0), float(row.get("f_lo_hz") or fv.f2_freq_min_hz),
                                 float(row.get("f_hi_hz") or fv.f3_freq_max_hz),
                                 row.get("slice_id", ""), row.get("source", ""),
                                 float(score) if score else None,
                                 int(row.get("n_slices") or 1))
            out.append(DetectedEvent(ev, fv, label, row.get("predicted", "")))
    return out


def write_diagnostics_csv(path, slices: Iterable[SliceOutcome]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAGNOSTIC_COLUMNS)
        for s in slices:
            w.writerow([_fmt(v) for v in (s.source, s.slice_id, s.start_time, s.n_peaks,
                                          s.conformity, s.gamma, s.mu, s.sigma,
                                          s.white_fraction, s.reason)])


def write_projections_csv(path, slices: Iterable[SliceOutcome]) -> None:
    """One row per slice; ``values`` holds P(n) as space-separated integers."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "slice_id", "start_s", "time_bin_s", "frame_offset_s", "values"])
        for s in slices:
            if s.projection is None:
                continue
            w.writerow([s.source, s.slice_id, _fmt(s.start_time), _fmt(s.time_bin_s),
                        _fmt(s.frame_offset_s), " ".join(str(int(v)) for v in s.projection)])


def write_roc_csv(path, thresholds, fpr, tpr) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, a, b in zip(thresholds, fpr, tpr):
            w.writerow([_fmt(float(t)), _fmt(float(a)), _fmt(float(b))])


# -- evaluation --------------------------------------------------------------

@dataclass
class EvaluationResult:
    confusion: ConfusionMatrix
    metrics: MetricsReport
    roc: Optional[tuple] = None


def evaluate_events(events: List[DetectedEvent], truth: Dict[str, List[Interval]],
                    n_slices: int, hours: float, fraction: float = 0.25,
                    predicted_only: bool = False) -> EvaluationResult:
    """Score events against minke truth intervals, pooled over sources.

    With ``predicted_only`` only events the classifier called minke count as
    detections. The ROC curve uses every event's score against whether it
    overlaps a minke interval, when scores and both outcomes exist.
    """
    positives = {src: [iv for iv in ivs if iv.label == "minke"] for src, ivs in truth.items()}
    kept = [d for d in events if not predicted_only or d.predicted == "minke"]
    sources = sorted({Path(d.event.source_path).name for d in events} | set(positives) - {""})
    tp = fp = fn = 0
    for src in sources or [""]:
        preds = [d.event for d in kept if Path(d.event.source_path).name == src or not sources]
        cm = match_events_to_truth(preds, truth_for(positives, src), 0, 0.0, fraction)
        tp, fp, fn = tp + cm.tp, fp + cm.fp, fn + cm.fn
    cm = ConfusionMatrix(tp, fp, max(int(n_slices) - (tp + fp + fn), 0), fn, hours)
    report = compute_metrics(cm)

    roc = None
    scored = [d for d in events if d.event.score is not None]
    if scored:
        hits = [any(overlaps_enough(d.event, iv, fraction)
                    for iv in truth_for(positives, d.event.source_path)) for d in scored]
        if 0 < sum(hits) < len(hits):
            roc = roc_auc([d.event.score for d in scored], hits)
            report.auc = roc[3]
    return EvaluationResult(cm, report, roc)


def holdout_metrics(model: ForestModel, test: Sequence[FeatureVector],
                    threshold: float = 0.5) -> dict:
    """Minke-class confusion counts, TPR/FPR/PPV/F1 and AUC on labeled vectors."""
    X = np.array([f.to_array() for f in test])
    y = np.array([f.label == "minke" for f in test])
    scores = predict_scores(model, X)
    pred = scores >= threshold
    cm = ConfusionMatrix(int(np.sum(pred & y)), int(np.sum(pred & ~y)),
                         int(np.sum(~pred & ~y)), int(np.sum(~pred & y)))
    m = compute_metrics(cm, need_fp_per_hour=False)
    return {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn, "tpr": m.tpr, "fpr": m.fpr,
            "ppv": m.ppv, "f1": m.f1, "auc": roc_auc(scores, y)[3]}
