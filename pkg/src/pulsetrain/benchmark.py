"""
Synthetic benchmark runs: detector recall on species-preset trains, false
events on pure noise, and a labeled event set for training the forest.

Everything here is deterministic given ``seed``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .classifier import ForestModel, ForestParams, train_forest
from .config import RunConfig, derive_seed
from .evaluation import Interval, overlaps_enough, split_train_test
from .pipeline import DetectedEvent, detect_stream, holdout_metrics, label_events
from .synth import distractor_preset, generate_clip, minke_preset, noise_preset


@dataclass
class RecallRun:
    n_trains: int
    n_detected: int
    events: List[DetectedEvent] = field(default_factory=list)

    @property
    def recall(self) -> float:
        return self.n_detected / self.n_trains if self.n_trains else 0.0


def _truth_map(truth, source: str):
    return {source: [Interval(iv.start_s, iv.end_s, iv.label) for iv in truth.intervals]}


def detector_recall(n_clips: int = 100, snr_db: float = 15.0, seed: int = 0,
                    cfg: Optional[RunConfig] = None, noise_kind: str = "white") -> RecallRun:
    """Fraction of generated trains overlapped by at least one merged detector event."""
    cfg = cfg or RunConfig()
    base = derive_seed(seed, "synth")
    run = RecallRun(0, 0)
    for i in range(n_clips):
        spec = minke_preset((base + i) % 2 ** 63, snr_db, noise_kind=noise_kind)
        stream, truth = generate_clip(spec)
        source = f"minke_{i:04d}"
        det = detect_stream(stream, cfg, source)
        label_events(det.events, _truth_map(truth, source), cfg.eval.match_fraction)
        run.events.extend(det.events)
        for iv in truth.intervals:
            run.n_trains += 1
            run.n_detected += any(overlaps_enough(d.event, iv, cfg.eval.match_fraction)
                                  for d in det.events)
    return run


def noise_false_events(hours: float = 1.0, seed: int = 0,
                       cfg: Optional[RunConfig] = None, noise_kind: str = "white") -> List[DetectedEvent]:
    cfg = cfg or RunConfig()
    spec = noise_preset(derive_seed(seed, "synth") ^ 0x5EED, hours * 3600.0, noise_kind)
    stream, _ = generate_clip(spec)
    return detect_stream(stream, cfg, "noise").events


def build_event_dataset(n_per_class: int = 200, seed: int = 0,
                        cfg: Optional[RunConfig] = None, snr_range=(10.0, 20.0),
                        max_clips: int = 2000) -> List[DetectedEvent]:
    """Detector events from minke-preset and distractor clips, labeled against truth,
    until each class holds ``n_per_class`` events (minke first, then non-minke)."""
    cfg = cfg or RunConfig()
    rng = np.random.default_rng(derive_seed(seed, "synth"))
    pos: List[DetectedEvent] = []
    neg: List[DetectedEvent] = []
    for i in range(max_clips):
        if len(pos) >= n_per_class and len(neg) >= n_per_class:
            break
        clip_seed = int(rng.integers(0, 2 ** 63))
        snr = float(rng.uniform(*snr_range))
        want_pos = len(pos) < n_per_class and (len(neg) >= n_per_class or i % 2 == 0)
        spec = minke_preset(clip_seed, snr) if want_pos else distractor_preset(clip_seed, snr)
        stream, truth = generate_clip(spec)
        source = f"{'minke' if want_pos else 'distractor'}_{i:04d}"
        det = detect_stream(stream, cfg, source)
        label_events(det.events, _truth_map(truth, source), cfg.eval.match_fraction)
        for d in det.events:
            (pos if d.label == "minke" else neg).append(d)
    if len(pos) < n_per_class or len(neg) < n_per_class:
        raise RuntimeError(f"only {len(pos)} minke / {len(neg)} non-minke events after {max_clips} clips")
    return pos[:n_per_class] + neg[:n_per_class]


@dataclass
class ClassifierRun:
    model: ForestModel
    metrics: dict
    n_train: int
    n_test: int


def holdout_forest(events: List[DetectedEvent], seed: int = 0,
                   cfg: Optional[RunConfig] = None) -> ClassifierRun:
    """Stratified split (train_fraction of config), train the forest, score the rest."""
    cfg = cfg or RunConfig()
    fvs = [d.features for d in events]
    train_idx, test_idx = split_train_test([f.label for f in fvs], cfg.eval.train_fraction,
                                           derive_seed(seed, "split"))
    params = ForestParams(cfg.forest.n_trees, cfg.forest.n_split_features, cfg.forest.max_depth,
                          cfg.forest.min_leaf, derive_seed(seed, "forest"))
    model = train_forest([fvs[i] for i in train_idx], params)
    metrics = holdout_metrics(model, [fvs[i] for i in test_idx], cfg.forest.decision_threshold)
    return ClassifierRun(model, metrics, len(train_idx), len(test_idx))
