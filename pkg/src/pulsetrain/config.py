"""
Run configuration: every tunable of the pipeline, grouped by stage.

The config file is JSON with one object per stage plus ``schema_version`` and
``seed``. Unknown keys are rejected. Defaults are the reference
parameter choices (30 s windows, gamma coefficient 1.75, projection threshold 6,
512-point FFT, 10 trees with 5 features per split).

Randomness: every consumer derives its own seed from the single run seed as
``SeedSequence([seed, consumer_id])`` with consumer ids forest=1, split=2,
synth=3 (see ``derive_seed``).
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .classifier import ForestParams
from .detector import DetectorConfig, PulseRules
from .dsp import FilterSpec, StftParams

SCHEMA_VERSION = 1
SEED_CONSUMERS = {"forest": 1, "split": 2, "synth": 3}


class ConfigError(ValueError):
    pass


@dataclass
class AudioConfig:
    window_s: float = 30.0
    hop_s: float = 15.0
    channel: int = 0


@dataclass
class FilterConfig:
    pass_lo: float = 75.0
    pass_hi: float = 350.0
    stop_attenuation_db: float = 30.0
    transition_hz: float = 40.0
    passband_ripple_db: float = 0.1


@dataclass
class StftConfig:
    nfft: int = 512
    hop_samples: int = 41
    window_kind: str = "blackman"
    crop_lo: float = 75.0
    crop_hi: float = 350.0


@dataclass
class BinarizeConfig:
    gamma_coefficient: float = 1.75
    dyn_range_db: float = 60.0


@dataclass
class DetectorRulesConfig:
    threshold: float = 6
    min_peaks: int = 8
    max_peaks: int = 135
    ipi_lo: float = 1 / 4.5
    ipi_hi: float = 1 / 2.8
    ipi_conformity: float = 0.6
    merge_overlap: float = 0.5


@dataclass
class FeatureConfig:
    pulse_extent_s: float = 0.05


@dataclass
class ForestConfig:
    n_trees: int = 10
    n_split_features: int = 5
    max_depth: Optional[int] = None
    min_leaf: int = 1
    decision_threshold: float = 0.5


@dataclass
class EvalConfig:
    match_fraction: float = 0.25
    train_fraction: float = 0.66


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    audio: AudioConfig = field(default_factory=AudioConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    binarize: BinarizeConfig = field(default_factory=BinarizeConfig)
    detector: DetectorRulesConfig = field(default_factory=DetectorRulesConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def detector_config(self) -> DetectorConfig:
        d = self.detector
        return DetectorConfig(
            filter=FilterSpec(**asdict(self.filter)),
            stft=StftParams(self.stft.nfft, self.stft.hop_samples, self.stft.window_kind),
            crop=(self.stft.crop_lo, self.stft.crop_hi),
            gamma_coefficient=self.binarize.gamma_coefficient,
            dyn_range_db=self.binarize.dyn_range_db,
            rules=PulseRules(d.threshold, d.min_peaks, d.max_peaks, d.ipi_lo, d.ipi_hi,
                             d.ipi_conformity),
        )

    def forest_params(self) -> ForestParams:
        f = self.forest
        return ForestParams(f.n_trees, f.n_split_features, f.max_depth, f.min_leaf,
                            derive_seed(self.seed, "forest"))

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(seed: int, consumer: str) -> int:
    state = np.random.SeedSequence([int(seed), SEED_CONSUMERS[consumer]]).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config schema_version {version}, expected {SCHEMA_VERSION}")
    cfg = RunConfig()
    for name, value in d.items():
        current = getattr(cfg, name)
        if hasattr(current, "__dataclass_fields__"):
            if not isinstance(value, dict):
                raise ConfigError(f"section {name!r} must be an object")
            bad = sorted(set(value) - {f.name for f in fields(current)})
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {', '.join(bad)}")
            setattr(cfg, name, replace(current, **value))
        else:
            setattr(cfg, name, value)
    try:
        cfg.detector_config()
        cfg.forest_params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(d)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
