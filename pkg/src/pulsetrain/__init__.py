"""Detection and classification of periodic broadband pulse trains in continuous audio."""

from .audio_io import AudioStream, SignalSlice, open_audio, slice_windows
from .binarize import apply_mask, compute_mask_level, to_intensity_image
from .classifier import ForestParams, load_model, predict, save_model, train_forest
from .detector import (PulseRules, PulseTrainEvent, apply_pulse_train_rules, detect_slice,
                       energy_projection, find_local_maxima, merge_overlapping_events)
from .dsp import FilterSpec, StftParams, apply_filter, compute_spectrogram, design_bandpass
from .evaluation import compute_metrics, match_events_to_truth, roc_auc, split_train_test
from .features import FEATURE_NAMES, FeatureVector, extract_features, leq_db, snr_percentile_db
from .synth import SynthSpec, TrainSpec, generate_clip

__version__ = "0.1.0"
