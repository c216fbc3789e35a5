"""
Plot one slice through the detector: spectrogram, binary image and energy
projection with the picked peaks. Needs matplotlib (``pip install .[plots]``).

    python scripts/plot_slice.py --seed 3 --slice 1 --out results/slice.png
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pulsetrain.audio_io import open_audio, slice_windows
from pulsetrain.detector import DetectorConfig, analyze_slice
from pulsetrain.dsp import compute_spectrogram
from pulsetrain.synth import generate_clip, minke_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--wav", help="WAV file; a synthetic minke clip when omitted")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--snr-db", type=float, default=12.0)
    ap.add_argument("--slice", type=int, default=0)
    ap.add_argument("--out", default="results/slice.png")
    args = ap.parse_args()

    stream = open_audio(args.wav) if args.wav else generate_clip(minke_preset(args.seed, args.snr_db))[0]
    slc = slice_windows(stream)[args.slice]
    cfg = DetectorConfig()
    r = analyze_slice(slc, cfg)
    spec = compute_spectrogram(r.filtered, cfg.stft, cfg.crop)

    t = r.projection.times()
    extent = [t[0], t[-1], spec.f0_hz, spec.frequencies()[-1]]
    fig, ax = plt.subplots(3, 1, figsize=(11, 7), sharex=True)
    ax[0].imshow(10 * np.log10(spec.power.T + 1e-20), origin="lower", aspect="auto", extent=extent)
    ax[0].set_ylabel("Hz")
    ax[1].imshow(r.binary.bits.T, origin="lower", aspect="auto", extent=extent, cmap="gray_r")
    ax[1].set_ylabel("Hz")
    ax[2].plot(t, r.projection.values, lw=0.8)
    ax[2].plot(t[r.peaks.indices], r.peaks.heights, "rx", ms=4)
    ax[2].axhline(cfg.rules.threshold, color="k", ls="--", lw=0.6)
    ax[2].set_ylabel("P(n)")
    ax[2].set_xlabel("time (s)")
    ax[0].set_title(f"{slc.slice_id}: {r.decision.reason}, {r.decision.n_peaks} peaks, "
                    f"gamma {r.level.gamma:.3f}")
    fig.tight_layout()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
