"""
Static SVG figures, each with a CSV of exactly the values plotted.

    segments / dataset instances -> time x frequency heatmaps, one per channel
    spectrogram archives         -> full heatmap plus interval variability
    score listings               -> three strip panels of signed scores
"""

import io
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from diagnose import SCORE_PANELS, ScoreRow  # noqa: E402
from errors import DataFormatError  # noqa: E402
from spectro import SpectrogramSegment, Spectrogram, interval_variability  # noqa: E402
from store import atomic_write_bytes, atomic_write_text  # noqa: E402
from .artifacts import csv_text  # noqa: E402

PathLike = Union[str, Path]

plt.rcParams["svg.hashsalt"] = "geardiag"

_PANEL_COLORS = {"train-healthy": "tab:blue", "test-healthy": "tab:green", "test-damaged": "tab:red"}


def _save_svg(fig, path: Path) -> Path:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_bytes(path, buffer.getvalue())


def companion_csv(svg_path: PathLike) -> Path:
    return Path(svg_path).with_suffix(".csv")


def render_segment(segment: SpectrogramSegment, out_path: PathLike, title: str = "") -> Tuple[Path, Path]:
    """Heatmap per channel: x in seconds from segment start, y in Hz up to the last retained bin."""
    out_path = Path(out_path)
    frames, bins, channels = segment.magnitudes.shape
    times = np.arange(frames) * segment.hop_s
    freqs = np.arange(bins) * segment.bin_spacing_hz
    extent = [0.0, frames * segment.hop_s, 0.0, bins * segment.bin_spacing_hz]

    fig, axes = plt.subplots(1, channels, figsize=(4.5 * channels, 4), squeeze=False)
    for j in range(channels):
        ax = axes[0, j]
        image = ax.imshow(segment.magnitudes[:, :, j].T, origin="lower", aspect="auto", extent=extent, cmap="viridis")
        ax.set_xlabel("Time [s]")
        ax.set_ylabel("Frequency [Hz]")
        ax.set_title(f"{segment.channels[j]} ({segment.healths[j]})", fontsize=9)
        fig.colorbar(image, ax=ax, label="log10 amplitude")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save_svg(fig, out_path)

    rows = [
        [segment.channels[j], f, repr(float(times[f])), b, repr(float(freqs[b])), repr(float(segment.magnitudes[f, b, j]))]
        for j in range(channels) for f in range(frames) for b in range(bins)
    ]
    csv_path = atomic_write_text(companion_csv(out_path),
                                 csv_text(["channel", "frame", "time_s", "bin", "frequency_hz", "value"], rows))
    return out_path, csv_path


def render_spectrogram(spec: Spectrogram, out_path: PathLike, interval_s: float = 1.0) -> Tuple[Path, Path]:
    """Full-length heatmap over an interval-variability panel."""
    out_path = Path(out_path)
    variability = interval_variability(spec, interval_s)
    extent = [0.0, spec.span_s, 0.0, float(spec.bin_freqs_hz[-1])]

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(10, 6), height_ratios=[3, 1], sharex=True)
    image = top.imshow(spec.magnitudes.T, origin="lower", aspect="auto", extent=extent, cmap="viridis")
    top.set_ylabel("Frequency [Hz]")
    top.set_title(f"{spec.channel} ({spec.health})")
    fig.colorbar(image, ax=top, label="log10 amplitude" if spec.config.log_amplitude else "amplitude")
    bottom.step(variability.interval_starts_s, variability.representativeness, where="post")
    bottom.axhline(1.0, color="grey", linewidth=0.8, linestyle="--")
    bottom.set_xlabel("Time [s]")
    bottom.set_ylabel(f"CV ratio ({interval_s:g} s)")
    fig.tight_layout()
    _save_svg(fig, out_path)

    rows = [
        [repr(float(t)), repr(float(cv)), repr(float(r))]
        for t, cv, r in zip(variability.interval_starts_s, variability.interval_cv, variability.representativeness)
    ]
    csv_path = atomic_write_text(companion_csv(out_path),
                                 csv_text(["interval_start_s", "interval_cv", "representativeness"], rows))
    return out_path, csv_path


def score_panels(rows: Sequence[ScoreRow]) -> dict:
    panels = {name: [] for name in SCORE_PANELS}
    for row in rows:
        if row.panel in panels:
            panels[row.panel].append(row)
    return panels


def render_scores(rows: Sequence[ScoreRow], out_path: PathLike) -> Tuple[Path, Path]:
    """Three strip panels (train-healthy, test-healthy, test-damaged) of signed scores.

    Raises:
        DataFormatError: No rows to plot
    """
    if not rows:
        raise DataFormatError("Score listing is empty; nothing to render")
    out_path = Path(out_path)
    panels = score_panels(rows)
    values = [r.signed for r in rows]
    low, high = min(values + [0.0]), max(values + [0.0])
    pad = 0.05 * (high - low or 1.0)

    fig, axes = plt.subplots(1, len(SCORE_PANELS), figsize=(12, 4), sharey=True)
    for ax, name in zip(axes, SCORE_PANELS):
        signed = [r.signed for r in panels[name]]
        ax.scatter(np.arange(len(signed)), signed, s=6, color=_PANEL_COLORS[name])
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_ylim(low - pad, high + pad)
        ax.set_title(f"{name} (n={len(signed)})")
        ax.set_xlabel("Instance")
    axes[0].set_ylabel("Signed anomaly score")
    fig.tight_layout()
    _save_svg(fig, out_path)

    csv_rows: List[list] = []
    for name in SCORE_PANELS:
        for position, row in enumerate(panels[name]):
            csv_rows.append([name, position, row.index, repr(row.signed)])
    csv_path = atomic_write_text(companion_csv(out_path),
                                 csv_text(["panel", "position", "index", "signed"], csv_rows))
    return out_path, csv_path
