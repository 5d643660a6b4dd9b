"""Static SVG overlays of original vs reconstructed signals (time and spectrum)."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

WIDTH, PANEL_H, MARGIN = 900, 280, 50
ORIGINAL_STYLE = 'stroke="#d62728" stroke-width="1.2" fill="none"'
RECON_STYLE = 'stroke="#1f77b4" stroke-width="1.2" fill="none" stroke-dasharray="5,3"'


def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def magnitude_spectrum(x, sample_rate_hz: float):
    """One-sided magnitude spectrum of ``x`` zero-padded to the next power of two.

    Returns ``(frequencies, magnitudes, n_fft)``.
    """
    x = np.asarray(x, dtype=np.float64)
    n_fft = next_pow2(x.size)
    mags = np.abs(np.fft.rfft(x, n=n_fft))
    freqs = np.arange(mags.size) * sample_rate_hz / n_fft
    return freqs, mags, n_fft


def _shared(xs, original, recon, box, lo, hi):
    x0, y0, w, h = box
    xspan = (xs[-1] - xs[0]) or 1.0

    def line(ys, style):
        px = x0 + (xs - xs[0]) / xspan * w
        py = y0 + h - (ys - lo) / (hi - lo) * h
        return f'<polyline {style} points="{" ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))}"/>'

    return line(original, ORIGINAL_STYLE) + "\n" + line(recon, RECON_STYLE)


def emit_plot(original, reconstructed, out, sample_rate_hz: float = 1.0, window: int | None = 1024):
    """Write ``out`` (SVG) and a companion CSV with the plotted series.

    The time panel shows the first ``window`` samples (all when None); the
    spectrum panel covers the whole signal.
    """
    original = np.asarray(original, dtype=np.float64)
    reconstructed = np.asarray(reconstructed, dtype=np.float64)
    if original.size == 0:
        raise ValueError("cannot plot an empty signal")
    if original.shape != reconstructed.shape:
        raise ValueError(f"length mismatch: {original.size} vs {reconstructed.size}")
    out = Path(out)
    n_time = original.size if window is None else min(window, original.size)
    t = np.arange(n_time) / sample_rate_hz
    freqs, mag_o, n_fft = magnitude_spectrum(original, sample_rate_hz)
    _, mag_r, _ = magnitude_spectrum(reconstructed, sample_rate_hz)

    height = 2 * PANEL_H
    svg = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        _titled(f"Time domain (first {n_time} samples)", t, original[:n_time], reconstructed[:n_time], 0, "time [s]"),
        _titled(f"Magnitude spectrum (N_fft = {n_fft})", freqs, mag_o, mag_r, PANEL_H, "frequency [Hz]"),
        f'<text x="{WIDTH - MARGIN}" y="15" font-size="12" text-anchor="end" fill="#d62728">original</text>',
        f'<text x="{WIDTH - MARGIN}" y="30" font-size="12" text-anchor="end" fill="#1f77b4">reconstructed</text>',
        "</svg>",
    ]
    out.write_text("\n".join(svg) + "\n")

    csv_path = out.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "index", "x", "original", "reconstructed"])
        for i in range(n_time):
            writer.writerow(["time", i, repr(float(t[i])), repr(float(original[i])), repr(float(reconstructed[i]))])
        for i in range(freqs.size):
            writer.writerow(["spectrum", i, repr(float(freqs[i])), repr(float(mag_o[i])), repr(float(mag_r[i]))])
    return out, csv_path


def _titled(title, xs, original, recon, top, xlabel):
    box = (MARGIN, top + 25, WIDTH - 2 * MARGIN, PANEL_H - 60)
    lo = float(min(original.min(), recon.min()))
    hi = float(max(original.max(), recon.max()))
    if hi == lo:
        hi = lo + 1.0
    return "\n".join(
        [
            f'<text x="{MARGIN}" y="{top + 15}" font-size="14">{title}</text>',
            f'<rect x="{box[0]}" y="{box[1]}" width="{box[2]}" height="{box[3]}" fill="none" stroke="#888"/>',
            _shared(np.asarray(xs, dtype=np.float64), original, recon, box, lo, hi),
            f'<text x="{WIDTH / 2}" y="{top + PANEL_H - 15}" font-size="12" text-anchor="middle">{xlabel}</text>',
        ]
    )
