"""Image quality metrics (MSE, PSNR, GCNR) and benchmark report tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from usdenoise.image import Image2D

PSNR_STANDARD = "standard"
PSNR_LITERAL = "paper-literal"


def _data(img) -> np.ndarray:
    return img.data if isinstance(img, Image2D) else np.asarray(img)


def mse(i, k) -> float:
    """Mean squared difference over all pixels."""
    a = _data(i).astype(np.float64)
    b = _data(k).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image dims differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(i, k, max_val: float, formula: str = PSNR_STANDARD) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the images are identical.

    ``standard`` is 10*log10(max_val^2 / MSE).  ``paper-literal`` drops the
    square on the peak value and is kept selectable for fidelity; it is not
    comparable with conventional dB figures.
    """
    if max_val <= 0:
        raise ValueError("max_val must be positive")
    if formula not in (PSNR_STANDARD, PSNR_LITERAL):
        raise ValueError(f"unknown PSNR formula {formula!r}")
    err = mse(i, k)
    if err == 0.0:
        return math.inf
    if formula == PSNR_STANDARD:
        return 10.0 * math.log10(max_val * max_val / err)
    return 10.0 * math.log10(max_val / err)


@dataclass(frozen=True)
class RegionMask:
    """Boolean pixel mask with a role tag (``inside`` or ``outside``)."""

    mask: np.ndarray
    role: str = "inside"

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", m)
        if self.role not in ("inside", "outside"):
            raise ValueError(f"unknown region role {self.role!r}")

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def gcnr(img, inside: RegionMask, outside: RegionMask, bins: int = 64) -> float:
    """Generalized contrast-to-noise ratio between two pixel populations.

    Builds histograms of both regions on a shared support and returns
    ``1 - sum_b min(p_in, p_out)``, i.e. one minus the overlap of the two
    intensity densities.  0 means indistinguishable regions, 1 means fully
    separated.  Tables report it as a percentage.
    """
    if bins < 16:
        raise ValueError("need at least 16 histogram bins")
    data = _data(img)
    m_in, m_out = inside.mask, outside.mask
    if m_in.shape != data.shape or m_out.shape != data.shape:
        raise ValueError("mask dims do not match image")
    if np.any(m_in & m_out):
        raise ValueError("inside and outside masks overlap")
    if inside.count < 32 or outside.count < 32:
        raise ValueError("each region needs at least 32 pixels")
    vin = data[m_in].astype(np.float64)
    vout = data[m_out].astype(np.float64)
    lo = min(vin.min(), vout.min())
    hi = max(vin.max(), vout.max())
    if hi == lo:  # all pixels equal: identical distributions
        return 0.0
    h_in, _ = np.histogram(vin, bins=bins, range=(lo, hi))
    h_out, _ = np.histogram(vout, bins=bins, range=(lo, hi))
    p_in = h_in / vin.size
    p_out = h_out / vout.size
    return float(1.0 - np.minimum(p_in, p_out).sum())


@dataclass
class MetricsReport:
    """Per-method, per-noise-level metric rows plus run metadata."""

    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, method: str, t_start: int, psnr_db: float, gcnr_percent: float):
        if not 0.0 <= gcnr_percent <= 100.0:
            raise ValueError("gcnr_percent must lie in [0, 100]")
        self.rows.append({
            "method": method,
            "t_start": int(t_start),
            "psnr_db": float(psnr_db),
            "gcnr_percent": float(gcnr_percent),
        })

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r["method"], r["t_start"]))

    def to_csv(self) -> str:
        lines = ["method,t_start,psnr_db,gcnr_percent"]
        for r in self.sorted_rows():
            lines.append(f"{r['method']},{r['t_start']},"
                         f"{r['psnr_db']:.4f},{r['gcnr_percent']:.2f}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        t_values = sorted({r["t_start"] for r in self.rows})
        methods = sorted({r["method"] for r in self.rows})
        cell = {(r["method"], r["t_start"]): r for r in self.rows}

        def table(metric, fmt):
            head = "| Method | " + " | ".join(f"T={t}" for t in t_values) + " |"
            sep = "|---" * (len(t_values) + 1) + "|"
            out = [head, sep]
            for m in methods:
                vals = []
                for t in t_values:
                    r = cell.get((m, t))
                    vals.append(fmt.format(r[metric]) if r else "-")
                out.append(f"| {m} | " + " | ".join(vals) + " |")
            return "\n".join(out)

        parts = ["## PSNR (dB)", "", table("psnr_db", "{:.2f}"), "",
                 "## GCNR (%)", "", table("gcnr_percent", "{:.1f}"), ""]
        if self.metadata:
            parts += ["## Run metadata", "", "```json",
                      json.dumps(self.metadata, indent=2, sort_keys=True),
                      "```", ""]
        return "\n".join(parts)
