"""Plane-wave delay-and-sum beamforming and angle compounding."""

from __future__ import annotations

import numpy as np

from usdenoise import _kernels
from usdenoise.image import RANGE_UNIT, Image2D
from usdenoise.ultrasound.signal import envelope_image, log_compress
from usdenoise.ultrasound.types import ImagingGrid, RFFrame, TransducerGeometry


def tx_delay(x, z, angle: float, geometry: TransducerGeometry):
    """One-way transmit delay of a steered plane wave to field point(s).

    Time zero is when the wavefront crosses the aperture corner nearest the
    steering direction, i.e. delay = (z cos(a) + x sin(a) + A/2 |sin(a)|)/c
    with A the aperture width; this keeps delays non-negative over the whole
    field of view.  The synthesizer and the beamformer share this origin.
    """
    ref = 0.5 * geometry.aperture * abs(np.sin(angle))
    return (np.asarray(z) * np.cos(angle) + np.asarray(x) * np.sin(angle)
            + ref) / geometry.sound_speed


def das_beamform(rf: RFFrame, grid: ImagingGrid,
                 apodization: str = "hann") -> Image2D:
    """Delay-and-sum image reconstruction (pre-envelope RF image).

    For every pixel the per-element delay is the plane-wave transmit time
    plus the return path to the element; element traces are sampled with
    linear interpolation and summed.  Delays outside the recorded window
    contribute zero.  Receive apodization (``"hann"`` by default, ``"none"``
    for a plain sum) tames aperture sidelobes; low f-numbers otherwise put
    a noticeable clutter floor inside anechoic targets.
    """
    g = rf.geometry
    if apodization == "hann":
        weights = np.hanning(g.element_count)
    elif apodization == "none":
        weights = np.ones(g.element_count)
    else:
        raise ValueError(f"unknown apodization {apodization!r}")
    xs = grid.x
    zs = grid.z
    X, Z = np.meshgrid(xs, zs)            # (nz, nx)
    tx = tx_delay(X, Z, rf.steer_angle, g).reshape(-1)
    ex = g.element_x()
    # (elements, pixels) fractional sample indices
    dx = X.reshape(-1)[None, :] - ex[:, None]
    rx = np.sqrt(dx * dx + (Z.reshape(-1)[None, :]) ** 2) / g.sound_speed
    idx = (tx[None, :] + rx) * g.sampling_rate
    summed = _kernels.das_sum(rf.samples.astype(np.float64) * weights[:, None],
                              idx)
    return Image2D(summed.reshape(grid.nz, grid.nx).astype(np.float32),
                   RANGE_UNIT, {"steer_angle": float(rf.steer_angle),
                                "apodization": apodization})


def compound(images: list) -> Image2D:
    """Pixel-wise mean of per-angle envelope images (incoherent)."""
    if len(images) == 0:
        raise ValueError("need at least one image to compound")
    arrays = [im.data if isinstance(im, Image2D) else np.asarray(im)
              for im in images]
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise ValueError(f"image dims differ: {a.shape} vs {shape}")
    mean = np.mean(np.stack(arrays), axis=0)
    first = images[0]
    if isinstance(first, Image2D):
        return first.like(mean, compounded=len(images))
    return Image2D(mean.astype(np.float32), RANGE_UNIT,
                   {"compounded": len(images)})


def bmode_from_frames(frames: list[RFFrame], grid: ImagingGrid,
                      dynamic_range_db: float = 60.0) -> Image2D:
    """Beamform each steered frame, compound envelopes, log-compress."""
    envelopes = [envelope_image(das_beamform(f, grid).data) for f in frames]
    comp = compound(envelopes)
    out = log_compress(comp.data, dynamic_range_db)
    out.meta["compounded"] = len(frames)
    return out
