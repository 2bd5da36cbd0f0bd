"""Plane-wave ultrasound pipeline: FFT/envelope/log-compression, DAS
beamforming with angle compounding, and synthetic speckle phantoms."""

from usdenoise.ultrasound.beamform import (
    bmode_from_frames,
    compound,
    das_beamform,
    tx_delay,
)
from usdenoise.ultrasound.phantom import (
    Cyst,
    PhantomSpec,
    annulus_mask,
    cyst_mask,
    speckle_patches,
    synth_phantom,
    synth_rf,
)
from usdenoise.ultrasound.signal import (
    envelope,
    envelope_image,
    fft,
    ifft,
    log_compress,
)
from usdenoise.ultrasound.types import ImagingGrid, RFFrame, TransducerGeometry

__all__ = [
    "Cyst",
    "ImagingGrid",
    "PhantomSpec",
    "RFFrame",
    "TransducerGeometry",
    "annulus_mask",
    "bmode_from_frames",
    "compound",
    "cyst_mask",
    "das_beamform",
    "envelope",
    "envelope_image",
    "fft",
    "ifft",
    "log_compress",
    "speckle_patches",
    "synth_phantom",
    "synth_rf",
    "tx_delay",
]
