"""Speckle-preserving ultrasound denoising toolkit.

Library layout:

- ``diffusion``   -- noise schedule, forward corruption, reverse sampler
- ``nnet``        -- small U-Net noise predictor with manual backprop + Adam
- ``baselines``   -- NLM and BM3D reference denoisers
- ``metrics``     -- MSE / PSNR / GCNR and benchmark reports
- ``ultrasound``  -- FFT, envelope detection, DAS beamforming, phantoms
- ``formats``     -- bit-exact file formats (PGM, tensors, checkpoints, RF)
- ``bench``       -- benchmark harness behind the ``usdenoise bench`` command
- ``_kernels``    -- compiled hot loops with a NumPy fallback
"""

from usdenoise._kernels import COMPILED_KERNELS
from usdenoise.image import Image2D, RANGE_EIGHT_BIT, RANGE_SIGNED, RANGE_UNIT

__version__ = "0.1.0"

__all__ = [
    "COMPILED_KERNELS",
    "Image2D",
    "RANGE_UNIT",
    "RANGE_SIGNED",
    "RANGE_EIGHT_BIT",
    "__version__",
]
