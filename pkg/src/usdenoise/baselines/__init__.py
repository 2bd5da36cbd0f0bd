"""Classical reference denoisers: non-local means and BM3D."""

from usdenoise.baselines.bm3d import Bm3dConfig, bm3d_denoise
from usdenoise.baselines.nlm import NlmConfig, nlm_denoise
from usdenoise.baselines.transforms import dct2, haar1, idct2, ihaar1

__all__ = [
    "Bm3dConfig",
    "NlmConfig",
    "bm3d_denoise",
    "dct2",
    "haar1",
    "idct2",
    "ihaar1",
    "nlm_denoise",
]
