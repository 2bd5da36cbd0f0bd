"""Hot-loop kernels: compiled Cython core with a NumPy fallback.

The compiled module is preferred when importable; setting the environment
variable ``USDENOISE_PURE=1`` forces the fallback (used by the kernel
benchmark and by tests that exercise both paths).  Both backends implement
the same four entry points with identical semantics:

- ``nlm_filter``      patchwise non-local means on a padded image
- ``match_blocks``    top-K similar-block search for collaborative filtering
- ``deposit_pulses``  scatterer echo synthesis onto an RF trace
- ``das_sum``         delay-and-sum accumulation with linear interpolation
"""

import os

from usdenoise._kernels import fallback

if os.environ.get("USDENOISE_PURE") == "1":
    _impl = fallback
    COMPILED_KERNELS = False
else:
    try:
        from usdenoise._kernels import _core as _impl  # type: ignore[attr-defined]
        COMPILED_KERNELS = True
    except ImportError:
        _impl = fallback
        COMPILED_KERNELS = False

nlm_filter = _impl.nlm_filter
match_blocks = _impl.match_blocks
deposit_pulses = _impl.deposit_pulses
das_sum = _impl.das_sum

__all__ = [
    "COMPILED_KERNELS",
    "nlm_filter",
    "match_blocks",
    "deposit_pulses",
    "das_sum",
    "fallback",
]
