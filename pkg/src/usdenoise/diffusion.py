"""Variance schedule plus the forward (corruption) and reverse (denoising)
Markov processes.

Step indices are 1-based: ``t`` runs over ``1..T`` and ``x_0`` is the clean
image.  Two reverse-step variants are provided:

- ``"paper-literal"``:      x_{t-1} = x_t/sqrt(a_t) + (1-a_t)/sqrt(1-abar_t) * eps_hat
- ``"standard-posterior"``: x_{t-1} = (x_t - (1-a_t)/sqrt(1-abar_t) * eps_hat)/sqrt(a_t)
                                      + sigma_t * z,   sigma_t = sqrt(b_t)

The posterior variant algebraically inverts the forward jump when fed the
exact noise, which is why it is the default; the literal variant is kept
selectable.  The injected noise z is forced to zero at t=1 or when no
injection field is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from usdenoise.image import Image2D
from usdenoise.rng import GaussianField

DEFAULT_T = 300
DEFAULT_BETA = 1.0 / 300.0

PAPER_LITERAL = "paper-literal"
STANDARD_POSTERIOR = "standard-posterior"
_VARIANTS = (PAPER_LITERAL, STANDARD_POSTERIOR)


class PredictorFailure(RuntimeError):
    """A noise predictor raised during the reverse chain; carries the step."""

    def __init__(self, step: int, cause: BaseException):
        super().__init__(f"noise predictor failed at step t={step}: {cause}")
        self.step = step


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variances b_t with derived a_t = 1 - b_t and cumulative
    products abar_t = prod_{s<=t} a_s (1-based indexing)."""

    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("schedule needs at least one step")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("every per-step variance must lie in (0, 1)")
        object.__setattr__(self, "betas", betas)
        alphas = 1.0 - betas
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", np.cumprod(alphas))

    @property
    def T(self) -> int:
        return self.betas.size

    def _check_t(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.T:
            raise ValueError(f"step index t={t} outside 1..{self.T}")
        return t

    def beta(self, t: int) -> float:
        return float(self.betas[self._check_t(t) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check_t(t) - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self._check_t(t) - 1])


def make_schedule(T: int = DEFAULT_T, mode: str = "constant-beta",
                  beta_or_range=DEFAULT_BETA) -> NoiseSchedule:
    """Build a schedule of ``T`` steps.

    ``constant-beta`` takes a single variance; ``linear-beta`` takes a
    ``(low, high)`` pair interpolated linearly over the steps.
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    if mode == "constant-beta":
        betas = np.full(T, float(beta_or_range), dtype=np.float64)
    elif mode == "linear-beta":
        lo, hi = (float(v) for v in beta_or_range)
        betas = np.linspace(lo, hi, T, dtype=np.float64)
    else:
        raise ValueError(f"unknown schedule mode {mode!r}")
    return NoiseSchedule(betas)


def _noise_array(eps, shape) -> np.ndarray:
    """Accept a GaussianField, an array, a scalar, or None (= zero noise)."""
    if eps is None:
        return np.zeros(shape, dtype=np.float32)
    if isinstance(eps, GaussianField):
        eps = eps.samples
    arr = np.asarray(eps, dtype=np.float32)
    if arr.ndim == 0:
        return np.full(shape, float(arr), dtype=np.float32)
    if arr.shape != tuple(shape):
        raise ValueError(f"noise shape {arr.shape} does not match image {tuple(shape)}")
    return arr


def forward_step(x_prev: Image2D, t: int, sched: NoiseSchedule, eps=None) -> Image2D:
    """One corruption step: sqrt(1-b_t) * x_prev + sqrt(b_t) * eps."""
    t = sched._check_t(t)
    e = _noise_array(eps, x_prev.shape)
    b = sched.beta(t)
    out = np.float32(np.sqrt(1.0 - b)) * x_prev.data + np.float32(np.sqrt(b)) * e
    return x_prev.like(out, t=t)


def forward_jump(x0: Image2D, t: int, sched: NoiseSchedule, eps=None) -> Image2D:
    """Jump straight to step t: sqrt(abar_t) * x0 + sqrt(1-abar_t) * eps."""
    t = sched._check_t(t)
    e = _noise_array(eps, x0.shape)
    ab = sched.alpha_bar(t)
    out = np.float32(np.sqrt(ab)) * x0.data + np.float32(np.sqrt(1.0 - ab)) * e
    return x0.like(out, t=t)


def reverse_step(x_t: Image2D, t: int, eps_hat, sched: NoiseSchedule,
                 variant: str = STANDARD_POSTERIOR, inject=None) -> Image2D:
    """One denoising step from x_t to x_{t-1} given predicted noise."""
    if variant not in _VARIANTS:
        raise ValueError(f"unknown sampler variant {variant!r}")
    t = sched._check_t(t)
    if isinstance(eps_hat, Image2D):
        eps_hat = eps_hat.data
    e = _noise_array(eps_hat, x_t.shape)
    a = sched.alpha(t)
    ab = sched.alpha_bar(t)
    coef = (1.0 - a) / np.sqrt(1.0 - ab)
    if variant == PAPER_LITERAL:
        out = x_t.data / np.float32(np.sqrt(a)) + np.float32(coef) * e
    else:
        out = (x_t.data - np.float32(coef) * e) / np.float32(np.sqrt(a))
        if inject is not None and t > 1:
            z = _noise_array(inject, x_t.shape)
            out = out + np.float32(np.sqrt(sched.beta(t))) * z
    return x_t.like(out, t=t - 1, sampler_variant=variant)


def denoise_from(x_noisy: Image2D, t_start: int, predictor, sched: NoiseSchedule,
                 variant: str = STANDARD_POSTERIOR,
                 inject_seed: int | None = None) -> Image2D:
    """Iterate reverse_step from t_start down to 1.

    ``predictor(x: Image2D, t: int) -> Image2D | ndarray`` supplies the
    per-step noise estimate.  When ``inject_seed`` is given and the variant
    is standard-posterior, a fresh reproducible noise field (draw index = t)
    is injected at every step except t=1.
    """
    t_start = sched._check_t(t_start)
    x = x_noisy
    for t in range(t_start, 0, -1):
        try:
            eps_hat = predictor(x, t)
        except Exception as exc:
            raise PredictorFailure(t, exc) from exc
        inject = None
        if inject_seed is not None and variant == STANDARD_POSTERIOR and t > 1:
            inject = GaussianField(x.shape, inject_seed, draw_index=t)
        x = reverse_step(x, t, eps_hat, sched, variant, inject)
    return x
