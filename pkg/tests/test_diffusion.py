import math

import numpy as np
import pytest

from usdenoise.diffusion import (
    PAPER_LITERAL,
    STANDARD_POSTERIOR,
    NoiseSchedule,
    PredictorFailure,
    denoise_from,
    forward_jump,
    forward_step,
    make_schedule,
    reverse_step,
)
from usdenoise.image import RANGE_SIGNED, Image2D
from usdenoise.rng import GaussianField, standard_normal


def img(data):
    return Image2D(np.asarray(data, dtype=np.float32), RANGE_SIGNED)


def const_img(value, shape=(8, 8)):
    return img(np.full(shape, value, dtype=np.float32))


# ---------------------------------------------------------------- schedule

def test_default_schedule_constant_beta():
    s = make_schedule(300, "constant-beta", 1.0 / 300.0)
    assert s.T == 300
    assert np.allclose(s.alphas, 299.0 / 300.0, rtol=0, atol=1e-15)


def test_single_step_schedule():
    beta = 0.2
    s = make_schedule(1, "constant-beta", beta)
    assert s.alpha_bar(1) == pytest.approx(1.0 - beta, abs=1e-15)


def test_alpha_bar_300_matches_direct_product():
    s = make_schedule(300, "constant-beta", 1.0 / 300.0)
    # extended-precision oracle: (299/300)^300
    assert s.alpha_bar(300) == pytest.approx(0.367265455775, abs=1e-9)


def test_incremental_matches_direct_product():
    s = make_schedule(1000, "linear-beta", (1e-4, 0.02))
    direct = np.array([math.prod(s.alphas[:t + 1].tolist()) for t in range(s.T)])
    assert np.allclose(s.alpha_bars, direct, rtol=1e-6)


def test_schedule_invariants():
    s = make_schedule(50, "linear-beta", (0.01, 0.3))
    assert len(s.betas) == len(s.alphas) == len(s.alpha_bars) == 50
    assert np.all(s.betas > 0) and np.all(s.betas < 1)
    assert np.allclose(s.alphas, 1.0 - s.betas)
    assert np.all(np.diff(s.alpha_bars) < 0)  # strictly decreasing
    recur = s.alpha_bars[1:] / s.alpha_bars[:-1]
    assert np.allclose(recur, s.alphas[1:], rtol=1e-12)
    assert s.alpha_bars[0] == s.alphas[0]


def test_schedule_rejects_bad_input():
    with pytest.raises(ValueError):
        make_schedule(0)
    with pytest.raises(ValueError):
        make_schedule(10, "constant-beta", 0.0)
    with pytest.raises(ValueError):
        make_schedule(10, "constant-beta", 1.0)
    with pytest.raises(ValueError):
        make_schedule(10, "linear-beta", (0.1, 1.5))
    with pytest.raises(ValueError):
        NoiseSchedule(np.array([0.1, -0.2]))
    with pytest.raises(ValueError):
        make_schedule(10, "cosine")


def test_monotone_signal_coefficient():
    s = make_schedule(300)
    coef = np.sqrt(s.alpha_bars)
    assert np.all(np.diff(coef) < 0)


# ------------------------------------------------------------ forward_step

def test_forward_step_zero_noise():
    s = make_schedule(300)
    x = img(np.linspace(-1, 1, 64).reshape(8, 8))
    out = forward_step(x, 5, s, eps=None)
    assert np.allclose(out.data, math.sqrt(1 - 1 / 300) * x.data, rtol=1e-6)


def test_forward_step_zero_signal():
    s = make_schedule(300)
    e = standard_normal((8, 8), seed=1)
    out = forward_step(const_img(0.0), 3, s, eps=e)
    assert np.allclose(out.data, math.sqrt(1 / 300) * e, rtol=1e-6)


def test_forward_step_constant_oracle():
    s = make_schedule(300)
    out = forward_step(const_img(1.0), 1, s, eps=None)
    # high-precision oracle sqrt(299/300)
    assert np.allclose(out.data, 0.9983319421, atol=1e-6)


def test_forward_step_validation():
    s = make_schedule(10)
    x = const_img(1.0)
    with pytest.raises(ValueError):
        forward_step(x, 0, s)
    with pytest.raises(ValueError):
        forward_step(x, 11, s)
    with pytest.raises(ValueError):
        forward_step(x, 1, s, eps=np.zeros((4, 4)))


# ------------------------------------------------------------ forward_jump

def test_forward_jump_zero_noise():
    s = make_schedule(300)
    x = img(standard_normal((8, 8), seed=2))
    out = forward_jump(x, 17, s, eps=None)
    assert np.allclose(out.data, math.sqrt(s.alpha_bar(17)) * x.data, rtol=1e-6)


def test_forward_jump_constant_t10_oracle():
    s = make_schedule(300)
    out = forward_jump(const_img(1.0), 10, s, eps=None)
    # oracle sqrt((299/300)^10)
    assert np.allclose(out.data, 0.9834440747, atol=1e-5)


def test_forward_step_composition_equals_jump():
    s = make_schedule(300)
    x = img(standard_normal((16, 16), seed=3))
    stepped = x
    for t in range(1, 21):
        stepped = forward_step(stepped, t, s, eps=None)
    jumped = forward_jump(x, 20, s, eps=None)
    assert np.allclose(stepped.data, jumped.data, rtol=1e-5)


def test_forward_jump_monte_carlo_variance():
    s = make_schedule(300)
    t = 10
    n = 10_000
    eps = standard_normal((n, 5, 5), seed=77).astype(np.float64)
    ab = s.alpha_bar(t)
    x_t = math.sqrt(ab) * 0.5 + math.sqrt(1 - ab) * eps
    var = x_t.var(axis=0)
    assert np.all(np.abs(var - (1 - ab)) < 0.05 * (1 - ab))


def test_forward_jump_monte_carlo_mean():
    s = make_schedule(300)
    t = 20
    n = 10_000
    x0 = 0.7
    acc = np.zeros((4, 4), dtype=np.float64)
    for k in range(0, n, 500):
        e = standard_normal((500, 4, 4), seed=11, draw_index=k).astype(np.float64)
        ab = s.alpha_bar(t)
        acc += (math.sqrt(ab) * x0 + math.sqrt(1 - ab) * e).sum(axis=0)
    mean = acc / n
    bound = 3 * math.sqrt((1 - s.alpha_bar(t)) / n)
    assert np.all(np.abs(mean - math.sqrt(s.alpha_bar(t)) * x0) < bound)


def test_forward_determinism_bit_identical():
    s = make_schedule(300)
    x = img(standard_normal((8, 8), seed=4))
    e = GaussianField((8, 8), seed=5, draw_index=9)
    a = forward_jump(x, 30, s, eps=e)
    b = forward_jump(x, 30, s, eps=e)
    assert np.array_equal(a.data, b.data)


# ------------------------------------------------------------ reverse_step

def test_reverse_step_zero_prediction_paper_literal():
    s = make_schedule(300)
    x = img(standard_normal((8, 8), seed=6))
    out = reverse_step(x, 12, np.zeros((8, 8)), s, PAPER_LITERAL)
    assert np.allclose(out.data, x.data / math.sqrt(s.alpha(12)), rtol=1e-6)
    assert out.meta["sampler_variant"] == PAPER_LITERAL


def test_reverse_step_posterior_inverts_t1():
    s = make_schedule(300)
    x0 = img(standard_normal((8, 8), seed=7))
    e = standard_normal((8, 8), seed=8)
    x1 = forward_jump(x0, 1, s, eps=e)
    rec = reverse_step(x1, 1, e, s, STANDARD_POSTERIOR, inject=None)
    assert np.max(np.abs(rec.data - x0.data)) < 1e-6


def test_reverse_step_constant_paper_literal_t20_oracle():
    s = make_schedule(300)
    out = reverse_step(const_img(1.0), 20, const_img(1.0), s, PAPER_LITERAL)
    # scalar oracle: 1/sqrt(a) + (1-a)/sqrt(1-a^20), a = 299/300
    a = 299.0 / 300.0
    expect = 1 / math.sqrt(a) + (1 - a) / math.sqrt(1 - a ** 20)
    assert expect == pytest.approx(1.01478595519, abs=1e-9)
    assert np.allclose(out.data, expect, atol=1e-5)


def test_reverse_step_validation():
    s = make_schedule(10)
    x = const_img(0.5)
    with pytest.raises(ValueError):
        reverse_step(x, 11, None, s)
    with pytest.raises(ValueError):
        reverse_step(x, 1, np.zeros((3, 3)), s)
    with pytest.raises(ValueError):
        reverse_step(x, 1, None, s, variant="ddim")


# ------------------------------------------------------------ denoise_from

def test_denoise_single_step_zero_predictor():
    s = make_schedule(300)
    x = img(standard_normal((8, 8), seed=9))
    out = denoise_from(x, 1, lambda im, t: np.zeros(im.shape), s, PAPER_LITERAL)
    assert np.allclose(out.data, x.data / math.sqrt(s.alpha(1)), rtol=1e-6)


def test_denoise_runs_exactly_t_start_steps():
    s = make_schedule(300)
    calls = []

    def predictor(im, t):
        calls.append(t)
        return np.zeros(im.shape)

    denoise_from(const_img(0.2), 20, predictor, s)
    assert calls == list(range(20, 0, -1))


def test_denoise_oracle_predictor_reduces_error():
    s = make_schedule(300)
    x0 = img(np.tanh(standard_normal((16, 16), seed=10)))
    for t_start in (10, 20):
        e = standard_normal((16, 16), seed=20 + t_start)
        noisy = forward_jump(x0, t_start, s, eps=e)
        rec = denoise_from(noisy, t_start, lambda im, t: e, s, STANDARD_POSTERIOR)
        mse_noisy = np.mean((noisy.data - x0.data) ** 2)
        mse_rec = np.mean((rec.data - x0.data) ** 2)
        assert mse_rec < mse_noisy  # PSNR strictly improves


def test_denoise_deterministic_with_injection():
    s = make_schedule(300)
    x = img(standard_normal((8, 8), seed=11))
    noisy = forward_jump(x, 15, s, eps=GaussianField((8, 8), 12))
    a = denoise_from(noisy, 15, lambda im, t: np.zeros(im.shape), s,
                     STANDARD_POSTERIOR, inject_seed=99)
    b = denoise_from(noisy, 15, lambda im, t: np.zeros(im.shape), s,
                     STANDARD_POSTERIOR, inject_seed=99)
    c = denoise_from(noisy, 15, lambda im, t: np.zeros(im.shape), s,
                     STANDARD_POSTERIOR, inject_seed=100)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_predictor_failure_carries_step():
    s = make_schedule(300)

    def predictor(im, t):
        if t == 7:
            raise RuntimeError("boom")
        return np.zeros(im.shape)

    with pytest.raises(PredictorFailure) as ei:
        denoise_from(const_img(0.1), 12, predictor, s)
    assert ei.value.step == 7
