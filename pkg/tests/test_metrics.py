import json
import math

import numpy as np
import pytest

from oracles import psnr_scalar, ssim_direct
from siedd.metrics import PSNR_CAP, RdReport, bpp, evaluate, gaussian_window, psnr, ssim
from siedd.nn import ConfigError


def pair(seed, shape=(16, 16, 3), noise=0.05):
    rng = np.random.default_rng(seed)
    a = rng.random(shape)
    return a, np.clip(a + rng.normal(0, noise, shape), 0, 1)


def test_identical_frames_hit_the_cap():
    a = np.random.default_rng(0).random((4, 4, 3))
    assert psnr(a, a) == PSNR_CAP == 100.0


def test_uniform_error_gives_20db():
    a = np.full((8, 8, 3), 0.3)
    assert abs(psnr(a, a + 0.1) - 20.0) < 1e-9


def test_psnr_scalar_oracle_and_symmetry():
    for seed in range(5):
        a, b = pair(seed)
        ref = psnr_scalar(a.tolist(), b.tolist())
        assert abs(psnr(a, b) - ref) < 1e-9
        assert psnr(a, b) == psnr(b, a)


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(1)
    a = rng.random((32, 32, 3))
    n = rng.normal(size=a.shape)
    vals = [psnr(a, a + s * n) for s in (0.01, 0.03, 0.1)]
    assert vals[0] > vals[1] > vals[2]


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))


def test_ssim_identical_is_exactly_one():
    for seed in range(3):
        a = np.random.default_rng(seed).random((20, 13, 3))
        assert ssim(a, a) == 1.0


def test_ssim_checkerboard_inverse_is_strongly_negative():
    i, j = np.indices((16, 16))
    a = np.repeat(((i + j) % 2).astype(np.float64)[..., None], 3, axis=2)
    assert ssim(a, 1 - a) < -0.9


def test_ssim_direct_oracle_16x16():
    a, b = pair(7)
    assert abs(ssim(a, b) - ssim_direct(a.tolist(), b.tolist())) < 1e-6


def test_ssim_rejects_small_frames():
    with pytest.raises(ConfigError):
        ssim(np.zeros((10, 30, 3)), np.zeros((10, 30, 3)))


def test_gaussian_window_is_normalised():
    g = gaussian_window()
    assert len(g) == 11 and abs(g.sum() - 1) < 1e-15 and g.argmax() == 5


def test_bpp():
    assert bpp(1, 1, 1, 1) == 1.0
    # 600 HD frames at 0.297 bpp
    size_bytes = 0.297 * 600 * 1920 * 1080 / 8
    assert abs(size_bytes / 1e6 - 46.2) < 0.05
    assert bpp(round(size_bytes * 8), 600, 1080, 1920) == pytest.approx(0.297, abs=1e-9)
    with pytest.raises(ConfigError):
        bpp(8, 0, 1, 1)


def test_report_means_and_outputs(tmp_path):
    rep = RdReport(psnr=[30.0, 40.0], ssim=[0.9, 0.8], bpp=0.5)
    assert rep.mean_psnr == 35.0 and math.isclose(rep.mean_ssim, 0.85)
    lines = rep.lines()
    assert lines[0] == "frame=0 psnr=30.0000 ssim=0.900000"
    assert lines[-1].startswith("mean_psnr=35.0000 mean_ssim=0.850000 bpp=0.500000")
    rep.write(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["mean_psnr"] == 35.0 and data["n_frames"] == 2 and data["psnr"] == [30.0, 40.0]


def test_evaluate_per_frame():
    rng = np.random.default_rng(2)
    src = rng.random((3, 12, 12, 3))
    rec = src.copy()
    rec[1] += 0.1
    rep = evaluate(rec, src)
    assert rep.psnr[0] == 100.0 and abs(rep.psnr[1] - 20) < 1e-9 and len(rep.ssim) == 3
    assert evaluate(rec, src, with_ssim=False).ssim == []
