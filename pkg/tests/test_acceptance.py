"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every full-pipeline encode goes through ``run_encode`` so criterion 3 can check
the frozen-encoder checksums of all of them at the end of the module.
"""

import os
import time

import numpy as np
import pytest

import verdicts
from oracles import psnr_scalar, ssim_direct
from siedd.bench import TOY_CORPUS, run_sweep, toy_video
from siedd.bitstream import FormatError, read_bytes
from siedd.codec import decode, encode
from siedd.config import get_preset
from siedd.coords import make_grid
from siedd.huffman import HuffmanTable, huffman_decode, huffman_encode
from siedd.metrics import psnr, ssim
from siedd.model import (
    assemble_frames,
    decode_features,
    decode_frames,
    encode_features,
    init_group_from_anchor,
    new_decoder,
    patch_targets,
)
from siedd.quant import QuantConfig, apply_quantized, quantize_model
from siedd.trainer import TrainConfig, train_stage2_group
from siedd.video_io import synth_video

pytestmark = pytest.mark.slow

CHECKSUMS: list[tuple[str, str, str]] = []


def run_encode(label, video, preset, path, **kw):
    res = encode(video, preset, path, **kw)
    CHECKSUMS.append((label, res.encoder_checksum_before, res.encoder_checksum_after))
    return res


def mean_psnr(recon, source):
    return float(np.mean([psnr(r, s) for r, s in zip(recon, source)]))


def toy_preset(**over):
    return get_preset("toy", train__log_every=0, **over)


@pytest.fixture(scope="module")
def video():
    return toy_video()


@pytest.fixture(scope="module")
def pinned(video, tmp_path_factory):
    """The pinned toy encode: moving-gradient 96x96x16, seed 42, toy preset, b=6 HQQ."""
    path = tmp_path_factory.mktemp("pinned") / "toy.siedd"
    t0 = time.perf_counter()
    res = run_encode("pinned workers=1", video, toy_preset(), path)
    return res, path, time.perf_counter() - t0


# 1 ------------------------------------------------------------------------


def test_c01_gradient_fidelity():
    from test_nn import _check_against_fd

    t0 = time.perf_counter()
    cases = [([2, 64, 64, 64, 3], True), ([34, 32, 32], False), ([5, 16, 8, 2], True), ([3, 64, 1], True)]
    errs = [_check_against_fd(dims, batch=4, seed=i, linear_last=ll) for i, (dims, ll) in enumerate(cases)]
    elapsed = time.perf_counter() - t0
    ok = max(errs) < 1e-4 and elapsed < 10
    verdicts.record(1, ok, f"max rel err {max(errs):.2e} (< 1e-4) over {len(cases)} nets, {elapsed:.1f}s (< 10s)")
    assert ok


# 2 ------------------------------------------------------------------------


def test_c02_parallel_determinism(pinned, video, tmp_path):
    res1, path1, t1 = pinned
    t0 = time.perf_counter()
    res4 = run_encode("pinned workers=4", video, toy_preset(train__workers=4), tmp_path / "w4.siedd")
    t4 = time.perf_counter() - t0
    same_file = path1.read_bytes() == (tmp_path / "w4.siedd").read_bytes()
    same_frames = np.array_equal(decode(path1).frames, decode(tmp_path / "w4.siedd").frames)
    ok = same_file and same_frames and t1 + t4 < 300
    verdicts.record(2, ok, f"files identical={same_file}, frames identical={same_frames}, "
                           f"runtime {t1 + t4:.0f}s (< 300s)")
    assert ok


# 4 ------------------------------------------------------------------------


def test_c04_bitstream_roundtrip_and_fuzz(pinned):
    res, path, _ = pinned
    grid = make_grid(96, 96)
    from siedd.bitstream import deserialize

    loaded, _ = deserialize(path)
    same = np.array_equal(decode_frames(loaded, grid), decode_frames(res.model, grid))
    data = path.read_bytes()
    rng = np.random.default_rng(0)
    silent = []
    trials = 0
    cuts = rng.integers(0, len(data), 60).tolist() + [0, 5, 37, len(data) - 1]
    flips = [(int(rng.integers(0, len(data))), int(rng.integers(0, 8))) for _ in range(200)]
    mutants = [data[:c] for c in cuts]
    for pos, bit in flips:
        b = bytearray(data)
        b[pos] ^= 1 << bit
        mutants.append(bytes(b))
    for m in mutants:
        trials += 1
        try:
            read_bytes(m)
            silent.append(trials)
        except FormatError:
            pass
    ok = same and not silent
    verdicts.record(4, ok, f"round trip bitwise={same}; {trials} corrupt files, "
                           f"{trials - len(silent)} rejected with FormatError")
    assert ok


# 5 ------------------------------------------------------------------------


def test_c05_huffman_lossless():
    rng = np.random.default_rng(5)
    failures = 0
    for _ in range(1000):
        n = int(rng.integers(1, 400))
        size = int(rng.integers(1, 257))
        if rng.random() < 0.5:
            sym = rng.integers(0, size, n)
        else:
            sym = np.minimum(rng.geometric(rng.uniform(0.05, 0.9), n) - 1, size - 1)
        table, data, n_bits = huffman_encode(sym, size)
        out = huffman_decode(HuffmanTable.from_bytes(table.to_bytes()), data, n_bits, n)
        failures += not np.array_equal(out, sym)
    table, _, bits = huffman_encode([0] * 5 + [1] * 2 + [2, 3])
    # by hand: lengths a=1 b=2 c=3 d=3, so 5*1 + 2*2 + 1*3 + 1*3 = 15 bits
    hand = table.lengths == (1, 2, 3, 3) and bits == 5 * 1 + 2 * 2 + 1 * 3 + 1 * 3
    ok = failures == 0 and hand
    verdicts.record(5, ok, f"1000 random sequences, {failures} mismatches; {{5,2,1,1}} -> lengths "
                           f"{table.lengths}, {bits} bits (hand count 15)")
    assert ok


# 6 ------------------------------------------------------------------------


def test_c06_toy_reconstruction(pinned):
    res, _, elapsed = pinned
    p = res.report.mean_psnr
    ok = p >= 30.0 and elapsed < 600
    verdicts.record(6, ok, f"pinned toy PSNR {p:.2f} dB post-quantization b=6 (>= 30), "
                           f"bpp {res.report.bpp:.3f}, encode {elapsed:.0f}s (< 600s)")
    assert ok


# 7 ------------------------------------------------------------------------


def test_c07_quantization_trends(pinned, video):
    res, _, _ = pinned
    grid = make_grid(96, 96)
    model = res.trained

    def q(bits, method):
        return mean_psnr(decode_frames(apply_quantized(model, quantize_model(model, QuantConfig(bits=bits, method=method))), grid),
                         video.frames)

    raw = mean_psnr(decode_frames(model, grid), video.frames)
    h8, h6, h4, u4 = q(8, "hqq"), q(6, "hqq"), q(4, "hqq"), q(4, "uniform")
    a = h8 >= h6 >= h4
    b = raw - h6 < 0.5
    c = h4 > u4
    verdicts.record(7, a and b and c,
                    f"(a) b8 {h8:.2f} >= b6 {h6:.2f} >= b4 {h4:.2f}: {a}; "
                    f"(b) drop none->b6 {raw - h6:.3f} dB (< 0.5): {b}; "
                    f"(c) HQQ-4 {h4:.2f} > uniform-4 {u4:.2f}: {c}")
    assert a and b and c


# 8 ------------------------------------------------------------------------


def test_c08_sampling_tradeoff(pinned, video, tmp_path):
    sparse, _, _ = pinned
    n = 96 * 96
    assert toy_preset().train.samples == n // 64  # the pinned encode is the 1/64 point
    full = run_encode("sampling full", video, toy_preset(train__samples=n), tmp_path / "f.siedd")
    ratio = sparse.report.encode_seconds / full.report.encode_seconds
    drop = full.report.mean_psnr - sparse.report.mean_psnr
    ok = ratio < 0.3 and drop <= 0.5
    verdicts.record(8, ok, f"1/64: {sparse.report.encode_seconds:.0f}s {sparse.report.mean_psnr:.2f} dB; "
                           f"full: {full.report.encode_seconds:.0f}s {full.report.mean_psnr:.2f} dB; "
                           f"time ratio {ratio:.3f} (< 0.3), PSNR drop {drop:.2f} dB (<= 0.5)")
    assert ok


# 9 ------------------------------------------------------------------------


def test_c09_group_size_trend(video, tmp_path):
    rows = run_sweep("group-size", tmp_path, preset="toy", values=[4, 8, 16], video=video)
    for r in rows:
        CHECKSUMS.append((f"group-size {r['value']}", r["encoder_checksum_before"], r["encoder_checksum_after"]))
    bpp = [r["bpp"] for r in rows]
    ps = [r["psnr"] for r in rows]
    ok = bpp[0] > bpp[1] > bpp[2] and ps[0] >= ps[1] >= ps[2]
    detail = ", ".join(f"N_g={int(r['value'])}: bpp {r['bpp']:.3f} PSNR {r['psnr']:.2f}" for r in rows)
    verdicts.record(9, ok, detail + " (bpp strictly down, PSNR non-increasing)")
    assert ok


# 10 -----------------------------------------------------------------------


def test_c10_any_resolution(pinned, video):
    _, path, _ = pinned
    native = decode(path).frames
    big = decode(path, resolution=(192, 192)).frames
    shapes = big.shape == (16, 192, 192, 3) and decode(path, resolution=(48, 144)).frames.shape == (16, 48, 144, 3)
    # native pixel centres sit midway between 2x2 fine centres, so bilinear sampling there is the 2x2 mean
    down = big.reshape(16, 96, 2, 96, 2, 3).mean(axis=(2, 4))
    p_native = mean_psnr(native, video.frames)
    p_down_native = mean_psnr(down, native)
    p_down_src = mean_psnr(down, video.frames)
    ok = shapes and abs(p_down_src - p_native) <= 3
    verdicts.record(10, ok, f"shapes ok={shapes}; vs source: native {p_native:.2f} dB, 2x-then-down "
                            f"{p_down_src:.2f} dB (within 3 dB); 2x-then-down vs native {p_down_native:.2f} dB")
    assert ok


# 11 -----------------------------------------------------------------------


def iterations_to_target(model, features, frames, targets, grid, seed, warm, target=30.0, budget=2000, every=25):
    if warm:
        dec = init_group_from_anchor(model, frames)
    else:
        dec = new_decoder(model.config, frames, seed, stream=1000 + frames[0])
    cfg = TrainConfig(group_size=len(frames), samples=144, stage2_iters=budget, lr=2e-4, seed=seed, log_every=0)
    hit = []

    def check(d, it):
        p = mean_psnr(assemble_frames(decode_features(d, features), grid), targets)
        if p >= target:
            hit.append(it)
            return True
        return False

    if check(dec, 0):
        return 0
    train_stage2_group(features, patch_targets(targets, 1), dec, cfg, 1, eval_every=every, eval_fn=check)
    return hit[0] if hit else float("inf")


def test_c11_warm_start(pinned, video):
    res, _, _ = pinned
    model = res.trained
    grid = make_grid(96, 96)
    feats = encode_features(model, grid.coords)
    frames = [5, 6, 7]  # no anchor inside: anchors are 0, 4, 8, 12
    targets = video.frames[frames]
    warm = [iterations_to_target(model, feats, frames, targets, grid, s, True) for s in range(5)]
    cold = [iterations_to_target(model, feats, frames, targets, grid, s, False) for s in range(5)]
    mw, mc = float(np.median(warm)), float(np.median(cold))
    ok = mw < mc
    verdicts.record(11, ok, f"iterations to 30 dB, anchor init {warm} (median {mw:g}) vs "
                            f"random init {cold} (median {mc:g}), budget 2000")
    assert ok


# 12 -----------------------------------------------------------------------


def test_c12_metric_oracles():
    rng = np.random.default_rng(12)
    dp = ds = 0.0
    for k in range(20):
        a = rng.random((20, 20, 3))
        b = np.clip(a + rng.normal(0, rng.uniform(0.005, 0.2), a.shape), 0, 1)
        dp = max(dp, abs(psnr(a, b) - psnr_scalar(a.tolist(), b.tolist())))
        ds = max(ds, abs(ssim(a, b) - ssim_direct(a.tolist(), b.tolist())))
    ok = dp <= 1e-9 and ds <= 1e-6
    verdicts.record(12, ok, f"20 pairs: max |PSNR - oracle| {dp:.1e} dB (<= 1e-9), "
                            f"max |SSIM - oracle| {ds:.1e} (<= 1e-6)")
    assert ok


# 13 -----------------------------------------------------------------------


def physical_cores() -> int:
    try:
        import psutil

        return psutil.cpu_count(logical=False) or 1
    except ImportError:
        return os.cpu_count() or 1


def test_c13_parallel_speedup(video, tmp_path):
    cores = physical_cores()
    if cores < 4:
        verdicts.record(13, None, f"needs >= 4 physical cores, this machine has {cores}")
        pytest.skip(f"criterion 13 needs >= 4 physical cores; found {cores}")
    clip = synth_video(**{**TOY_CORPUS, "n_frames": 48})  # 12 groups of 4
    times = {}
    for w in (1, 4):
        t0 = time.perf_counter()
        run_encode(f"speedup workers={w}", clip, toy_preset(train__workers=w), tmp_path / f"p{w}.siedd")
        times[w] = time.perf_counter() - t0
    speedup = times[1] / times[4]
    ok = speedup >= 1.5
    verdicts.record(13, ok, f"12-group encode {times[1]:.0f}s (1 worker) vs {times[4]:.0f}s (4 workers), "
                            f"speedup {speedup:.2f}x (>= 1.5)")
    assert ok


# 3 (runs last: it audits every encode above) -------------------------------


def test_c03_frozen_encoder_everywhere():
    assert CHECKSUMS, "no encodes ran"
    bad = [label for label, before, after in CHECKSUMS if before != after]
    ok = not bad
    verdicts.record(3, ok, f"{len(CHECKSUMS)} encodes, encoder checksum unchanged across stage 2 in "
                           f"{len(CHECKSUMS) - len(bad)}")
    assert ok
