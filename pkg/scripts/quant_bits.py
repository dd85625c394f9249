"""PSNR change against the unquantized model for each bit width, HQQ vs uniform.

Trains the toy model once (or loads a pickled one with --model) and
requantizes it at every width, so only quantization differs between rows.
"""

import argparse
import pickle

import numpy as np

from siedd.bench import toy_video
from siedd.codec import encode
from siedd.config import get_preset
from siedd.coords import make_grid
from siedd.metrics import psnr
from siedd.model import decode_frames
from siedd.quant import QuantConfig, apply_quantized, quantize_model


def mean_psnr(model, grid, frames):
    return float(np.mean([psnr(a, b) for a, b in zip(decode_frames(model, grid), frames)]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", help="pickle of a trained model; written after training if missing")
    ap.add_argument("--bits", default="4,5,6,7,8")
    args = ap.parse_args()

    video = toy_video()
    grid = make_grid(video.height, video.width)
    model = None
    if args.model:
        try:
            with open(args.model, "rb") as f:
                model = pickle.load(f)
        except FileNotFoundError:
            pass
    if model is None:
        model = encode(video, get_preset("toy"), "/tmp/quant_bits.siedd").trained
        if args.model:
            with open(args.model, "wb") as f:
                pickle.dump(model, f)

    raw = mean_psnr(model, grid, video.frames)
    print(f"unquantized {raw:.3f} dB")
    print(f"{'bits':>4} {'hqq':>9} {'uniform':>9}")
    for b in map(int, args.bits.split(",")):
        row = [mean_psnr(apply_quantized(model, quantize_model(model, QuantConfig(bits=b, method=m))), grid,
                         video.frames) - raw for m in ("hqq", "uniform")]
        print(f"{b:>4} {row[0]:>+9.3f} {row[1]:>+9.3f}")


if __name__ == "__main__":
    main()
