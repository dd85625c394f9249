"""Encode the pinned toy clip and print its rate-distortion numbers.

    python3 scripts/toy_encode.py --out /tmp/toy.siedd [--workers 4] [--frames-dir DIR]
"""

import argparse
import logging

from siedd.bench import toy_video
from siedd.codec import decode, encode
from siedd.config import get_preset
from siedd.video_io import write_frames


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="toy.siedd")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--frames-dir", help="also write source and decoded PNGs here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    video = toy_video()
    res = encode(video, get_preset("toy", train__workers=args.workers), args.out, report_prequant=True)
    print(f"pre-quant  PSNR {res.prequant_report.mean_psnr:.3f} dB")
    print(f"post-quant PSNR {res.report.mean_psnr:.3f} dB  SSIM {res.report.mean_ssim:.5f}")
    print(f"file {res.file_bytes} bytes  bpp {res.report.bpp:.4f}  encode {res.report.encode_seconds:.1f}s")
    if args.frames_dir:
        write_frames(video.frames, f"{args.frames_dir}/source")
        decode(args.out, f"{args.frames_dir}/decoded")


if __name__ == "__main__":
    main()
