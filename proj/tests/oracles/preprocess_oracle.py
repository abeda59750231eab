#!/usr/bin/env python3
# Straight-line reference for the window preprocessing chain. Writes the
# golden fixture consumed by test_preprocess (or checks it with --check).
#
#   zero-suppress (x < thr -> 0), z = (x - mu_k) / sigma_k,
#   z = min(z, clip * sigma_k), joint min-max over all channels with eps,
#   float32 round-to-nearest, capped just below 1.

import argparse
import pathlib
import struct
import sys

import numpy as np

C, H, W = 3, 125, 125
THRESHOLD = 1e-3
CLIP = 500.0
EPS = 1e-5
MU = [0.0125, 0.375, 0.0625]
SIGMA = [0.5, 1.75, 0.25]
N_WINDOWS = 3


def make_inputs():
    rng = np.random.default_rng(20240611)
    out = []
    for w in range(N_WINDOWS):
        x = np.zeros((C, H, W), dtype=np.float32)
        # sparse deposits
        mask = rng.random((C, H, W)) < 0.05
        x[mask] = rng.exponential(2.0, size=mask.sum()).astype(np.float32)
        # sub-threshold noise
        noise = rng.random((C, H, W)) < 0.02
        x[noise] = rng.uniform(0.0, 1e-3, size=noise.sum()).astype(np.float32)
        # exactly-at-threshold pixels survive suppression
        x[0, 10 + w, 20] = np.float32(1e-3)
        # outliers above the clip cap
        x[0, 62, 62] = np.float32(300.0 + w)
        x[2, 60, 64] = np.float32(90.0)
        out.append(x)
    return out


def preprocess(x):
    v = x.astype(np.float64).reshape(C, H * W)
    res = np.empty_like(v)
    for k in range(C):
        row = v[k].copy()
        row[row < THRESHOLD] = 0.0
        row = (row - MU[k]) / SIGMA[k]
        row = np.minimum(row, CLIP * SIGMA[k])
        res[k] = row
    lo = res.min()
    hi = res.max()
    scaled = (res - lo) / ((hi - lo) + EPS)
    f = scaled.astype(np.float32)
    below_one = np.float32(1.0) - np.float32(np.finfo(np.float32).eps / 2)
    f = np.minimum(f, below_one)
    return f.reshape(C, H, W)


def stats_text():
    return "mu: " + " ".join(repr(m) for m in MU) + "\nsigma: " + " ".join(repr(s) for s in SIGMA) + "\n"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--check", action="store_true", help="compare with the files in --out")
    args = ap.parse_args()
    out = pathlib.Path(args.out)

    inputs = make_inputs()
    expected = [preprocess(x) for x in inputs]
    blobs = {
        "preprocess_golden_input.bin": b"".join(x.astype("<f4").tobytes() for x in inputs),
        "preprocess_golden_output.bin": b"".join(y.astype("<f4").tobytes() for y in expected),
        "preprocess_golden_stats.txt": stats_text().encode(),
    }
    header = struct.pack("<I", N_WINDOWS)
    blobs["preprocess_golden_input.bin"] = header + blobs["preprocess_golden_input.bin"]
    blobs["preprocess_golden_output.bin"] = header + blobs["preprocess_golden_output.bin"]

    if args.check:
        bad = [name for name, data in blobs.items() if (out / name).read_bytes() != data]
        if bad:
            print("fixture differs from oracle:", ", ".join(bad))
            return 1
        print("fixture matches oracle")
        return 0
    out.mkdir(parents=True, exist_ok=True)
    for name, data in blobs.items():
        (out / name).write_bytes(data)
    print("wrote", len(blobs), "files to", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
