"""Byte ratio of temporal (T=15) to intra-only (T=1) coding across motion levels.

Counts the frames that are p-frames at T=15 in both runs, and also reports
bits per feature-map element. Used to calibrate the low-motion rate fixture.

    python scripts/temporal_gain.py --speeds 0,0.25,0.5,1,2
"""

import argparse
import sys

import numpy as np

from ifmdc.container import packet_size_bytes
from ifmdc.pipeline import CodecConfig, encode_sequence
from ifmdc.tensor import SyntheticSpec, generate_synthetic


def measure(spec: SyntheticSpec, k: int = 7, gop: int = 15) -> dict:
    seq = generate_synthetic(spec)
    sizes = {}
    for t in (1, gop):
        _, packets = encode_sequence(CodecConfig.make(k=k, gop_t=t), seq)
        sizes[t] = [packet_size_bytes(p) for p in packets]
    frames = [n for n in range(len(seq)) if n % gop]
    elements = int(np.prod(spec.shape))
    p_bytes = sum(sizes[gop][n] for n in frames)
    return {
        "ratio": p_bytes / sum(sizes[1][n] for n in frames),
        "p_bits_per_element": 8 * p_bytes / (len(frames) * elements),
        "all_bits_per_element": 8 * sum(sizes[gop]) / (len(seq) * elements),
    }


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shape", default="64,52,52")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--speeds", default="0,0.25,0.5,1,2")
    p.add_argument("--noise", default="0,0.3")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--k", type=int, default=7)
    args = p.parse_args(argv)
    shape = tuple(int(v) for v in args.shape.split(","))
    print("speed,noise,seed,ratio,p_bits_per_element,all_bits_per_element")
    for speed in (float(v) for v in args.speeds.split(",")):
        for noise in (float(v) for v in args.noise.split(",")):
            for seed in range(args.seeds):
                spec = SyntheticSpec(shape=shape, frame_count=args.frames, seed=seed,
                                     blob_speed=speed, noise_scale=noise)
                m = measure(spec, args.k)
                print(f"{speed},{noise},{seed},{m['ratio']:.4f},"
                      f"{m['p_bits_per_element']:.4f},{m['all_bits_per_element']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
