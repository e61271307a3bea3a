"""Per-frame encode+decode latency, single-threaded.

    python scripts/throughput.py --shape 256,52,52 --repeats 5
"""

import argparse
import sys
import time

import numpy as np

from ifmdc.pipeline import CodecConfig, Decoder, Encoder
from ifmdc.tensor import SyntheticSpec, generate_synthetic


def time_frames(shape, k, gop, frames, repeats, noise):
    seq = generate_synthetic(SyntheticSpec(shape=shape, frame_count=frames, noise_scale=noise))
    config = CodecConfig.make(k=k, gop_t=gop)
    enc_ms, dec_ms = {"key": [], "residual": []}, {"key": [], "residual": []}
    for _ in range(repeats):
        enc, dec = Encoder(config, shape), Decoder(config, shape)
        for fmap in seq:
            kind = "key" if config.is_key(fmap.frame_index) else "residual"
            t0 = time.perf_counter()
            packet = enc.encode_frame(fmap)
            t1 = time.perf_counter()
            dec.decode_frame(packet)
            t2 = time.perf_counter()
            enc_ms[kind].append(1e3 * (t1 - t0))
            dec_ms[kind].append(1e3 * (t2 - t1))
    return enc_ms, dec_ms


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shape", default="256,52,52")
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--gop", type=int, default=15)
    p.add_argument("--noise", type=float, default=0.0)
    args = p.parse_args(argv)
    shape = tuple(int(v) for v in args.shape.split(","))
    enc_ms, dec_ms = time_frames(shape, args.k, args.gop, args.frames, args.repeats, args.noise)
    print("kind,encode_median_ms,decode_median_ms,total_median_ms,frames_timed")
    for kind in ("key", "residual"):
        if not enc_ms[kind]:
            continue
        e, d = np.array(enc_ms[kind]), np.array(dec_ms[kind])
        print(f"{kind},{np.median(e):.2f},{np.median(d):.2f},{np.median(e + d):.2f},{e.size}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
