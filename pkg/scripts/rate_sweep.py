"""Sweep k and T on a synthetic fixture and write the rate report CSV.

    python scripts/rate_sweep.py --shape 64,52,52 --frames 30 --out sweep.csv
"""

import argparse
import sys
from dataclasses import dataclass

from ifmdc import metrics
from ifmdc.cli import bench_rows
from ifmdc.codec_math import ClipRange
from ifmdc.tensor import SyntheticSpec, generate_synthetic


@dataclass(frozen=True)
class SweepConfig:
    fixture: SyntheticSpec
    ks: tuple[int, ...] = (3, 5, 7, 9, 17, 33, 65)
    gops: tuple[int, ...] = (1, 5, 15, 30)
    clip: ClipRange = ClipRange(0.0, 6.0)
    exclude_key: bool = False


def run(cfg: SweepConfig) -> list[dict]:
    seq = generate_synthetic(cfg.fixture)
    return bench_rows(seq, cfg.clip, cfg.ks, cfg.gops, cfg.exclude_key)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shape", default="64,52,52")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blob-speed", type=float, default=0.5)
    p.add_argument("--noise-scale", type=float, default=0.0)
    p.add_argument("--exclude-key", action="store_true",
                   help="count p-frames only (T=1 rows are then skipped)")
    p.add_argument("--out", default=None)
    args = p.parse_args(argv)
    fixture = SyntheticSpec(
        shape=tuple(int(v) for v in args.shape.split(",")), frame_count=args.frames,
        seed=args.seed, blob_speed=args.blob_speed, noise_scale=args.noise_scale,
    )
    gops = (5, 15, 30) if args.exclude_key else (1, 5, 15, 30)
    rows = run(SweepConfig(fixture, gops=gops, exclude_key=args.exclude_key))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            metrics.write_report_csv(rows, fh)
    else:
        metrics.write_report_csv(rows, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
