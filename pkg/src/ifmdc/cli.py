"""Command-line front end.

Usage errors exit with status 2, data errors with status 1; both print one
line to stderr of the form ``error: <message>``.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import metrics, rearrange
from .codec_math import K_MAX, K_MIN, ClipRange, QuantSpec
from .container import packet_size_bytes, read_stream, write_stream
from .errors import CodecError
from .pipeline import CodecConfig, Decoder, Encoder, decode_sequence, encode_sequence
from .stream import Listener, open_sender, shape_policy
from .tensor import FeatureSequence, SyntheticSpec, generate_synthetic, load_sequence, save_sequence


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _k(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be an integer, got {text!r}") from None
    if not K_MIN <= k <= K_MAX:
        raise argparse.ArgumentTypeError(f"k must be in {K_MIN}..={K_MAX}")
    return k


def _gop(text: str) -> int:
    try:
        t = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gop must be an integer, got {text!r}") from None
    if not 1 <= t <= 0xFFFF:
        raise argparse.ArgumentTypeError("gop must be in 1..=65535")
    return t


def _list_of(item):
    def parse(text: str):
        return [item(part) for part in text.split(",") if part]
    return parse


def _clip(text: str) -> ClipRange:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"clip range must be MIN:MAX, got {text!r}")
    try:
        return ClipRange(float(lo), float(hi))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad clip range {text!r}: {exc}") from None


def _shape(text: str) -> tuple[int, int, int]:
    parts = text.replace("x", ",").split(",")
    try:
        shape = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}") from None
    if len(shape) != 3 or min(shape) <= 0:
        raise argparse.ArgumentTypeError("shape must be three positive integers C,H,W")
    return shape


def _grid(text: str) -> rearrange.GridSpec:
    rows, sep, cols = text.lower().partition("x")
    try:
        return rearrange.GridSpec(int(rows), int(cols))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be ROWSxCOLS, got {text!r}") from None


def _pixels(text: str) -> int:
    w, sep, h = text.lower().partition("x")
    try:
        n = int(w) * int(h) if sep else int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad pixel count {text!r}") from None
    if n <= 0:
        raise argparse.ArgumentTypeError("pixel count must be positive")
    return n


def _add_codec_flags(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--clip", type=_clip, default=ClipRange(0.0, 6.0),
                   help="clip range MIN:MAX (default 0:6; post-activation maps are nonnegative; "
                        "write --clip=-1:6 for a negative bound)")
    if sweep:
        p.add_argument("--k", type=_list_of(_k), default=[7],
                       help="comma list of quantization levels to sweep (default 7)")
        p.add_argument("--gop", type=_list_of(_gop), default=[15],
                       help="comma list of key-frame periods T to sweep (default 15, as in the HEVC baselines)")
    else:
        p.add_argument("--k", type=_k, default=7, help="quantization levels, 2..256 (default 7)")
        p.add_argument("--gop", type=_gop, default=15, help="key-frame period T (default 15)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ifmdc", description="Inter-feature-map differential coding toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic .fmap sequence")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--shape", type=_shape, default=(8, 32, 32), help="C,H,W (default 8,32,32)")
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blob-speed", type=float, default=0.5)
    p.add_argument("--background-scale", type=float, default=2.0)
    p.add_argument("--noise-scale", type=float, default=0.0)

    p = sub.add_parser("encode", help="encode .fmap to .ifmd")
    p.add_argument("--in", dest="inp", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_codec_flags(p)

    p = sub.add_parser("decode", help="decode .ifmd to .fmap")
    p.add_argument("--in", dest="inp", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("inspect", help="print stream header and per-packet sizes")
    p.add_argument("--in", dest="inp", required=True, type=Path)

    p = sub.add_parser("rearrange", help="export tiled or quilted PGM frames")
    p.add_argument("--in", dest="inp", required=True, type=Path)
    p.add_argument("--outdir", required=True, type=Path)
    p.add_argument("--mode", choices=("tile", "quilt"), default="tile")
    p.add_argument("--grid", type=_grid, default=None, help="ROWSxCOLS (default: square, ceil(sqrt(C)))")
    p.add_argument("--clip", type=_clip, default=ClipRange(0.0, 6.0))

    p = sub.add_parser("bench", help="sweep k and T, write the rate report CSV")
    p.add_argument("--in", dest="inp", required=True, type=Path)
    p.add_argument("--out", type=Path, default=None, help="CSV path (default stdout)")
    _add_codec_flags(p, sweep=True)
    p.add_argument("--exclude-key", dest="exclude_key", action="store_true", default=True,
                   help="count only non-key frames (default)")
    p.add_argument("--include-key", dest="exclude_key", action="store_false")
    p.add_argument("--input-pixels", type=_pixels, default=416 * 416,
                   help="network input pixels per frame for BPP, N or WxH (default 416x416)")

    p = sub.add_parser("serve", help="receive one live stream and decode it")
    p.add_argument("--listen", required=True, help="host:port (port 0 picks a free port)")
    p.add_argument("--out", required=True, type=Path, help="decoded .fmap")
    p.add_argument("--save-stream", type=Path, default=None, help="also write the received .ifmd")
    p.add_argument("--expect-shape", type=_shape, default=None)
    p.add_argument("--timeout", type=float, default=None, help="seconds to wait for the sender")

    p = sub.add_parser("push", help="encode an .fmap live and send it to a serve endpoint")
    p.add_argument("--in", dest="inp", required=True, type=Path)
    p.add_argument("--to", required=True, help="host:port")
    p.add_argument("--timeout", type=float, default=5.0)
    _add_codec_flags(p)
    return parser


def _config(args) -> CodecConfig:
    return CodecConfig(QuantSpec(args.clip, args.k), args.gop)


def cmd_gen(args) -> int:
    spec = SyntheticSpec(
        shape=args.shape, frame_count=args.frames, seed=args.seed, blob_speed=args.blob_speed,
        background_scale=args.background_scale, noise_scale=args.noise_scale,
    )
    n = save_sequence(generate_synthetic(spec), args.out)
    print(f"wrote {args.out} ({n} bytes)")
    return 0


def cmd_encode(args) -> int:
    seq = load_sequence(args.inp)
    header, packets = encode_sequence(_config(args), seq)
    n = write_stream(args.out, header, packets)
    print(f"wrote {args.out} ({n} bytes, {len(packets)} frames)")
    return 0


def cmd_decode(args) -> int:
    header, packets = read_stream(args.inp)
    n = save_sequence(decode_sequence(header, packets), args.out)
    print(f"wrote {args.out} ({n} bytes, {len(packets)} frames)")
    return 0


def cmd_inspect(args) -> int:
    header, packets = read_stream(args.inp)
    c, h, w = header.shape
    print(f"shape={c},{h},{w} clip={header.clip_min}:{header.clip_max} k={header.k} "
          f"T={header.gop_t} frame_count={header.frame_count}")
    print("n,kind,bytes")
    for p in packets:
        print(f"{p.frame_index},{p.kind.name.lower()},{packet_size_bytes(p)}")
    return 0


def cmd_rearrange(args) -> int:
    seq = load_sequence(args.inp)
    spec = QuantSpec(args.clip, 256)
    layout = rearrange.tile if args.mode == "tile" else rearrange.quilt
    args.outdir.mkdir(parents=True, exist_ok=True)
    total = 0
    for frame in seq:
        img = layout(frame, args.grid, spec)
        total += rearrange.export_pgm(img, args.outdir / rearrange.frame_filename(frame.frame_index))
    print(f"wrote {len(seq)} {args.mode} frames to {args.outdir} ({total} bytes)")
    return 0


def bench_rows(seq: FeatureSequence, clip: ClipRange, ks, gops, exclude_key=True,
               input_pixels=416 * 416) -> list[dict]:
    runs = []
    for gop in gops:
        for k in ks:
            config = CodecConfig(QuantSpec(clip, k), gop)
            _, packets = encode_sequence(config, seq)
            acct = metrics.RateAccounting.from_packets(packets, seq.shape, input_pixels, exclude_key)
            runs.append(metrics.RunRecord(f"ifmdc-k{k}-T{gop}", k, gop, acct))
    return metrics.emit_report(runs)


def cmd_bench(args) -> int:
    seq = load_sequence(args.inp)
    rows = bench_rows(seq, args.clip, args.k, args.gop, args.exclude_key, args.input_pixels)
    if args.out is None:
        metrics.write_report_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            metrics.write_report_csv(rows, fh)
        print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def cmd_serve(args) -> int:
    policy = shape_policy(args.expect_shape) if args.expect_shape else None
    with Listener(args.listen) as listener:
        host, port = listener.address
        print(f"listening {host}:{port}", flush=True)
        session = listener.accept(policy, timeout=args.timeout)
    decoder = Decoder.from_header(session.header)
    packets, frames = [], []
    for packet in session:
        frames.append(decoder.decode_frame(packet))
        packets.append(packet)
    summary = session.close()
    if not frames:
        raise CodecError("stream ended before any frame")
    save_sequence(FeatureSequence(session.header.shape, tuple(frames)), args.out)
    if args.save_stream:
        write_stream(args.save_stream, replace(session.header, frame_count=len(packets)), packets)
    print(f"received frames={summary.frames} packet_bytes={summary.packet_bytes} "
          f"wire_bytes={summary.wire_bytes} graceful={summary.graceful}")
    return 0


def cmd_push(args) -> int:
    seq = load_sequence(args.inp)
    config = _config(args)
    encoder = Encoder(config, seq.shape)
    session = open_sender(args.to, config.header(seq.shape, 0), timeout=args.timeout)
    start = time.perf_counter()
    try:
        for frame in seq:
            session.send(encoder.encode_frame(frame))
    except BaseException as exc:
        session.abort(str(exc))
        raise
    summary = session.close()
    elapsed = time.perf_counter() - start
    print(f"sent frames={summary.frames} packet_bytes={summary.packet_bytes} "
          f"wire_bytes={summary.wire_bytes} graceful={summary.graceful} seconds={elapsed:.3f}")
    return 0 if summary.graceful else 1


COMMANDS = {
    "gen": cmd_gen, "encode": cmd_encode, "decode": cmd_decode, "inspect": cmd_inspect,
    "rearrange": cmd_rearrange, "bench": cmd_bench, "serve": cmd_serve, "push": cmd_push,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (CodecError, ValueError, OSError) as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
