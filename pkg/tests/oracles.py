"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package's numeric code paths: quantizers use exact
rational arithmetic, the run-length coder is a byte-at-a-time loop.
"""

from fractions import Fraction
import math


def round_half_away(x: Fraction) -> int:
    down = math.floor(x)
    frac = x - down
    if frac > Fraction(1, 2) or (frac == Fraction(1, 2) and x > 0):
        return down + 1
    if frac == Fraction(1, 2) and x < 0:
        return down
    return down


def quantize_key(v: float, lo: float, hi: float, k: int) -> int:
    a = Fraction(hi) - Fraction(lo)
    return round_half_away((Fraction(v) - Fraction(lo)) / a * (k - 1))


def dequantize_key(sym: int, lo: float, hi: float, k: int) -> Fraction:
    a = Fraction(hi) - Fraction(lo)
    return Fraction(lo) + sym * a / (k - 1)


def quantize_residual(r: Fraction, lo: float, hi: float, k: int) -> int:
    a = Fraction(hi) - Fraction(lo)
    return round_half_away((Fraction(r) + a) / (2 * a) * (k - 1))


def dequantize_residual(sym: int, lo: float, hi: float, k: int) -> Fraction:
    a = Fraction(hi) - Fraction(lo)
    return sym * 2 * a / (k - 1) - a


def varint(n: int) -> bytes:
    out = bytearray()
    while True:
        low = n & 0x7F
        n >>= 7
        if n:
            out.append(low | 0x80)
        else:
            out.append(low)
            return bytes(out)


def rle_encode(symbols, n_sym: int) -> bytes:
    out = bytearray()
    i = 0
    symbols = list(symbols)
    while i < len(symbols):
        if symbols[i] != n_sym:
            out.append(symbols[i])
            i += 1
            continue
        j = i
        while j < len(symbols) and symbols[j] == n_sym:
            j += 1
        out.append(n_sym)
        out += varint(j - i)
        i = j
    return bytes(out)


class RefDecodeError(Exception):
    pass


def rle_decode(data: bytes, n_sym: int, max_run: int = 10**7) -> list:
    out = []
    i = 0
    while i < len(data):
        if data[i] != n_sym:
            out.append(data[i])
            i += 1
            continue
        i += 1
        value = shift = 0
        while True:
            if i >= len(data):
                raise RefDecodeError("truncated")
            byte = data[i]
            i += 1
            value |= (byte & 0x7F) << shift
            shift += 7
            if byte < 0x80:
                break
        if value == 0 or value > max_run:
            raise RefDecodeError("bad run")
        out.extend([n_sym] * value)
    return out


def brute_force_min_size(symbols) -> int:
    return min(len(rle_encode(symbols, n)) for n in range(256))


def reference_codec(frames, lo: float, hi: float, k: int, gop: int):
    """Element-wise closed-loop codec on nested lists of floats.

    Returns (symbol lists, reconstructions as Fractions) per frame.
    """
    prev = None
    all_symbols, all_recon = [], []
    for n, frame in enumerate(frames):
        clipped = [min(max(Fraction(v), Fraction(lo)), Fraction(hi)) for v in frame]
        if n % gop == 0:
            syms = [quantize_key(float(v), lo, hi, k) for v in clipped]
            recon = [dequantize_key(s, lo, hi, k) for s in syms]
        else:
            syms = [quantize_residual(c - p, lo, hi, k) for c, p in zip(clipped, prev)]
            recon = [min(max(p + dequantize_residual(s, lo, hi, k), Fraction(lo)), Fraction(hi))
                     for p, s in zip(prev, syms)]
        # the codec stores references as float32
        import numpy as np
        recon = [Fraction(float(np.float32(float(r)))) for r in recon]
        prev = recon
        all_symbols.append(syms)
        all_recon.append(recon)
    return all_symbols, all_recon
