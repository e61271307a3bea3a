"""N-run-length coding of byte symbols.

Token grammar::

    stream  := token*
    token   := literal | run
    literal := one byte != N               (a single symbol)
    run     := N varint(length), length >= 1
    varint  := base-128 groups, least significant first, high bit = continuation

Only the dominant symbol ``N`` is run-length coded; every other symbol is copied
through as a raw byte. ``N`` itself is carried out of band (in the packet header).

Both directions are vectorized with numpy. Decoding is sequential in principle,
because a varint byte may equal ``N``; those rare ambiguous positions are
resolved in a short Python loop and everything else is done array-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError

MAX_VARINT_BYTES = 9  # 63-bit run lengths


@dataclass(frozen=True)
class RleBlob:
    dominant: int
    symbol_count: int
    data: bytes

    def __len__(self) -> int:
        return len(self.data)


def varint_sizes(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    sizes = np.ones(values.shape, dtype=np.int64)
    big = np.flatnonzero(values >= 0x80)
    if big.size:
        v = values[big]
        sizes[big] += sum((v >= (1 << (7 * g))).astype(np.int64) for g in range(2, MAX_VARINT_BYTES))
        sizes[big] += 1
    return sizes


def encode_varint(value: int) -> bytes:
    if value < 0:
        raise ValueError("varint values are unsigned")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _as_symbols(symbols) -> np.ndarray:
    s = np.asarray(symbols)
    if s.dtype != np.uint8:
        if s.size and (s.min() < 0 or s.max() > 255):
            raise ValueError("symbols must fit in one byte")
        s = s.astype(np.uint8)
    return s.reshape(-1)


def _runs(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximal runs of equal symbols: (start indices, lengths)."""
    change = np.flatnonzero(s[1:] != s[:-1]) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [s.size])))
    return starts, lengths


def choose_dominant(symbols) -> int:
    """Most frequent symbol; ties go to the smaller value."""
    s = _as_symbols(symbols)
    if s.size == 0:
        raise ValueError("cannot choose a dominant symbol of an empty array")
    return int(np.argmax(np.bincount(s, minlength=256)))


def _may_have_long_runs(s: np.ndarray) -> bool:
    # any run of >= 128 equal symbols fully covers some 64-aligned block
    usable = s.size // 64 * 64
    if not usable:
        return False
    blocks = s[:usable].reshape(-1, 64)
    return bool((blocks == blocks[:, :1]).all(axis=1).any())


def size_table(symbols) -> np.ndarray:
    """Encoded size in bytes for every possible N (0..255)."""
    s = _as_symbols(symbols)
    if s.size == 0:
        raise ValueError("empty symbol array")
    run_start = np.empty(s.size, dtype=bool)
    run_start[0] = True
    np.not_equal(s[1:], s[:-1], out=run_start[1:])
    if np.count_nonzero(run_start) * 4 < s.size:
        # few runs: work on the run list directly
        starts = np.flatnonzero(run_start)
        lengths = np.diff(np.append(starts, s.size))
        values = s[starts]
        counts = np.bincount(values, weights=lengths, minlength=256).astype(np.int64)
        runs = np.bincount(values, minlength=256)
    else:
        # one histogram over (symbol, starts-a-run) pairs
        pairs = np.bincount((s.astype(np.intp) << 1) | run_start, minlength=512).reshape(256, 2)
        counts = pairs.sum(axis=1)
        runs = pairs[:, 1]
        starts = lengths = None
    # a run of N costs 1 + varint bytes instead of `length` literal bytes:
    # size(N) = len - count(N) + 2 * runs(N) + extra varint bytes of long runs of N
    table = s.size - counts + 2 * runs
    if starts is None and _may_have_long_runs(s):
        starts, lengths = _runs(s)
    if starts is not None:
        long_runs = np.flatnonzero(lengths >= 0x80)
        extra = varint_sizes(lengths[long_runs]) - 1
        table += np.bincount(s[starts[long_runs]], weights=extra, minlength=256).astype(np.int64)
    return table.astype(np.int64)


def choose_optimal(symbols) -> int:
    """The N giving the smallest encoding; ties go to the smaller value."""
    return int(np.argmin(size_table(symbols)))


def encoded_size(symbols, dominant: int) -> int:
    return int(size_table(symbols)[dominant])


def _varint_bytes(values: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Concatenated varints of ``values``, in order."""
    if not values.size:
        return np.empty(0, dtype=np.uint8)
    if sizes.max() == 1:
        return values.astype(np.uint8)
    group = np.arange(int(sizes.max()))
    shifted = (values[:, None] >> (7 * group)) & 0x7F
    shifted |= (group < (sizes[:, None] - 1)).astype(np.int64) << 7
    return shifted[group < sizes[:, None]].astype(np.uint8)


def rle_encode(symbols, dominant: int) -> RleBlob:
    s = _as_symbols(symbols)
    if s.size == 0:
        raise ValueError("cannot encode an empty symbol array")
    if not 0 <= dominant <= 255:
        raise ValueError("dominant symbol must be a byte")
    is_n = s == dominant
    transitions = np.flatnonzero(is_n[1:] != is_n[:-1]) + 1
    edges = np.concatenate(([0], transitions, [s.size]))
    # runs alternate between N and non-N; pick the N ones
    first = 0 if is_n[0] else 1
    run_starts = edges[first:-1:2]
    run_lengths = edges[first + 1::2] - run_starts
    if not run_starts.size:
        return RleBlob(int(dominant), int(s.size), s.tobytes())

    keep = ~is_n
    keep[run_starts] = True
    compact = s[keep]
    # position of each run marker inside `compact`
    removed_before = np.cumsum(run_lengths - 1) - (run_lengths - 1)
    marker_pos = run_starts - removed_before
    vsize = varint_sizes(run_lengths)
    out = np.insert(compact, np.repeat(marker_pos + 1, vsize), _varint_bytes(run_lengths, vsize))
    return RleBlob(int(dominant), int(s.size), out.tobytes())


def rle_decode(blob: RleBlob) -> np.ndarray:
    b = np.frombuffer(blob.data, dtype=np.uint8)
    n = b.size
    cand = np.flatnonzero(b == blob.dominant)
    if not cand.size:
        if n != blob.symbol_count:
            raise FormatError(f"decoded {n} symbols, expected {blob.symbol_count}")
        return b.copy()

    # exclusive end of each candidate's varint; n + 1 flags a truncated one
    ends = cand + 2
    ends[cand + 1 >= n] = n + 1
    multi = np.flatnonzero(ends <= n)
    multi = multi[b[cand[multi] + 1] >= 0x80]
    if multi.size:
        first = cand[multi] + 1
        end = np.full(multi.size, n + 1)
        for g in range(1, MAX_VARINT_BYTES + 1):
            p = first + g
            pending = (end > n) & (p < n)
            hit = np.zeros(multi.size, dtype=bool)
            hit[pending] = b[p[pending]] < 0x80
            end[hit] = p[hit] + 1
        # no terminator within the cap but bytes remain: too long, not truncated
        overlong = (end > n) & (first + MAX_VARINT_BYTES + 1 < n)
        end[overlong] = first[overlong] + MAX_VARINT_BYTES + 2
        ends[multi] = end

    # candidates not inside an earlier candidate's varint are certainly run markers
    reach = np.maximum.accumulate(ends)
    covered = np.zeros(cand.size, dtype=bool)
    covered[1:] = cand[1:] < reach[:-1]
    marker = ~covered
    if covered.any():
        # marker regions are disjoint and ordered, so the latest marker has the largest end
        certain_end = np.maximum.accumulate(np.where(marker, ends, -1))
        resolved_end = -1
        for j in np.flatnonzero(covered):
            if cand[j] >= max(int(certain_end[j - 1]), resolved_end):
                marker[j] = True
                resolved_end = int(ends[j])

    m = cand[marker]
    e = ends[marker]
    if np.any(e > n):
        raise FormatError("truncated varint")
    vlen = e - m - 1
    if vlen.max() > MAX_VARINT_BYTES:
        raise FormatError("varint too long")

    is_varint = np.zeros(n, dtype=bool)
    run = np.zeros(m.size, dtype=np.uint64)
    for g in range(int(vlen.max())):
        sel = vlen > g if g else slice(None)
        at = m[sel] + 1 + g
        is_varint[at] = True
        run[sel] |= (b[at].astype(np.uint64) & np.uint64(0x7F)) << np.uint64(7 * g)
    if np.any(run == 0):
        raise FormatError("zero run")

    tokens = b[~is_varint]
    total = tokens.size - m.size + int(run.sum(dtype=np.uint64))
    if total != blob.symbol_count:
        raise FormatError(f"decoded {total} symbols, expected {blob.symbol_count}")
    counts = np.ones(tokens.size, dtype=np.int64)
    counts[m - (np.cumsum(vlen) - vlen)] = run.astype(np.int64)
    return np.repeat(tokens, counts)
