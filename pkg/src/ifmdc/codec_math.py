"""Per-element math of inter-feature-map differential coding.

Clipping, residual formation and the two uniform quantizers:

* key frames:  ``sym = round((v - clip_min) / A * (k - 1))`` over ``[clip_min, clip_max]``
* residuals:   ``sym = round((r + A) / (2A) * (k - 1))`` over ``[-A, A]``

with ``A = clip_max - clip_min`` and round-half-away-from-zero. Symbols are one
byte, so ``k <= 256``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .tensor import FeatureMap, Shape

K_MIN = 2
K_MAX = 256


def _f32(value: float) -> float:
    return float(np.float32(value))


@dataclass(frozen=True)
class ClipRange:
    """Global clip interval. Bounds are rounded to float32 so they survive the bitstream header."""

    clip_min: float = 0.0
    clip_max: float = 6.0

    def __post_init__(self):
        lo, hi = _f32(self.clip_min), _f32(self.clip_max)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("clip bounds must be finite")
        if not lo < hi:
            raise ValueError("clip_min must be < clip_max")
        object.__setattr__(self, "clip_min", lo)
        object.__setattr__(self, "clip_max", hi)

    @property
    def span(self) -> float:
        """The clip range A."""
        return self.clip_max - self.clip_min


@dataclass(frozen=True)
class QuantSpec:
    clip: ClipRange = ClipRange()
    k: int = 7

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or not K_MIN <= self.k <= K_MAX:
            raise ValueError(f"k must be in {K_MIN}..={K_MAX}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def span(self) -> float:
        return self.clip.span

    @property
    def residual_step(self) -> float:
        """Spacing of the residual lattice, 2A/(k-1)."""
        return 2 * self.span / (self.k - 1)

    @property
    def key_step(self) -> float:
        """Spacing of the key-frame lattice, A/(k-1)."""
        return self.span / (self.k - 1)

    @property
    def zero_symbol(self) -> int:
        """Symbol a zero residual maps to."""
        return int(round_half_away((self.k - 1) / 2))


class SymbolKind(enum.IntEnum):
    KEY = 0
    RESIDUAL = 1


@dataclass(frozen=True, eq=False)
class SymbolMap:
    shape: Shape
    symbols: np.ndarray
    kind: SymbolKind

    def __post_init__(self):
        symbols = np.ascontiguousarray(self.symbols, dtype=np.uint8).reshape(-1)
        c, h, w = self.shape
        if symbols.size != c * h * w:
            raise ValueError(f"expected {c * h * w} symbols, got {symbols.size}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "kind", SymbolKind(self.kind))

    def __eq__(self, other):
        if not isinstance(other, SymbolMap):
            return NotImplemented
        return (
            tuple(self.shape) == tuple(other.shape)
            and self.kind == other.kind
            and np.array_equal(self.symbols, other.symbols)
        )

    __hash__ = None  # type: ignore[assignment]


def round_half_away(x):
    """Round to nearest integer, ties away from zero (numpy's ``rint`` rounds ties to even)."""
    return np.copysign(np.floor(np.abs(x) + 0.5), x)



def clip_array(values: np.ndarray, clip: ClipRange) -> np.ndarray:
    return np.clip(values, clip.clip_min, clip.clip_max)


def clip_map(m: FeatureMap, clip: ClipRange) -> FeatureMap:
    data = m.data
    out = np.clip(data, data.dtype.type(clip.clip_min), data.dtype.type(clip.clip_max))
    return FeatureMap(out, m.frame_index)


def residual_map(current_clipped: FeatureMap, prev_recon: FeatureMap) -> FeatureMap:
    """Element-wise ``current - prev_recon``, computed in float64 (exact for float32 inputs)."""
    if current_clipped.shape != prev_recon.shape:
        raise ValueError(f"shape mismatch: {current_clipped.shape} vs {prev_recon.shape}")
    diff = current_clipped.data.astype(np.float64) - prev_recon.data.astype(np.float64)
    return FeatureMap(diff, current_clipped.frame_index)


def _check_range(values: np.ndarray, lo: float, hi: float, what: str) -> None:
    if values.size and (values.min() < lo or values.max() > hi):
        raise ValueError(f"{what} outside [{lo}, {hi}]")


def _check_symbols(symbols: np.ndarray, k: int) -> None:
    if symbols.size and int(symbols.max()) >= k:
        raise ValueError(f"symbol >= k={k}")


def _round_nonnegative(t: np.ndarray) -> np.ndarray:
    # t >= 0 here, so floor(t + 0.5) is round-half-away-from-zero
    t += 0.5
    np.floor(t, out=t)
    return t.astype(np.uint8)


def quantize_residual_array(res: np.ndarray, spec: QuantSpec) -> np.ndarray:
    a = spec.span
    _check_range(res, -a, a, "residual")
    t = np.asarray(res, dtype=np.float64) + a
    t *= spec.k - 1
    t /= 2 * a
    return _round_nonnegative(t)


def residual_levels(spec: QuantSpec) -> np.ndarray:
    """Dequantized value of every residual symbol, ``sym * 2A / (k-1) - A``."""
    a = spec.span
    return np.arange(spec.k, dtype=np.float64) * (2 * a) / (spec.k - 1) - a


def key_levels(spec: QuantSpec) -> np.ndarray:
    """Dequantized value of every key symbol, ``clip_min + sym * A / (k-1)``."""
    return spec.clip.clip_min + np.arange(spec.k, dtype=np.float64) * spec.span / (spec.k - 1)


def dequantize_residual_array(symbols: np.ndarray, spec: QuantSpec) -> np.ndarray:
    symbols = np.asarray(symbols)
    _check_symbols(symbols, spec.k)
    return residual_levels(spec)[symbols]


def quantize_key_array(values: np.ndarray, spec: QuantSpec) -> np.ndarray:
    lo, hi = spec.clip.clip_min, spec.clip.clip_max
    _check_range(values, lo, hi, "value")
    t = np.asarray(values, dtype=np.float64) - lo
    t *= spec.k - 1
    t /= spec.span
    return _round_nonnegative(t)


def dequantize_key_array(symbols: np.ndarray, spec: QuantSpec) -> np.ndarray:
    symbols = np.asarray(symbols)
    _check_symbols(symbols, spec.k)
    return key_levels(spec)[symbols]


def quantize_residual(res: FeatureMap, spec: QuantSpec) -> SymbolMap:
    return SymbolMap(res.shape, quantize_residual_array(res.data, spec), SymbolKind.RESIDUAL)


def dequantize_residual(sym: SymbolMap, spec: QuantSpec) -> FeatureMap:
    if sym.kind != SymbolKind.RESIDUAL:
        raise ValueError("expected a residual symbol map")
    values = dequantize_residual_array(sym.symbols, spec).reshape(sym.shape)
    return FeatureMap(values)


def quantize_key(m: FeatureMap, spec: QuantSpec) -> SymbolMap:
    return SymbolMap(m.shape, quantize_key_array(m.data, spec), SymbolKind.KEY)


def dequantize_key(sym: SymbolMap, spec: QuantSpec) -> FeatureMap:
    """Inverse key quantizer; the result is rounded to float32 like any ingested map."""
    if sym.kind != SymbolKind.KEY:
        raise ValueError("expected a key symbol map")
    values = dequantize_key_array(sym.symbols, spec).reshape(sym.shape)
    return FeatureMap(values.astype(np.float32))
