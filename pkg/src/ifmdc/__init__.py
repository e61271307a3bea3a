"""Inter-feature-map differential coding (IFMDC) of neural feature-map sequences.

Clip -> residual against the reconstructed previous frame -> uniform
quantization -> N-run-length coding, with a CRC-framed bitstream, tiling and
quilting exporters for codec baselines, rate metrics and a TCP uplink.
"""

from .codec_math import ClipRange, QuantSpec, SymbolMap
from .container import FrameKind, FramePacket, StreamHeader, read_stream, write_stream
from .errors import CodecError, CorruptPacket, FormatError, ProtocolError, StreamViolation
from .pipeline import CodecConfig, Decoder, Encoder, decode_sequence, encode_sequence
from .tensor import FeatureMap, FeatureSequence, SyntheticSpec, generate_synthetic, load_sequence, save_sequence

__all__ = [
    "ClipRange", "QuantSpec", "SymbolMap",
    "FrameKind", "FramePacket", "StreamHeader", "read_stream", "write_stream",
    "CodecError", "CorruptPacket", "FormatError", "ProtocolError", "StreamViolation",
    "CodecConfig", "Decoder", "Encoder", "decode_sequence", "encode_sequence",
    "FeatureMap", "FeatureSequence", "SyntheticSpec", "generate_synthetic", "load_sequence", "save_sequence",
]
