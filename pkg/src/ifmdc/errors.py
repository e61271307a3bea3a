"""Exception types shared across the codec."""


class CodecError(ValueError):
    """Base class for every data error raised by this package."""


class FormatError(CodecError):
    """A byte layout (file, header or packet) could not be parsed."""


class CorruptPacket(FormatError):
    """Packet CRC did not validate."""

    def __init__(self, message="corrupt packet"):
        super().__init__(message)


class StreamViolation(CodecError):
    """A packet sequence breaks the GOP / reference rules of the stream."""


class ProtocolError(CodecError):
    """The edge/cloud wire protocol was not followed by the peer."""
