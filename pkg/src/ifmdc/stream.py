"""Edge -> cloud transport of a live IFMDC stream over TCP.

Wire protocol, all layouts from :mod:`ifmdc.container`::

    sender -> receiver   stream header (33 bytes)
    receiver -> sender   0x01 accept
                       | 0x00 reject, uint16 LE reason length, UTF-8 reason
    sender -> receiver   frame packets, n = 0, 1, 2, ...
    sender -> receiver   end marker: a packet of kind END with empty payload
    sender               half-closes and waits for the receiver to close

Packets are self-delimiting, so no extra framing is added. A CRC failure or an
out-of-order packet aborts the session: the decoder's reference frame would be
wrong for every later residual, so there is nothing safe to resume from.
Backpressure is TCP's own: ``send`` blocks while the socket buffer is full.
"""

from __future__ import annotations

import logging
import socket
import struct
from dataclasses import dataclass
from typing import Callable, Iterator

from .container import (
    HEADER_SIZE,
    FrameKind,
    FramePacket,
    StreamHeader,
    end_marker,
    packet_size_bytes,
    read_header,
    read_packet_from,
    write_header,
    write_packet,
)
from .errors import CorruptPacket, FormatError, ProtocolError

log = logging.getLogger(__name__)

ACCEPT = 0x01
REJECT = 0x00
_REASON_LEN = struct.Struct("<H")
TRAILER_SIZE = packet_size_bytes(end_marker(0))

Policy = Callable[[StreamHeader], "str | None"]


class SessionRejected(ProtocolError):
    def __init__(self, reason: str):
        super().__init__(f"session rejected: {reason}")
        self.reason = reason


@dataclass(frozen=True)
class SessionSummary:
    frames: int
    packet_bytes: int
    wire_bytes: int
    graceful: bool
    reason: str = ""


def parse_address(address) -> tuple[str, int]:
    if isinstance(address, tuple):
        return address[0], int(address[1])
    host, sep, port = str(address).rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected host:port, got {address!r}")
    return host or "127.0.0.1", int(port)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


class SenderSession:
    """Edge side of one stream. Not thread-safe; one owner per session."""

    def __init__(self, sock: socket.socket, header: StreamHeader):
        self._sock = sock
        self.header = header
        self.next_n = 0
        self.packet_bytes = 0
        self.wire_bytes = 0
        self._summary: SessionSummary | None = None

    @property
    def is_open(self) -> bool:
        return self._summary is None

    def _handshake(self) -> None:
        self._sock.sendall(write_header(self.header))
        self.wire_bytes += HEADER_SIZE
        code = _recv_exact(self._sock, 1)
        if not code:
            raise ProtocolError("peer closed during handshake")
        self.wire_bytes += 1
        if code[0] == ACCEPT:
            return
        if code[0] != REJECT:
            raise ProtocolError(f"unknown handshake reply 0x{code[0]:02x}")
        raw_len = _recv_exact(self._sock, _REASON_LEN.size)
        reason = b""
        if len(raw_len) == _REASON_LEN.size:
            reason = _recv_exact(self._sock, _REASON_LEN.unpack(raw_len)[0])
        raise SessionRejected(reason.decode("utf-8", "replace") or "no reason given")

    def send(self, packet: FramePacket) -> None:
        if not self.is_open:
            raise ProtocolError("session is closed")
        if packet.kind == FrameKind.END:
            raise ProtocolError("use close() to end the stream")
        if packet.frame_index != self.next_n:
            raise ProtocolError(f"out-of-order packet: expected n={self.next_n}, got {packet.frame_index}")
        data = write_packet(packet)
        try:
            self._sock.sendall(data)
        except OSError as exc:
            self.abort(f"peer closed: {exc}")
            raise ProtocolError("peer closed") from exc
        self.next_n += 1
        self.packet_bytes += len(data)
        self.wire_bytes += len(data)

    def close(self, timeout: float | None = 5.0) -> SessionSummary:
        """Send the end marker and wait for the receiver to hang up. Idempotent."""
        if self._summary is not None:
            return self._summary
        graceful, reason = True, ""
        try:
            self._sock.sendall(write_packet(end_marker(self.next_n)))
            self.wire_bytes += TRAILER_SIZE
            self._sock.shutdown(socket.SHUT_WR)
            self._sock.settimeout(timeout)
            if self._sock.recv(1):
                graceful, reason = False, "unexpected data after end marker"
        except OSError as exc:
            graceful, reason = False, f"close failed: {exc}"
        self._finish(graceful, reason)
        return self._summary

    def abort(self, reason: str = "aborted") -> SessionSummary:
        if self._summary is None:
            self._finish(False, reason)
        return self._summary

    def _finish(self, graceful: bool, reason: str) -> None:
        self._sock.close()
        self._summary = SessionSummary(self.next_n, self.packet_bytes, self.wire_bytes, graceful, reason)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort(f"{exc_type.__name__}: {exc}")


class ReceiverSession:
    """Cloud side of one stream: yields CRC-verified packets in frame order."""

    def __init__(self, sock: socket.socket, header: StreamHeader):
        self._sock = sock
        self._rfile = sock.makefile("rb")
        self.header = header
        self.next_n = 0
        self.packet_bytes = 0
        self.wire_bytes = HEADER_SIZE + 1
        self._summary: SessionSummary | None = None

    @property
    def is_open(self) -> bool:
        return self._summary is None

    def receive(self) -> FramePacket | None:
        """Next packet, or ``None`` once the sender has ended the stream."""
        if not self.is_open:
            if self._summary.graceful:
                return None
            raise ProtocolError(f"session aborted: {self._summary.reason}")
        try:
            packet = read_packet_from(self._rfile)
        except CorruptPacket:
            self.abort("corrupt packet")
            raise
        except (FormatError, OSError) as exc:
            self.abort(str(exc))
            raise ProtocolError(f"broken stream: {exc}") from exc
        if packet is None:
            self.abort("peer closed without end marker")
            raise ProtocolError("peer closed without end marker")
        if packet.kind == FrameKind.END:
            self.wire_bytes += TRAILER_SIZE
            self._finish(True, "")
            return None
        if packet.frame_index != self.next_n:
            self.abort("out-of-order packet")
            raise ProtocolError(f"out-of-order packet: expected n={self.next_n}, got {packet.frame_index}")
        size = packet_size_bytes(packet)
        self.next_n += 1
        self.packet_bytes += size
        self.wire_bytes += size
        return packet

    def __iter__(self) -> Iterator[FramePacket]:
        while (packet := self.receive()) is not None:
            yield packet

    def close(self) -> SessionSummary:
        if self._summary is None:
            self._finish(False, "closed by receiver before end marker")
        return self._summary

    def abort(self, reason: str) -> SessionSummary:
        if self._summary is None:
            log.warning("aborting receive session after %d frames: %s", self.next_n, reason)
            self._finish(False, reason)
        return self._summary

    def _finish(self, graceful: bool, reason: str) -> None:
        self._rfile.close()
        self._sock.close()
        self._summary = SessionSummary(self.next_n, self.packet_bytes, self.wire_bytes, graceful, reason)


class Listener:
    """Listening endpoint; each :meth:`accept` yields one receive session."""

    def __init__(self, address=("127.0.0.1", 0)):
        host, port = parse_address(address)
        self._sock = socket.create_server((host, port))

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()[:2]

    def accept(self, policy: Policy | None = None, timeout: float | None = None) -> ReceiverSession:
        self._sock.settimeout(timeout)
        conn, _ = self._sock.accept()
        conn.settimeout(timeout)
        raw = _recv_exact(conn, HEADER_SIZE)
        try:
            header = read_header(raw)
            reason = policy(header) if policy else None
        except FormatError as exc:
            header, reason = None, str(exc)
        if reason is not None:
            encoded = reason.encode("utf-8")[:0xFFFF]
            try:
                conn.sendall(bytes([REJECT]) + _REASON_LEN.pack(len(encoded)) + encoded)
            finally:
                conn.close()
            raise SessionRejected(reason)
        conn.sendall(bytes([ACCEPT]))
        conn.settimeout(None)
        return ReceiverSession(conn, header)

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def listen(address=("127.0.0.1", 0)) -> Listener:
    return Listener(address)


def open_sender(address, header: StreamHeader, timeout: float | None = 5.0) -> SenderSession:
    """Connect, send the header and wait for the accept code.

    The handshake is bounded by ``timeout``; afterwards the socket is blocking so
    a slow receiver throttles the sender.
    """
    sock = socket.create_connection(parse_address(address), timeout=timeout)
    session = SenderSession(sock, header)
    try:
        session._handshake()
    except BaseException:
        sock.close()
        raise
    sock.settimeout(None)
    return session


def send_frame(session: SenderSession, packet: FramePacket) -> None:
    session.send(packet)


def receive_frame(session: ReceiverSession) -> FramePacket | None:
    return session.receive()


def close(session: SenderSession | ReceiverSession) -> SessionSummary:
    return session.close()


def shape_policy(shape=None, k=None) -> Policy:
    """Receiver policy that rejects streams whose shape or k differ from the expected ones."""

    def check(header: StreamHeader) -> str | None:
        if shape is not None and tuple(header.shape) != tuple(shape):
            return f"shape {tuple(header.shape)} does not match expected {tuple(shape)}"
        if k is not None and header.k != k:
            return f"k={header.k} does not match expected k={k}"
        return None

    return check
