"""Base layer, packet wire format, ``.lrpc`` files and packetization.

All multi-byte integers are big-endian; CRCs are CRC-32 (IEEE 802.3, as
computed by :func:`zlib.crc32`) over every preceding byte of the unit.

Base layer::

    "LRPC" | version u8 (=1) | width u16 | height u16 | C u16 | quality u8 |
    flags u8 (bit 0: SCR) | scale codes C x u8 | payload lengths C x u16 | crc u32

Packet::

    0x5A | type u8 (0 base fragment, 1 payload) | seq u16 | n u8 |
    channel indices n x u16 | payload length u16 | payload | crc u32

A ``.lrpc`` file is the base layer followed by every channel payload in
channel order.
"""

from __future__ import annotations

import dataclasses
import struct
import zlib

MAGIC = b"LRPC"
VERSION = 1
FLAG_SCR = 0x01
MARKER = 0x5A
TYPE_BASE = 0
TYPE_PAYLOAD = 1
PACKET_OVERHEAD = 11
CHANNEL_INDEX_BYTES = 2
MAX_PACKET_CHANNELS = 255
DEFAULT_BMAX = 900

_BASE_HEAD = struct.Struct(">4sBHHHBB")
_PACKET_HEAD = struct.Struct(">BBHB")
_CRC = struct.Struct(">I")


class ParseError(ValueError):
    pass


class PacketizationError(ValueError):
    pass


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


@dataclasses.dataclass(frozen=True)
class BaseLayer:
    width: int
    height: int
    quality_id: int
    scr: bool
    scales: tuple[int, ...]
    lengths: tuple[int, ...]

    @property
    def channels(self) -> int:
        return len(self.scales)

    @property
    def size(self) -> int:
        return base_size(self.channels)

    @property
    def payload_size(self) -> int:
        return sum(self.lengths)

    def offsets(self) -> list[int]:
        out, pos = [], 0
        for n in self.lengths:
            out.append(pos)
            pos += n
        return out


def base_size(channels: int) -> int:
    return _BASE_HEAD.size + 3 * channels + _CRC.size


def write_base(base: BaseLayer) -> bytes:
    if len(base.lengths) != len(base.scales):
        raise ValueError("scale table and channel directory differ in length")
    if any(not 0 <= s <= 255 for s in base.scales):
        raise ValueError("scale codes must fit in one byte")
    if any(not 0 <= n <= 0xFFFF for n in base.lengths):
        raise ValueError("channel payload longer than 65535 bytes; use a coarser preset")
    body = _BASE_HEAD.pack(MAGIC, VERSION, base.width, base.height, base.channels,
                           base.quality_id, FLAG_SCR if base.scr else 0)
    body += bytes(base.scales)
    body += struct.pack(f">{base.channels}H", *base.lengths)
    return body + _CRC.pack(crc32(body))


def parse_base(data: bytes) -> BaseLayer:
    """Parse a complete base layer; ``data`` may carry trailing payload bytes."""
    data = bytes(data)
    if len(data) < _BASE_HEAD.size:
        raise ParseError("base layer truncated")
    magic, version, width, height, channels, quality, flags = _BASE_HEAD.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"unsupported version {version}")
    end = base_size(channels)
    if len(data) < end:
        raise ParseError("base layer truncated")
    (crc,) = _CRC.unpack_from(data, end - _CRC.size)
    if crc != crc32(data[:end - _CRC.size]):
        raise ParseError("base layer CRC mismatch")
    pos = _BASE_HEAD.size
    scales = tuple(data[pos:pos + channels])
    lengths = struct.unpack_from(f">{channels}H", data, pos + channels)
    return BaseLayer(width, height, quality, bool(flags & FLAG_SCR), scales, tuple(lengths))


def write_lrpc(base: BaseLayer, payloads) -> bytes:
    if [len(p) for p in payloads] != list(base.lengths):
        raise ValueError("payload lengths disagree with the channel directory")
    return write_base(base) + b"".join(payloads)


def read_lrpc(data: bytes) -> tuple[BaseLayer, list[bytes]]:
    base = parse_base(data)
    if len(data) != base.size + base.payload_size:
        raise ParseError(f"file is {len(data)} bytes, directory expects "
                         f"{base.size + base.payload_size}")
    pos = base.size
    payloads = []
    for n in base.lengths:
        payloads.append(bytes(data[pos:pos + n]))
        pos += n
    return base, payloads


@dataclasses.dataclass(frozen=True)
class Packet:
    ptype: int
    seq: int
    channels: tuple[int, ...]
    payload: bytes

    @property
    def size(self) -> int:
        return packet_size(len(self.channels), len(self.payload))


def packet_size(n_channels: int, payload_len: int) -> int:
    return PACKET_OVERHEAD + CHANNEL_INDEX_BYTES * n_channels + payload_len


def serialize_packet(packet: Packet) -> bytes:
    n = len(packet.channels)
    if n > MAX_PACKET_CHANNELS:
        raise ValueError(f"a packet holds at most {MAX_PACKET_CHANNELS} channels")
    body = _PACKET_HEAD.pack(MARKER, packet.ptype, packet.seq & 0xFFFF, n)
    body += struct.pack(f">{n}H", *packet.channels)
    body += struct.pack(">H", len(packet.payload)) + packet.payload
    return body + _CRC.pack(crc32(body))


def parse_packet(data: bytes) -> Packet:
    data = bytes(data)
    packet, used = _parse_one(data, 0)
    if used != len(data):
        raise ParseError(f"{len(data) - used} trailing bytes after packet")
    return packet


def _parse_one(data: bytes, pos: int) -> tuple[Packet, int]:
    if len(data) - pos < PACKET_OVERHEAD:
        raise ParseError("packet truncated")
    marker, ptype, seq, n = _PACKET_HEAD.unpack_from(data, pos)
    if marker != MARKER:
        raise ParseError(f"bad packet marker 0x{marker:02x}")
    head = pos + _PACKET_HEAD.size
    if len(data) - head < CHANNEL_INDEX_BYTES * n + 2:
        raise ParseError("packet truncated")
    channels = struct.unpack_from(f">{n}H", data, head)
    head += CHANNEL_INDEX_BYTES * n
    (length,) = struct.unpack_from(">H", data, head)
    head += 2
    end = head + length + _CRC.size
    if end > len(data):
        raise ParseError("packet truncated")
    (crc,) = _CRC.unpack_from(data, end - _CRC.size)
    if crc != crc32(data[pos:end - _CRC.size]):
        raise ParseError("packet CRC mismatch")
    if ptype not in (TYPE_BASE, TYPE_PAYLOAD):
        raise ParseError(f"unknown packet type {ptype}")
    return Packet(ptype, seq, tuple(channels), data[head:head + length]), end


def serialize_stream(packets) -> bytes:
    return b"".join(serialize_packet(p) for p in packets)


def parse_stream(data: bytes) -> list[Packet]:
    """Split a concatenation of packets (a ``plan.bin``) back into packets."""
    out, pos = [], 0
    data = bytes(data)
    while pos < len(data):
        packet, pos = _parse_one(data, pos)
        out.append(packet)
    return out


def packetize(est_sizes, actual_sizes, bmax: int = DEFAULT_BMAX, scr: bool = True):
    """Group channels into packets of at most ``bmax`` serialized bytes.

    Channels are taken in index order. The greedy pass fills a packet while
    the estimated payload plus the header for the grown channel count fits.
    Packets whose real serialized size is over ``bmax`` are halved by
    channel count until they fit. In SCR mode a packet of several channels
    that ends on the last member of a quad (1-based channel number divisible
    by 4) hands that channel to the front of the next packet. If a hand-over
    pushes the next packet over ``bmax`` the split and hand-over passes are
    repeated; each repeat adds a packet, so this terminates.

    Returns a list of tuples of 0-based channel indices.
    """
    est = list(est_sizes)
    actual = list(actual_sizes)
    if len(est) != len(actual):
        raise ValueError("estimate and actual size lists differ in length")
    if bmax <= packet_size(1, 0):
        raise ValueError(f"bmax={bmax} leaves no room for payload")
    for i, n in enumerate(actual):
        if packet_size(1, n) > bmax:
            raise PacketizationError(
                f"channel {i} needs {packet_size(1, n)} bytes on its own, over "
                f"bmax={bmax}; use a coarser quality preset")

    packets: list[list[int]] = []
    current: list[int] = []
    current_size = 0
    for i, size in enumerate(est):
        fits = current_size + size + packet_size(len(current) + 1, 0) <= bmax
        if not current or (fits and len(current) < MAX_PACKET_CHANNELS):
            current.append(i)
            current_size += size
        else:
            packets.append(current)
            current, current_size = [i], size
    if current:
        packets.append(current)

    def real_size(packet):
        return packet_size(len(packet), sum(actual[c] for c in packet))

    while True:
        packets = _split_oversized(packets, real_size, bmax)
        if scr:
            packets = _quad_boundary_pass(packets)
        if all(real_size(p) <= bmax for p in packets):
            return [tuple(p) for p in packets]


def _split_oversized(packets, real_size, bmax):
    out = []
    pending = list(packets)
    while pending:
        packet = pending.pop(0)
        if len(packet) > 1 and real_size(packet) > bmax:
            m = len(packet) // 2
            pending[:0] = [packet[:m], packet[m:]]
        else:
            out.append(packet)
    return out


def _quad_boundary_pass(packets):
    packets = [list(p) for p in packets]
    i = 0
    while i < len(packets):
        packet = packets[i]
        if len(packet) > 1 and (packet[-1] + 1) % 4 == 0:
            moved = packet.pop()
            if i + 1 == len(packets):
                packets.append([])
            packets[i + 1].insert(0, moved)
        i += 1
    return packets


def base_fragments(base_bytes: bytes, bmax: int = DEFAULT_BMAX, first_seq: int = 0) -> list[Packet]:
    room = bmax - packet_size(0, 0)
    if room <= 0:
        raise ValueError(f"bmax={bmax} leaves no room for payload")
    chunks = [base_bytes[i:i + room] for i in range(0, len(base_bytes), room)] or [b""]
    return [Packet(TYPE_BASE, first_seq + k, (), chunk) for k, chunk in enumerate(chunks)]


def build_packets(base_bytes: bytes, payloads, plan, bmax: int = DEFAULT_BMAX) -> list[Packet]:
    """Base fragments followed by one payload packet per plan entry."""
    packets = base_fragments(base_bytes, bmax)
    seq = len(packets)
    for group in plan:
        body = b"".join(payloads[c] for c in group)
        packets.append(Packet(TYPE_PAYLOAD, seq, tuple(group), body))
        seq += 1
    return packets


def join_base(packets) -> bytes:
    frags = sorted((p for p in packets if p.ptype == TYPE_BASE), key=lambda p: p.seq)
    return b"".join(p.payload for p in frags)
