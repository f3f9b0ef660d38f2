"""Bit-exact datagram framing for the plant/controller link.

Frame layout (all integers little-endian):

    magic   2 bytes   0x43 0x52 ("CR")
    version 1 byte    0x01
    type    1 byte    1=motion command, 2=pose feedback, 3=reset, 4=ack
    length  2 bytes   payload byte count
    payload N bytes
    cksum   2 bytes   16-bit ones-complement sum of the payload

Payloads:
    command   sequence u32, timestamp_us u64, u/v/r float32 (clamped to [-1, 1])
    feedback  sequence u32, timestamp_us u64, agent pose 6 x float32
              (x, y, z, roll, pitch, yaw), num_corals u16, then per coral
              position 3 x float32 + health byte (1 = healthy) + collected
              byte, then bucket position 3 x float32
    reset     sequence u32, timestamp_us u64, seed u64
    ack       sequence u32, timestamp_us u64

decode_frame never throws anything but MalformedFrameError on hostile
bytes; the error carries a reason code (magic/version/length/checksum/
type/payload).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CR"
VERSION = 1

TYPE_COMMAND = 1
TYPE_FEEDBACK = 2
TYPE_RESET = 3
TYPE_ACK = 4

_HEADER = struct.Struct("<2sBBH")
_CKSUM = struct.Struct("<H")
_COMMAND = struct.Struct("<IQ3f")
_FEEDBACK_HEAD = struct.Struct("<IQ6fH")
_CORAL = struct.Struct("<3fBB")
_VEC3 = struct.Struct("<3f")
_RESET = struct.Struct("<IQQ")
_ACK = struct.Struct("<IQ")


class MalformedFrameError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"malformed frame ({reason}){': ' + detail if detail else ''}")


@dataclass(frozen=True)
class MotionCommandMsg:
    sequence: int
    timestamp_us: int
    u: float
    v: float
    r: float


@dataclass(frozen=True)
class CoralFeedback:
    position: tuple[float, float, float]
    healthy: bool
    collected: bool


@dataclass(frozen=True)
class PoseFeedbackMsg:
    sequence: int
    timestamp_us: int
    pose: tuple[float, float, float, float, float, float]
    corals: tuple[CoralFeedback, ...]
    bucket: tuple[float, float, float]


@dataclass(frozen=True)
class ResetMsg:
    sequence: int
    timestamp_us: int
    seed: int


@dataclass(frozen=True)
class AckMsg:
    sequence: int
    timestamp_us: int


def checksum16(payload: bytes) -> int:
    """16-bit ones-complement sum (end-around carry) of the payload."""
    if len(payload) % 2:
        payload = payload + b"\x00"
    total = 0
    for (word,) in struct.iter_unpack("<H", payload):
        total += word
        total = (total & 0xFFFF) + (total >> 16)
    return (~total) & 0xFFFF


def _encode_payload(msg) -> tuple[int, bytes]:
    if isinstance(msg, MotionCommandMsg):
        clamp = lambda x: float(np.clip(x, -1.0, 1.0))
        return TYPE_COMMAND, _COMMAND.pack(msg.sequence, msg.timestamp_us,
                                           clamp(msg.u), clamp(msg.v), clamp(msg.r))
    if isinstance(msg, PoseFeedbackMsg):
        parts = [_FEEDBACK_HEAD.pack(msg.sequence, msg.timestamp_us,
                                     *msg.pose, len(msg.corals))]
        for coral in msg.corals:
            parts.append(_CORAL.pack(*coral.position, int(coral.healthy),
                                     int(coral.collected)))
        parts.append(_VEC3.pack(*msg.bucket))
        return TYPE_FEEDBACK, b"".join(parts)
    if isinstance(msg, ResetMsg):
        return TYPE_RESET, _RESET.pack(msg.sequence, msg.timestamp_us, msg.seed)
    if isinstance(msg, AckMsg):
        return TYPE_ACK, _ACK.pack(msg.sequence, msg.timestamp_us)
    raise TypeError(f"cannot encode {type(msg).__name__}")


def encode_frame(msg) -> bytes:
    msg_type, payload = _encode_payload(msg)
    return (_HEADER.pack(MAGIC, VERSION, msg_type, len(payload))
            + payload + _CKSUM.pack(checksum16(payload)))


def _decode_payload(msg_type: int, payload: bytes):
    try:
        if msg_type == TYPE_COMMAND:
            seq, ts, u, v, r = _COMMAND.unpack(payload)
            return MotionCommandMsg(seq, ts, u, v, r)
        if msg_type == TYPE_FEEDBACK:
            head = _FEEDBACK_HEAD.size
            seq, ts, *pose6, n = _FEEDBACK_HEAD.unpack(payload[:head])
            expected = head + n * _CORAL.size + _VEC3.size
            if len(payload) != expected:
                raise MalformedFrameError(
                    "payload", f"feedback with {n} corals wants {expected} bytes, "
                               f"got {len(payload)}")
            corals = []
            off = head
            for _ in range(n):
                x, y, z, healthy, collected = _CORAL.unpack(payload[off:off + _CORAL.size])
                corals.append(CoralFeedback((x, y, z), bool(healthy), bool(collected)))
                off += _CORAL.size
            bucket = _VEC3.unpack(payload[off:off + _VEC3.size])
            return PoseFeedbackMsg(seq, ts, tuple(pose6), tuple(corals), bucket)
        if msg_type == TYPE_RESET:
            return ResetMsg(*_RESET.unpack(payload))
        if msg_type == TYPE_ACK:
            return AckMsg(*_ACK.unpack(payload))
    except struct.error as exc:
        raise MalformedFrameError("payload", str(exc)) from exc
    raise MalformedFrameError("type", f"unknown message type {msg_type}")


def decode_frame(data: bytes):
    """Parse one frame; raises MalformedFrameError with a reason code."""
    if len(data) < _HEADER.size + _CKSUM.size:
        raise MalformedFrameError("length", f"{len(data)} bytes is too short")
    magic, version, msg_type, length = _HEADER.unpack(data[:_HEADER.size])
    if magic != MAGIC:
        raise MalformedFrameError("magic", magic.hex())
    if version != VERSION:
        raise MalformedFrameError("version", str(version))
    if len(data) != _HEADER.size + length + _CKSUM.size:
        raise MalformedFrameError(
            "length", f"header says {length} payload bytes, frame has "
                      f"{len(data) - _HEADER.size - _CKSUM.size}")
    payload = data[_HEADER.size:_HEADER.size + length]
    (stated,) = _CKSUM.unpack(data[-_CKSUM.size:])
    if checksum16(payload) != stated:
        raise MalformedFrameError("checksum",
                                  f"stated {stated:#06x}, computed {checksum16(payload):#06x}")
    return _decode_payload(msg_type, payload)


COMMAND_FRAME_SIZE = _HEADER.size + _COMMAND.size + _CKSUM.size  # 32 bytes


def feedback_frame_size(num_corals: int) -> int:
    return (_HEADER.size + _FEEDBACK_HEAD.size + num_corals * _CORAL.size
            + _VEC3.size + _CKSUM.size)
