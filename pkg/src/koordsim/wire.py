"""Wire format for shared-memory update messages.

Header (big-endian): magic 0x4B52 (2B), version 0x01 (1B), kind (1B),
sender pid (2B), round (4B), var_id (2B), index (2B, 0xFFFF for scalars),
payload length (2B).  Payload values are little-endian, typed by the
variable's declared type.  One message per datagram.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

from koordsim.values import TaskItem

MAGIC = 0x4B52
VERSION = 0x01

KIND_WRITE = 0
KIND_ATOMIC_INTENT = 1
KIND_ATOMIC_GRANT = 2

SCALAR_INDEX = 0xFFFF

_HEADER = struct.Struct(">HBBHIHHH")
_ITEM = struct.Struct("<dddhB")  # point, assigned pid, done flag


class WireError(Exception):
    pass


@dataclass(frozen=True)
class VarInfo:
    name: str
    base_type: str
    indexed_by_pid: bool


@dataclass(frozen=True)
class UpdateMsg:
    sender: int
    round: int
    var_id: int
    index: Optional[int]  # None for scalars
    value: object
    kind: int = KIND_WRITE

    def dedup_key(self):
        return (self.sender, self.round, self.var_id, self.index)


def _encode_item(item: TaskItem) -> bytes:
    x, y, z = item.point
    return _ITEM.pack(x, y, z, item.assigned, int(item.done))


def _decode_item(data: bytes, off: int) -> TaskItem:
    x, y, z, assigned, done = _ITEM.unpack_from(data, off)
    return TaskItem((x, y, z), assigned, bool(done))


def encode_payload(value, var: VarInfo, whole: bool) -> bytes:
    """`whole` selects the whole-list codec for poslist variables: true for
    pid-indexed cell writes and whole-list writes, false for entry writes."""
    ty = var.base_type
    if ty == "int":
        return struct.pack("<q", value)
    if ty == "float":
        return struct.pack("<d", value)
    if ty == "bool":
        return struct.pack("<B", int(value))
    if ty == "pos":
        return struct.pack("<ddd", *value)
    if ty == "poslist":
        if whole:
            return struct.pack("<H", len(value)) + b"".join(_encode_item(v) for v in value)
        return _encode_item(value)
    raise WireError(f"unserializable type {ty}")


def decode_payload(data: bytes, var: VarInfo, whole: bool):
    ty = var.base_type
    try:
        if ty == "int":
            return struct.unpack("<q", data)[0]
        if ty == "float":
            return struct.unpack("<d", data)[0]
        if ty == "bool":
            return bool(struct.unpack("<B", data)[0])
        if ty == "pos":
            return struct.unpack("<ddd", data)
        if ty == "poslist":
            if whole:
                (n,) = struct.unpack_from("<H", data, 0)
                return tuple(_decode_item(data, 2 + i * _ITEM.size) for i in range(n))
            return _decode_item(data, 0)
    except struct.error as exc:
        raise WireError(f"truncated payload for {var.name}") from exc
    raise WireError(f"unserializable type {ty}")


def _whole_codec(var: VarInfo, index: Optional[int]) -> bool:
    return var.indexed_by_pid or index is None


def encode(msg: UpdateMsg, vartable: list[VarInfo]) -> bytes:
    if msg.kind == KIND_WRITE:
        var = vartable[msg.var_id]
        payload = encode_payload(msg.value, var, _whole_codec(var, msg.index))
    else:
        payload = b""
    index = SCALAR_INDEX if msg.index is None else msg.index
    if len(payload) > 0xFFFF:
        raise WireError("payload too large for one datagram")
    header = _HEADER.pack(
        MAGIC, VERSION, msg.kind, msg.sender, msg.round, msg.var_id, index, len(payload)
    )
    return header + payload


def decode(data: bytes, vartable: list[VarInfo]) -> UpdateMsg:
    if len(data) < _HEADER.size:
        raise WireError("datagram shorter than header")
    magic, version, kind, sender, rnd, var_id, index, plen = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise WireError(f"bad magic 0x{magic:04X}")
    if version != VERSION:
        raise WireError(f"unsupported version {version}")
    payload = data[_HEADER.size :]
    if len(payload) != plen:
        raise WireError("payload length mismatch")
    value = None
    if kind == KIND_WRITE:
        if var_id >= len(vartable):
            raise WireError(f"unknown var_id {var_id}")
        var = vartable[var_id]
        idx = None if index == SCALAR_INDEX else index
        value = decode_payload(payload, var, _whole_codec(var, idx))
    return UpdateMsg(
        sender=sender,
        round=rnd,
        var_id=var_id,
        index=None if index == SCALAR_INDEX else index,
        value=value,
        kind=kind,
    )
