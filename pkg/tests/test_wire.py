import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koordsim import wire
from koordsim.values import TaskItem

VARTABLE = [
    wire.VarInfo("count", "int", True),
    wire.VarInfo("level", "float", False),
    wire.VarInfo("flag", "bool", True),
    wire.VarInfo("spot", "pos", True),
    wire.VarInfo("route", "poslist", True),
    wire.VarInfo("tasks", "poslist", False),
]


def roundtrip(msg):
    return wire.decode(wire.encode(msg, VARTABLE), VARTABLE)


def test_header_layout_bit_exact():
    msg = wire.UpdateMsg(sender=3, round=7, var_id=0, index=2, value=-5)
    data = wire.encode(msg, VARTABLE)
    # big-endian: magic, version, kind, sender, round, var_id, index, length
    assert data[:2] == b"\x4b\x52"
    assert data[2] == 0x01
    assert data[3] == 0  # kind write
    assert data[4:6] == (3).to_bytes(2, "big")
    assert data[6:10] == (7).to_bytes(4, "big")
    assert data[10:12] == (0).to_bytes(2, "big")
    assert data[12:14] == (2).to_bytes(2, "big")
    assert data[14:16] == (8).to_bytes(2, "big")
    assert data[16:] == struct.pack("<q", -5)


def test_scalar_index_sentinel():
    msg = wire.UpdateMsg(sender=0, round=0, var_id=1, index=None, value=2.5)
    data = wire.encode(msg, VARTABLE)
    assert data[12:14] == b"\xff\xff"
    assert roundtrip(msg).index is None


def test_intent_has_empty_payload():
    msg = wire.UpdateMsg(
        sender=2, round=9, var_id=1, index=None, value=None, kind=wire.KIND_ATOMIC_INTENT
    )
    data = wire.encode(msg, VARTABLE)
    assert len(data) == 16
    out = wire.decode(data, VARTABLE)
    assert out.kind == wire.KIND_ATOMIC_INTENT and out.value is None
    assert (out.sender, out.round, out.var_id) == (2, 9, 1)


def test_poslist_cell_write_roundtrip():
    path = (TaskItem((1.0, -2.0, 0.5)), TaskItem((0.0, 0.0, 0.0), assigned=3, done=True))
    msg = wire.UpdateMsg(sender=1, round=4, var_id=4, index=1, value=path)
    assert roundtrip(msg) == msg


def test_poslist_item_is_27_bytes():
    path = (TaskItem((1.0, 2.0, 3.0)),)
    msg = wire.UpdateMsg(sender=0, round=0, var_id=4, index=0, value=path)
    data = wire.encode(msg, VARTABLE)
    assert len(data) == 16 + 2 + 27  # header + count + one item


def test_global_poslist_entry_write_uses_single_item_codec():
    item = TaskItem((1.0, 2.0, 0.0), assigned=2)
    msg = wire.UpdateMsg(sender=2, round=1, var_id=5, index=3, value=item)
    data = wire.encode(msg, VARTABLE)
    assert len(data) == 16 + 27
    assert roundtrip(msg) == msg


def test_global_poslist_whole_write_uses_counted_codec():
    items = tuple(TaskItem((float(i), 0.0, 0.0)) for i in range(3))
    msg = wire.UpdateMsg(sender=0, round=0, var_id=5, index=None, value=items)
    data = wire.encode(msg, VARTABLE)
    assert len(data) == 16 + 2 + 3 * 27
    assert roundtrip(msg) == msg


def test_bad_magic_rejected():
    msg = wire.UpdateMsg(sender=0, round=0, var_id=0, index=0, value=1)
    data = bytearray(wire.encode(msg, VARTABLE))
    data[0] = 0x00
    with pytest.raises(wire.WireError, match="magic"):
        wire.decode(bytes(data), VARTABLE)


def test_bad_version_rejected():
    msg = wire.UpdateMsg(sender=0, round=0, var_id=0, index=0, value=1)
    data = bytearray(wire.encode(msg, VARTABLE))
    data[2] = 0x7F
    with pytest.raises(wire.WireError, match="version"):
        wire.decode(bytes(data), VARTABLE)


def test_truncated_datagram_rejected():
    msg = wire.UpdateMsg(sender=0, round=0, var_id=0, index=0, value=1)
    data = wire.encode(msg, VARTABLE)
    with pytest.raises(wire.WireError):
        wire.decode(data[:10], VARTABLE)
    with pytest.raises(wire.WireError, match="length mismatch"):
        wire.decode(data[:-2], VARTABLE)


def test_unknown_var_id_rejected():
    msg = wire.UpdateMsg(sender=0, round=0, var_id=0, index=0, value=1)
    data = bytearray(wire.encode(msg, VARTABLE))
    data[10:12] = (99).to_bytes(2, "big")
    with pytest.raises(wire.WireError, match="unknown var_id"):
        wire.decode(bytes(data), VARTABLE)


def test_dedup_key_ignores_value():
    a = wire.UpdateMsg(sender=1, round=2, var_id=0, index=3, value=10)
    b = wire.UpdateMsg(sender=1, round=2, var_id=0, index=3, value=99)
    assert a.dedup_key() == b.dedup_key()


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
points = st.tuples(finite, finite, finite)
items = st.builds(
    TaskItem,
    point=points,
    assigned=st.integers(min_value=-1, max_value=100),
    done=st.booleans(),
)


@settings(max_examples=200, deadline=None)
@given(
    sender=st.integers(0, 0xFFFF),
    rnd=st.integers(0, 0xFFFFFFFF),
    var_id=st.integers(0, len(VARTABLE) - 1),
    index=st.one_of(st.none(), st.integers(0, 0xFFFE)),
    data=st.data(),
)
def test_roundtrip_property(sender, rnd, var_id, index, data):
    ty = VARTABLE[var_id].base_type
    if ty == "int":
        value = data.draw(st.integers(-(2**63), 2**63 - 1))
    elif ty == "float":
        value = data.draw(finite)
    elif ty == "bool":
        value = data.draw(st.booleans())
    elif ty == "pos":
        value = data.draw(points)
    elif wire._whole_codec(VARTABLE[var_id], index):
        value = data.draw(st.tuples(*([items] * data.draw(st.integers(0, 5)))))
    else:
        value = data.draw(items)
    msg = wire.UpdateMsg(sender=sender, round=rnd, var_id=var_id, index=index, value=value)
    assert roundtrip(msg) == msg
