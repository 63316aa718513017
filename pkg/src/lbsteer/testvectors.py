"""Golden test vectors shared with non-Python clients.

Writes vectors.bin (a concatenation of framed messages) and vectors.json (the
expected decoded values). Any codec that claims wire compatibility must decode
vectors.bin to exactly the JSON content. NaN payload values are spelled "NaN"
in the JSON since JSON has no NaN literal.

Usage: python -m lbsteer.testvectors [out_dir]
"""

from __future__ import annotations

import json
import math
import os
import sys

import numpy as np

from . import protocol as proto


def _f(value: float):
    return "NaN" if math.isnan(value) else float(value)


def build_vectors() -> list:
    geo = proto.Geometry(
        dims=(3, 3, 1),
        flags=bytes([0, 0, 1, 2, 3, 4, 5, 1, 0]),
        fill=np.array([1, 1, 0.5, 0, 0, 1, 1, 0.25, 1], dtype=np.float32),
    )
    geo3d = proto.Geometry(
        dims=(3, 2, 2),
        flags=bytes([0] * 6 + [3] * 5 + [1]),
        fill=np.array([1] * 6 + [0] * 5 + [0.75], dtype=np.float32),
    )
    return [
        proto.Hello(1),
        proto.Hello(65535),
        geo,
        proto.Start(),
        proto.Pause(),
        proto.Resume(),
        proto.Reset(geo3d),
        proto.SetCells(
            indices=np.array([0, 7, 2**40], dtype=np.uint64),
            flags=np.array([2, 0, 3], dtype=np.uint8),
            fills=np.array([0.0, np.nan, 1.0], dtype=np.float32),
        ),
        proto.MoveRegion(lo=(1, 2, 0), hi=(5, 8, 1), offset=(3, 0, -2)),
        proto.SetParam(proto.PARAM_TAU, np.array([1.0])),
        proto.SetParam(proto.PARAM_GRAVITY, np.array([0.0, -1e-4, 2.5e-3])),
        proto.Subscribe(field=5, axis=2, index=0, every_n=10),
        proto.Subscribe(field=4, axis=1, index=7, every_n=1),
        proto.Unsubscribe(3),
        proto.Frame(
            sub_id=1,
            iteration=12345678901,
            dims=(2, 2, 2),
            payload=np.array([1.0, 0.5, float("nan"), 2.25, 1, 1, 0, 1],
                             dtype=np.float32),
        ),
        proto.Stats(iteration=100, it_per_sec=12.5, mass=1234.5),
        proto.Ack(7),
        proto.ErrorMsg(3, "seq=5: tau must be > 0.5 (got 0.4)"),
        proto.ErrorMsg(1, ""),
        proto.ErrorMsg(2, "temp 25°C — non-ascii text survives"),
        proto.Bye(),
    ]


def to_json_value(msg) -> dict:
    if isinstance(msg, proto.Hello):
        return {"type": "hello", "version": msg.version}
    if isinstance(msg, proto.Reset):
        inner = to_json_value(msg.geometry)
        inner["type"] = "reset"
        return inner
    if isinstance(msg, proto.Geometry):
        return {"type": "geometry", "dims": list(msg.dims),
                "flags": list(msg.flags), "fill": [_f(v) for v in msg.fill]}
    if isinstance(msg, proto.Start):
        return {"type": "start"}
    if isinstance(msg, proto.Pause):
        return {"type": "pause"}
    if isinstance(msg, proto.Resume):
        return {"type": "resume"}
    if isinstance(msg, proto.SetCells):
        return {"type": "set_cells", "indices": [int(v) for v in msg.indices],
                "flags": [int(v) for v in msg.flags],
                "fills": [_f(v) for v in msg.fills]}
    if isinstance(msg, proto.MoveRegion):
        return {"type": "move_region", "lo": list(msg.lo), "hi": list(msg.hi),
                "offset": list(msg.offset)}
    if isinstance(msg, proto.SetParam):
        return {"type": "set_param", "param": msg.param,
                "values": [float(v) for v in msg.values]}
    if isinstance(msg, proto.Subscribe):
        return {"type": "subscribe", "field": msg.field, "axis": msg.axis,
                "index": msg.index, "everyN": msg.every_n}
    if isinstance(msg, proto.Unsubscribe):
        return {"type": "unsubscribe", "subId": msg.sub_id}
    if isinstance(msg, proto.Frame):
        return {"type": "frame", "subId": msg.sub_id, "iteration": msg.iteration,
                "dims": list(msg.dims), "payload": [_f(v) for v in msg.payload]}
    if isinstance(msg, proto.Stats):
        return {"type": "stats", "iteration": msg.iteration,
                "itPerSec": msg.it_per_sec, "mass": msg.mass}
    if isinstance(msg, proto.Ack):
        return {"type": "ack", "seq": msg.seq}
    if isinstance(msg, proto.ErrorMsg):
        return {"type": "error", "code": msg.code, "text": msg.text}
    if isinstance(msg, proto.Bye):
        return {"type": "bye"}
    raise TypeError(f"unmapped message {type(msg).__name__}")


def write_vectors(out_dir: str) -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    msgs = build_vectors()
    bin_path = os.path.join(out_dir, "vectors.bin")
    json_path = os.path.join(out_dir, "vectors.json")
    with open(bin_path, "wb") as fh:
        for msg in msgs:
            fh.write(proto.encode(msg))
    with open(json_path, "w") as fh:
        json.dump([to_json_value(m) for m in msgs], fh, indent=1)
        fh.write("\n")
    return bin_path, json_path


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "test-vectors"
    paths = write_vectors(target)
    print("\n".join(paths))
