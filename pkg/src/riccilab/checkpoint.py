"""Versioned binary checkpoint segments for metric slices.

Layout per segment (little-endian):

    magic    4 bytes  b"RFSL"
    version  u32      format version (1)
    topology u8       Topology enum ordinal
    flags    u8       bit 0: period field present
    pad      u16      zero
    n        u64      node count
    t        f64      slice time
    comp     i64      component id
    period   f64      coordinate period (0 when absent)
    data     n * 3 * f64   interleaved (x, phi, psi) triples

A checkpoint file is a concatenation of segments.  Round trips are exact:
the float payload is the raw IEEE-754 representation.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable

import numpy as np

from .errors import CorruptLog
from .geometry import MetricSlice, Topology

MAGIC = b"RFSL"
VERSION = 1
_HEADER = struct.Struct("<4sIBBHQdqd")

_TOPO_ORDER = [Topology.SPHERE, Topology.BALL, Topology.CYLINDER,
               Topology.CIRCLE_BUNDLE]


def write_segment(fh: BinaryIO, slc: MetricSlice) -> None:
    flags = 1 if slc.period is not None else 0
    fh.write(_HEADER.pack(
        MAGIC, VERSION, _TOPO_ORDER.index(slc.topology), flags, 0,
        slc.n, float(slc.t), int(slc.component_id),
        float(slc.period) if slc.period is not None else 0.0,
    ))
    data = np.empty((slc.n, 3), dtype="<f8")
    data[:, 0] = slc.x
    data[:, 1] = slc.phi
    data[:, 2] = slc.psi
    fh.write(data.tobytes())


def read_segment(fh: BinaryIO) -> MetricSlice | None:
    head = fh.read(_HEADER.size)
    if not head:
        return None
    if len(head) < _HEADER.size:
        raise CorruptLog("truncated segment header")
    magic, version, topo, flags, _, n, t, comp, period = _HEADER.unpack(head)
    if magic != MAGIC:
        raise CorruptLog(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptLog(f"unsupported checkpoint version {version}")
    raw = fh.read(n * 3 * 8)
    if len(raw) < n * 3 * 8:
        raise CorruptLog("truncated segment payload")
    data = np.frombuffer(raw, dtype="<f8").reshape(n, 3)
    return MetricSlice(
        x=data[:, 0].copy(),
        phi=data[:, 1].copy(),
        psi=data[:, 2].copy(),
        topology=_TOPO_ORDER[topo],
        t=t,
        component_id=comp,
        period=period if (flags & 1) else None,
    )


def save_state(path, slices: Iterable[MetricSlice]) -> None:
    with open(path, "wb") as fh:
        for slc in slices:
            write_segment(fh, slc)


def load_state(path) -> list[MetricSlice]:
    out = []
    with open(path, "rb") as fh:
        while True:
            slc = read_segment(fh)
            if slc is None:
                break
            out.append(slc)
    return out
