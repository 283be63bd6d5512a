"""Constant pool: 16-byte aligned, deduplicated read-only data.

The compiled function receives the pool base in rsi; every entry is addressed
as [rsi + offset].  Identical byte payloads share one entry, so emitters can
re-request constants freely.
"""

import struct

import numpy as np


class ConstPool:
    def __init__(self):
        self.data = bytearray()
        self._index = {}

    def add_bytes(self, raw):
        raw = bytes(raw)
        if raw in self._index:
            return self._index[raw]
        off = len(self.data)
        self.data += raw
        while len(self.data) % 16:
            self.data.append(0)
        self._index[raw] = off
        return off

    def f32x4(self, a, b=None, c=None, d=None):
        if b is None:
            b = c = d = a
        return self.add_bytes(struct.pack("<4f", a, b, c, d))

    def i32x4(self, a, b=None, c=None, d=None):
        if b is None:
            b = c = d = a
        return self.add_bytes(struct.pack("<4i", a, b, c, d))

    def u32x4(self, a, b=None, c=None, d=None):
        if b is None:
            b = c = d = a
        return self.add_bytes(struct.pack("<4I", a, b, c, d))

    def vec_f32(self, arr):
        """A float32 array, zero-padded to a 16-byte multiple."""
        arr = np.ascontiguousarray(arr, dtype="<f4")
        return self.add_bytes(arr.tobytes())

    def __len__(self):
        return len(self.data)

    def tobytes(self):
        return bytes(self.data)


# Lane masks for partial-lane operations (1..3 live lanes).
def lane_mask_offset(pool, live_lanes):
    words = [0xFFFFFFFF if i < live_lanes else 0 for i in range(4)]
    return pool.u32x4(*words)
