"""Payload codecs: turn vertex and edge payloads into bytes and back."""
import pickle
import struct

import numpy as np


class Codec:
    """Interface for application payload serialization.

    Encodings must be deterministic: equal payloads produce equal bytes.
    """

    def encode(self, value) -> bytes:
        raise NotImplementedError

    def decode(self, data: bytes):
        raise NotImplementedError


class PickleCodec(Codec):
    protocol = 4

    def encode(self, value):
        return pickle.dumps(value, protocol=self.protocol)

    def decode(self, data):
        return pickle.loads(data)


class FloatCodec(Codec):
    _fmt = struct.Struct("<d")

    def encode(self, value):
        return self._fmt.pack(float(value))

    def decode(self, data):
        return self._fmt.unpack(data)[0]


class ArrayCodec(Codec):
    """float64 vectors as raw little-endian bytes."""

    def encode(self, value):
        return np.ascontiguousarray(value, dtype="<f8").tobytes()

    def decode(self, data):
        return freeze(np.frombuffer(data, dtype="<f8").copy())


def freeze(value):
    """Make ndarray payloads (and tuples of them) read-only.

    Stored payloads are shared with update functions; in-place edits would
    bypass scope staging.
    """
    if isinstance(value, np.ndarray):
        if value.flags.writeable:
            value = value.copy()
            value.flags.writeable = False
        return value
    if isinstance(value, tuple) and any(isinstance(x, np.ndarray) for x in value):
        items = [freeze(x) for x in value]
        return type(value)(*items) if hasattr(value, "_fields") else tuple(items)
    return value


DEFAULT_CODEC = PickleCodec()
