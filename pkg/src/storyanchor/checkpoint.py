"""Binary checkpoint format.

Layout (all integers little-endian):

    magic  b"SANC"
    u16    version (=1)
    u32    meta length, then meta JSON (utf-8, sorted keys) -- model config,
           vocabulary, stage tag, epoch, validation score, parent id
    u32    parameter count, then per parameter in sorted-name order:
             u16 name length + name utf-8
             u8  trainable flag
             u8  ndim, u32 x ndim extents
             f64 x prod(extents) values
    u8     has-adam flag; if set:
             u64 step, f64 lr, beta1, beta2, epsilon
             u32 moment count, then per entry (sorted-name order):
               u16 name length + name, f64 first moments, f64 second moments

Serialization is byte-deterministic: identical parameters and meta
produce identical files.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .errors import FormatError
from .optim import AdamState, ParamStore

MAGIC = b"SANC"
VERSION = 1


def _write_name(buf, name: str):
    raw = name.encode()
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _read_name(buf) -> str:
    (n,) = struct.unpack("<H", buf.read(2))
    return buf.read(n).decode()


def serialize(params: ParamStore, meta: dict, adam: AdamState | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    meta_raw = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    buf.write(struct.pack("<I", len(meta_raw)))
    buf.write(meta_raw)
    names = params.names()
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        p = params[name]
        _write_name(buf, name)
        buf.write(struct.pack("<B", 1 if params.is_trainable(name) else 0))
        buf.write(struct.pack("<B", p.data.ndim))
        for d in p.data.shape:
            buf.write(struct.pack("<I", d))
        buf.write(p.data.astype("<f8").tobytes())
    if adam is None:
        buf.write(struct.pack("<B", 0))
    else:
        buf.write(struct.pack("<B", 1))
        buf.write(struct.pack("<Q", adam.step))
        buf.write(struct.pack("<dddd", adam.lr, adam.beta1, adam.beta2, adam.epsilon))
        moment_names = sorted(adam.m)
        buf.write(struct.pack("<I", len(moment_names)))
        for name in moment_names:
            _write_name(buf, name)
            buf.write(adam.m[name].astype("<f8").tobytes())
            buf.write(adam.v[name].astype("<f8").tobytes())
    return buf.getvalue()


def deserialize(raw: bytes) -> tuple[ParamStore, dict, AdamState | None]:
    buf = io.BytesIO(raw)
    if buf.read(4) != MAGIC:
        raise FormatError("bad checkpoint magic (expected SANC)")
    (version,) = struct.unpack("<H", buf.read(2))
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<I", buf.read(4))
    meta = json.loads(buf.read(meta_len).decode())
    (n_params,) = struct.unpack("<I", buf.read(4))
    params = ParamStore()
    shapes: dict[str, tuple] = {}
    for _ in range(n_params):
        name = _read_name(buf)
        (trainable,) = struct.unpack("<B", buf.read(1))
        (ndim,) = struct.unpack("<B", buf.read(1))
        shape = tuple(struct.unpack("<I", buf.read(4))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        payload = buf.read(8 * count)
        if len(payload) != 8 * count:
            raise FormatError(f"truncated values for parameter {name}")
        data = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
        params.add(name, data, trainable=bool(trainable))
        shapes[name] = shape
    (has_adam,) = struct.unpack("<B", buf.read(1))
    adam = None
    if has_adam:
        (step,) = struct.unpack("<Q", buf.read(8))
        lr, b1, b2, eps = struct.unpack("<dddd", buf.read(32))
        adam = AdamState(lr=lr, beta1=b1, beta2=b2, epsilon=eps, step=step)
        (n_moments,) = struct.unpack("<I", buf.read(4))
        for _ in range(n_moments):
            name = _read_name(buf)
            if name not in shapes:
                raise FormatError(f"adam moments for unknown parameter {name}")
            shape = shapes[name]
            count = int(np.prod(shape)) if shape else 1
            adam.m[name] = np.frombuffer(buf.read(8 * count), dtype="<f8").reshape(shape).copy()
            adam.v[name] = np.frombuffer(buf.read(8 * count), dtype="<f8").reshape(shape).copy()
    return params, meta, adam


def save(path, params: ParamStore, meta: dict, adam: AdamState | None = None):
    with open(path, "wb") as f:
        f.write(serialize(params, meta, adam))


def load(path) -> tuple[ParamStore, dict, AdamState | None]:
    with open(path, "rb") as f:
        return deserialize(f.read())
