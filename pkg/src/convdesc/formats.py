"""Binary file formats.

All formats are little-endian and framed the same way: a 4-byte ASCII
magic, a payload, and a trailing CRC32 of every preceding byte. The one
exception is the descriptor dump ("CDSD"), which is a plain header plus
f32 matrix with no checksum.

    CDWT  backbone weights: version u32, layer count u32, then per layer
          name (u32 length + UTF-8), dims 4xu32 (k, kh, kw, cin),
          weights f32 in (k, ky, kx, cin) order, biases f32
    CDSD  descriptor matrix: count u32, dim u32, f32 row-major
    CDCB  codebook: k u32, dim u32, centroids f32 row-major
    CDSV  svm model: class count u32, dim u32, labels (u32 length +
          UTF-8 each), scaler means f32, scaler stds f32, then per class
          weights f32 + bias f32
    CDFV  feature vector cache entry: kind u8, dim u32, values f32
    CDMD  map dump: height u32, width u32, channels u32, f32 in
          row-major (y, x, channel) order
"""

from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import FormatError, IntegrityError

FEATURE_KIND_CODES = {"bow": 1, "hlac": 2}
FEATURE_KIND_NAMES = {v: k for k, v in FEATURE_KIND_CODES.items()}


def _read_exact(buf: io.BufferedIOBase, n: int, what: str) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file while reading {what}")
    return data


def _read_framed(path) -> tuple[bytes, bytes, int]:
    """Return (magic, payload) of a CRC-framed file plus the stored CRC."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{path}: too short to be a framed file")
    body, stored = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise IntegrityError(f"{path}: CRC32 mismatch")
    return body[:4], body[4:], stored


def _write_framed(path, magic: bytes, payload: bytes) -> int:
    body = magic + payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))
    return crc


def _check_magic(path, magic: bytes, expected: bytes):
    if magic != expected:
        raise FormatError(
            f"{path}: bad magic {magic!r}, expected {expected!r}"
        )


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _f32_from(buf: io.BufferedIOBase, count: int, what: str) -> np.ndarray:
    data = _read_exact(buf, count * 4, what)
    return np.frombuffer(data, dtype="<f4").copy()


# --- CDWT: backbone weights ------------------------------------------------

WEIGHTS_MAGIC = b"CDWT"
WEIGHTS_VERSION = 1


def write_weights(path, layers):
    """Write conv layers as (name, weights (k,kh,kw,cin) f32, biases f32).

    Returns the file's CRC32.
    """
    out = io.BytesIO()
    out.write(struct.pack("<II", WEIGHTS_VERSION, len(layers)))
    for name, weights, biases in layers:
        w = np.asarray(weights, dtype=np.float32)
        b = np.asarray(biases, dtype=np.float32)
        encoded = name.encode("utf-8")
        out.write(struct.pack("<I", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<IIII", *w.shape))
        out.write(_f32_bytes(w))
        out.write(_f32_bytes(b))
    return _write_framed(path, WEIGHTS_MAGIC, out.getvalue())


def read_weights(path):
    """Read a CDWT file; returns (layers, crc32) with layers as
    (name, weights, biases) tuples."""
    magic, payload, crc = _read_framed(path)
    _check_magic(path, magic, WEIGHTS_MAGIC)
    buf = io.BytesIO(payload)
    version, count = struct.unpack("<II", _read_exact(buf, 8, "header"))
    if version != WEIGHTS_VERSION:
        raise FormatError(f"{path}: unsupported weight format version {version}")
    layers = []
    for i in range(count):
        (name_len,) = struct.unpack("<I", _read_exact(buf, 4, f"layer {i} name length"))
        name = _read_exact(buf, name_len, f"layer {i} name").decode("utf-8")
        k, kh, kw, cin = struct.unpack("<IIII", _read_exact(buf, 16, f"layer {i} dims"))
        weights = _f32_from(buf, k * kh * kw * cin, f"layer {i} weights")
        biases = _f32_from(buf, k, f"layer {i} biases")
        layers.append((name, weights.reshape(k, kh, kw, cin), biases))
    if buf.read(1):
        raise FormatError(f"{path}: trailing bytes after layer {count - 1}")
    return layers, crc


# --- CDSD: descriptor matrix dump (no checksum) -----------------------------

DESCRIPTORS_MAGIC = b"CDSD"


def write_descriptors(path, matrix):
    m = np.asarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise FormatError(f"descriptor matrix must be 2-D, got {m.ndim}-D")
    with open(path, "wb") as fh:
        fh.write(DESCRIPTORS_MAGIC)
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(_f32_bytes(m))


def read_descriptors(path):
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        _check_magic(path, magic, DESCRIPTORS_MAGIC)
        count, dim = struct.unpack("<II", _read_exact(fh, 8, "header"))
        data = _f32_from(fh, count * dim, "descriptor data")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes")
    return data.reshape(count, dim)


# --- CDCB: codebook ----------------------------------------------------------

CODEBOOK_MAGIC = b"CDCB"


def write_codebook(path, centroids):
    c = np.asarray(centroids, dtype=np.float32)
    payload = struct.pack("<II", c.shape[0], c.shape[1]) + _f32_bytes(c)
    return _write_framed(path, CODEBOOK_MAGIC, payload)


def read_codebook(path):
    magic, payload, _ = _read_framed(path)
    _check_magic(path, magic, CODEBOOK_MAGIC)
    buf = io.BytesIO(payload)
    k, dim = struct.unpack("<II", _read_exact(buf, 8, "header"))
    data = _f32_from(buf, k * dim, "centroids")
    if buf.read(1):
        raise FormatError(f"{path}: trailing bytes")
    return data.reshape(k, dim)


# --- CDSV: svm model ---------------------------------------------------------

MODEL_MAGIC = b"CDSV"


def write_svm_model(path, labels, means, stds, weights, biases):
    means = np.asarray(means, dtype=np.float32)
    stds = np.asarray(stds, dtype=np.float32)
    weights = np.asarray(weights, dtype=np.float32)
    biases = np.asarray(biases, dtype=np.float32)
    n_classes, dim = weights.shape
    out = io.BytesIO()
    out.write(struct.pack("<II", n_classes, dim))
    for label in labels:
        encoded = str(label).encode("utf-8")
        out.write(struct.pack("<I", len(encoded)))
        out.write(encoded)
    out.write(_f32_bytes(means))
    out.write(_f32_bytes(stds))
    for i in range(n_classes):
        out.write(_f32_bytes(weights[i]))
        out.write(struct.pack("<f", float(biases[i])))
    return _write_framed(path, MODEL_MAGIC, out.getvalue())


def read_svm_model(path):
    """Returns (labels, means, stds, weights, biases)."""
    magic, payload, _ = _read_framed(path)
    _check_magic(path, magic, MODEL_MAGIC)
    buf = io.BytesIO(payload)
    n_classes, dim = struct.unpack("<II", _read_exact(buf, 8, "header"))
    labels = []
    for i in range(n_classes):
        (n,) = struct.unpack("<I", _read_exact(buf, 4, f"label {i} length"))
        labels.append(_read_exact(buf, n, f"label {i}").decode("utf-8"))
    means = _f32_from(buf, dim, "scaler means")
    stds = _f32_from(buf, dim, "scaler stds")
    weights = np.empty((n_classes, dim), dtype=np.float32)
    biases = np.empty(n_classes, dtype=np.float32)
    for i in range(n_classes):
        weights[i] = _f32_from(buf, dim, f"class {i} weights")
        (biases[i],) = struct.unpack("<f", _read_exact(buf, 4, f"class {i} bias"))
    if buf.read(1):
        raise FormatError(f"{path}: trailing bytes")
    return labels, means, stds, weights, biases


# --- CDFV: cached feature vector ---------------------------------------------

FEATURE_MAGIC = b"CDFV"


def write_feature(path, kind: str, values):
    v = np.asarray(values, dtype=np.float32)
    payload = struct.pack("<BI", FEATURE_KIND_CODES[kind], v.size) + _f32_bytes(v)
    return _write_framed(path, FEATURE_MAGIC, payload)


def read_feature(path):
    """Returns (kind, values)."""
    magic, payload, _ = _read_framed(path)
    _check_magic(path, magic, FEATURE_MAGIC)
    buf = io.BytesIO(payload)
    code, dim = struct.unpack("<BI", _read_exact(buf, 5, "header"))
    if code not in FEATURE_KIND_NAMES:
        raise FormatError(f"{path}: unknown feature kind code {code}")
    values = _f32_from(buf, dim, "values")
    if buf.read(1):
        raise FormatError(f"{path}: trailing bytes")
    return FEATURE_KIND_NAMES[code], values


# --- CDMD: map dump ----------------------------------------------------------

MAP_MAGIC = b"CDMD"


def write_map(path, data):
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 3:
        raise FormatError(f"map dump must be rank 3, got rank {arr.ndim}")
    payload = struct.pack("<III", *arr.shape) + _f32_bytes(arr)
    return _write_framed(path, MAP_MAGIC, payload)


def read_map(path):
    magic, payload, _ = _read_framed(path)
    _check_magic(path, magic, MAP_MAGIC)
    buf = io.BytesIO(payload)
    h, w, c = struct.unpack("<III", _read_exact(buf, 12, "header"))
    data = _f32_from(buf, h * w * c, "map data")
    if buf.read(1):
        raise FormatError(f"{path}: trailing bytes")
    return data.reshape(h, w, c)
