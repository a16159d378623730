"""2-D grid primitives: resizing, Fourier transforms, array and image files.

All in-memory arithmetic is float64/complex128; 32-bit floats appear only
at file boundaries.
"""

import ast
import struct

import cv2
import numpy as np

from .validation import check_grid, check_complex_grid, check_tensor3d

__all__ = [
    "resize",
    "dft2",
    "idft2",
    "load_array",
    "save_array",
    "save_image",
    "load_image",
    "NpyParseError",
]

_INTERP = {
    "bilinear": cv2.INTER_LINEAR,
    "bicubic": cv2.INTER_CUBIC,
    "nearest": cv2.INTER_NEAREST,
}


def resize(g, out_h, out_w, method="bilinear"):
    """Resample a grid to (out_h, out_w) under half-pixel-center alignment."""
    g = check_grid(g)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target dims must be >= 1, got ({out_h}, {out_w})")
    if method not in _INTERP:
        raise ValueError(f"unknown resize method {method!r}")
    if (out_h, out_w) == g.shape and method in ("bilinear", "nearest"):
        return g.copy()
    return cv2.resize(g, (int(out_w), int(out_h)), interpolation=_INTERP[method])


def dft2(g):
    """Unnormalized forward 2-D DFT; the DC bin equals the pixel sum."""
    g = check_grid(g)
    return np.fft.fft2(g)


def idft2(c):
    """Inverse 2-D DFT carrying the 1/(H*W) normalization."""
    c = check_complex_grid(c)
    return np.fft.ifft2(c)


class NpyParseError(ValueError):
    """Array file is malformed; message carries the failing byte offset."""


_MAGIC = b"\x93NUMPY"
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def save_array(t, path, dtype="<f4"):
    """Write a (A, H, W) tensor as an NPY v1.0 file, C-order little-endian."""
    t = check_tensor3d(t)
    if dtype not in _DTYPES:
        raise ValueError(f"unsupported dtype {dtype!r}")
    header = (
        "{'descr': '%s', 'fortran_order': False, 'shape': %s, }"
        % (dtype, str(tuple(int(d) for d in t.shape)))
    )
    # Pad so the payload starts on a 64-byte boundary, newline-terminated.
    base = len(_MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-base % 64) + "\n"
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(bytes((1, 0)))
        f.write(struct.pack("<H", len(header)))
        f.write(header.encode("latin1"))
        f.write(np.ascontiguousarray(t, dtype=_DTYPES[dtype]).tobytes())


def load_array(path):
    """Read an NPY v1.0 array file into a (A, H, W) float64 tensor.

    2-D payloads load as a single-channel tensor. Raises NpyParseError on
    malformed headers, unsupported dtypes, or shape/payload mismatch.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise NpyParseError(f"bad magic bytes at offset 0 in {path}")
    if raw[6:8] != bytes((1, 0)):
        raise NpyParseError(f"unsupported NPY version at offset 6 in {path}")
    if len(raw) < 10:
        raise NpyParseError(f"truncated header length at offset 8 in {path}")
    (hlen,) = struct.unpack("<H", raw[8:10])
    header_end = 10 + hlen
    if len(raw) < header_end:
        raise NpyParseError(f"truncated header at offset 10 in {path}")
    try:
        meta = ast.literal_eval(raw[10:header_end].decode("latin1"))
        descr = meta["descr"]
        fortran = meta["fortran_order"]
        shape = tuple(meta["shape"])
    except Exception as exc:
        raise NpyParseError(f"unparseable header dict at offset 10 in {path}: {exc}")
    if descr not in _DTYPES:
        raise NpyParseError(f"unsupported dtype {descr!r} in {path}")
    if fortran:
        raise NpyParseError(f"fortran_order arrays unsupported in {path}")
    if len(shape) not in (2, 3) or any(d < 1 for d in shape):
        raise NpyParseError(f"unsupported shape {shape} in {path}")
    dt = _DTYPES[descr]
    expected = int(np.prod(shape)) * dt.itemsize
    payload = raw[header_end:]
    if len(payload) != expected:
        raise NpyParseError(
            f"payload size mismatch at offset {header_end} in {path}: "
            f"expected {expected} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=dt).reshape(shape)
    return check_tensor3d(arr)


def save_image(g, path):
    """Write a grid as an 8-bit grayscale PNG, min-max scaled to [0, 255].

    A constant grid maps to all zeros.
    """
    g = check_grid(g)
    lo, hi = float(g.min()), float(g.max())
    if hi > lo:
        scaled = (g - lo) * (255.0 / (hi - lo))
    else:
        scaled = np.zeros_like(g)
    data = np.rint(scaled).astype(np.uint8)
    if not cv2.imwrite(str(path), data):
        raise OSError(f"failed to write image {path}")


def load_image(path):
    """Read an image as float64; grayscale -> (H, W), color -> (H, W, 3) RGB."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise OSError(f"failed to read image {path}")
    img = img.astype(np.float64)
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        img = img[:, :, ::-1].copy()  # BGR -> RGB
    return img
