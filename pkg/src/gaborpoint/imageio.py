"""Grayscale image reading and writing: 8/16-bit PGM and PNG.

Images are float64 rasters in [0, 1].  Color PNG input is converted with the
standard luma weights 0.299/0.587/0.114.  PGM is handled directly; PNG goes
through Pillow.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return _read_pgm(path)
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64)
            return arr / 65535.0
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if im.mode in ("RGB", "RGBA", "P"):
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            w = np.array(LUMA_WEIGHTS)
            return rgb @ w
        raise ValueError(f"unsupported image mode {im.mode!r} in {path}")


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    # Header: magic, width, height, maxval, with comments allowed anywhere.
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", data[pos:])
        if m is None:
            raise ValueError(f"truncated PGM header in {path}")
        tok = m.group(1)
        pos += m.end()
        if not tok.startswith(b"#"):
            tokens.append(tok)
    magic = tokens[0]
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"bad PGM maxval {maxval}")
    if magic == b"P2":
        values = np.array(data[pos:].split(), dtype=np.float64)
        if values.size != width * height:
            raise ValueError("PGM P2 payload size mismatch")
        return values.reshape(height, width) / maxval
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        count = width * height
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        return raw.reshape(height, width).astype(np.float64) / maxval
    raise ValueError(f"unsupported PGM magic {magic!r}")


def write_image(path, img, bits: int = 8) -> None:
    """Write a [0, 1] raster; clips out-of-range values."""
    path = Path(path)
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    if bits == 8:
        q = np.round(arr * 255.0).astype(np.uint8)
    elif bits == 16:
        q = np.round(arr * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bits must be 8 or 16, got {bits}")
    if path.suffix.lower() == ".pgm":
        header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{255 if bits == 8 else 65535}\n"
        payload = q.astype(">u2").tobytes() if bits == 16 else q.tobytes()
        path.write_bytes(header.encode() + payload)
        return
    if bits == 16:
        Image.fromarray(q).save(path)
    else:
        Image.fromarray(q, mode="L").save(path)


def write_rgb(path, rgb) -> None:
    """Write an RGB uint8 array (H, W, 3) as PNG."""
    arr = np.asarray(rgb)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected uint8 (H, W, 3) array")
    Image.fromarray(arr, mode="RGB").save(path)
