"""8-bit image I/O: PNG (via Pillow), binary PPM (P6) and PGM (P5).

Loaded images become [C,H,W] float32 tensors with value = pixel / 255
exactly; saving quantizes with round-half-even, so a save/load round trip
of an already-quantized tensor is bit-identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from advkit.errors import FormatError, IoError, ShapeError


def _read_pnm(path: Path) -> np.ndarray:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    try:
        magic = data[:2].decode("ascii")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: not a PNM file") from e
    if magic not in ("P5", "P6"):
        raise FormatError(f"{path}: unsupported PNM magic {magic!r}")
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PNM header")
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PNM supported, maxval={maxval}")
    channels = 1 if magic == "P5" else 3
    n = width * height * channels
    raster = data[pos:pos + n]
    if len(raster) != n:
        raise FormatError(f"{path}: raster has {len(raster)} bytes, expected {n}")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return arr


def _read_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                raise FormatError(f"{path}: unsupported PNG mode {im.mode} (need 8-bit L or RGB)")
            arr = np.asarray(im, dtype=np.uint8)
    except FileNotFoundError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    except (OSError, SyntaxError) as e:
        raise FormatError(f"{path}: cannot decode PNG: {e}") from e
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit image as a [C,H,W] float32 tensor in [0,1]."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        arr = _read_png(path)
    elif suffix in (".ppm", ".pgm", ".pnm"):
        arr = _read_pnm(path)
    else:
        raise FormatError(f"{path}: unsupported image extension {suffix!r}")
    # HWC uint8 -> CHW float32
    chw = np.transpose(arr, (2, 0, 1)).astype(np.float32) / np.float32(255.0)
    return chw


def quantize(t: np.ndarray) -> np.ndarray:
    """The exact value a tensor takes after an 8-bit save/load round trip."""
    return (np.rint(255.0 * np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)) / 255.0).astype(np.float32)


def _to_uint8(t: np.ndarray) -> np.ndarray:
    if t.ndim != 3 or t.shape[0] not in (1, 3):
        raise ShapeError(f"expected [C,H,W] with C in {{1,3}}, got shape {t.shape}")
    # round-half-even on .5 ties (np.rint)
    return np.rint(255.0 * np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)).astype(np.uint8)


def save_image(t: np.ndarray, path: str | Path) -> None:
    """Quantize a [C,H,W] tensor in [0,1] to 8 bits and write PNG or PPM/PGM by extension."""
    path = Path(path)
    pixels = _to_uint8(t)
    c, h, w = pixels.shape
    suffix = path.suffix.lower()
    try:
        if suffix == ".png":
            hwc = np.transpose(pixels, (1, 2, 0))
            im = Image.fromarray(hwc[:, :, 0] if c == 1 else hwc, mode="L" if c == 1 else "RGB")
            im.save(path, format="PNG")
        elif suffix in (".ppm", ".pgm", ".pnm"):
            if c == 1:
                header = f"P5\n{w} {h}\n255\n".encode("ascii")
                raster = pixels[0].tobytes()
            else:
                header = f"P6\n{w} {h}\n255\n".encode("ascii")
                raster = np.transpose(pixels, (1, 2, 0)).tobytes()
            path.write_bytes(header + raster)
        else:
            raise FormatError(f"{path}: unsupported image extension {suffix!r}")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
