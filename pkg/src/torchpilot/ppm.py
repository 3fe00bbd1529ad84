"""Binary PPM (P6, maxval 255) frame I/O."""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidInputError
from .imgproc import PRIMARIES, QuantizedImage, RgbImage


def write_ppm(path: str | os.PathLike, img: RgbImage) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


def _tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated header integers, skipping comments."""
    out = []
    pos = 0
    while len(out) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        out.append(int(data[start:pos]))
    return out, pos


def read_ppm(path: str | os.PathLike) -> RgbImage:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P6":
        raise InvalidInputError(f"{path}: not a binary PPM (P6)")
    try:
        (width, height, maxval), pos = _tokens(data[2:], 3)
    except (ValueError, IndexError) as exc:
        raise InvalidInputError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise InvalidInputError(f"{path}: only maxval 255 is supported, got {maxval}")
    pos += 2 + 1  # magic number, then exactly one whitespace byte
    body = data[pos : pos + width * height * 3]
    if len(body) != width * height * 3:
        raise InvalidInputError(f"{path}: truncated pixel data")
    return RgbImage(np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3))


def write_quantized(path: str | os.PathLike, img: QuantizedImage) -> None:
    write_ppm(path, img.to_rgb())


def read_quantized(path: str | os.PathLike) -> QuantizedImage:
    """Read a frame written by :func:`write_quantized`; every pixel must be a primary."""
    px = read_ppm(path).pixels.astype(np.int32)
    keys = (px[..., 0] << 16) | (px[..., 1] << 8) | px[..., 2]
    prim = PRIMARIES.astype(np.int32)
    prim_keys = (prim[:, 0] << 16) | (prim[:, 1] << 8) | prim[:, 2]
    codes = np.full(keys.shape, 255, dtype=np.uint8)
    for code, key in enumerate(prim_keys):
        codes[keys == key] = code
    if (codes == 255).any():
        raise InvalidInputError(f"{path}: pixel is not one of the four primaries")
    return QuantizedImage(codes)
