"""Binary netpbm codecs: PGM (P5, 8- and 16-bit) and PPM (P6, 8-bit).

Lossless and canonical: whatever bytes these writers emit, the readers
return the identical pixel array, and re-encoding reproduces the exact
byte stream.  16-bit samples are big-endian per the format convention.
Depth rasters are stored as 16-bit PGM in millimeters with 0 marking an
invalid sample.
"""

from __future__ import annotations

import numpy as np

from .imaging import BinaryMask, ColorImage, DepthImage, GrayImage

__all__ = [
    "PnmError",
    "read_pnm",
    "read_pgm",
    "read_ppm",
    "write_pgm",
    "write_ppm",
    "encode_gray",
    "decode_gray",
    "encode_color",
    "decode_color",
    "encode_mask",
    "decode_mask",
    "encode_depth",
    "decode_depth",
]


class PnmError(ValueError):
    """Malformed netpbm data; offset is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class _Tokenizer:
    """Pulls whitespace-separated header tokens, honoring '#' comments."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_separators(self) -> None:
        d = self.data
        while self.pos < len(d):
            c = d[self.pos : self.pos + 1]
            if c.isspace():
                self.pos += 1
            elif c == b"#":
                while self.pos < len(d) and d[self.pos : self.pos + 1] not in (b"\n", b""):
                    self.pos += 1
            else:
                return

    def token(self, what: str) -> bytes:
        self._skip_separators()
        if self.pos >= len(self.data):
            raise PnmError(f"malformed header: missing {what}", self.pos)
        start = self.pos
        d = self.data
        while self.pos < len(d) and not d[self.pos : self.pos + 1].isspace():
            if d[self.pos : self.pos + 1] == b"#":
                break
            self.pos += 1
        return d[start : self.pos]

    def integer(self, what: str) -> int:
        start_before = self.pos
        tok = self.token(what)
        if not tok.isdigit():
            raise PnmError(
                f"malformed header: {what} is not a decimal integer", start_before
            )
        return int(tok)


def read_pnm(data: bytes) -> tuple[np.ndarray, int]:
    """Decode P5/P6 bytes into (array, maxval).

    P5 yields (h, w), P6 yields (h, w, 3); dtype is uint8 for maxval
    255 and big-endian-decoded uint16 for maxval 65535.
    """
    tok = _Tokenizer(data)
    magic = tok.token("magic")
    if magic not in (b"P5", b"P6"):
        raise PnmError(f"malformed header: unsupported magic {magic!r}", 0)
    width = tok.integer("width")
    height = tok.integer("height")
    maxval_at = tok.pos
    maxval = tok.integer("maxval")
    if maxval not in (255, 65535):
        raise PnmError(f"unsupported maxval {maxval}", maxval_at)
    if magic == b"P6" and maxval != 255:
        raise PnmError("unsupported maxval for P6 (only 255)", maxval_at)
    if width < 1 or height < 1:
        raise PnmError("malformed header: zero image dimension", 0)

    if tok.pos >= len(data) or not data[tok.pos : tok.pos + 1].isspace():
        raise PnmError("malformed header: missing whitespace before payload", tok.pos)
    payload_at = tok.pos + 1

    channels = 3 if magic == b"P6" else 1
    bytes_per = 2 if maxval == 65535 else 1
    expected = width * height * channels * bytes_per
    payload = data[payload_at:]
    if len(payload) < expected:
        raise PnmError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}",
            payload_at + len(payload),
        )
    if len(payload) > expected:
        raise PnmError("trailing data after payload", payload_at + expected)

    dtype = np.dtype(">u2") if bytes_per == 2 else np.uint8
    arr = np.frombuffer(payload, dtype=dtype, count=width * height * channels)
    if channels == 3:
        arr = arr.reshape(height, width, 3)
    else:
        arr = arr.reshape(height, width)
    if bytes_per == 2:
        arr = arr.astype(np.uint16)
    return arr.copy(), maxval


def read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    arr, maxval = read_pnm(data)
    if arr.ndim != 2:
        raise PnmError("expected a P5 graymap, found P6", 0)
    return arr, maxval


def read_ppm(data: bytes) -> np.ndarray:
    arr, _ = read_pnm(data)
    if arr.ndim != 3:
        raise PnmError("expected a P6 pixmap, found P5", 0)
    return arr


def write_pgm(arr: np.ndarray, maxval: int = 255) -> bytes:
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError("PGM expects a 2-D array")
    if a.min() < 0 or a.max() > maxval:
        raise ValueError("sample values exceed maxval")
    h, w = a.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = np.dtype(">u2") if maxval == 65535 else np.uint8
    return header + a.astype(dtype).tobytes()


def write_ppm(arr: np.ndarray) -> bytes:
    a = np.asarray(arr)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError("PPM expects an (h, w, 3) array")
    if a.min() < 0 or a.max() > 255:
        raise ValueError("sample values exceed 255")
    h, w, _ = a.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + a.astype(np.uint8).tobytes()


def encode_gray(img: GrayImage) -> bytes:
    return write_pgm(np.round(img.pixels * 255.0).astype(np.uint8))


def decode_gray(data: bytes) -> GrayImage:
    arr, maxval = read_pgm(data)
    return GrayImage(arr.astype(np.float64) / maxval)


def encode_color(img: ColorImage) -> bytes:
    return write_ppm(np.round(img.pixels * 255.0).astype(np.uint8))


def decode_color(data: bytes) -> ColorImage:
    arr = read_ppm(data)
    return ColorImage(arr.astype(np.float64) / 255.0)


def encode_mask(mask: BinaryMask) -> bytes:
    return write_pgm(mask.pixels.astype(np.uint8) * 255)


def decode_mask(data: bytes) -> BinaryMask:
    arr, _ = read_pgm(data)
    return BinaryMask(arr > 0)


def encode_depth(img: DepthImage) -> bytes:
    """Depth in millimeters as 16-bit PGM; 0 stays the invalid marker."""
    mm = np.round(img.pixels * 1000.0)
    if mm.max() > 65535:
        raise ValueError("depth exceeds the 65.535 m encodable range")
    return write_pgm(mm.astype(np.uint16), maxval=65535)


def decode_depth(data: bytes, max_range: float) -> DepthImage:
    arr, maxval = read_pgm(data)
    if maxval != 65535:
        raise PnmError("depth rasters must be 16-bit PGM", 0)
    meters = arr.astype(np.float64) / 1000.0
    return DepthImage(np.minimum(meters, max_range), max_range=max_range)
