"""Portable bitmap (PBM) input/output for binary images.

Supports both the ASCII "P1" and the packed binary "P4" variants.  A PBM `1`
bit means black, matching the Image convention.  Only square images are
accepted on read because every consumer here requires n x n input.
"""

from __future__ import annotations

import io

import numpy as np

from .image import Image


class PbmError(ValueError):
    """Raised for malformed or unsupported PBM data."""


def _tokens(data: bytes):
    """Yield whitespace-delimited header tokens, skipping # comments."""
    pos = 0
    size = len(data)
    while pos < size:
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            end = data.find(b"\n", pos)
            pos = size if end < 0 else end + 1
        else:
            end = pos
            while end < size and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
                end += 1
            yield pos, data[pos:end]
            pos = end


def _parse_header(data: bytes):
    """Return (magic, width, height, offset of first payload byte)."""
    it = _tokens(data)
    try:
        _, magic = next(it)
        if magic not in (b"P1", b"P4"):
            raise PbmError(f"unsupported PBM magic {magic!r}")
        _, wtok = next(it)
        hpos, htok = next(it)
    except StopIteration:
        raise PbmError("truncated PBM header") from None
    try:
        width = int(wtok)
        height = int(htok)
    except ValueError:
        raise PbmError("non-numeric PBM dimensions") from None
    if width <= 0 or height <= 0:
        raise PbmError(f"invalid PBM dimensions {width}x{height}")
    # Payload starts after the single whitespace byte that ends the header.
    header_end = hpos + len(htok)
    if header_end >= len(data) or not data[header_end : header_end + 1].isspace():
        raise PbmError("PBM header not terminated by whitespace")
    return magic, width, height, header_end + 1


def loads(data: bytes) -> Image:
    """Parse PBM bytes into an Image."""
    magic, width, height, offset = _parse_header(data)
    if width != height:
        raise PbmError(f"image must be square, got {width}x{height}")
    if magic == b"P1":
        digits = bytes(
            tok for tok in data[offset:] if tok in (0x30, 0x31)
        )
        stripped = data[offset:]
        # Reject stray non-digit, non-whitespace, non-comment content.
        _validate_p1_body(stripped)
        if len(digits) != width * height:
            raise PbmError(
                f"expected {width * height} bits, found {len(digits)}"
            )
        bits = np.frombuffer(digits, dtype=np.uint8) - 0x30
        return Image(bits.reshape(height, width).astype(bool))
    # P4: each row is padded to a whole number of bytes.
    row_bytes = (width + 7) // 8
    need = row_bytes * height
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise PbmError(f"expected {need} payload bytes, found {len(payload)}")
    rows = np.frombuffer(payload, dtype=np.uint8).reshape(height, row_bytes)
    bits = np.unpackbits(rows, axis=1)[:, :width]
    return Image(bits.astype(bool))


def _validate_p1_body(body: bytes):
    pos = 0
    size = len(body)
    while pos < size:
        c = body[pos : pos + 1]
        if c in (b"0", b"1") or c.isspace():
            pos += 1
        elif c == b"#":
            end = body.find(b"\n", pos)
            pos = size if end < 0 else end + 1
        else:
            raise PbmError(f"unexpected byte {c!r} in P1 body")


def dumps(img: Image, binary: bool = True) -> bytes:
    """Serialize an Image as PBM bytes (P4 when binary, else P1)."""
    n = img.side
    if binary:
        packed = np.packbits(img.bits.astype(np.uint8), axis=1)
        return b"P4\n%d %d\n" % (n, n) + packed.tobytes()
    out = io.BytesIO()
    out.write(b"P1\n%d %d\n" % (n, n))
    digits = np.where(img.bits, b"1"[0], b"0"[0]).astype(np.uint8)
    for y in range(n):
        row = digits[y].tobytes()
        # Keep ASCII lines under the traditional 70-character limit.
        for start in range(0, n, 64):
            out.write(row[start : start + 64])
            out.write(b"\n")
    return out.getvalue()


def load(path) -> Image:
    with open(path, "rb") as fh:
        return loads(fh.read())


def save(path, img: Image, binary: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(img, binary=binary))
