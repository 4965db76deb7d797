"""Bit-exact readers and writers for all on-disk formats.

Formats: PFM (float maps), Middlebury .flo (flow), PPM P6 (8-bit RGB),
PGM P5 with maxval 65535 (16-bit index masks), and the JSON dataset
manifest. Every writer/reader pair round-trips losslessly, including NaN
payloads in the float formats.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

MANIFEST_VERSION = "sceneflowgen-manifest-1"
FLO_MAGIC = 202021.25

__all__ = [
    "write_pfm", "read_pfm", "write_flo", "read_flo",
    "write_ppm", "read_ppm", "write_pgm16", "read_pgm16",
    "write_manifest", "read_manifest", "MANIFEST_VERSION",
]


# ---------------------------------------------------------------------------
# PFM

def write_pfm(data) -> bytes:
    """Serialize an H x W or H x W x 3 float32 map as PFM (little-endian).

    Rows are stored bottom-to-top per the format; internal rasters are
    top-to-bottom, so the writer flips.
    """
    a = np.asarray(data, dtype=np.float32)
    if a.ndim == 2:
        magic = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"PF"
    else:
        raise ParseError(f"PFM supports HxW or HxWx3 data, got shape {a.shape}")
    h, w = a.shape[0], a.shape[1]
    header = magic + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n"
    payload = np.ascontiguousarray(a[::-1]).astype("<f4").tobytes()
    return header + payload


def _read_pnm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(buf) and buf[pos:pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(buf) and not buf[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ParseError(f"unexpected end of header at byte {start}")
    return buf[start:pos], pos


def read_pfm(buf: bytes) -> np.ndarray:
    magic, pos = _read_pnm_token(buf, 0)
    if magic == b"Pf":
        channels = 1
    elif magic == b"PF":
        channels = 3
    else:
        raise ParseError(f"bad PFM magic {magic!r} at byte 0")
    wtok, pos = _read_pnm_token(buf, pos)
    htok, pos = _read_pnm_token(buf, pos)
    stok, pos = _read_pnm_token(buf, pos)
    try:
        w, h, scale = int(wtok), int(htok), float(stok)
    except ValueError as e:
        raise ParseError(f"bad PFM header near byte {pos}: {e}") from None
    if w <= 0 or h <= 0 or w * h > 2**28:
        raise ParseError(f"bad PFM dimensions {w}x{h}")
    pos += 1  # single whitespace byte after the scale line
    n = w * h * channels
    payload = buf[pos:pos + 4 * n]
    if len(payload) != 4 * n:
        raise ParseError(
            f"truncated PFM payload at byte {pos + len(payload)}: "
            f"need {4 * n} bytes, have {len(payload)}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    a = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return a.reshape(shape)[::-1].copy()


# ---------------------------------------------------------------------------
# .flo

def write_flo(flow) -> bytes:
    a = np.asarray(flow, dtype=np.float32)
    if a.ndim != 3 or a.shape[2] != 2:
        raise ParseError(f".flo needs HxWx2 data, got shape {a.shape}")
    h, w = a.shape[:2]
    header = struct.pack("<fii", FLO_MAGIC, w, h)
    return header + np.ascontiguousarray(a).astype("<f4").tobytes()


def read_flo(buf: bytes) -> np.ndarray:
    if len(buf) < 12:
        raise ParseError("truncated .flo header")
    magic, w, h = struct.unpack_from("<fii", buf, 0)
    if magic != FLO_MAGIC:
        raise ParseError(f"bad .flo magic {magic!r}, expected {FLO_MAGIC}")
    n = w * h * 2
    payload = buf[12:12 + 4 * n]
    if len(payload) != 4 * n:
        raise ParseError("truncated .flo payload")
    return np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(h, w, 2)


# ---------------------------------------------------------------------------
# PPM / PGM16

def write_ppm(rgb) -> bytes:
    a = np.asarray(rgb, dtype=np.uint8)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ParseError(f"PPM needs HxWx3 uint8, got shape {a.shape}")
    h, w = a.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(a).tobytes()


def read_ppm(buf: bytes) -> np.ndarray:
    magic, pos = _read_pnm_token(buf, 0)
    if magic != b"P6":
        raise ParseError(f"bad PPM magic {magic!r}")
    wtok, pos = _read_pnm_token(buf, pos)
    htok, pos = _read_pnm_token(buf, pos)
    mtok, pos = _read_pnm_token(buf, pos)
    w, h, maxval = int(wtok), int(htok), int(mtok)
    if maxval != 255:
        raise ParseError(f"unsupported PPM maxval {maxval}")
    pos += 1
    n = w * h * 3
    payload = buf[pos:pos + n]
    if len(payload) != n:
        raise ParseError(f"truncated PPM payload at byte {pos + len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


def write_pgm16(mask) -> bytes:
    """16-bit single-channel P5; samples are big-endian per the PGM spec."""
    a = np.asarray(mask)
    if a.ndim != 2:
        raise ParseError(f"PGM needs HxW data, got shape {a.shape}")
    if a.min() < 0 or a.max() > 65535:
        raise ParseError("PGM16 values must be in [0, 65535]")
    h, w = a.shape
    return f"P5\n{w} {h}\n65535\n".encode() + a.astype(">u2").tobytes()


def read_pgm16(buf: bytes) -> np.ndarray:
    magic, pos = _read_pnm_token(buf, 0)
    if magic != b"P5":
        raise ParseError(f"bad PGM magic {magic!r}")
    wtok, pos = _read_pnm_token(buf, pos)
    htok, pos = _read_pnm_token(buf, pos)
    mtok, pos = _read_pnm_token(buf, pos)
    w, h, maxval = int(wtok), int(htok), int(mtok)
    if maxval != 65535:
        raise ParseError(f"expected 16-bit PGM (maxval 65535), got {maxval}")
    pos += 1
    n = w * h * 2
    payload = buf[pos:pos + n]
    if len(payload) != n:
        raise ParseError(f"truncated PGM payload at byte {pos + len(payload)}")
    return np.frombuffer(payload, dtype=">u2").astype(np.uint16).reshape(h, w)


def write_pgm8(mask) -> bytes:
    """8-bit P5 used for binary masks (0/255)."""
    a = np.asarray(mask)
    if a.ndim != 2:
        raise ParseError(f"PGM needs HxW data, got shape {a.shape}")
    h, w = a.shape
    return f"P5\n{w} {h}\n255\n".encode() + a.astype(np.uint8).tobytes()


def read_pgm8(buf: bytes) -> np.ndarray:
    magic, pos = _read_pnm_token(buf, 0)
    if magic != b"P5":
        raise ParseError(f"bad PGM magic {magic!r}")
    wtok, pos = _read_pnm_token(buf, pos)
    htok, pos = _read_pnm_token(buf, pos)
    mtok, pos = _read_pnm_token(buf, pos)
    w, h, maxval = int(wtok), int(htok), int(mtok)
    if maxval != 255:
        raise ParseError(f"expected 8-bit PGM (maxval 255), got {maxval}")
    pos += 1
    n = w * h
    payload = buf[pos:pos + n]
    if len(payload) != n:
        raise ParseError("truncated PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


# ---------------------------------------------------------------------------
# Manifest

_MANIFEST_KEYS = {
    "version", "dataset", "seed", "params", "rig", "frames", "complete",
}
_FRAME_KEYS = {"time", "cameras", "files"}


def write_manifest(manifest: dict) -> str:
    """Serialize the dataset manifest deterministically (sorted keys)."""
    m = dict(manifest)
    m["version"] = MANIFEST_VERSION
    _validate_manifest(m)
    return json.dumps(m, sort_keys=True, indent=2) + "\n"


def read_manifest(text: str) -> dict:
    try:
        m = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"manifest is not valid JSON: {e}") from None
    if m.get("version") != MANIFEST_VERSION:
        raise ParseError(
            f"incompatible manifest version {m.get('version')!r}, "
            f"expected {MANIFEST_VERSION!r}"
        )
    _validate_manifest(m)
    return m


def _validate_manifest(m: dict):
    unknown = set(m) - _MANIFEST_KEYS
    if unknown:
        raise ParseError(f"unknown manifest key(s): {sorted(unknown)}")
    missing = _MANIFEST_KEYS - set(m)
    if missing:
        raise ParseError(f"manifest missing key(s): {sorted(missing)}")
    for i, fr in enumerate(m["frames"]):
        unknown = set(fr) - _FRAME_KEYS
        if unknown:
            raise ParseError(f"frame {i}: unknown key(s) {sorted(unknown)}")
        if "cameras" not in fr:
            raise ParseError(f"frame {i}: missing camera block")
        for path in _iter_frame_paths(fr):
            if Path(path).is_absolute():
                raise ParseError(f"frame {i}: absolute path {path!r} in manifest")


def _iter_frame_paths(frame_entry):
    for view_files in frame_entry.get("files", {}).values():
        yield from view_files.values()
