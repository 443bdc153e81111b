"""Binary PPM/PGM codecs, frame-directory clips, and the VIPC clip dump format.

A video on disk is a directory of per-frame image files named by zero-padded
index (``000017.ppm``). RGB frames are binary PPM (P6), grayscale maps are
binary PGM (P5); maxval is fixed at 255. Header comments (``#``) are accepted
on decode and never emitted on encode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InvalidFrame,
    MissingFrame,
    ShapeMismatch,
    Truncated,
    UnsupportedFormat,
)

_WHITESPACE = b" \t\n\r\x0b\x0c"
_MAGIC_CHANNELS = {b"P6": 3, b"P5": 1}
_CHANNEL_MAGIC = {3: b"P6", 1: b"P5"}

VIPC_MAGIC = b"VIPC"
_VIPC_HEADER = struct.Struct("<4I")
FRAME_INDEX_DIGITS = 6


@dataclass(eq=False)
class Frame:
    """A single image as (height, width, channels) samples.

    Samples are uint8 straight from the codec, or float32 once mean
    subtraction has run. A 2-D array is accepted and treated as 1-channel.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise InvalidFrame(f"expected 2-D or 3-D samples, got {arr.ndim}-D")
        if arr.shape[2] not in (1, 3):
            raise InvalidFrame(f"unsupported channel count {arr.shape[2]}")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.data.dtype == other.data.dtype
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )


@dataclass(eq=False)
class Clip:
    """A fixed-shape frame stack: (length, height, width, channels)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 4:
            raise InvalidFrame(f"clip data must be 4-D, got {arr.ndim}-D")
        if arr.shape[0] < 1:
            raise InvalidFrame("clip must contain at least one frame")
        if arr.shape[3] not in (1, 3):
            raise InvalidFrame(f"unsupported channel count {arr.shape[3]}")
        self.data = arr

    @classmethod
    def from_frames(cls, frames: Sequence[Frame]) -> "Clip":
        if not frames:
            raise InvalidFrame("clip must contain at least one frame")
        shape = frames[0].data.shape
        for i, f in enumerate(frames):
            if f.data.shape != shape:
                raise ShapeMismatch(f"frame {i} has shape {f.data.shape}, expected {shape}")
        return cls(np.stack([f.data for f in frames]))

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    @property
    def frames(self) -> list[Frame]:
        return [Frame(self.data[i]) for i in range(self.length)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Clip):
            return NotImplemented
        return (
            self.data.dtype == other.data.dtype
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )


def _parse_header(buf: bytes) -> tuple[int, int, int, int]:
    """Parse a P5/P6 header; return (width, height, channels, payload offset)."""
    magic = bytes(buf[:2])
    if magic not in _MAGIC_CHANNELS:
        raise UnsupportedFormat(f"unsupported magic {magic!r}; want binary P5 or P6")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(buf):
            c = buf[pos]
            if c == 0x23:  # '#' comment runs to end of line
                while pos < len(buf) and buf[pos] != 0x0A:
                    pos += 1
            elif c in _WHITESPACE:
                pos += 1
            else:
                break
        start = pos
        while pos < len(buf) and buf[pos] not in _WHITESPACE and buf[pos] != 0x23:
            pos += 1
        if pos == start:
            raise Truncated("header ended before width/height/maxval")
        token = buf[start:pos]
        if not token.isdigit():
            raise UnsupportedFormat(f"non-numeric header field {token!r}")
        fields.append(int(token))
    if pos >= len(buf) or buf[pos] not in _WHITESPACE:
        raise Truncated("missing whitespace after maxval")
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormat(f"maxval {maxval} unsupported; must be 255")
    if width < 1 or height < 1:
        raise UnsupportedFormat(f"bad dimensions {width}x{height}")
    return width, height, _MAGIC_CHANNELS[magic], pos + 1


def decode_image(buf: bytes) -> Frame:
    """Decode binary PPM (P6) or PGM (P5) bytes into a uint8 Frame."""
    width, height, channels, offset = _parse_header(buf)
    n = width * height * channels
    payload = buf[offset : offset + n]
    if len(payload) < n:
        raise Truncated(f"payload holds {len(payload)} bytes, header implies {n}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Frame(arr.copy())


def encode_image(frame: Frame) -> bytes:
    """Encode a uint8 Frame as canonical P6/P5 bytes (no comments, maxval 255)."""
    if frame.channels not in _CHANNEL_MAGIC:
        raise InvalidFrame(f"unsupported channel count {frame.channels}")
    if frame.data.dtype != np.uint8:
        raise InvalidFrame(f"only uint8 frames are encodable, got {frame.data.dtype}")
    magic = _CHANNEL_MAGIC[frame.channels]
    header = b"%s\n%d %d\n255\n" % (magic, frame.width, frame.height)
    return header + frame.data.tobytes()


def frame_path(frame_dir: Path | str, index: int) -> Path:
    """Resolve the file holding a frame index (.ppm preferred over .pgm)."""
    frame_dir = Path(frame_dir)
    stem = f"{index:0{FRAME_INDEX_DIGITS}d}"
    for ext in (".ppm", ".pgm"):
        p = frame_dir / (stem + ext)
        if p.exists():
            return p
    raise MissingFrame(f"no frame {stem}.ppm/.pgm in {frame_dir}")


def read_clip(frame_dir: Path | str, indices: Iterable[int]) -> Clip:
    """Load the given frame indices from a frame directory into a Clip.

    Repeated indices yield repeated frames; content depends only on the
    indices, never on directory listing order.
    """
    frame_dir = Path(frame_dir)
    cache: dict[int, Frame] = {}
    frames: list[Frame] = []
    for idx in indices:
        idx = int(idx)
        if idx not in cache:
            if idx < 0:
                raise MissingFrame(f"negative frame index {idx}")
            cache[idx] = decode_image(frame_path(frame_dir, idx).read_bytes())
        frames.append(cache[idx])
    return Clip.from_frames(frames)


def encode_clip_dump(clip: Clip) -> bytes:
    """Serialize a clip: b"VIPC", u32le {length, height, width, channels}, raw samples.

    uint8 clips store one byte per sample; float32 clips (post mean
    subtraction) store little-endian float32. The reader tells them apart by
    payload size.
    """
    arr = clip.data
    if arr.dtype == np.uint8:
        payload = arr.tobytes()
    elif arr.dtype in (np.float32, np.float64):
        payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    else:
        raise InvalidFrame(f"cannot dump clips of dtype {arr.dtype}")
    header = _VIPC_HEADER.pack(clip.length, clip.height, clip.width, clip.channels)
    return VIPC_MAGIC + header + payload


def decode_clip_dump(buf: bytes) -> Clip:
    """Inverse of :func:`encode_clip_dump`; bit-exact for uint8 and float32 clips."""
    if buf[:4] != VIPC_MAGIC:
        raise UnsupportedFormat(f"bad dump magic {bytes(buf[:4])!r}")
    if len(buf) < 4 + _VIPC_HEADER.size:
        raise Truncated("dump shorter than its fixed header")
    length, height, width, channels = _VIPC_HEADER.unpack_from(buf, 4)
    n = length * height * width * channels
    payload = buf[4 + _VIPC_HEADER.size :]
    shape = (length, height, width, channels)
    if len(payload) == n:
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(shape)
    elif len(payload) == 4 * n:
        arr = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)
    else:
        raise Truncated(f"payload of {len(payload)} bytes matches neither uint8 ({n}) nor float32 ({4 * n})")
    return Clip(arr.copy())


def write_clip_dump(clip: Clip, path: Path | str) -> Path:
    path = Path(path)
    path.write_bytes(encode_clip_dump(clip))
    return path


def read_clip_dump(path: Path | str) -> Clip:
    return decode_clip_dump(Path(path).read_bytes())
