"""Deterministic clip planning: (video length, parameters) -> frame-index lists.

Semantics, pinned here because they drive everything downstream:

* contiguous mode, ``num_clips == -1``: clip i starts at
  ``offset + i * (clip_length + clip_stride)``; every clip whose last index
  fits inside the video is emitted, partial tails are dropped.
* contiguous mode, ``num_clips == n > 0``: exactly n clips, start positions
  evenly spaced over the feasible start range ``[offset, length - clip_length]``
  (nearest-integer rounding, ties up; a single position means the range start).
* ``num_clips == 0`` or ``clip_length == -1``: one whole-video clip
  ``[0 .. length)``.
* videos too short for one full clip yield a clip padded by repeating the
  final valid index.
* uniform mode: one clip of ``clip_length`` indices evenly spaced over
  ``[offset, length - 1]``, rounded to nearest.
* ``random_offset``: the configured offset is replaced by a seeded uniform
  draw over the feasible offsets; a fixed seed gives a fixed plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleConfig

CONTIGUOUS = "contiguous"
UNIFORM = "uniform"


@dataclass
class ClipConfig:
    """Clip-extraction parameters.

    clip_length: frames per clip, or -1 for the whole video.
    num_clips: -1 = all that fit, 0 = single whole-video clip, n > 0 = exactly n.
    clip_stride: frames between the end of one clip and the start of the next;
        may be negative down to -(clip_length - 1) to overlap clips.
    clip_offset: first usable frame index.
    random_offset: draw the offset uniformly from the feasible range instead.
    mode: "contiguous" or "uniform".
    """

    clip_length: int = 16
    num_clips: int = -1
    clip_stride: int = 0
    clip_offset: int = 0
    random_offset: bool = False
    mode: str = CONTIGUOUS

    def __post_init__(self) -> None:
        if self.clip_length != -1 and self.clip_length < 1:
            raise InfeasibleConfig(f"clip_length must be >= 1 or -1, got {self.clip_length}")
        if self.clip_length > 0 and self.clip_stride <= -self.clip_length:
            raise InfeasibleConfig(
                f"clip_stride {self.clip_stride} must be > -clip_length ({-self.clip_length})"
            )
        if self.num_clips < -1:
            raise InfeasibleConfig(f"num_clips must be >= -1, got {self.num_clips}")
        if self.clip_offset < 0:
            raise InfeasibleConfig(f"clip_offset must be >= 0, got {self.clip_offset}")
        if self.mode not in (CONTIGUOUS, UNIFORM):
            raise InfeasibleConfig(f"mode must be contiguous or uniform, got {self.mode!r}")


@dataclass
class ClipPlan:
    """Frame-index lists, one per clip; all clips share one length."""

    clips: list[list[int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clips)

    def __iter__(self):
        return iter(self.clips)

    def __getitem__(self, i: int) -> list[int]:
        return self.clips[i]

    @property
    def clip_length(self) -> int:
        return len(self.clips[0]) if self.clips else 0


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def plan_clips(video_length: int, cfg: ClipConfig, seed: int = 0) -> ClipPlan:
    """Compute the clip plan for one video. Pure given (video_length, cfg, seed)."""
    if video_length < 1:
        raise InfeasibleConfig(f"video_length must be >= 1, got {video_length}")
    if not cfg.random_offset and cfg.clip_offset >= video_length:
        raise InfeasibleConfig(
            f"clip_offset {cfg.clip_offset} is outside the video (length {video_length})"
        )

    if cfg.clip_length == -1 or cfg.num_clips == 0:
        return ClipPlan([list(range(video_length))])

    length = cfg.clip_length
    if cfg.mode == UNIFORM:
        if cfg.num_clips > 1:
            raise InfeasibleConfig("uniform mode emits a single clip; num_clips must be <= 1")
        offset = _effective_offset(cfg, max_offset=video_length - 1, seed=seed)
        if length == 1:
            return ClipPlan([[offset]])
        span = (video_length - 1) - offset
        indices = [offset + _round_half_up(j * span / (length - 1)) for j in range(length)]
        return ClipPlan([indices])

    max_start = video_length - length
    offset = _effective_offset(cfg, max_offset=max(max_start, 0), seed=seed)

    if max_start < offset:
        # Too short for a full clip after the offset: repeat the last valid index.
        tail = list(range(offset, video_length))
        clip = tail + [video_length - 1] * (length - len(tail))
        count = cfg.num_clips if cfg.num_clips > 0 else 1
        return ClipPlan([list(clip) for _ in range(count)])

    if cfg.num_clips == -1:
        step = length + cfg.clip_stride
        starts = list(range(offset, max_start + 1, step))
    elif cfg.num_clips == 1:
        starts = [offset]
    else:
        span = max_start - offset
        starts = [offset + _round_half_up(j * span / (cfg.num_clips - 1)) for j in range(cfg.num_clips)]
    return ClipPlan([list(range(s, s + length)) for s in starts])


def _effective_offset(cfg: ClipConfig, max_offset: int, seed: int) -> int:
    if not cfg.random_offset:
        return cfg.clip_offset
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return int(rng.integers(0, max_offset + 1))
