import pytest

from vippipe.clip_sampler import ClipConfig, plan_clips
from vippipe.errors import InfeasibleConfig

from clip_oracle import INFEASIBLE, oracle_plan


def plan(video_length, seed=0, **kwargs):
    return [list(c) for c in plan_clips(video_length, ClipConfig(**kwargs), seed=seed)]


def test_sequential_clips_drop_tail():
    # 40 frames, 16-frame clips, back to back: two clips, 8-frame tail dropped
    clips = plan(40, clip_length=16, clip_stride=0, clip_offset=0, num_clips=-1)
    assert clips == [list(range(0, 16)), list(range(16, 32))]


def test_whole_video_clip():
    assert plan(5, clip_length=-1) == [[0, 1, 2, 3, 4]]
    assert plan(5, clip_length=3, num_clips=0) == [[0, 1, 2, 3, 4]]


def test_short_video_pads_with_last_index():
    assert plan(10, clip_length=16) == [list(range(10)) + [9] * 6]


def test_uniform_even_spacing():
    assert plan(13, clip_length=4, mode="uniform", num_clips=1) == [[0, 4, 8, 12]]


def test_uniform_rounds_to_nearest():
    # span 9 over 3 gaps: exact thirds round to nearest
    assert plan(10, clip_length=4, mode="uniform", num_clips=1) == [[0, 3, 6, 9]]
    assert plan(6, clip_length=4, mode="uniform", num_clips=1) == [[0, 2, 3, 5]]


def test_negative_stride_overlaps():
    clips = plan(10, clip_length=4, clip_stride=-2, num_clips=-1)
    assert clips == [[0, 1, 2, 3], [2, 3, 4, 5], [4, 5, 6, 7], [6, 7, 8, 9]]


def test_requested_count_evenly_spaced():
    clips = plan(20, clip_length=4, num_clips=3)
    assert [c[0] for c in clips] == [0, 8, 16]
    clips = plan(20, clip_length=4, num_clips=1, clip_offset=2)
    assert clips == [[2, 3, 4, 5]]


def test_offset_past_video_is_infeasible():
    with pytest.raises(InfeasibleConfig):
        plan(5, clip_length=2, clip_offset=5)


def test_uniform_multi_clip_is_infeasible():
    with pytest.raises(InfeasibleConfig):
        plan(10, clip_length=4, mode="uniform", num_clips=2)


def test_bad_config_values():
    with pytest.raises(InfeasibleConfig):
        ClipConfig(clip_length=0)
    with pytest.raises(InfeasibleConfig):
        ClipConfig(clip_length=4, clip_stride=-4)
    with pytest.raises(InfeasibleConfig):
        ClipConfig(num_clips=-2)
    with pytest.raises(InfeasibleConfig):
        ClipConfig(clip_offset=-1)
    with pytest.raises(InfeasibleConfig):
        ClipConfig(mode="stochastic")


def test_determinism_and_seed_independence_without_random_offset():
    cfg = ClipConfig(clip_length=4, num_clips=2)
    a = plan_clips(30, cfg, seed=1)
    b = plan_clips(30, cfg, seed=999)
    assert [list(c) for c in a] == [list(c) for c in b]


def test_random_offset_seeded():
    cfg = ClipConfig(clip_length=4, num_clips=1, random_offset=True)
    a = [list(c) for c in plan_clips(30, cfg, seed=5)]
    b = [list(c) for c in plan_clips(30, cfg, seed=5)]
    c = [list(c) for c in plan_clips(30, cfg, seed=6)]
    assert a == b
    starts = {plan_clips(30, cfg, seed=s)[0][0] for s in range(40)}
    assert len(starts) > 3  # the draw really moves
    assert all(0 <= s <= 26 for s in starts)
    assert c[0][0] <= 26


def test_random_offset_ignores_configured_offset():
    cfg = ClipConfig(clip_length=4, num_clips=1, random_offset=True, clip_offset=10**6)
    clips = plan_clips(8, cfg, seed=3)
    assert len(clips) == 1 and len(clips[0]) == 4


def test_all_clips_share_length_property():
    for video_length in range(1, 40, 3):
        for clip_length in (1, 3, 7):
            clips = plan(video_length, clip_length=clip_length, num_clips=-1)
            assert {len(c) for c in clips} == {clip_length}


def test_monotone_nondecreasing_indices():
    for video_length in (3, 9, 17):
        for kwargs in (
            dict(clip_length=5, num_clips=-1),
            dict(clip_length=5, num_clips=2),
            dict(clip_length=5, mode="uniform", num_clips=1),
            dict(clip_length=25, num_clips=-1),
        ):
            for clip in plan(video_length, **kwargs):
                assert all(a <= b for a, b in zip(clip, clip[1:]))
                assert all(i >= 0 for i in clip)


def sweep_agreement(max_video=32):
    """Planner vs oracle over a parameter grid; returns mismatch descriptions."""
    mismatches = []
    for video_length in range(1, max_video + 1):
        for clip_length in (-1, 1, 2, 3, 5, 8):
            for stride in range(-3, 9):
                for num_clips in range(-1, 5):
                    for mode in ("contiguous", "uniform"):
                        expected = oracle_plan(video_length, clip_length, num_clips, stride, 0, mode)
                        try:
                            got = plan(
                                video_length,
                                clip_length=clip_length,
                                num_clips=num_clips,
                                clip_stride=stride,
                                mode=mode,
                            )
                        except InfeasibleConfig:
                            got = INFEASIBLE
                        if got != expected:
                            mismatches.append(
                                (video_length, clip_length, num_clips, stride, mode, expected, got)
                            )
    return mismatches


def test_oracle_agreement_quick():
    assert sweep_agreement(max_video=32) == []


def test_oracle_agreement_with_offsets():
    mismatches = []
    for video_length in (5, 11, 20):
        for offset in (0, 1, 3, 7):
            for clip_length in (-1, 2, 4):
                for num_clips in (-1, 0, 1, 3):
                    for mode in ("contiguous", "uniform"):
                        expected = oracle_plan(video_length, clip_length, num_clips, 1, offset, mode)
                        try:
                            got = plan(
                                video_length,
                                clip_length=clip_length,
                                num_clips=num_clips,
                                clip_stride=1,
                                clip_offset=offset,
                                mode=mode,
                            )
                        except InfeasibleConfig:
                            got = INFEASIBLE
                        if got != expected:
                            mismatches.append((video_length, offset, clip_length, num_clips, mode))
    assert mismatches == []
