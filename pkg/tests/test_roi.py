import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import box, make_segment
from lipkit.annotations import BBox, FrameAnnotation, SpeakerSegment
from lipkit.roi import (
    CropPlan,
    Discarded,
    DiscardReason,
    NoFaceDetectionsError,
    NoLipDetectionsError,
    Planned,
    crop_frame,
    crop_size,
    lip_centers,
    plan_crops,
)


def segment_with_faces(face_boxes, total=None, lips=None):
    total = total or len(face_boxes)
    frames = []
    for i, fb in enumerate(face_boxes):
        lip = lips[i] if lips else None
        if fb is not None or lip is not None:
            frames.append(FrameAnnotation(i, face=fb, lip=lip))
    return SpeakerSegment("seg", "spk", total, frames=tuple(frames))


class TestCropSize:
    def test_single_face(self):
        seg = segment_with_faces([box(0, 0, 80, 80)])
        assert crop_size(seg, 1.0) == pytest.approx(20.0)

    def test_mean_over_two_faces(self):
        seg = segment_with_faces([box(0, 0, 80, 80), box(0, 0, 160, 160)])
        assert crop_size(seg, 1.0) == pytest.approx(30.0)

    def test_scale_multiplies(self):
        seg = segment_with_faces([box(0, 0, 80, 80), box(0, 0, 160, 160)])
        assert crop_size(seg, 1.5) == pytest.approx(45.0)

    def test_no_faces_raises(self):
        seg = make_segment(3, lip_at=[0])
        with pytest.raises(NoFaceDetectionsError):
            crop_size(seg, 1.0)

    def test_nonpositive_scale_rejected(self):
        seg = segment_with_faces([box(0, 0, 80, 80)])
        with pytest.raises(ValueError):
            crop_size(seg, 0.0)

    def test_joint_only_restricts_mean(self):
        # Face-only frame is 80x80, joint frame is 160x160.
        frames = (
            FrameAnnotation(0, face=box(0, 0, 80, 80)),
            FrameAnnotation(1, face=box(0, 0, 160, 160), lip=box(0, 0, 4, 4)),
        )
        seg = SpeakerSegment("seg", "spk", 2, frames=frames)
        assert crop_size(seg, 1.0) == pytest.approx(30.0)
        assert crop_size(seg, 1.0, joint_only=True) == pytest.approx(40.0)

    def test_joint_only_with_no_joint_frames_raises(self):
        seg = make_segment(2, face_at=[0], lip_at=[1])
        with pytest.raises(NoFaceDetectionsError):
            crop_size(seg, 1.0, joint_only=True)


face_boxes = st.tuples(
    st.integers(0, 60), st.integers(0, 60), st.integers(8, 120), st.integers(8, 120)
).map(lambda t: BBox(t[0], t[1], t[0] + t[2], t[1] + t[3]))


@st.composite
def face_segments(draw):
    n = draw(st.integers(1, 20))
    boxes_ = draw(st.lists(st.one_of(st.none(), face_boxes), min_size=n, max_size=n))
    if all(b is None for b in boxes_):
        boxes_[draw(st.integers(0, n - 1))] = draw(face_boxes)
    return segment_with_faces(boxes_)


@given(face_segments(), st.floats(0.1, 4.0), st.floats(0.1, 4.0))
def test_scale_linearity(seg, s, k):
    assert crop_size(seg, k * s) == pytest.approx(k * crop_size(seg, s), rel=1e-9)


@given(face_segments(), st.randoms(use_true_random=False))
def test_crop_size_invariant_to_frame_order_and_empty_frames(seg, rng):
    base = crop_size(seg, 1.0)
    shuffled = list(seg.frames)
    rng.shuffle(shuffled)
    shuffled.sort(key=lambda fr: fr.frame_index)  # segment invariant requires order
    grown = SpeakerSegment(
        seg.segment_id, seg.speaker_id, seg.total_frames + 5, frames=tuple(shuffled)
    )
    assert crop_size(grown, 1.0) == pytest.approx(base)


class TestLipCenters:
    def test_midpoint(self):
        seg = make_segment(1, lip_at=[0], lip_box=box(10, 20, 30, 40))
        centers, filled = lip_centers(seg)
        assert centers == [(20.0, 30.0)]
        assert filled == [False]

    def test_half_integral_midpoint(self):
        seg = make_segment(1, lip_at=[0], lip_box=box(0, 0, 5, 7))
        centers, _ = lip_centers(seg)
        assert centers == [(2.5, 3.5)]

    def test_nearest_detected_fills_gaps(self):
        a, b = box(0, 0, 10, 10), box(90, 90, 110, 110)
        frames = (FrameAnnotation(0, lip=a), FrameAnnotation(10, lip=b))
        seg = SpeakerSegment("seg", "spk", 11, frames=frames)
        centers, filled = lip_centers(seg)
        assert centers[3] == a.center
        assert centers[8] == b.center
        assert filled == [False] + [True] * 9 + [False]

    def test_equidistant_tie_prefers_earlier(self):
        a, b = box(0, 0, 10, 10), box(90, 90, 110, 110)
        frames = (FrameAnnotation(0, lip=a), FrameAnnotation(4, lip=b))
        seg = SpeakerSegment("seg", "spk", 5, frames=frames)
        centers, _ = lip_centers(seg)
        assert centers[2] == a.center

    def test_no_lips_raises(self):
        seg = make_segment(3, face_at=[0])
        with pytest.raises(NoLipDetectionsError):
            lip_centers(seg)


@st.composite
def lip_segments(draw):
    n = draw(st.integers(1, 40))
    detected = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n).map(set))
    frames = tuple(
        FrameAnnotation(i, lip=BBox(2 * i, 0, 2 * i + 2 + i, 4 + i)) for i in sorted(detected)
    )
    return SpeakerSegment("seg", "spk", n, frames=frames)


@given(lip_segments())
def test_gap_fill_matches_brute_force_nearest(seg):
    detected = {fr.frame_index: fr.lip.center for fr in seg.frames}
    centers, filled = lip_centers(seg)
    assert len(centers) == seg.total_frames
    for i in range(seg.total_frames):
        nearest = min(detected, key=lambda j: (abs(i - j), j))
        assert centers[i] == detected[nearest]
        assert filled[i] == (i not in detected)


class TestPlanCrops:
    def test_face_rate_exactly_half_discarded(self):
        seg = make_segment(10, face_at=range(5), lip_at=range(10))
        result = plan_crops(seg, 1.0)
        assert result == Discarded(DiscardReason.face_rate_low)

    def test_lip_rate_exactly_half_discarded(self):
        seg = make_segment(10, face_at=range(10), lip_at=range(5))
        result = plan_crops(seg, 1.0)
        assert result == Discarded(DiscardReason.lip_rate_low)

    def test_face_checked_before_lip(self):
        seg = make_segment(10, face_at=range(3), lip_at=range(2))
        assert plan_crops(seg, 1.0) == Discarded(DiscardReason.face_rate_low)

    def test_above_half_planned(self):
        seg = make_segment(10, face_at=range(6), lip_at=range(4, 10))
        result = plan_crops(seg, 1.0)
        assert isinstance(result, Planned)
        assert len(result.plan.centers) == 10

    def test_minimal_segment(self):
        seg = make_segment(1, face_at=[0], lip_at=[0])
        result = plan_crops(seg, 1.0)
        assert isinstance(result, Planned)
        assert len(result.plan.centers) == 1

    def test_plan_json_round_trip(self):
        seg = make_segment(4, face_at=range(4), lip_at=range(3))
        plan = plan_crops(seg, 1.25).plan
        assert CropPlan.from_json(plan.to_json()) == plan


@given(
    st.integers(1, 60),
    st.integers(0, 60),
    st.integers(0, 60),
    st.floats(0.2, 2.0),
)
def test_planned_iff_both_rates_above_half(total, faces, lips, scale):
    faces = min(faces, total)
    lips = min(lips, total)
    seg = make_segment(total, face_at=range(faces), lip_at=range(lips))
    result = plan_crops(seg, scale)
    should_plan = min(faces / total, lips / total) > 0.5
    assert isinstance(result, Planned) == should_plan


def gradient_image(h=224, w=224):
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return ((2 * xx + 3 * yy) % 256).astype(np.uint8)


def make_plan(side, center, output_size=112, total=1):
    return CropPlan(
        segment_id="seg",
        scale=1.0,
        side=side,
        centers=tuple([center] * total),
        filled=tuple([False] * total),
        output_size=output_size,
    )


class TestCropFrame:
    def test_identity_scale_center_crop(self):
        image = gradient_image()
        out = crop_frame(image, make_plan(112.0, (112.0, 112.0)), 0)
        assert np.array_equal(out, image[56:168, 56:168])

    def test_corner_center_pads_three_quadrants(self):
        image = np.full((224, 224), 200, dtype=np.uint8)
        out = crop_frame(image, make_plan(20.0, (0.0, 0.0), output_size=20), 0)
        assert out.shape == (20, 20)
        assert np.all(out[:10, :] == 0)
        assert np.all(out[:, :10] == 0)
        assert np.all(out[10:, 10:] == 200)

    def test_full_image_downsample_matches_block_mean(self):
        image = gradient_image()
        out = crop_frame(image, make_plan(224.0, (112.0, 112.0)), 0)
        blocks = image.reshape(112, 2, 112, 2).astype(np.float64).mean(axis=(1, 3))
        expected = np.clip(np.rint(blocks), 0, 255).astype(np.uint8)
        assert np.array_equal(out, expected)

    def test_output_size_no_matter_the_center(self):
        image = gradient_image(64, 48)
        for center in [(-50.0, -50.0), (500.0, 2.0), (24.0, 32.0)]:
            out = crop_frame(image, make_plan(31.4, center), 0)
            assert out.shape == (112, 112)

    def test_color_images_keep_channels(self):
        image = np.dstack([gradient_image(64, 64)] * 3)
        out = crop_frame(image, make_plan(30.0, (32.0, 32.0)), 0)
        assert out.shape == (112, 112, 3)

    def test_frame_index_out_of_range(self):
        image = gradient_image(32, 32)
        with pytest.raises(IndexError):
            crop_frame(image, make_plan(10.0, (16.0, 16.0)), 1)

    def test_center_outside_image_gives_all_zeros(self):
        image = gradient_image(32, 32)
        out = crop_frame(image, make_plan(8.0, (1000.0, 1000.0)), 0)
        assert np.all(out == 0)
