import math
import random

import pytest

from facemetrics.anchors import (
    DEFAULT_ANCHOR_SPEC,
    AnchorSpec,
    BoxDelta,
    anchor_grid,
    base_anchors,
    decode,
    encode,
    resize_scale,
    top_n,
)
from facemetrics.geometry import Rect


def test_spec_validation():
    with pytest.raises(ValueError):
        AnchorSpec(scales=(), ratios=(1.0,), stride=16.0)
    with pytest.raises(ValueError):
        AnchorSpec(scales=(128.0,), ratios=(), stride=16.0)
    with pytest.raises(ValueError):
        AnchorSpec(scales=(-128.0,), ratios=(1.0,), stride=16.0)
    with pytest.raises(ValueError):
        AnchorSpec(scales=(128.0,), ratios=(0.0,), stride=16.0)
    with pytest.raises(ValueError):
        AnchorSpec(scales=(128.0,), ratios=(1.0,), stride=0.0)


def test_default_spec():
    assert DEFAULT_ANCHOR_SPEC.scales == (128.0, 256.0, 512.0)
    assert DEFAULT_ANCHOR_SPEC.ratios == (1.0, 2.0, 0.5)
    assert DEFAULT_ANCHOR_SPEC.stride == 16.0
    assert DEFAULT_ANCHOR_SPEC.anchors_per_location == 9


def test_base_anchors_shapes():
    anchors = base_anchors(DEFAULT_ANCHOR_SPEC)
    assert len(anchors) == 9
    for anchor in anchors:
        # Centered at the origin.
        assert anchor.x_min == -anchor.x_max
        assert anchor.y_min == -anchor.y_max
    # Scale-major, ratio-minor ordering: the square 128 anchor comes first.
    assert anchors[0] == Rect(-64.0, -64.0, 64.0, 64.0)
    # ratio 2 means twice as tall as wide.
    tall = anchors[1]
    assert tall.height / tall.width == pytest.approx(2.0, rel=1e-12)
    wide = anchors[2]
    assert wide.height / wide.width == pytest.approx(0.5, rel=1e-12)


def test_base_anchors_preserve_area():
    for anchor, (scale, _) in zip(
        base_anchors(DEFAULT_ANCHOR_SPEC),
        [(s, r) for s in (128.0, 256.0, 512.0) for r in (1.0, 2.0, 0.5)],
    ):
        assert anchor.width * anchor.height == pytest.approx(scale * scale, rel=1e-12)


def test_anchor_grid_size_and_order():
    spec = DEFAULT_ANCHOR_SPEC
    grid = anchor_grid(4, 3, spec)
    assert len(grid) == 4 * 3 * 9
    # First block sits at the first cell center (8, 8).
    assert grid[0].center == (8.0, 8.0)
    # Innermost anchors, then i along the row, then j across rows.
    k = spec.anchors_per_location
    assert grid[k].center == (24.0, 8.0)
    assert grid[4 * k].center == (8.0, 24.0)
    assert grid[4 * k + 2 * k + 1].center == (40.0, 24.0)


def test_anchor_grid_rejects_empty():
    with pytest.raises(ValueError):
        anchor_grid(0, 3, DEFAULT_ANCHOR_SPEC)
    with pytest.raises(ValueError):
        anchor_grid(3, 0, DEFAULT_ANCHOR_SPEC)


def test_encode_identity_is_zero():
    anchor = Rect(10.0, 10.0, 30.0, 50.0)
    delta = encode(anchor, anchor)
    assert delta == BoxDelta(0.0, 0.0, 0.0, 0.0)


def test_encode_known_offsets():
    anchor = Rect(0.0, 0.0, 10.0, 10.0)
    shifted = Rect(10.0, 0.0, 20.0, 10.0)  # one width to the right
    delta = encode(shifted, anchor)
    assert delta.tx == 1.0
    assert delta.ty == 0.0
    assert delta.tw == 0.0
    doubled = Rect(-5.0, -5.0, 15.0, 15.0)  # same center, twice the size
    delta = encode(doubled, anchor)
    assert delta.tx == 0.0
    assert delta.tw == pytest.approx(math.log(2.0), rel=1e-15)
    assert delta.th == pytest.approx(math.log(2.0), rel=1e-15)


def test_encode_rejects_degenerate_boxes():
    anchor = Rect(0.0, 0.0, 10.0, 10.0)
    flat = Rect(0.0, 5.0, 10.0, 5.0)
    with pytest.raises(ValueError):
        encode(flat, anchor)
    with pytest.raises(ValueError):
        encode(anchor, flat)
    with pytest.raises(ValueError):
        decode(BoxDelta(0.0, 0.0, 0.0, 0.0), flat)


def test_decode_inverts_encode():
    rng = random.Random(11)
    for _ in range(300):
        anchor = Rect.from_xywh(
            rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(1, 60), rng.uniform(1, 60)
        )
        proposal = Rect.from_xywh(
            rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(1, 60), rng.uniform(1, 60)
        )
        restored = decode(encode(proposal, anchor), anchor)
        assert restored.x_min == pytest.approx(proposal.x_min, abs=1e-9)
        assert restored.y_min == pytest.approx(proposal.y_min, abs=1e-9)
        assert restored.x_max == pytest.approx(proposal.x_max, abs=1e-9)
        assert restored.y_max == pytest.approx(proposal.y_max, abs=1e-9)


def test_top_n_selection():
    boxes = [Rect(0, 0, 1, 1), Rect(1, 0, 2, 1), Rect(2, 0, 3, 1), Rect(3, 0, 4, 1)]
    scored = list(zip(boxes, [0.3, 0.9, 0.9, 0.1]))
    assert top_n(scored, 0) == []
    assert top_n(scored, 2) == [(boxes[1], 0.9), (boxes[2], 0.9)]
    assert top_n(scored, 10) == [
        (boxes[1], 0.9),
        (boxes[2], 0.9),
        (boxes[0], 0.3),
        (boxes[3], 0.1),
    ]
    with pytest.raises(ValueError):
        top_n(scored, -1)


def test_resize_scale_train_mode():
    plan = resize_scale(2048.0, 1024.0, "train")
    assert plan.scale == 0.5
    assert plan.resized_w == 1024.0
    assert plan.resized_h == 512.0
    # Small images are scaled up, not capped.
    assert resize_scale(256.0, 128.0, "train").scale == 4.0


def test_resize_scale_test_mode():
    plan = resize_scale(350.0, 450.0, "test")
    assert plan.scale == pytest.approx(600.0 / 350.0, rel=1e-15)
    assert plan.resized_w == pytest.approx(600.0, rel=1e-12)
    # The long side caps the scale at 1024.
    assert resize_scale(200.0, 2000.0, "test").scale == pytest.approx(0.512, rel=1e-15)
    # Upscaling is allowed.
    assert resize_scale(100.0, 100.0, "test").scale == 6.0


def test_resize_scale_validation():
    with pytest.raises(ValueError):
        resize_scale(0.0, 100.0, "train")
    with pytest.raises(ValueError):
        resize_scale(100.0, 100.0, "validate")
