import numpy as np
import pytest

import seedscope as ss
from seedscope.errors import EmptyMaskError, ValidationError
from seedscope.inpaint import rasterize_boxes

from conftest import build_inpaint_corpus


def half_mask(h=10, w=10):
    mask = np.zeros((h, w))
    mask[: h // 2, :] = 1.0
    return mask


def test_no_boxes_ratio_zero():
    assert ss.text_artifact_ratio([], half_mask()) == 0.0


def test_box_covering_mask_ratio_one():
    box = ss.OcrBox(0.0, 0.0, 1.0, 0.5, "word", 0.9)
    assert ss.text_artifact_ratio([box], half_mask(), 0.5) == 1.0


def test_hand_enumerated_overlap():
    # mask rows 0-4 (50 px), box rows 3-6 all cols (40 px, 20 inside mask)
    box = ss.OcrBox(0.0, 0.3, 1.0, 0.7, "t", 0.9)
    assert ss.text_artifact_ratio([box], half_mask(), 0.5) == pytest.approx(0.4)


def test_low_confidence_boxes_ignored():
    box = ss.OcrBox(0.0, 0.0, 1.0, 1.0, "t", 0.4)
    assert ss.text_artifact_ratio([box], half_mask(), 0.5) == 0.0


def test_empty_mask_error():
    with pytest.raises(EmptyMaskError):
        ss.text_artifact_ratio([], np.zeros((4, 4)))


def test_box_validation():
    with pytest.raises(ValidationError):
        ss.OcrBox(0.5, 0.0, 0.5, 1.0)  # x0 == x1
    with pytest.raises(ValidationError):
        ss.OcrBox(0.0, 0.0, 1.1, 1.0)
    with pytest.raises(ValidationError):
        ss.OcrBox(0.0, 0.0, 1.0, 1.0, confidence=1.5)


def test_pixel_center_rule():
    # box [0, 0.25) covers pixel centers 0.125 only on a 4-wide grid
    cover = rasterize_boxes([ss.OcrBox(0.0, 0.0, 0.25, 1.0)], (1, 4))
    assert cover.tolist() == [[True, False, False, False]]


def random_boxes(rngen, count):
    boxes = []
    for _ in range(count):
        x0, x1 = np.sort(rngen.uniform(0.0, 1.0, 2))
        y0, y1 = np.sort(rngen.uniform(0.0, 1.0, 2))
        if x1 - x0 < 1e-3 or y1 - y0 < 1e-3:
            continue
        boxes.append(ss.OcrBox(float(x0), float(y0), float(x1), float(y1), "t",
                               float(rngen.uniform(0.0, 1.0))))
    return boxes


def test_monotone_under_box_addition():
    rngen = np.random.default_rng(0)
    mask = (rngen.uniform(size=(12, 12)) > 0.4).astype(float)
    for _ in range(30):
        boxes = random_boxes(rngen, int(rngen.integers(0, 6)))
        base = ss.text_artifact_ratio(boxes, mask, 0.5)
        more = ss.text_artifact_ratio(boxes + random_boxes(rngen, 2), mask, 0.5)
        assert more >= base


def test_split_box_invariance():
    mask = half_mask()
    whole = [ss.OcrBox(0.1, 0.1, 0.9, 0.4, "t", 0.9)]
    split = [ss.OcrBox(0.1, 0.1, 0.5, 0.4, "t", 0.9), ss.OcrBox(0.5, 0.1, 0.9, 0.4, "t", 0.9)]
    assert ss.text_artifact_ratio(whole, mask) == ss.text_artifact_ratio(split, mask)


def test_overlapping_boxes_not_double_counted():
    mask = half_mask()
    box = ss.OcrBox(0.0, 0.0, 1.0, 0.5, "t", 0.9)
    assert ss.text_artifact_ratio([box, box], mask) == 1.0


def test_raising_confidence_never_increases_ratio():
    rngen = np.random.default_rng(1)
    mask = half_mask(8, 8)
    boxes = random_boxes(rngen, 8)
    last = 1.0
    for threshold in (0.0, 0.25, 0.5, 0.75, 1.0):
        ratio = ss.text_artifact_ratio(boxes, mask, threshold)
        assert ratio <= last + 1e-15
        last = ratio


# ---------------------------------------------------------------------------
# per-seed ranking


def test_rank_seeds_means_and_order(tmp_path):
    path = build_inpaint_corpus(tmp_path / "c", {0: [0.0, 0.4], 1: [0.2]})
    report = ss.rank_seeds_by_artifacts(ss.load_manifest(path))
    # seed 0 mean = 0.2, seed 1 mean = 0.2 -> tie broken by seed id
    assert [s.seed for s in report.scores] == [0, 1]
    assert all(s.mean_ratio == pytest.approx(0.2) for s in report.scores)


def test_rank_seeds_ascending_best_first(tmp_path):
    path = build_inpaint_corpus(tmp_path / "c", {0: [0.0, 0.4], 1: [0.1]})
    report = ss.rank_seeds_by_artifacts(ss.load_manifest(path))
    assert [s.seed for s in report.scores] == [1, 0]
    assert report.scores[0].mean_ratio == pytest.approx(0.1)
    assert report.scores[1].mean_ratio == pytest.approx(0.2)


def test_all_zero_ratios_tie_by_seed(tmp_path):
    path = build_inpaint_corpus(tmp_path / "c", {2: [0.0], 0: [0.0], 1: [0.0]})
    report = ss.rank_seeds_by_artifacts(ss.load_manifest(path))
    assert [s.seed for s in report.scores] == [0, 1, 2]


def test_missing_artifacts_rejected(tmp_path):
    path = build_inpaint_corpus(tmp_path / "c", {0: [0.0]})
    manifest = ss.load_manifest(path)
    del manifest.images[0].artifacts["ocr_boxes"]
    with pytest.raises(ValidationError):
        ss.rank_seeds_by_artifacts(manifest)


def test_empty_mask_image_excluded(tmp_path):
    from conftest import write_blob
    path = build_inpaint_corpus(tmp_path / "c", {0: [0.0, 0.2]})
    manifest = ss.load_manifest(path)
    # overwrite one mask with an empty one
    write_blob(manifest.resolve(manifest.images[0].artifacts["mask"]), np.zeros((10, 10), dtype=np.float32))
    report = ss.rank_seeds_by_artifacts(manifest)
    assert len(report.excluded) == 1
    assert report.scores[0].n_images == 1
