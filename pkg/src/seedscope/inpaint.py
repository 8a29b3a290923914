"""Text-artifact quantification for inpainting outputs.

OCR detections are rasterized onto the mask grid (a pixel counts when its
center falls inside a box, half-open on the far edges) and unioned so
overlapping boxes are not double-counted. The text-artifact ratio is the
covered fraction of the inpainting mask; seeds are ranked by their mean
ratio, ascending (least inserted text first).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusManifest, read_array, validate_corpus
from .errors import EmptyMaskError, ValidationError
from .validation import as_binary_mask


@dataclass(frozen=True)
class OcrBox:
    x0: float
    y0: float
    x1: float
    y1: float
    text: str = ""
    confidence: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise ValidationError(
                f"box coords must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1, got "
                f"({self.x0}, {self.y0}, {self.x1}, {self.y1})"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> "OcrBox":
        return cls(x0=float(doc["x0"]), y0=float(doc["y0"]), x1=float(doc["x1"]), y1=float(doc["y1"]),
                   text=str(doc.get("text", "")), confidence=float(doc.get("confidence", 1.0)))


def load_ocr_boxes(path) -> list:
    doc = json.loads(open(path, encoding="utf-8").read())
    if not isinstance(doc, list):
        raise ValidationError(f"{path}: ocr_boxes artifact must be a JSON list")
    return [OcrBox.from_dict(b) for b in doc]


def rasterize_boxes(boxes, shape: tuple) -> np.ndarray:
    """Union of boxes as a boolean H x W grid via the pixel-center rule."""
    h, w = shape
    out = np.zeros((h, w), dtype=bool)
    col_centers = (np.arange(w) + 0.5) / w
    row_centers = (np.arange(h) + 0.5) / h
    for b in boxes:
        cols = (col_centers >= b.x0) & (col_centers < b.x1)
        rows = (row_centers >= b.y0) & (row_centers < b.y1)
        out |= rows[:, None] & cols[None, :]
    return out


def text_artifact_ratio(boxes, mask, min_confidence: float = 0.5) -> float:
    """Fraction of the mask covered by the union of confident OCR boxes."""
    m = as_binary_mask(mask, "mask")
    total = int(m.sum())
    if total == 0:
        raise EmptyMaskError("inpainting mask is empty")
    keep = [b for b in boxes if b.confidence >= min_confidence]
    if not keep:
        return 0.0
    covered = rasterize_boxes(keep, m.shape)
    return float(int((covered & m).sum()) / total)


@dataclass(frozen=True)
class ArtifactScore:
    seed: int
    mean_ratio: float
    n_images: int


@dataclass
class ArtifactReport:
    scores: list                    # ArtifactScore, ascending mean_ratio
    per_image: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    min_confidence: float = 0.5

    def to_dict(self) -> dict:
        return {
            "min_confidence": self.min_confidence,
            "scores": [{"seed": s.seed, "mean_ratio": s.mean_ratio, "n_images": s.n_images} for s in self.scores],
            "per_image": self.per_image,
            "excluded_count": len(self.excluded),
            "excluded": self.excluded,
        }


def rank_seeds_by_artifacts(manifest: CorpusManifest, min_confidence: float = 0.5,
                            prompt_ids=None) -> ArtifactReport:
    """Rank seeds by mean text-artifact ratio (best = least text).

    Requires ocr_boxes and mask artifacts on every selected image; images
    with an empty mask are excluded from their seed's mean and counted.
    """
    report = validate_corpus(manifest, {"ocr_boxes", "mask"})
    if not report.ok:
        raise ValidationError(
            f"corpus incomplete for inpaint ranking: {len(report.issues)} missing/unreadable artifacts"
        )
    selected = set(prompt_ids) if prompt_ids is not None else None
    by_seed: dict = {}
    per_image = []
    excluded = []
    for rec in manifest.images:
        if selected is not None and rec.prompt_id not in selected:
            continue
        boxes = load_ocr_boxes(manifest.artifact_path(rec, "ocr_boxes"))
        mask = read_array(manifest.artifact_path(rec, "mask"))
        try:
            ratio = text_artifact_ratio(boxes, mask, min_confidence=min_confidence)
        except EmptyMaskError:
            excluded.append({"seed": rec.seed, "prompt_id": rec.prompt_id, "reason": "empty mask"})
            continue
        by_seed.setdefault(rec.seed, []).append(ratio)
        per_image.append({"seed": rec.seed, "prompt_id": rec.prompt_id, "ratio": ratio})
    if not by_seed:
        raise ValidationError("no scorable images")
    scores = [ArtifactScore(seed=s, mean_ratio=float(np.mean(r)), n_images=len(r)) for s, r in by_seed.items()]
    scores.sort(key=lambda a: (a.mean_ratio, a.seed))
    return ArtifactReport(scores=scores, per_image=per_image, excluded=excluded, min_confidence=min_confidence)
