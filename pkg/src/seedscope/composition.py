"""Object-composition features from segmentation masks and depth maps.

Each image yields (cx, cy, size, depth): the mask centroid in normalized
[0, 1] coordinates (corner pixels map to exactly 0 and 1), the mask-area
fraction, and the mean depth over the mask after min-max normalizing the
depth map over the whole image. Per-seed aggregation concatenates the
4-vectors over a prompt grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusManifest, read_array
from .errors import ShapeMismatchError, ValidationError
from .validation import as_binary_mask, as_float_array


@dataclass(frozen=True)
class CompositionVector:
    cx: float
    cy: float
    size: float
    depth: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.size, self.depth])


def composition_features(mask, depth_map) -> CompositionVector | None:
    """Composition vector of the masked object; None when the mask is empty.

    Centroid denominators are (W-1, H-1); a single-row or single-column
    image centers that coordinate at 0.5. A constant depth map normalizes
    to 0 everywhere, so depth is 0 by convention.
    """
    m = as_binary_mask(mask, "mask")
    d = as_float_array(depth_map, "depth_map", ndim=2)
    if m.shape != d.shape:
        raise ShapeMismatchError(f"mask {m.shape} vs depth_map {d.shape}")
    rows, cols = np.nonzero(m)
    if rows.size == 0:
        return None
    h, w = m.shape
    cx = 0.5 if w == 1 else float(cols.mean() / (w - 1))
    cy = 0.5 if h == 1 else float(rows.mean() / (h - 1))
    size = rows.size / (h * w)
    lo, hi = float(d.min()), float(d.max())
    if hi > lo:
        depth = float((d[rows, cols] - lo).mean() / (hi - lo))
    else:
        depth = 0.0
    return CompositionVector(cx=cx, cy=cy, size=float(size), depth=depth)


@dataclass
class CompositionAggregate:
    """Per-seed composition matrix plus the usability bookkeeping."""

    matrix: np.ndarray          # rows align with row_seeds, 4 columns per kept prompt
    row_seeds: list
    seeds: list                 # all seeds in the grid, ascending
    usable: np.ndarray          # bool per entry of seeds
    prompts: list               # prompts kept in the matrix, in order
    dropped_prompts: list = field(default_factory=list)  # prompts with zero observations
    policy: str = "drop"

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seeds": self.seeds,
            "usable": [bool(u) for u in self.usable],
            "row_seeds": self.row_seeds,
            "prompts": self.prompts,
            "dropped_prompts": self.dropped_prompts,
        }


def aggregate_seed_composition(per_image, prompts, policy: str = "drop") -> CompositionAggregate:
    """Concatenate per-prompt composition vectors into one row per seed.

    ``per_image`` maps (seed, prompt_id) to a CompositionVector or None
    (no object). Prompts nobody detected an object for are dropped from
    the grid and recorded. Seeds with a missing cell among the remaining
    prompts are dropped (``policy="drop"``) or filled with the column
    mean over observed seeds (``policy="impute"``).
    """
    if policy not in ("drop", "impute"):
        raise ValidationError(f"unknown policy {policy!r}")
    prompts = list(prompts)
    if not prompts:
        raise ValidationError("prompts must be non-empty")
    seeds = sorted({s for s, _ in per_image})
    if not seeds:
        raise ValidationError("per_image is empty")

    kept, dropped = [], []
    for p in prompts:
        if any(per_image.get((s, p)) is not None for s in seeds):
            kept.append(p)
        else:
            dropped.append(p)
    if not kept:
        raise ValidationError("no prompt has any detected object")

    n, pcount = len(seeds), len(kept)
    cells = np.full((n, pcount, 4), np.nan)
    for i, s in enumerate(seeds):
        for j, p in enumerate(kept):
            vec = per_image.get((s, p))
            if vec is not None:
                cells[i, j] = vec.as_array()

    observed = ~np.isnan(cells[:, :, 0])
    if policy == "drop":
        usable = observed.all(axis=1)
        matrix = cells[usable].reshape(int(usable.sum()), 4 * pcount)
        row_seeds = [s for s, u in zip(seeds, usable) if u]
    else:
        usable = np.ones(n, dtype=bool)
        col_mean = np.nanmean(cells, axis=0)  # per (prompt, component); kept prompts all observed >= once
        fill = np.broadcast_to(col_mean, cells.shape)
        cells = np.where(np.isnan(cells), fill, cells)
        matrix = cells.reshape(n, 4 * pcount)
        row_seeds = list(seeds)

    return CompositionAggregate(
        matrix=matrix, row_seeds=row_seeds, seeds=seeds, usable=usable,
        prompts=kept, dropped_prompts=dropped, policy=policy,
    )


def composition_from_manifest(manifest: CorpusManifest, prompt_ids=None) -> dict:
    """Composition vectors for every image with mask and depth artifacts."""
    selected = set(prompt_ids) if prompt_ids is not None else None
    out = {}
    for rec in manifest.images:
        if selected is not None and rec.prompt_id not in selected:
            continue
        mask_path = manifest.artifact_path(rec, "mask")
        depth_path = manifest.artifact_path(rec, "depth")
        if mask_path is None or depth_path is None:
            raise ValidationError(f"image (seed {rec.seed}, {rec.prompt_id!r}) lacks mask or depth artifact")
        out[(rec.seed, rec.prompt_id)] = composition_features(read_array(mask_path), read_array(depth_path))
    return out
