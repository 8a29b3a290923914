"""Per-image style fingerprints from deep feature maps.

A style fingerprint is the cosine-normalized Gram matrix of a feature map:
entry (i, j) is the cosine similarity between flattened channels i and j.
Fingerprints from several layers are concatenated (strict upper triangle
only, the diagonal is constant 1) into one style vector per image, then
aggregated into an N x (d*P) per-seed matrix over the prompt grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CorpusManifest, read_array
from .errors import DegenerateChannelError, MissingCellError, ValidationError
from .validation import as_float_array


@dataclass(frozen=True)
class StyleVector:
    """Concatenated upper-triangle Gram entries with the layer layout."""

    values: np.ndarray
    layer_spec: tuple  # ((layer_name, channels), ...)


def gram_matrix(feature_map, zero_channel: str = "zero") -> np.ndarray:
    """Pairwise cosine similarity across channels of a C x H x W map.

    Channels are flattened to length H*W before normalization, so the
    result is invariant to positive rescaling of the whole map. Zero-norm
    channels either contribute similarity 0 (``zero_channel="zero"``, the
    default) or raise DegenerateChannelError (``"raise"``).
    """
    if zero_channel not in ("zero", "raise"):
        raise ValidationError(f"unknown zero_channel policy {zero_channel!r}")
    fm = as_float_array(feature_map, "feature_map")
    if fm.ndim < 2:
        raise ValidationError(f"feature map must be at least 2-D, got shape {fm.shape}")
    flat = fm.reshape(fm.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    zero = norms == 0.0
    if zero.any() and zero_channel == "raise":
        raise DegenerateChannelError(f"channels {np.flatnonzero(zero).tolist()} are identically zero")
    safe = np.where(zero, 1.0, norms)
    unit = flat / safe[:, None]
    gram = unit @ unit.T
    gram = np.clip(gram, -1.0, 1.0)
    # exact cosine values on the diagonal / for zeroed channels
    gram[zero, :] = 0.0
    gram[:, zero] = 0.0
    idx = np.flatnonzero(~zero)
    gram[idx, idx] = 1.0
    return (gram + gram.T) / 2.0


def style_vector(feature_maps, layer_names=None, zero_channel: str = "zero") -> StyleVector:
    """Concatenate strict-upper-triangle Gram entries across layers.

    The upper triangle is read in row-major order, so the vector length is
    sum over layers of C*(C-1)/2, independent of spatial size.
    """
    maps = list(feature_maps)
    if not maps:
        raise ValidationError("need at least one feature map")
    if layer_names is None:
        layer_names = [f"layer{i}" for i in range(len(maps))]
    layer_names = list(layer_names)
    if len(layer_names) != len(maps):
        raise ValidationError("layer_names and feature_maps length mismatch")
    pieces = []
    spec = []
    for name, fm in zip(layer_names, maps):
        g = gram_matrix(fm, zero_channel=zero_channel)
        c = g.shape[0]
        iu = np.triu_indices(c, k=1)
        pieces.append(g[iu])
        spec.append((name, c))
    return StyleVector(values=np.concatenate(pieces) if pieces else np.zeros(0), layer_spec=tuple(spec))


def aggregate_seed_style(per_image, prompts) -> tuple[np.ndarray, list]:
    """Stack per-(seed, prompt) vectors into one row per seed.

    ``per_image`` maps (seed, prompt_id) to a fixed-length vector (for the
    two-stage pipeline this is the 2-D per-image embedding). Row ``s`` is
    the concatenation, prompt-major in the given order, of that seed's
    vectors. The grid must be complete.

    Returns (matrix of shape N x (d*P), seeds in ascending order).
    """
    prompts = list(prompts)
    if not prompts:
        raise ValidationError("prompts must be non-empty")
    keys = list(per_image.keys())
    if not keys:
        raise ValidationError("per_image is empty")
    seeds = sorted({s for s, _ in keys})
    first = np.atleast_1d(np.asarray(_cell(per_image, seeds[0], prompts[0]), dtype=np.float64))
    d = first.shape[0]
    matrix = np.empty((len(seeds), d * len(prompts)))
    for i, seed in enumerate(seeds):
        for j, prompt in enumerate(prompts):
            vec = np.atleast_1d(np.asarray(_cell(per_image, seed, prompt), dtype=np.float64))
            if vec.shape[0] != d:
                raise ValidationError(
                    f"vector for (seed {seed}, prompt {prompt!r}) has length {vec.shape[0]}, expected {d}"
                )
            matrix[i, j * d : (j + 1) * d] = vec
    return matrix, seeds


def _cell(per_image, seed, prompt):
    try:
        return per_image[(seed, prompt)]
    except KeyError:
        raise MissingCellError(f"missing cell (seed {seed}, prompt {prompt!r})") from None


def discover_feature_layers(manifest: CorpusManifest) -> list:
    """Layer names present as feature_maps.<layer> keys across all images."""
    layers = set()
    for rec in manifest.images:
        for key in manifest.artifact_keys(rec, "feature_maps"):
            layers.add(key.split(".", 1)[1] if "." in key else "")
    return sorted(layers)


def style_vectors_from_manifest(manifest: CorpusManifest, layers=None, zero_channel: str = "zero") -> dict:
    """Compute a StyleVector for every image in the manifest.

    Feature maps are read from ``feature_maps.<layer>`` artifacts. When
    ``layers`` is None, layers are auto-discovered and every image must
    carry all of them.
    """
    if layers is None:
        layers = discover_feature_layers(manifest)
    if not layers:
        raise ValidationError("no feature_maps artifacts in manifest")
    out = {}
    for rec in manifest.images:
        maps = []
        for layer in layers:
            key = f"feature_maps.{layer}" if layer else "feature_maps"
            path = manifest.artifact_path(rec, key)
            if path is None:
                raise ValidationError(f"image (seed {rec.seed}, {rec.prompt_id!r}) lacks artifact {key!r}")
            maps.append(read_array(path))
        out[(rec.seed, rec.prompt_id)] = style_vector(maps, layers, zero_channel=zero_channel)
    return out
