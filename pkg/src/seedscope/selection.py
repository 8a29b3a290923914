"""Seed pool construction: golden seeds, diverse seeds, and the pairwise
similarity score used to evaluate diversity.

Golden seeds are the intersection of the top-m seeds of two rankings
(quality and preference). Diverse seeds come from greedy farthest-point
sampling over per-seed feature vectors: after a uniformly drawn start,
each step adds the seed maximizing its minimum Euclidean distance to the
already-selected set, ties to the smallest seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import CountError, NoUsablePromptsError, SeedSetMismatchError, ValidationError
from .quality import SeedRanking

POOL_KINDS = ("golden", "diverse_style", "diverse_composition")


@dataclass(frozen=True)
class SeedFeature:
    seed: int
    f: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.f, dtype=np.float64).reshape(-1)
        if vec.size == 0 or not np.all(np.isfinite(vec)):
            raise ValidationError(f"seed {self.seed}: feature vector must be non-empty and finite")
        object.__setattr__(self, "f", vec)


@dataclass
class SeedPool:
    seeds: list
    pool_kind: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pool_kind not in POOL_KINDS:
            raise ValidationError(f"pool_kind must be one of {POOL_KINDS}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError("seed pool contains duplicates")
        self.seeds = [int(s) for s in self.seeds]

    def to_dict(self) -> dict:
        return {"seeds": self.seeds, "pool_kind": self.pool_kind, "provenance": self.provenance}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "SeedPool":
        return cls(seeds=[int(s) for s in doc["seeds"]], pool_kind=doc["pool_kind"],
                   provenance=doc.get("provenance", {}))


def golden_seeds(r_fid: SeedRanking, r_pref: SeedRanking, m: int) -> SeedPool:
    """Seeds ranked in the top m of both rankings, ascending seed order."""
    if r_fid.seed_set() != r_pref.seed_set():
        raise SeedSetMismatchError("rankings cover different seed sets")
    n = len(r_fid.entries)
    if not 1 <= m <= n:
        raise ValidationError(f"m={m} out of range [1, {n}]")
    pool = sorted(set(r_fid.top(m)) & set(r_pref.top(m)))
    return SeedPool(
        seeds=pool,
        pool_kind="golden",
        provenance={
            "m": m,
            "metric_a": r_fid.metric_name,
            "metric_b": r_pref.metric_name,
            "prompt_set_a": r_fid.prompt_set_id,
            "prompt_set_b": r_pref.prompt_set_id,
        },
    )


def farthest_point_seeds(features, count: int, rng_seed: int = 0, first_seed: int | None = None,
                         pool_kind: str = "diverse_style") -> SeedPool:
    """Greedy max-min selection of `count` seeds in feature space.

    The first seed is drawn uniformly from the available seeds using the
    portable stream for ``rng_seed`` (or forced via ``first_seed``).
    Each subsequent pick maximizes min distance to the selected set;
    exact distance ties resolve to the smallest seed.
    """
    feats = [f if isinstance(f, SeedFeature) else SeedFeature(seed=f[0], f=f[1]) for f in features]
    if not feats:
        raise CountError("no seed features supplied")
    seeds = [sf.seed for sf in feats]
    if len(set(seeds)) != len(seeds):
        raise ValidationError("duplicate seeds in features")
    dims = {sf.f.shape[0] for sf in feats}
    if len(dims) != 1:
        raise ValidationError(f"feature vectors have mixed lengths: {sorted(dims)}")
    n = len(feats)
    if not 1 <= count <= n:
        raise CountError(f"count={count} out of range [1, {n}]")

    order = np.argsort(seeds)  # ascending seed: argmax/argmin then break ties correctly
    ids = np.asarray(seeds)[order]
    F = np.vstack([feats[i].f for i in order])

    if first_seed is not None:
        where = np.flatnonzero(ids == first_seed)
        if where.size == 0:
            raise ValidationError(f"first_seed {first_seed} not among the features")
        start = int(where[0])
    else:
        u = float(rng.uniforms(rng_seed, 0, 1)[0])
        start = min(int(u * n), n - 1)

    chosen = [start]
    min_dist = np.linalg.norm(F - F[start], axis=1)
    min_dist[start] = -np.inf
    for _ in range(count - 1):
        nxt = int(np.argmax(min_dist))  # first max = smallest seed on ties
        chosen.append(nxt)
        dist_new = np.linalg.norm(F - F[nxt], axis=1)
        np.minimum(min_dist, dist_new, out=min_dist)
        min_dist[nxt] = -np.inf

    return SeedPool(
        seeds=[int(ids[i]) for i in chosen],
        pool_kind=pool_kind,
        provenance={"count": count, "rng_seed": rng_seed,
                    "first_seed": int(ids[start]), "n_candidates": n},
    )


def diversity_similarity(image_features, C: int = 4) -> float:
    """Mean over prompts of mean pairwise cosine similarity (lower = more diverse).

    ``image_features`` maps (prompt_id, image_index) to a feature vector;
    per prompt the first C vectors by image index are used. Vectors that
    are missing or zero-norm (no object detected) are unusable; prompts
    with fewer than 2 usable vectors are skipped.
    """
    if C < 2:
        raise ValidationError(f"C must be at least 2, got {C}")
    per_prompt: dict = {}
    for (prompt_id, idx), vec in image_features.items():
        per_prompt.setdefault(prompt_id, []).append((idx, vec))
    totals = []
    for prompt_id in sorted(per_prompt, key=str):
        items = sorted(per_prompt[prompt_id], key=lambda iv: iv[0])[:C]
        usable = []
        for _, vec in items:
            if vec is None:
                continue
            v = np.asarray(vec, dtype=np.float64).reshape(-1)
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"prompt {prompt_id!r}: non-finite feature vector")
            norm = np.linalg.norm(v)
            if norm > 0.0:
                usable.append(v / norm)
        c = len(usable)
        if c < 2:
            continue
        sims = [float(usable[j] @ usable[k]) for j in range(c) for k in range(j + 1, c)]
        totals.append(float(np.mean(sims)))
    if not totals:
        raise NoUsablePromptsError("no prompt has 2 or more usable feature vectors")
    return float(np.mean(totals))
