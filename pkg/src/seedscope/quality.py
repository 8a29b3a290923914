"""Quality metrics: Fréchet distance, seed rankings, rank stability, and
a nearest-centroid seed distinguishability probe.

The Fréchet (squared) distance between Gaussians fitted to embedding
clouds follows the FID convention: d2 = |mu_a - mu_b|^2 + Tr(S_a + S_b -
2(S_a S_b)^(1/2)). The matrix square root goes through the symmetric
product S_a^(1/2) S_b S_a^(1/2), so only symmetric eigendecompositions
are involved and tolerances are easy to reason about.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import CorpusManifest, read_array
from .errors import (
    DimensionMismatchError,
    EmptySplitError,
    MissingScoreError,
    NumericalError,
    SampleSizeError,
    SeedSetMismatchError,
    ValidationError,
)
from .validation import as_matrix

DIRECTIONS = ("lower_better", "higher_better")


# ---------------------------------------------------------------------------
# Gaussian statistics and Fréchet distance


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValidationError(f"mean/cov shapes inconsistent: {mean.shape} vs {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("stats contain NaN or Inf")
        if np.max(np.abs(cov - cov.T)) > 1e-9 * max(1.0, float(np.max(np.abs(cov)))):
            raise ValidationError("covariance is not symmetric within 1e-9")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", (cov + cov.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist(), "n": self.n}

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianStats":
        return cls(mean=np.asarray(doc["mean"]), cov=np.asarray(doc["cov"]), n=int(doc["n"]))


def gaussian_stats(features, ddof: int = 1) -> GaussianStats:
    """Column mean and sample covariance (divisor n - ddof, default unbiased)."""
    X = as_matrix(features, "features")
    n = X.shape[0]
    if n < 2:
        raise SampleSizeError(f"need at least 2 samples for covariance, got {n}")
    mean = X.mean(axis=0)
    xc = X - mean
    cov = (xc.T @ xc) / (n - ddof)
    return GaussianStats(mean=mean, cov=cov, n=n)


def _psd_eigh(mat: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with small negative eigenvalues clipped to zero."""
    w, v = np.linalg.eigh(mat)
    tol = 1e-8 * max(float(np.trace(mat)), 0.0)
    if w.min(initial=0.0) < -max(tol, 1e-12):
        raise NumericalError(f"{what} has eigenvalue {w.min():.3e}, below the -1e-8*trace clipping threshold")
    return np.maximum(w, 0.0), v


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Fréchet distance between two Gaussians (the FID quantity)."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    wa, va = _psd_eigh(a.cov, "covariance A")
    a_half = (va * np.sqrt(wa)) @ va.T
    inner = a_half @ b.cov @ a_half
    wm, _ = _psd_eigh((inner + inner.T) / 2.0, "cross product")
    delta = a.mean - b.mean
    d2 = float(delta @ delta + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.sum(np.sqrt(wm)))
    return max(d2, 0.0)


# ---------------------------------------------------------------------------
# Seed rankings


@dataclass
class SeedRanking:
    """Seeds ordered best-first under a named metric.

    Entries are (seed, score) sorted by score in the metric's direction;
    ties break by ascending seed so orderings are platform-independent.
    """

    metric_name: str
    direction: str
    entries: list
    prompt_set_id: str = ""

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"direction must be one of {DIRECTIONS}")
        self.entries = sort_entries(self.entries, self.direction)

    @property
    def seeds(self) -> list:
        return [s for s, _ in self.entries]

    def seed_set(self) -> set:
        return {s for s, _ in self.entries}

    def top(self, m: int) -> list:
        return [s for s, _ in self.entries[:m]]

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "direction": self.direction,
            "prompt_set_id": self.prompt_set_id,
            "entries": [{"seed": s, "score": v} for s, v in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "SeedRanking":
        return cls(
            metric_name=doc["metric_name"],
            direction=doc["direction"],
            entries=[(int(e["seed"]), float(e["score"])) for e in doc["entries"]],
            prompt_set_id=doc.get("prompt_set_id", ""),
        )


def sort_entries(entries, direction: str) -> list:
    entries = [(int(s), float(v)) for s, v in entries]
    if direction == "lower_better":
        return sorted(entries, key=lambda e: (e[1], e[0]))
    return sorted(entries, key=lambda e: (-e[1], e[0]))


@dataclass(frozen=True)
class ExcludedSeed:
    seed: int
    reason: str
    n_images: int


def _selected_images(manifest: CorpusManifest, prompt_ids):
    selected = set(prompt_ids) if prompt_ids is not None else None
    for rec in manifest.images:
        if selected is None or rec.prompt_id in selected:
            yield rec


def fid_per_seed(manifest: CorpusManifest, real_stats: GaussianStats, prompt_ids=None,
                 ddof: int = 1, min_images: int = 2) -> tuple[SeedRanking, list]:
    """Per-seed Fréchet distance to reference statistics, lower is better.

    Each selected image must carry a ``pooled_embedding`` artifact of
    shape [D]. Seeds with fewer than ``min_images`` images are excluded
    and reported rather than ranked.
    """
    by_seed: dict = {}
    for rec in _selected_images(manifest, prompt_ids):
        path = manifest.artifact_path(rec, "pooled_embedding")
        if path is None:
            raise ValidationError(f"image (seed {rec.seed}, {rec.prompt_id!r}) lacks pooled_embedding")
        vec = read_array(path).reshape(-1)
        if vec.shape[0] != real_stats.dim:
            raise DimensionMismatchError(
                f"embedding dim {vec.shape[0]} != reference dim {real_stats.dim} (seed {rec.seed})"
            )
        by_seed.setdefault(rec.seed, []).append(vec)
    if not by_seed:
        raise ValidationError("no images selected")
    entries = []
    excluded = []
    for seed in sorted(by_seed):
        vecs = by_seed[seed]
        if len(vecs) < max(min_images, 2):
            excluded.append(ExcludedSeed(seed=seed, reason="insufficient samples", n_images=len(vecs)))
            continue
        stats = gaussian_stats(np.vstack(vecs), ddof=ddof)
        entries.append((seed, frechet_distance(stats, real_stats)))
    return (
        SeedRanking(metric_name="fid", direction="lower_better", entries=entries,
                    prompt_set_id=manifest.prompt_set_id),
        excluded,
    )


def score_per_seed(manifest: CorpusManifest, metric_name: str, prompt_ids=None,
                   aggregator: str = "mean") -> SeedRanking:
    """Per-seed mean of an ingested per-image score, higher is better."""
    if aggregator != "mean":
        raise ValidationError(f"unsupported aggregator {aggregator!r}")
    by_seed: dict = {}
    for rec in _selected_images(manifest, prompt_ids):
        if metric_name not in rec.scores:
            raise MissingScoreError(f"image (seed {rec.seed}, {rec.prompt_id!r}) lacks score {metric_name!r}")
        by_seed.setdefault(rec.seed, []).append(rec.scores[metric_name])
    if not by_seed:
        raise ValidationError("no images selected")
    entries = [(seed, float(np.mean(vals))) for seed, vals in sorted(by_seed.items())]
    return SeedRanking(metric_name=metric_name, direction="higher_better", entries=entries,
                       prompt_set_id=manifest.prompt_set_id)


# ---------------------------------------------------------------------------
# Rank stability


def _average_ranks(ranking: SeedRanking) -> dict:
    """Rank per seed, 1 = best, average rank over score ties."""
    ranks = {}
    entries = ranking.entries
    i = 0
    while i < len(entries):
        j = i
        while j < len(entries) and entries[j][1] == entries[i][1]:
            j += 1
        mean_rank = (i + 1 + j) / 2.0
        for k in range(i, j):
            ranks[entries[k][0]] = mean_rank
        i = j
    return ranks


def spearman_rho(ranking_a: SeedRanking, ranking_b: SeedRanking) -> float:
    """Spearman correlation with average-rank tie handling.

    Degenerate (all-tied) rankings have no defined ordering; two all-tied
    rankings agree trivially (rho 1.0), one all-tied against a real
    ordering carries no signal (rho 0.0).
    """
    if ranking_a.seed_set() != ranking_b.seed_set():
        raise SeedSetMismatchError("rankings cover different seed sets")
    seeds = sorted(ranking_a.seed_set())
    ra = _average_ranks(ranking_a)
    rb = _average_ranks(ranking_b)
    x = np.array([ra[s] for s in seeds])
    y = np.array([rb[s] for s in seeds])
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 and vy == 0.0:
        return 1.0
    if vx == 0.0 or vy == 0.0:
        return 0.0
    return float((xc @ yc) / np.sqrt(vx * vy))


def rank_stability(ranking_a: SeedRanking, ranking_b: SeedRanking, ks=(16, 64, 256)) -> tuple[float, dict]:
    """(Spearman rho, top-k overlap fractions) between two rankings.

    Overlap at k is |top-k(a) & top-k(b)| / k with k capped at the seed
    count so identical rankings always score 1.0.
    """
    if ranking_a.seed_set() != ranking_b.seed_set():
        raise SeedSetMismatchError("rankings cover different seed sets")
    rho = spearman_rho(ranking_a, ranking_b)
    n = len(ranking_a.entries)
    overlaps = {}
    for k in ks:
        kk = min(int(k), n)
        if kk < 1:
            raise ValidationError(f"k must be positive, got {k}")
        overlaps[int(k)] = len(set(ranking_a.top(kk)) & set(ranking_b.top(kk))) / kk
    return rho, overlaps


# ---------------------------------------------------------------------------
# Seed distinguishability probe


class NearestCentroidSeedProbe(BaseEstimator):
    """Nearest-centroid classifier over seed labels.

    fit(X, y) stores one centroid per label; predict assigns each row to
    the nearest centroid under Euclidean distance, ties to the smallest
    label. Serves as a shallow stand-in for a deep seed classifier when
    checking whether seeds are separable at all.
    """

    def fit(self, X, y):
        X = as_matrix(X, "X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValidationError("X and y length mismatch")
        self.classes_ = np.unique(y)  # sorted ascending
        self.centroids_ = np.vstack([X[y == c].mean(axis=0) for c in self.classes_])
        return self

    def predict(self, X):
        X = as_matrix(X, "X")
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ self.centroids_.T
            + np.sum(self.centroids_ * self.centroids_, axis=1)[None, :]
        )
        return self.classes_[np.argmin(d2, axis=1)]

    def score(self, X, y):
        return float(np.mean(self.predict(X) == np.asarray(y)))


def seed_probe_accuracy(style_vectors, train_prompts, test_prompts) -> float:
    """Held-out nearest-centroid accuracy of predicting the seed.

    ``style_vectors`` maps (seed, prompt_id) to a vector; train and test
    prompt sets must be disjoint and non-empty, and every seed must
    appear in both splits. Exact centroid ties resolve to the smallest
    seed, so a fully degenerate corpus scores exactly 1/N.
    """
    train = set(train_prompts)
    test = set(test_prompts)
    if not train or not test:
        raise EmptySplitError("train and test prompt sets must be non-empty")
    if train & test:
        raise EmptySplitError(f"train/test prompts overlap: {sorted(train & test)}")
    seeds = sorted({s for s, _ in style_vectors})

    def split(prompt_set):
        X, y = [], []
        for (s, p), vec in sorted(style_vectors.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            if p in prompt_set:
                X.append(np.asarray(getattr(vec, "values", vec), dtype=np.float64))
                y.append(s)
        return np.vstack(X) if X else np.zeros((0, 1)), np.array(y, dtype=np.int64)

    X_train, y_train = split(train)
    X_test, y_test = split(test)
    for seed in seeds:
        if seed not in set(y_train) or seed not in set(y_test):
            raise EmptySplitError(f"seed {seed} missing from a split")
    probe = NearestCentroidSeedProbe().fit(X_train, y_train)
    return probe.score(X_test, y_test)
