"""PCA and exact t-SNE, plus the two-stage per-seed embedding pipeline.

Both reducers follow the scikit-learn estimator protocol (``fit`` /
``transform`` / ``fit_transform``, ``get_params``) so they compose with
standard pipelines, but the algorithms are implemented here: results must
be deterministic functions of (input, rng_seed) with a documented
portable random stream, which rules out library internals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import rng
from .errors import (
    ConvergenceWarning,
    DimensionError,
    MissingCellError,
    PerplexityError,
    ValidationError,
)
from .style import aggregate_seed_style
from .validation import as_matrix


@dataclass
class Embedding:
    """A reduced point set plus enough metadata to reproduce it."""

    points: np.ndarray
    method_tag: str
    params: dict = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValidationError(f"embedding must be n x d with n,d >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("embedding contains NaN or Inf")
        self.points = pts


# ---------------------------------------------------------------------------
# PCA


class PCA(BaseEstimator, TransformerMixin):
    """Principal component analysis via SVD of the centered data.

    Components are sign-fixed so the largest-magnitude loading of each
    axis is positive, making the projection deterministic across
    platforms. If the data has rank 0 after centering, the fit is flagged
    degenerate (``degenerate_``) and transforms return all zeros.
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = as_matrix(X, "X")
        n, d = X.shape
        k = self.n_components
        if not 1 <= k <= min(n, d):
            raise DimensionError(f"n_components={k} out of range [1, {min(n, d)}]")
        self.mean_ = X.mean(axis=0)
        xc = X - self.mean_
        total_var = float(np.sum(xc * xc)) / max(n - 1, 1)
        if total_var == 0.0:
            self.degenerate_ = True
            self.components_ = np.zeros((k, d))
            self.explained_variance_ = np.zeros(k)
            self.explained_variance_ratio_ = np.zeros(k)
            return self
        self.degenerate_ = False
        _, s, vt = np.linalg.svd(xc, full_matrices=False)
        comps = vt[:k]
        # orient each axis so its largest-|loading| entry is positive
        flip = comps[np.arange(k), np.argmax(np.abs(comps), axis=1)] < 0
        comps = np.where(flip[:, None], -comps, comps)
        self.components_ = comps
        self.explained_variance_ = (s[:k] ** 2) / max(n - 1, 1)
        self.explained_variance_ratio_ = self.explained_variance_ / total_var
        return self

    def transform(self, X):
        X = as_matrix(X, "X")
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Y):
        Y = as_matrix(Y, "Y")
        return Y @ self.components_ + self.mean_


def pca_fit_transform(X, k: int) -> tuple[Embedding, np.ndarray]:
    """Spec-level helper: project to k dims, return (Embedding, ratios)."""
    model = PCA(n_components=k).fit(X)
    emb = Embedding(
        points=model.transform(np.asarray(X, dtype=np.float64)),
        method_tag="pca",
        params={"n_components": k, "degenerate": bool(model.degenerate_)},
    )
    return emb, model.explained_variance_ratio_.copy()


# ---------------------------------------------------------------------------
# t-SNE (exact gradient)


def conditional_probabilities(X, perplexity: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic conditional P for t-SNE at the given perplexity.

    Each row's precision beta is found by bracketed binary search so the
    row's Shannon entropy (base 2) matches log2(perplexity). Returns
    (P, betas); P's diagonal is zero and rows sum to 1.
    """
    X = as_matrix(X, "X")
    n = X.shape[0]
    _check_perplexity(perplexity, n)
    sq = _squared_distances(X)
    target = np.log2(perplexity)
    P = np.zeros((n, n))
    betas = np.zeros(n)
    for i in range(n):
        d = np.delete(sq[i], i)
        beta, p_row = _search_beta(d, target)
        betas[i] = beta
        P[i, np.arange(n) != i] = p_row
    return P, betas


def _search_beta(d: np.ndarray, target_h2: float, max_iter: int = 200, tol: float = 1e-7):
    beta, lo, hi = 1.0, 0.0, np.inf
    p = None
    for _ in range(max_iter):
        p, h2 = _row_entropy(d, beta)
        diff = h2 - target_h2
        if abs(diff) <= tol:
            break
        if diff > 0:  # entropy too high -> sharpen
            lo = beta
            beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
        else:
            hi = beta
            beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
    return beta, p


def _row_entropy(d: np.ndarray, beta: float):
    logits = -beta * (d - d.min())  # shift for stability; cancels after normalization
    w = np.exp(logits)
    total = w.sum()
    p = w / total
    nz = p > 0.0
    h2 = -np.sum(p[nz] * np.log2(p[nz]))
    return p, h2


def _squared_distances(X: np.ndarray) -> np.ndarray:
    sq_norms = np.sum(X * X, axis=1)
    d = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (X @ X.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _check_perplexity(perplexity: float, n: int):
    if n < 4:
        raise PerplexityError(f"t-SNE needs at least 4 points, got {n}")
    if not 1.0 <= perplexity <= (n - 1) / 3.0:
        raise PerplexityError(f"perplexity {perplexity} outside [1, (n-1)/3] = [1, {(n - 1) / 3.0:g}] for n={n}")


def clamp_perplexity(perplexity: float, n: int) -> float:
    """Largest feasible perplexity not exceeding the requested one."""
    return float(min(max(perplexity, 1.0), max((n - 1) / 3.0, 1.0)))


class TSNE(BaseEstimator):
    """Exact (O(n^2)) t-SNE to 2 dimensions.

    Published defaults: 1000 iterations, early exaggeration x12 for the
    first 250, momentum 0.5 switching to 0.8 at iteration 250, learning
    rate max(n/12, 50). Initialization draws from the portable stream for
    ``rng_seed``, so repeated fits are bit-identical.
    """

    MACHINE_EPS = np.finfo(np.float64).eps

    def __init__(self, perplexity: float = 30.0, n_iter: int = 1000, rng_seed: int = 0,
                 early_exaggeration: float = 12.0, exaggeration_iters: int = 250,
                 momentum_switch_iter: int = 250, learning_rate: float | None = None):
        self.perplexity = perplexity
        self.n_iter = n_iter
        self.rng_seed = rng_seed
        self.early_exaggeration = early_exaggeration
        self.exaggeration_iters = exaggeration_iters
        self.momentum_switch_iter = momentum_switch_iter
        self.learning_rate = learning_rate

    def fit(self, X, y=None):
        X = as_matrix(X, "X")
        n = X.shape[0]
        _check_perplexity(self.perplexity, n)
        p_cond, _ = conditional_probabilities(X, self.perplexity)
        P = (p_cond + p_cond.T) / (2.0 * n)
        P = np.maximum(P, self.MACHINE_EPS)

        lr = self.learning_rate if self.learning_rate is not None else max(n / 12.0, 50.0)
        Y = 1e-4 * rng.normals(self.rng_seed, 0, 2 * n).reshape(n, 2)
        update = np.zeros_like(Y)
        gains = np.ones_like(Y)
        kl_history = np.zeros(self.n_iter + 1)

        for it in range(self.n_iter):
            exaggerate = self.early_exaggeration if it < self.exaggeration_iters else 1.0
            momentum = 0.5 if it < self.momentum_switch_iter else 0.8

            num = 1.0 / (1.0 + _squared_distances(Y))
            np.fill_diagonal(num, 0.0)
            Q = np.maximum(num / num.sum(), self.MACHINE_EPS)
            kl_history[it] = float(np.sum(P * (np.log(P) - np.log(Q))))

            PQ = (exaggerate * P - Q) * num
            grad = 4.0 * ((np.diag(PQ.sum(axis=1)) - PQ) @ Y)

            inc = update * grad < 0.0
            gains[inc] += 0.2
            gains[~inc] *= 0.8
            np.maximum(gains, 0.01, out=gains)
            update = momentum * update - lr * (gains * grad)
            Y = Y + update
            Y = Y - Y.mean(axis=0)

        num = 1.0 / (1.0 + _squared_distances(Y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), self.MACHINE_EPS)
        kl_history[self.n_iter] = float(np.sum(P * (np.log(P) - np.log(Q))))

        self.embedding_ = Y
        self.kl_divergence_ = float(kl_history[-1])
        self.kl_history_ = kl_history
        tail = kl_history[-10:]
        self.still_improving_ = bool(len(tail) >= 2 and (tail[0] - tail[-1]) / max(len(tail) - 1, 1) > 1e-4)
        if self.still_improving_:
            warnings.warn(
                f"t-SNE stopped after {self.n_iter} iterations while the KL objective "
                "was still decreasing by more than 1e-4 per iteration",
                ConvergenceWarning,
                stacklevel=2,
            )
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_.copy()


def tsne_embed(X, perplexity: float, rng_seed: int, iters: int = 1000) -> Embedding:
    """Spec-level helper around the TSNE estimator."""
    model = TSNE(perplexity=perplexity, n_iter=iters, rng_seed=rng_seed)
    points = model.fit_transform(X)
    return Embedding(
        points=points,
        method_tag="tsne",
        params={"perplexity": perplexity, "n_iter": iters, "kl": model.kl_divergence_,
                "still_improving": model.still_improving_},
        rng_seed=rng_seed,
    )


# ---------------------------------------------------------------------------
# Two-stage seed embedding


@dataclass
class TwoStageResult:
    per_image: Embedding        # one 2-D point per (seed, prompt)
    per_seed: Embedding         # one 2-D point per seed
    image_keys: list            # row order of per_image
    seeds: list                 # row order of per_seed


def two_stage_seed_embedding(style_vectors, prompts=None, perplexity: float = 30.0,
                             iters: int = 1000, rng_seed: int = 0, pca_dim: int = 50) -> TwoStageResult:
    """Per-image then per-seed 2-D embeddings from per-image style vectors.

    Stage 1 reduces all N*P style vectors with PCA (to at most
    ``pca_dim``) followed by t-SNE, giving a 2-D point per image. Stage 2
    concatenates each seed's P per-image points into an N x (2P) matrix
    and reduces again, giving a 2-D point per seed. The requested
    perplexity is clamped to each stage's feasible maximum (n-1)/3; the
    stage-2 t-SNE runs on an independent sub-stream of ``rng_seed``.
    """
    keys = list(style_vectors.keys())
    if not keys:
        raise ValidationError("style_vectors is empty")
    seeds = sorted({s for s, _ in keys})
    if prompts is None:
        prompts = sorted({p for _, p in keys})
    prompts = list(prompts)
    for s in seeds:
        for p in prompts:
            if (s, p) not in style_vectors:
                raise MissingCellError(f"missing cell (seed {s}, prompt {p!r})")

    image_keys = [(s, p) for s in seeds for p in prompts]
    rows = [np.asarray(getattr(style_vectors[k], "values", style_vectors[k]), dtype=np.float64) for k in image_keys]
    X1 = np.vstack(rows)
    per_image_pts, params1 = _reduce_stage(X1, perplexity, iters, rng_seed, pca_dim)
    per_image = Embedding(points=per_image_pts, method_tag="pca_then_tsne", params=params1, rng_seed=rng_seed)

    per_image_map = {k: per_image_pts[i] for i, k in enumerate(image_keys)}
    X2, agg_seeds = aggregate_seed_style(per_image_map, prompts)
    stage2_seed = rng.derive_seed(rng_seed, 1)
    per_seed_pts, params2 = _reduce_stage(X2, perplexity, iters, stage2_seed, pca_dim)
    per_seed = Embedding(points=per_seed_pts, method_tag="pca_then_tsne", params=params2, rng_seed=stage2_seed)

    return TwoStageResult(per_image=per_image, per_seed=per_seed, image_keys=image_keys, seeds=agg_seeds)


def _reduce_stage(X: np.ndarray, perplexity: float, iters: int, rng_seed: int, pca_dim: int):
    n, d = X.shape
    k = min(pca_dim, d, n)
    reduced = PCA(n_components=k).fit_transform(X)
    eff_perplexity = clamp_perplexity(perplexity, n)
    points = TSNE(perplexity=eff_perplexity, n_iter=iters, rng_seed=rng_seed).fit_transform(reduced)
    params = {"pca_dim": k, "perplexity": eff_perplexity, "n_iter": iters}
    return points, params
