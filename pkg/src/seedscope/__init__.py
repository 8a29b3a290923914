"""seedscope: seed analysis and seed selection for diffusion inference.

Quantifies how random seeds influence image quality, style, composition,
and inpainting artifacts from precomputed per-image artifacts, and builds
curated seed pools (golden seeds, diverse seeds) for improved sampling.
"""

__version__ = "0.1.0"

from .composition import CompositionVector, aggregate_seed_composition, composition_features
from .corpus import (
    CorpusManifest,
    ImageRecord,
    PromptRecord,
    TensorBlob,
    load_manifest,
    read_tensor,
    save_manifest,
    validate_corpus,
    write_tensor,
)
from .ddim import (
    DdimTrajectory,
    DiffusionSchedule,
    GaussianMixtureDenoiser,
    NoiseStream,
    PointMassDenoiser,
    ddim_step,
    sample,
    seed_swap_experiment,
)
from .dimred import PCA, TSNE, Embedding, pca_fit_transform, tsne_embed, two_stage_seed_embedding
from .inpaint import ArtifactScore, OcrBox, rank_seeds_by_artifacts, text_artifact_ratio
from .quality import (
    GaussianStats,
    NearestCentroidSeedProbe,
    SeedRanking,
    fid_per_seed,
    frechet_distance,
    gaussian_stats,
    rank_stability,
    score_per_seed,
    seed_probe_accuracy,
)
from .selection import SeedFeature, SeedPool, diversity_similarity, farthest_point_seeds, golden_seeds
from .style import StyleVector, aggregate_seed_style, gram_matrix, style_vector

__all__ = [
    "CompositionVector",
    "aggregate_seed_composition",
    "composition_features",
    "CorpusManifest",
    "ImageRecord",
    "PromptRecord",
    "TensorBlob",
    "load_manifest",
    "read_tensor",
    "save_manifest",
    "validate_corpus",
    "write_tensor",
    "DdimTrajectory",
    "DiffusionSchedule",
    "GaussianMixtureDenoiser",
    "NoiseStream",
    "PointMassDenoiser",
    "ddim_step",
    "sample",
    "seed_swap_experiment",
    "PCA",
    "TSNE",
    "Embedding",
    "pca_fit_transform",
    "tsne_embed",
    "two_stage_seed_embedding",
    "ArtifactScore",
    "OcrBox",
    "rank_seeds_by_artifacts",
    "text_artifact_ratio",
    "GaussianStats",
    "NearestCentroidSeedProbe",
    "SeedRanking",
    "fid_per_seed",
    "frechet_distance",
    "gaussian_stats",
    "rank_stability",
    "score_per_seed",
    "seed_probe_accuracy",
    "SeedFeature",
    "SeedPool",
    "diversity_similarity",
    "farthest_point_seeds",
    "golden_seeds",
    "StyleVector",
    "aggregate_seed_style",
    "gram_matrix",
    "style_vector",
    "__version__",
]
