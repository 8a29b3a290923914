"""Command-line front end composing the pipeline into reproducible runs.

Every command writes its primary outputs plus a ``run_config.json`` echo
(command, params, input content hashes, toolkit version) into the output
directory; ``seedscope rerun run_config.json`` re-executes the run and
reproduces the outputs byte-for-byte. There is no ambient randomness:
anything stochastic takes an explicit ``--rng-seed``.

Exit codes: 0 success, 1 usage, 2 validation, 3 numeric, 4 io. Errors are
reported as one JSON object on stderr.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__, composition, ddim, dimred, inpaint, quality, selection, style
from .corpus import load_manifest, validate_corpus, write_tensor
from .errors import NumericalError, SeedscopeError, ValidationError
from .quality import GaussianStats, SeedRanking, gaussian_stats
from .selection import SeedFeature, SeedPool

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


@dataclass
class RunResult:
    inputs: dict = field(default_factory=dict)  # label -> path actually read
    exit_code: int = 0
    message: str | None = None


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_list(text: str | None) -> list:
    if not text:
        return []
    return [item.strip() for item in text.split(",") if item.strip()]


def _parse_int_list(text: str | None) -> list:
    return [int(item) for item in _parse_list(text)]


def _embedding_sidecar(emb: dimred.Embedding, extra: dict) -> dict:
    return {"method_tag": emb.method_tag, "params": emb.params, "rng_seed": emb.rng_seed, **extra}


def _load_ranking(path) -> SeedRanking:
    return SeedRanking.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_seed_features(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "seeds" not in doc or "vectors" not in doc or len(doc["seeds"]) != len(doc["vectors"]):
        raise ValidationError(f"{path}: expected matching 'seeds' and 'vectors' lists")
    return [SeedFeature(seed=int(s), f=np.asarray(v, dtype=np.float64))
            for s, v in zip(doc["seeds"], doc["vectors"])]


# ---------------------------------------------------------------------------
# Runners (shared by the click commands and `rerun`)


def _run_validate(params: dict, out: Path) -> RunResult:
    manifest = load_manifest(params["manifest"])
    report = validate_corpus(manifest, set(params.get("require", [])))
    _write_json(out / "validation_report.json", report.to_dict())
    result = RunResult(inputs={"manifest": params["manifest"]})
    if not report.ok:
        result.exit_code = EXIT_VALIDATION
        result.message = f"corpus incomplete: {len(report.issues)} missing or unreadable artifacts"
    return result


def _run_style_embed(params: dict, out: Path) -> RunResult:
    manifest = load_manifest(params["manifest"])
    layers = params.get("layers") or None
    vectors = style.style_vectors_from_manifest(manifest, layers=layers)
    result = dimred.two_stage_seed_embedding(
        vectors,
        perplexity=params["perplexity"],
        iters=params["iters"],
        rng_seed=params["rng_seed"],
        pca_dim=params["pca_dim"],
    )
    write_tensor(result.per_image.points, out / "per_image_embedding.sdlb")
    write_tensor(result.per_seed.points, out / "per_seed_embedding.sdlb")
    _write_json(out / "per_image_embedding.json",
                _embedding_sidecar(result.per_image, {"keys": [[s, p] for s, p in result.image_keys]}))
    _write_json(out / "per_seed_embedding.json",
                _embedding_sidecar(result.per_seed, {"seeds": result.seeds}))
    _write_json(out / "seed_features.json",
                {"source": "style", "seeds": result.seeds,
                 "vectors": [[float(v) for v in row] for row in result.per_seed.points]})
    return RunResult(inputs={"manifest": params["manifest"]})


def _load_reference_stats(params: dict) -> tuple[GaussianStats, dict]:
    stats_path = params.get("real_stats")
    feats_path = params.get("real_features")
    if (stats_path is None) == (feats_path is None):
        raise click.UsageError("exactly one of --real-stats / --real-features is required")
    if stats_path is not None:
        stats = GaussianStats.from_dict(json.loads(Path(stats_path).read_text(encoding="utf-8")))
        return stats, {"real_stats": stats_path}
    from .corpus import read_array

    stats = gaussian_stats(read_array(feats_path), ddof=params.get("ddof", 1))
    return stats, {"real_features": feats_path}


def _run_fid_rank(params: dict, out: Path) -> RunResult:
    manifest = load_manifest(params["manifest"])
    stats, inputs = _load_reference_stats(params)
    prompt_ids = set(params["prompt_ids"]) if params.get("prompt_ids") else None
    ranking, excluded = quality.fid_per_seed(manifest, stats, prompt_ids=prompt_ids,
                                             ddof=params.get("ddof", 1))
    _write_json(out / "ranking.json", ranking.to_dict())
    _write_json(out / "excluded.json",
                [{"seed": e.seed, "reason": e.reason, "n_images": e.n_images} for e in excluded])
    inputs["manifest"] = params["manifest"]
    return RunResult(inputs=inputs)


def _run_score_rank(params: dict, out: Path) -> RunResult:
    manifest = load_manifest(params["manifest"])
    prompt_ids = set(params["prompt_ids"]) if params.get("prompt_ids") else None
    ranking = quality.score_per_seed(manifest, params["metric"], prompt_ids=prompt_ids)
    _write_json(out / "ranking.json", ranking.to_dict())
    return RunResult(inputs={"manifest": params["manifest"]})


def _run_stability(params: dict, out: Path) -> RunResult:
    ra = _load_ranking(params["ranking_a"])
    rb = _load_ranking(params["ranking_b"])
    ks = params.get("ks") or [16, 64, 256]
    rho, overlaps = quality.rank_stability(ra, rb, ks=ks)
    _write_json(out / "stability.json",
                {"spearman_rho": rho, "top_k_overlap": {str(k): v for k, v in overlaps.items()},
                 "metric_a": ra.metric_name, "metric_b": rb.metric_name})
    return RunResult(inputs={"ranking_a": params["ranking_a"], "ranking_b": params["ranking_b"]})


def _run_golden(params: dict, out: Path) -> RunResult:
    ra = _load_ranking(params["ranking_a"])
    rb = _load_ranking(params["ranking_b"])
    pool = selection.golden_seeds(ra, rb, params["m"])
    pool.provenance["ranking_files"] = [params["ranking_a"], params["ranking_b"]]
    _write_json(out / "pool.json", pool.to_dict())
    return RunResult(inputs={"ranking_a": params["ranking_a"], "ranking_b": params["ranking_b"]})


def _run_diverse(params: dict, out: Path) -> RunResult:
    features = _load_seed_features(params["features"])
    pool = selection.farthest_point_seeds(
        features, params["count"], rng_seed=params["rng_seed"],
        first_seed=params.get("first_seed"), pool_kind=params.get("pool_kind", "diverse_style"),
    )
    pool.provenance["feature_file"] = params["features"]
    _write_json(out / "pool.json", pool.to_dict())
    return RunResult(inputs={"features": params["features"]})


def _run_composition(params: dict, out: Path) -> RunResult:
    manifest = load_manifest(params["manifest"])
    prompt_ids = params.get("prompt_ids") or None
    per_image = composition.composition_from_manifest(manifest, prompt_ids=prompt_ids)
    prompts = prompt_ids if prompt_ids else sorted({p for _, p in per_image})
    agg = composition.aggregate_seed_composition(per_image, prompts, policy=params.get("policy", "drop"))
    write_tensor(agg.matrix, out / "aggregate.sdlb")
    _write_json(out / "composition.json", agg.to_dict())
    if params.get("embed") and agg.matrix.shape[0] >= 4:
        n, d = agg.matrix.shape
        k = min(params["pca_dim"], d, n)
        reduced = dimred.PCA(n_components=k).fit_transform(agg.matrix)
        perplexity = dimred.clamp_perplexity(params["perplexity"], n)
        points = dimred.TSNE(perplexity=perplexity, n_iter=params["iters"],
                             rng_seed=params["rng_seed"]).fit_transform(reduced)
        write_tensor(points, out / "per_seed_embedding.sdlb")
        vectors = points
    else:
        vectors = agg.matrix
    _write_json(out / "seed_features.json",
                {"source": "composition", "seeds": agg.row_seeds,
                 "vectors": [[float(v) for v in row] for row in vectors]})
    return RunResult(inputs={"manifest": params["manifest"]})


def _run_inpaint_rank(params: dict, out: Path) -> RunResult:
    manifest = load_manifest(params["manifest"])
    report = inpaint.rank_seeds_by_artifacts(manifest, min_confidence=params["min_confidence"])
    _write_json(out / "artifact_report.json", report.to_dict())
    return RunResult(inputs={"manifest": params["manifest"]})


def _make_denoiser(name: str, dim: int):
    if name == "point_mass":
        return ddim.PointMassDenoiser(target=np.zeros(dim))
    if name == "gmm":
        if dim != 2:
            raise ValidationError("the gmm toy denoiser is 2-D; use --dim 2")
        return ddim.GaussianMixtureDenoiser(means=[[2.0, 2.0], [-2.0, 2.0], [0.0, -2.0]], component_std=0.2)
    raise ValidationError(f"unknown denoiser {name!r}")


def _run_ddim_sim(params: dict, out: Path) -> RunResult:
    schedule = ddim.DiffusionSchedule.linear_beta(
        T=params["steps"], beta_start=params["beta_start"], beta_end=params["beta_end"],
        eta=params["eta"],
    )
    denoiser = _make_denoiser(params["denoiser"], params["dim"])
    report = ddim.seed_swap_experiment(
        denoiser, schedule, params["seed_i"], params["seed_j"], params["swap_steps"],
        params["dim"], mode=params.get("mode", "advanced"),
    )
    _write_json(out / "report.json", report.to_dict())
    if params.get("dump_trajectory"):
        bound = denoiser.bind(schedule)
        traj = ddim.sample(bound, schedule, ddim.NoiseStream(params["seed_i"]), params["dim"])
        write_tensor(np.vstack(traj.states), out / "trajectory_baseline.sdlb")
    return RunResult()


def _run_probe(params: dict, out: Path) -> RunResult:
    manifest = load_manifest(params["manifest"])
    layers = params.get("layers") or None
    vectors = style.style_vectors_from_manifest(manifest, layers=layers)
    accuracy = quality.seed_probe_accuracy(vectors, set(params["train_prompts"]), set(params["test_prompts"]))
    n_seeds = len({s for s, _ in vectors})
    _write_json(out / "probe.json",
                {"accuracy": accuracy, "n_seeds": n_seeds, "chance": 1.0 / n_seeds,
                 "train_prompts": sorted(params["train_prompts"]),
                 "test_prompts": sorted(params["test_prompts"])})
    return RunResult(inputs={"manifest": params["manifest"]})


COMMANDS = {
    "validate": _run_validate,
    "style-embed": _run_style_embed,
    "fid-rank": _run_fid_rank,
    "score-rank": _run_score_rank,
    "stability": _run_stability,
    "golden": _run_golden,
    "diverse": _run_diverse,
    "composition": _run_composition,
    "inpaint-rank": _run_inpaint_rank,
    "ddim-sim": _run_ddim_sim,
    "probe": _run_probe,
}


def _execute(command: str, params: dict, out: str) -> None:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = COMMANDS[command](params, out_dir)
    echo = {
        "command": command,
        "params": params,
        "inputs": {label: {"path": str(p), "sha256": _sha256(p)} for label, p in sorted(result.inputs.items())},
        "toolkit_version": __version__,
    }
    _write_json(out_dir / "run_config.json", echo)
    if result.exit_code != 0:
        raise _CommandFailed(result.exit_code, result.message or "command failed")


class _CommandFailed(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


# ---------------------------------------------------------------------------
# click surface


@click.group(name="seedscope")
@click.version_option(__version__)
def cli():
    """Seed analysis and seed selection for diffusion inference."""


def _out_option(f):
    return click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")(f)


@cli.command("validate")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--require", default="", help="Comma-separated artifact kinds that must be present.")
@_out_option
def validate_cmd(manifest, require, out):
    """Check corpus completeness for the required artifact kinds."""
    _execute("validate", {"manifest": manifest, "require": _parse_list(require)}, out)


@cli.command("style-embed")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--layers", default="", help="Comma-separated feature-map layers (default: discover).")
@click.option("--perplexity", default=30.0, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--pca-dim", default=50, show_default=True)
@click.option("--rng-seed", default=0, show_default=True)
@_out_option
def style_embed_cmd(manifest, layers, perplexity, iters, pca_dim, rng_seed, out):
    """Two-stage style embedding: per-image and per-seed 2-D points."""
    _execute("style-embed", {"manifest": manifest, "layers": _parse_list(layers),
                             "perplexity": perplexity, "iters": iters, "pca_dim": pca_dim,
                             "rng_seed": rng_seed}, out)


@cli.command("fid-rank")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--real-stats", default=None, type=click.Path(dir_okay=False),
              help="Reference Gaussian stats JSON ({mean, cov, n}).")
@click.option("--real-features", default=None, type=click.Path(dir_okay=False),
              help="Reference feature matrix blob to fit stats from.")
@click.option("--prompt-ids", default="", help="Comma-separated prompt filter.")
@click.option("--ddof", default=1, show_default=True, help="Covariance divisor is n-ddof.")
@_out_option
def fid_rank_cmd(manifest, real_stats, real_features, prompt_ids, ddof, out):
    """Rank seeds by Fréchet distance of their embeddings to a reference."""
    _execute("fid-rank", {"manifest": manifest, "real_stats": real_stats,
                          "real_features": real_features, "prompt_ids": _parse_list(prompt_ids),
                          "ddof": ddof}, out)


@cli.command("score-rank")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--metric", required=True, help="Score name carried by the manifest (e.g. hpsv2).")
@click.option("--prompt-ids", default="")
@_out_option
def score_rank_cmd(manifest, metric, prompt_ids, out):
    """Rank seeds by their mean ingested preference score."""
    _execute("score-rank", {"manifest": manifest, "metric": metric,
                            "prompt_ids": _parse_list(prompt_ids)}, out)


@cli.command("stability")
@click.option("--ranking-a", required=True, type=click.Path(dir_okay=False))
@click.option("--ranking-b", required=True, type=click.Path(dir_okay=False))
@click.option("--ks", default="16,64,256", show_default=True)
@_out_option
def stability_cmd(ranking_a, ranking_b, ks, out):
    """Spearman rho and top-k overlap between two seed rankings."""
    _execute("stability", {"ranking_a": ranking_a, "ranking_b": ranking_b,
                           "ks": _parse_int_list(ks)}, out)


@cli.command("golden")
@click.option("--ranking-a", required=True, type=click.Path(dir_okay=False))
@click.option("--ranking-b", required=True, type=click.Path(dir_okay=False))
@click.option("--m", required=True, type=int, help="Top-m cutoff applied to both rankings.")
@_out_option
def golden_cmd(ranking_a, ranking_b, m, out):
    """Intersect the top-m seeds of two rankings into a golden pool."""
    _execute("golden", {"ranking_a": ranking_a, "ranking_b": ranking_b, "m": m}, out)


@cli.command("diverse")
@click.option("--features", required=True, type=click.Path(dir_okay=False),
              help="seed_features.json produced by style-embed or composition.")
@click.option("--count", default=4, show_default=True)
@click.option("--rng-seed", default=0, show_default=True)
@click.option("--first-seed", default=None, type=int, help="Force the first selected seed.")
@click.option("--pool-kind", default="diverse_style", show_default=True,
              type=click.Choice(["diverse_style", "diverse_composition"]))
@_out_option
def diverse_cmd(features, count, rng_seed, first_seed, pool_kind, out):
    """Farthest-point sample a diverse seed pool in feature space."""
    _execute("diverse", {"features": features, "count": count, "rng_seed": rng_seed,
                         "first_seed": first_seed, "pool_kind": pool_kind}, out)


@cli.command("composition")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--prompt-ids", default="")
@click.option("--policy", default="drop", show_default=True, type=click.Choice(["drop", "impute"]))
@click.option("--embed/--no-embed", default=False, show_default=True,
              help="Also reduce the per-seed aggregate to 2-D.")
@click.option("--perplexity", default=30.0, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--pca-dim", default=50, show_default=True)
@click.option("--rng-seed", default=0, show_default=True)
@_out_option
def composition_cmd(manifest, prompt_ids, policy, embed, perplexity, iters, pca_dim, rng_seed, out):
    """Aggregate per-image composition features into per-seed rows."""
    _execute("composition", {"manifest": manifest, "prompt_ids": _parse_list(prompt_ids),
                             "policy": policy, "embed": embed, "perplexity": perplexity,
                             "iters": iters, "pca_dim": pca_dim, "rng_seed": rng_seed}, out)


@cli.command("inpaint-rank")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--min-confidence", default=0.5, show_default=True)
@_out_option
def inpaint_rank_cmd(manifest, min_confidence, out):
    """Rank seeds by mean text-artifact ratio inside inpainting masks."""
    _execute("inpaint-rank", {"manifest": manifest, "min_confidence": min_confidence}, out)


@cli.command("ddim-sim")
@click.option("--eta", default=0.0, show_default=True)
@click.option("--steps", default=40, show_default=True)
@click.option("--swap-steps", required=True, help="Comma-separated swap steps, e.g. 10,20,30.")
@click.option("--seed-i", default=0, show_default=True)
@click.option("--seed-j", default=1, show_default=True)
@click.option("--dim", default=2, show_default=True)
@click.option("--denoiser", default="gmm", show_default=True, type=click.Choice(["point_mass", "gmm"]))
@click.option("--mode", default="advanced", show_default=True, type=click.Choice(["advanced", "fresh"]))
@click.option("--beta-start", default=1e-4, show_default=True)
@click.option("--beta-end", default=0.02, show_default=True)
@click.option("--dump-trajectory", is_flag=True, default=False)
@_out_option
def ddim_sim_cmd(eta, steps, swap_steps, seed_i, seed_j, dim, denoiser, mode, beta_start,
                 beta_end, dump_trajectory, out):
    """Run the seed-swap experiment on the toy DDIM sandbox."""
    _execute("ddim-sim", {"eta": eta, "steps": steps, "swap_steps": _parse_int_list(swap_steps),
                          "seed_i": seed_i, "seed_j": seed_j, "dim": dim, "denoiser": denoiser,
                          "mode": mode, "beta_start": beta_start, "beta_end": beta_end,
                          "dump_trajectory": dump_trajectory}, out)


@cli.command("probe")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--train-prompts", required=True, help="Comma-separated prompt ids.")
@click.option("--test-prompts", required=True, help="Comma-separated prompt ids.")
@click.option("--layers", default="")
@_out_option
def probe_cmd(manifest, train_prompts, test_prompts, layers, out):
    """Nearest-centroid seed distinguishability on held-out prompts."""
    _execute("probe", {"manifest": manifest, "train_prompts": _parse_list(train_prompts),
                       "test_prompts": _parse_list(test_prompts), "layers": _parse_list(layers)}, out)


@cli.command("rerun")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", default=None, type=click.Path(file_okay=False),
              help="Output directory (default: the config file's directory).")
def rerun_cmd(config, out):
    """Re-execute a run from its run_config.json echo."""
    config_path = Path(config)
    echo = json.loads(config_path.read_text(encoding="utf-8"))
    if "command" not in echo or echo["command"] not in COMMANDS:
        raise ValidationError(f"{config}: not a seedscope run config")
    _execute(echo["command"], echo["params"], out or str(config_path.parent))


def _emit_error(kind: str, message: str, exit_code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": exit_code}) + "\n")


def main(argv=None) -> None:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        _emit_error("UsageError", exc.format_message(), EXIT_USAGE)
        sys.exit(EXIT_USAGE)
    except _CommandFailed as exc:
        _emit_error("ValidationError", str(exc), exc.exit_code)
        sys.exit(exc.exit_code)
    except NumericalError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_NUMERIC)
        sys.exit(EXIT_NUMERIC)
    except SeedscopeError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_VALIDATION)
        sys.exit(EXIT_VALIDATION)
    except OSError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_IO)
        sys.exit(EXIT_IO)


if __name__ == "__main__":
    main()
