import json

import numpy as np
import pytest

import seedscope as ss


def write_blob(path, arr):
    ss.write_tensor(np.asarray(arr, dtype=np.float32), path)


def build_fid_corpus(root, num_seeds=8, num_prompts=6, dim=4, golden=(0, 3), offset=5.0,
                     seed=0, score_name="hpsv2"):
    """Corpus whose golden seeds draw pooled embeddings from N(0, I) while
    the rest are offset along the first axis; golden seeds also get the
    higher preference score."""
    rng = np.random.default_rng(seed)
    (root / "emb").mkdir(parents=True, exist_ok=True)
    golden = set(golden)
    prompts = [ss.PromptRecord(f"p{i}", f"prompt {i}", "dense_caption") for i in range(num_prompts)]
    images = []
    for s in range(num_seeds):
        for i in range(num_prompts):
            vec = rng.standard_normal(dim)
            if s not in golden:
                vec = vec + np.concatenate([[offset], np.zeros(dim - 1)])
            rel = f"emb/{s}_{i}.sdlb"
            write_blob(root / rel, vec)
            images.append(ss.ImageRecord(s, f"p{i}", f"img/{s}_{i}.ppm",
                                         {"pooled_embedding": rel},
                                         {score_name: 1.0 if s in golden else 0.5}))
    manifest = ss.CorpusManifest(num_seeds=num_seeds, model_name="toy", prompt_set_id="fixture",
                                 prompts=prompts, images=images)
    ss.save_manifest(manifest, root / "manifest.json")
    return root / "manifest.json"


def style_feature_map(seed_idx, num_seeds, prompt_jitter):
    """C=3 feature map (2x2 spatial) whose gram off-diagonal (0,1) equals
    cos(theta) for a seed-specific angle; prompts jitter the angle."""
    theta = np.pi * (seed_idx + 0.5) / num_seeds + prompt_jitter
    c0 = np.array([1.0, 0.0, 0.0, 0.0])
    c1 = np.array([np.cos(theta), np.sin(theta), 0.0, 0.0])
    c2 = np.array([0.0, 0.0, 1.0, 0.0])
    return np.vstack([c0, c1, c2]).reshape(3, 2, 2)


def build_style_corpus(root, num_seeds=4, num_prompts=4, jitter=0.02, seed=0):
    rng = np.random.default_rng(seed)
    (root / "fm").mkdir(parents=True, exist_ok=True)
    prompts = [ss.PromptRecord(f"p{i}", f"prompt {i}", "dense_caption") for i in range(num_prompts)]
    images = []
    for s in range(num_seeds):
        for i in range(num_prompts):
            fm = style_feature_map(s, num_seeds, jitter * rng.standard_normal())
            rel = f"fm/{s}_{i}.sdlb"
            write_blob(root / rel, fm)
            images.append(ss.ImageRecord(s, f"p{i}", f"img/{s}_{i}.ppm",
                                         {"feature_maps.relu2_2": rel}, {}))
    manifest = ss.CorpusManifest(num_seeds=num_seeds, model_name="toy", prompt_set_id="style-fixture",
                                 prompts=prompts, images=images)
    ss.save_manifest(manifest, root / "manifest.json")
    return root / "manifest.json"


def build_inpaint_corpus(root, ratios_by_seed, h=10, w=10, seed=0):
    """One inpainting image per (seed, prompt) with an OCR box sized to hit
    the requested in-mask ratio. Mask = top half of the image."""
    (root / "art").mkdir(parents=True, exist_ok=True)
    prompts = [ss.PromptRecord("rm0", "clear background", "inpaint_removal")]
    images = []
    mask = np.zeros((h, w), dtype=np.float32)
    mask[: h // 2, :] = 1.0
    for s, ratios in sorted(ratios_by_seed.items()):
        for i, ratio in enumerate(ratios):
            prompt_id = f"rm{i}"
            if prompt_id not in {p.prompt_id for p in prompts}:
                prompts.append(ss.PromptRecord(prompt_id, "clear background", "inpaint_removal"))
            mask_rel = f"art/mask_{s}_{i}.sdlb"
            write_blob(root / mask_rel, mask)
            boxes = []
            if ratio > 0:
                # cover the first `ratio` fraction of mask columns, all mask rows
                cols = round(ratio * w)
                boxes.append({"x0": 0.0, "y0": 0.0, "x1": cols / w, "y1": (h // 2) / h,
                              "text": "txt", "confidence": 0.9})
            boxes_rel = f"art/ocr_{s}_{i}.json"
            (root / boxes_rel).write_text(json.dumps(boxes), encoding="utf-8")
            images.append(ss.ImageRecord(s, prompt_id, f"img/{s}_{i}.ppm",
                                         {"mask": mask_rel, "ocr_boxes": boxes_rel}, {}))
    num_seeds = max(ratios_by_seed) + 1
    manifest = ss.CorpusManifest(num_seeds=num_seeds, model_name="toy-inpaint",
                                 prompt_set_id="inpaint-fixture", prompts=prompts, images=images)
    ss.save_manifest(manifest, root / "manifest.json")
    return root / "manifest.json"


@pytest.fixture
def fid_corpus(tmp_path):
    return build_fid_corpus(tmp_path / "corpus")


@pytest.fixture
def style_corpus(tmp_path):
    return build_style_corpus(tmp_path / "corpus")
