"""On-disk corpus data model: manifest and tensor container.

The manifest is a single UTF-8 JSON document indexing generated images by
(seed, prompt) with per-image artifact paths and metric scores. Dense
arrays travel in a self-describing binary container:

    bytes 0..7    magic ``SDLB0001``
    bytes 8..11   u32 little-endian header length
    header        UTF-8 JSON ``{"dtype":"f32","shape":[...]}``
    payload       raw float32, little-endian, row-major

Only f32 is supported; masks are stored as f32 in {0.0, 1.0}. Artifact
paths are stored relative to the manifest's directory (absolute paths are
honored as-is). Readers are thread-safe; writers assume exclusive access
to their target path.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, TruncationError, ValidationError, VersionError

MAGIC = b"SDLB0001"
MANIFEST_FORMAT_VERSION = 1

PROMPT_KINDS = ("dense_caption", "parti", "synthetic", "inpaint_removal", "inpaint_completion")

# Artifact kinds understood by the toolkit. feature_maps keys may carry a
# layer suffix, e.g. "feature_maps.relu2_2".
ARTIFACT_KINDS = ("feature_maps", "pooled_embedding", "mask", "depth", "ocr_boxes", "preference_score")

_JSON_ARTIFACTS = {"ocr_boxes", "preference_score"}


# ---------------------------------------------------------------------------
# Tensor container


@dataclass(frozen=True)
class TensorBlob:
    """A dense float32 array plus its declared shape."""

    shape: tuple[int, ...]
    data: bytes
    dtype: str = "f32"

    def __post_init__(self):
        if self.dtype != "f32":
            raise ValidationError(f"unsupported dtype {self.dtype!r}; only f32 in v1")
        if len(self.shape) == 0:
            raise ValidationError("shape must have at least one dimension")
        if any(int(d) <= 0 for d in self.shape):
            raise ValidationError(f"shape dims must be positive, got {self.shape}")
        expected = 4 * int(np.prod(self.shape))
        if len(self.data) != expected:
            raise ValidationError(
                f"payload is {len(self.data)} bytes, shape {self.shape} requires {expected}"
            )

    @classmethod
    def from_array(cls, arr) -> "TensorBlob":
        a = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
        if a.ndim == 0:
            raise ValidationError("0-dimensional arrays are not supported")
        return cls(shape=tuple(int(d) for d in a.shape), data=a.tobytes())

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype="<f4").reshape(self.shape).copy()


def write_tensor(blob_or_array, path) -> None:
    """Write a TensorBlob (or array coercible to one) to `path`."""
    blob = blob_or_array if isinstance(blob_or_array, TensorBlob) else TensorBlob.from_array(blob_or_array)
    header = json.dumps({"dtype": blob.dtype, "shape": list(blob.shape)}, separators=(",", ":"), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(blob.data)


def read_tensor_header(path) -> tuple[str, tuple[int, ...], int]:
    """Parse magic + header only; returns (dtype, shape, payload_offset)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise ParseError(f"{path}: truncated header length")
        (header_len,) = struct.unpack("<I", raw_len)
        header_bytes = fh.read(header_len)
    if len(header_bytes) != header_len:
        raise ParseError(f"{path}: truncated header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "dtype" not in header or "shape" not in header:
        raise ParseError(f"{path}: header missing dtype/shape")
    dtype = header["dtype"]
    if dtype != "f32":
        raise ParseError(f"{path}: unsupported dtype {dtype!r}")
    shape = header["shape"]
    if (
        not isinstance(shape, list)
        or len(shape) == 0
        or not all(isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in shape)
    ):
        raise ParseError(f"{path}: shape must be a non-empty list of positive integers")
    return dtype, tuple(shape), 12 + header_len


def read_tensor(path) -> TensorBlob:
    """Read a container file; inverse of write_tensor, bit-exact."""
    dtype, shape, offset = read_tensor_header(path)
    expected = 4 * int(np.prod(shape))
    with open(path, "rb") as fh:
        fh.seek(offset)
        payload = fh.read(expected + 1)
    if len(payload) < expected:
        raise TruncationError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise ParseError(f"{path}: {len(payload) - expected}+ trailing bytes after payload")
    return TensorBlob(shape=shape, data=payload, dtype=dtype)


def read_array(path) -> np.ndarray:
    return read_tensor(path).to_array()


# ---------------------------------------------------------------------------
# Manifest


@dataclass(frozen=True)
class PromptRecord:
    prompt_id: str
    text: str
    prompt_kind: str
    object_category: str | None = None
    modifier: str | None = None

    def __post_init__(self):
        if self.prompt_kind not in PROMPT_KINDS:
            raise ValidationError(f"unknown prompt_kind {self.prompt_kind!r}")
        if self.prompt_kind == "synthetic" and self.object_category is None:
            raise ValidationError(f"prompt {self.prompt_id!r}: synthetic prompts need object_category")


@dataclass(frozen=True)
class ImageRecord:
    seed: int
    prompt_id: str
    image_path: str
    artifacts: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)


@dataclass
class CorpusManifest:
    num_seeds: int
    model_name: str
    prompt_set_id: str
    prompts: list
    images: list
    format_version: int = MANIFEST_FORMAT_VERSION
    root: Path | None = None  # directory artifact paths resolve against; not serialized

    def __post_init__(self):
        self._validate()
        self._prompt_index = {p.prompt_id: p for p in self.prompts}

    def _validate(self):
        if self.num_seeds < 1:
            raise ValidationError("num_seeds must be positive")
        prompt_ids = [p.prompt_id for p in self.prompts]
        if len(set(prompt_ids)) != len(prompt_ids):
            raise ValidationError("duplicate prompt_id in prompts")
        known = set(prompt_ids)
        seen = set()
        for rec in self.images:
            if not 0 <= rec.seed < self.num_seeds:
                raise ValidationError(f"seed {rec.seed} outside [0, {self.num_seeds})")
            if rec.prompt_id not in known:
                raise ValidationError(f"image references unknown prompt_id {rec.prompt_id!r}")
            key = (rec.seed, rec.prompt_id)
            if key in seen:
                raise ValidationError(f"duplicate (seed, prompt_id) = {key}")
            seen.add(key)

    def prompt(self, prompt_id: str) -> PromptRecord:
        return self._prompt_index[prompt_id]

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p

    def artifact_path(self, rec: ImageRecord, kind: str) -> Path | None:
        """Resolve an artifact by exact key; None if absent."""
        if kind in rec.artifacts:
            return self.resolve(rec.artifacts[kind])
        return None

    def artifact_keys(self, rec: ImageRecord, kind: str) -> list:
        """All artifact keys matching a kind, including layer-suffixed ones."""
        return sorted(k for k in rec.artifacts if k == kind or k.startswith(kind + "."))


def _require(obj: dict, key: str, types, where: str):
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types):
        raise ParseError(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    return value


def manifest_from_dict(doc: dict, root: Path | None = None) -> CorpusManifest:
    if not isinstance(doc, dict):
        raise ParseError("manifest root must be a JSON object")
    version = _require(doc, "format_version", int, "manifest")
    if version != MANIFEST_FORMAT_VERSION:
        raise VersionError(f"unknown format_version {version}")
    prompts = []
    for i, p in enumerate(_require(doc, "prompts", list, "manifest")):
        where = f"prompts[{i}]"
        if not isinstance(p, dict):
            raise ParseError(f"{where}: not an object")
        prompts.append(
            PromptRecord(
                prompt_id=_require(p, "prompt_id", str, where),
                text=_require(p, "text", str, where),
                prompt_kind=_require(p, "prompt_kind", str, where),
                object_category=p.get("object_category"),
                modifier=p.get("modifier"),
            )
        )
    images = []
    for i, rec in enumerate(_require(doc, "images", list, "manifest")):
        where = f"images[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: not an object")
        artifacts = rec.get("artifacts", {})
        scores = rec.get("scores", {})
        if not isinstance(artifacts, dict) or not all(isinstance(v, str) for v in artifacts.values()):
            raise ParseError(f"{where}: artifacts must map kind -> path")
        if not isinstance(scores, dict) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in scores.values()):
            raise ParseError(f"{where}: scores must map metric -> number")
        images.append(
            ImageRecord(
                seed=_require(rec, "seed", int, where),
                prompt_id=_require(rec, "prompt_id", str, where),
                image_path=_require(rec, "image_path", str, where),
                artifacts=dict(artifacts),
                scores={k: float(v) for k, v in scores.items()},
            )
        )
    return CorpusManifest(
        num_seeds=_require(doc, "num_seeds", int, "manifest"),
        model_name=_require(doc, "model_name", str, "manifest"),
        prompt_set_id=_require(doc, "prompt_set_id", str, "manifest"),
        prompts=prompts,
        images=images,
        format_version=version,
        root=root,
    )


def manifest_to_dict(manifest: CorpusManifest) -> dict:
    return {
        "format_version": manifest.format_version,
        "num_seeds": manifest.num_seeds,
        "model_name": manifest.model_name,
        "prompt_set_id": manifest.prompt_set_id,
        "prompts": [
            {
                "prompt_id": p.prompt_id,
                "text": p.text,
                "prompt_kind": p.prompt_kind,
                **({"object_category": p.object_category} if p.object_category is not None else {}),
                **({"modifier": p.modifier} if p.modifier is not None else {}),
            }
            for p in manifest.prompts
        ],
        "images": [
            {
                "seed": rec.seed,
                "prompt_id": rec.prompt_id,
                "image_path": rec.image_path,
                "artifacts": dict(sorted(rec.artifacts.items())),
                "scores": dict(sorted(rec.scores.items())),
            }
            for rec in manifest.images
        ],
    }


def load_manifest(path) -> CorpusManifest:
    """Parse and validate a manifest file. Image order is preserved."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    return manifest_from_dict(doc, root=path.parent)


def save_manifest(manifest: CorpusManifest, path) -> None:
    path = Path(path)
    payload = json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    path.write_text(payload, encoding="utf-8")


# ---------------------------------------------------------------------------
# Corpus validation


@dataclass(frozen=True)
class ValidationIssue:
    seed: int
    prompt_id: str
    kind: str
    path: str | None
    reason: str


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "issues": [
                {"seed": i.seed, "prompt_id": i.prompt_id, "kind": i.kind, "path": i.path, "reason": i.reason}
                for i in self.issues
            ],
        }


def _check_artifact(manifest: CorpusManifest, kind: str, rel_path: str) -> str | None:
    """Returns a failure reason, or None if the artifact is readable."""
    full = manifest.resolve(rel_path)
    if not full.exists():
        return "missing file"
    base_kind = kind.split(".", 1)[0]
    try:
        if base_kind in _JSON_ARTIFACTS:
            json.loads(full.read_text(encoding="utf-8"))
        else:
            read_tensor_header(full)
    except (ParseError, OSError, json.JSONDecodeError) as exc:
        return f"unreadable: {exc}"
    return None


def validate_corpus(manifest: CorpusManifest, required_artifacts) -> ValidationReport:
    """Report missing or unreadable required artifacts per (seed, prompt).

    Enlarging ``required_artifacts`` can only grow the report. feature_maps
    requirements are satisfied by any ``feature_maps.<layer>`` key.
    """
    required = sorted(set(required_artifacts))
    report = ValidationReport()
    for rec in manifest.images:
        for kind in required:
            keys = manifest.artifact_keys(rec, kind)
            if not keys:
                report.issues.append(ValidationIssue(rec.seed, rec.prompt_id, kind, None, "artifact not in manifest"))
                continue
            for key in keys:
                reason = _check_artifact(manifest, key, rec.artifacts[key])
                if reason is not None:
                    report.issues.append(ValidationIssue(rec.seed, rec.prompt_id, key, rec.artifacts[key], reason))
    return report
