"""On-disk and wire formats: sample manifests, detector instruction pairs,
decomposition inference inputs, detector-output parsing, and dataset indexing.

All writers are canonical (sorted keys, compact separators, UTF-8, LF) so
equal in-memory values always serialize to identical bytes. Paths stored in
manifests and indexes are relative to the dataset root.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .geometry import BBox, CanvasSize, clamp_to_canvas, quantize_box

log = logging.getLogger(__name__)

SAMPLES_DIRNAME = "samples"
MANIFEST_NAME = "manifest.json"
INDEX_NAME = "index.jsonl"
ERROR_NAME = "error.txt"

DETECTOR_INSTRUCTION_TEMPLATE = (
    "<image> This image is {width} pixels in width and {height} pixels in "
    "height. First describe the whole image in one detailed caption "
    "(whole_caption). Then list the bounding box for each visible layer or "
    "object in the image. Each box is in the format [x0, y0, x1, y1]. Output "
    'a single JSON object with exactly two keys: "whole_caption" and "boxes". '
    "Output only this JSON, no other text or markdown."
)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


@dataclass
class ManifestLayer:
    index: int
    source: str
    box: BBox
    quantized_box: BBox
    caption: str
    image_path: str
    overlap_score: float


@dataclass
class SampleManifest:
    sample_id: str
    seed: int
    canvas: CanvasSize
    composite_path: str
    background_path: str
    layers: list[ManifestLayer]
    raw_caption: str
    refined_caption: Optional[str] = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "seed": self.seed,
            "canvas": list(self.canvas),
            "composite_path": self.composite_path,
            "background_path": self.background_path,
            "layers": [
                {
                    "index": l.index,
                    "source": l.source,
                    "box": list(l.box),
                    "quantized_box": list(l.quantized_box),
                    "caption": l.caption,
                    "image_path": l.image_path,
                    "overlap_score": round(float(l.overlap_score), 6),
                }
                for l in self.layers
            ],
            "raw_caption": self.raw_caption,
            "refined_caption": self.refined_caption,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleManifest":
        return cls(
            sample_id=str(d["sample_id"]),
            seed=int(d["seed"]),
            canvas=CanvasSize(*(int(v) for v in d["canvas"])),
            composite_path=str(d["composite_path"]),
            background_path=str(d["background_path"]),
            layers=[
                ManifestLayer(
                    index=int(l["index"]),
                    source=str(l["source"]),
                    box=BBox(*(int(v) for v in l["box"])),
                    quantized_box=BBox(*(int(v) for v in l["quantized_box"])),
                    caption=str(l["caption"]),
                    image_path=str(l["image_path"]),
                    overlap_score=float(l["overlap_score"]),
                )
                for l in d["layers"]
            ],
            raw_caption=str(d["raw_caption"]),
            refined_caption=d.get("refined_caption"),
            flags=[str(f) for f in d.get("flags", [])],
        )


def manifest_path(out_dir: Union[str, Path], sample_id: str) -> Path:
    return Path(out_dir) / SAMPLES_DIRNAME / sample_id / MANIFEST_NAME


def write_manifest(manifest: SampleManifest, out_dir: Union[str, Path]) -> Path:
    """Write the per-sample manifest as canonical JSON (one trailing newline)."""
    if not manifest.layers:
        raise ValueError(f"manifest {manifest.sample_id} has no layers")
    path = manifest_path(out_dir, manifest.sample_id)
    return write_text(path, canonical_json(manifest.to_dict()) + "\n")


def read_manifest(path: Union[str, Path]) -> SampleManifest:
    return SampleManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class DetectorPair:
    """One instruction-following training pair for the box/caption detector."""

    image_path: str
    instruction: str
    target: dict

    def to_json_line(self) -> str:
        return canonical_json(
            {
                "image": self.image_path,
                "instruction": self.instruction,
                "target": self.target,
            }
        )


def build_detector_pair(manifest: SampleManifest) -> DetectorPair:
    """Pair the composite with its caption and foreground boxes (raw, z-order);
    composite/background full-canvas boxes are excluded from the target."""
    caption = manifest.refined_caption or manifest.raw_caption
    return DetectorPair(
        image_path=manifest.composite_path,
        instruction=DETECTOR_INSTRUCTION_TEMPLATE.format(
            width=manifest.canvas.width, height=manifest.canvas.height
        ),
        target={
            "whole_caption": caption,
            "boxes": [list(l.box) for l in manifest.layers],
        },
    )


class DetectorOutputError(ValueError):
    """Detector output that stays unparseable after bounded repair."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


_FENCE_RE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n?(.*?)\n?\s*```\s*$", re.DOTALL)
_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")


def _strip_code_fences(text: str) -> str:
    m = _FENCE_RE.match(text)
    return m.group(1) if m else text


def parse_detector_output(
    raw: str, canvas: CanvasSize
) -> tuple[str, list[BBox]]:
    """Parse a detector completion into (caption, boxes).

    Repair is bounded to fence stripping, trailing-comma removal, and
    single-to-double quote normalization. Boxes are clamped to the canvas;
    boxes degenerating to zero extent are dropped with a diagnostic.
    """
    candidates = [raw]
    stripped = _strip_code_fences(raw.strip())
    candidates.append(stripped)
    candidates.append(_TRAILING_COMMA_RE.sub(r"\1", stripped))
    candidates.append(_TRAILING_COMMA_RE.sub(r"\1", stripped).replace("'", '"'))

    obj = None
    for candidate in candidates:
        try:
            obj = json.loads(candidate)
            break
        except (json.JSONDecodeError, ValueError):
            continue
    if not isinstance(obj, dict):
        raise DetectorOutputError("detector output is not a JSON object", raw)
    if "whole_caption" not in obj or "boxes" not in obj:
        raise DetectorOutputError(
            "detector output missing whole_caption/boxes keys", raw
        )
    caption = obj["whole_caption"]
    boxes_raw = obj["boxes"]
    if not isinstance(caption, str) or not isinstance(boxes_raw, list):
        raise DetectorOutputError("whole_caption/boxes have wrong types", raw)
    extra = set(obj) - {"whole_caption", "boxes"}
    if extra:
        log.warning("detector output has extra keys %s; ignored", sorted(extra))

    boxes: list[BBox] = []
    for i, entry in enumerate(boxes_raw):
        if not isinstance(entry, (list, tuple)) or len(entry) != 4:
            raise DetectorOutputError(f"box {i} is not a 4-element list", raw)
        try:
            b = BBox(*(int(round(float(v))) for v in entry))
        except (TypeError, ValueError):
            raise DetectorOutputError(f"box {i} has non-numeric coordinates", raw)
        clamped = clamp_to_canvas(b, canvas)
        if clamped is None:
            log.warning("dropping degenerate predicted box %s", list(b))
            continue
        boxes.append(clamped)
    return caption, boxes


@dataclass
class InferenceInput:
    """One decomposition-inference line: caption plus 16-aligned boxes, the
    first two spanning the full canvas (composite and background)."""

    image_path: str
    caption: str
    boxes: list[BBox]

    def to_json_line(self) -> str:
        return canonical_json(
            {
                "image": self.image_path,
                "caption": self.caption,
                "boxes": [list(b) for b in self.boxes],
            }
        )


def build_inference_input(
    caption: str,
    boxes: Sequence[BBox],
    canvas: CanvasSize,
    image_path: str = "",
) -> InferenceInput:
    full = BBox(0, 0, canvas.width, canvas.height)
    return InferenceInput(
        image_path=image_path,
        caption=caption,
        boxes=[full, full] + [quantize_box(b, canvas) for b in boxes],
    )


def _index_line(out_dir: Path, sample_id: str) -> dict:
    sample_dir = out_dir / SAMPLES_DIRNAME / sample_id
    mpath = sample_dir / MANIFEST_NAME
    if mpath.is_file():
        try:
            m = read_manifest(mpath)
            return {
                "sample_id": m.sample_id,
                "status": "ok",
                "seed": m.seed,
                "layer_count": len(m.layers),
                "composite": m.composite_path,
                "manifest": f"{SAMPLES_DIRNAME}/{sample_id}/{MANIFEST_NAME}",
                "flags": list(m.flags),
            }
        except Exception as exc:
            return {
                "sample_id": sample_id,
                "status": "failed",
                "error": f"unreadable manifest: {exc}",
            }
    error_path = sample_dir / ERROR_NAME
    error = (
        error_path.read_text(encoding="utf-8").strip()
        if error_path.is_file()
        else "missing manifest"
    )
    return {"sample_id": sample_id, "status": "failed", "error": error}


def build_index(out_dir: Union[str, Path]) -> Path:
    """Scan out_dir/samples and write index.jsonl, one summary line per sample
    in ascending id order. Samples without a readable manifest become failed
    entries rather than aborting the build."""
    out_dir = Path(out_dir)
    samples_dir = out_dir / SAMPLES_DIRNAME
    ids = sorted(p.name for p in samples_dir.iterdir() if p.is_dir()) if samples_dir.is_dir() else []
    lines = [canonical_json(_index_line(out_dir, sid)) for sid in ids]
    body = "\n".join(lines) + ("\n" if lines else "")
    return write_text(out_dir / INDEX_NAME, body)


def read_index(index_path: Union[str, Path]) -> list[dict]:
    entries = []
    for line in Path(index_path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            entries.append(json.loads(line))
    return entries
