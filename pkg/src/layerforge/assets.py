"""Ingestion and sampling of the five asset sources feeding composition:
base designs, donor designs, image crops, pre-rendered text layers, and
foreground objects.

Each pool is a directory with a ``pool.jsonl`` sidecar, one record per line:

    {"id": str, "kind": str, "image": relative path, "caption": str,
     "layers": [{"image": path, "box": [x0, y0, x1, y1], "caption": str}]}

``layers`` is present only for base/donor records, whose ``image`` is the
background canvas. Pools are immutable after ingestion and shared read-only
across generation workers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from .geometry import BBox, CanvasSize
from .imaging import RgbaImage

log = logging.getLogger(__name__)

POOL_SIDECAR = "pool.jsonl"
IMAGE_CROP_CAP = 20_000


class SourceKind(Enum):
    BASE = "base"
    DONOR = "donor"
    IMAGE_CROP = "image-crop"
    TEXT = "text"
    FOREGROUND_OBJECT = "foreground-object"


@dataclass(frozen=True)
class SubLayer:
    """One foreground layer of a base/donor design."""

    image_path: Path
    box: BBox
    caption: str


@dataclass(frozen=True)
class AssetRecord:
    id: str
    kind: SourceKind
    image_path: Path
    caption: str
    native_size: tuple[int, int]
    layers: tuple[SubLayer, ...] = ()

    def load_image(self) -> RgbaImage:
        return RgbaImage.load_png(self.image_path)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind.value,
            "image": str(self.image_path),
            "caption": self.caption,
            "native_size": list(self.native_size),
        }
        if self.layers:
            d["layers"] = [
                {"image": str(s.image_path), "box": list(s.box), "caption": s.caption}
                for s in self.layers
            ]
        return d


@dataclass(frozen=True)
class AssetPool:
    kind: SourceKind
    records: tuple[AssetRecord, ...]
    cap: Optional[int] = None

    def __len__(self) -> int:
        return len(self.records)

    def canonical_json(self) -> str:
        """Stable serialized form; identical directory contents give identical bytes."""
        lines = [
            json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False)
            for r in self.records
        ]
        return "\n".join(lines) + "\n"


def _parse_sublayers(entry: dict, root: Path) -> tuple[SubLayer, ...]:
    subs = []
    for raw in entry.get("layers", []):
        box = BBox(*(int(v) for v in raw["box"]))
        if box.x0 >= box.x1 or box.y0 >= box.y1:
            raise ValueError(f"empty sub-layer box {list(box)}")
        subs.append(SubLayer(root / raw["image"], box, str(raw.get("caption", ""))))
    return tuple(subs)


def _decoded_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as im:
        im.load()
        return im.size


def ingest_pool(
    root: Union[str, Path], kind: SourceKind, cap: Optional[int] = None
) -> AssetPool:
    """Read a pool directory into memory: validated records, sorted by id,
    truncated to `cap` (image crops default to 20000, others uncapped).

    Unreadable or malformed records are skipped with a logged diagnostic;
    a pool with zero valid records is an error.
    """
    root = Path(root)
    if cap is None and kind is SourceKind.IMAGE_CROP:
        cap = IMAGE_CROP_CAP
    sidecar = root / POOL_SIDECAR
    if not sidecar.is_file():
        raise FileNotFoundError(f"pool sidecar not found: {sidecar}")

    records: dict[str, AssetRecord] = {}
    for lineno, line in enumerate(
        sidecar.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            rec_id = str(entry["id"])
            rec_kind = SourceKind(entry["kind"])
            if rec_kind is not kind:
                log.warning(
                    "%s:%d: record %r has kind %s, expected %s; skipped",
                    sidecar, lineno, rec_id, rec_kind.value, kind.value,
                )
                continue
            if rec_id in records:
                log.warning("%s:%d: duplicate id %r; skipped", sidecar, lineno, rec_id)
                continue
            image_path = root / entry["image"]
            native_size = _decoded_size(image_path)
            layers = _parse_sublayers(entry, root)
            if kind in (SourceKind.BASE, SourceKind.DONOR) and not layers:
                raise ValueError("base/donor record needs at least one sub-layer")
            records[rec_id] = AssetRecord(
                id=rec_id,
                kind=kind,
                image_path=image_path,
                caption=str(entry.get("caption", "")),
                native_size=native_size,
                layers=layers,
            )
        except Exception as exc:
            log.warning("%s:%d: skipping record: %s", sidecar, lineno, exc)

    if not records:
        raise ValueError(f"no valid records in pool {root} ({kind.value})")
    ordered = tuple(records[k] for k in sorted(records))
    if cap is not None:
        ordered = ordered[:cap]
    return AssetPool(kind=kind, records=ordered, cap=cap)


def sample_asset(pool: AssetPool, rng: np.random.Generator) -> AssetRecord:
    """Uniformly sample one record."""
    if not pool.records:
        raise ValueError(f"empty pool ({pool.kind.value})")
    return pool.records[int(rng.integers(0, len(pool.records)))]


def sample_distinct(
    pool: AssetPool, count: int, rng: np.random.Generator
) -> list[AssetRecord]:
    """Uniformly sample `min(count, len(pool))` distinct records."""
    if not pool.records:
        raise ValueError(f"empty pool ({pool.kind.value})")
    k = min(count, len(pool.records))
    if k == 0:
        return []
    idx = rng.choice(len(pool.records), size=k, replace=False)
    return [pool.records[int(i)] for i in idx]


def scale_asset(
    rec: AssetRecord,
    canvas: CanvasSize,
    rel_range: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[RgbaImage, tuple[int, int]]:
    """Scale an asset so its longest side is s * max(W, H) with
    s ~ Uniform[rel_range], preserving aspect ratio (bilinear)."""
    lo, hi = rel_range
    if not (0.0 < lo <= hi <= 1.0):
        raise ValueError(f"rel_range must lie in (0, 1], got {rel_range}")
    sw, sh = rec.native_size
    if sw < 1 or sh < 1:
        raise ValueError(f"degenerate asset size {rec.native_size} ({rec.id})")
    s = float(rng.uniform(lo, hi))
    factor = s * max(canvas.width, canvas.height) / max(sw, sh)
    tw = max(1, round(sw * factor))
    th = max(1, round(sh * factor))
    img = rec.load_image()
    if (tw, th) != (sw, sh):
        img = img.resize_bilinear(tw, th)
    return img, (tw, th)
