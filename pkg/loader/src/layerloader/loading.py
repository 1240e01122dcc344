"""Streaming access to generated samples for training-side consumption.

Samples are yielded in index order; image files decode lazily, one sample at
a time. The loader never mutates on-disk data.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

Box = tuple[int, int, int, int]


def load_rgba(path: Union[str, Path]) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA"), dtype=np.uint8)


def read_index_entries(index_path: Union[str, Path]) -> list[dict]:
    entries = []
    for line in Path(index_path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            entries.append(json.loads(line))
    return entries


@dataclass(frozen=True)
class LoadedLayer:
    image: np.ndarray
    box: Box
    quantized_box: Box
    caption: str


@dataclass(frozen=True)
class LoadedSample:
    sample_id: str
    seed: int
    canvas: tuple[int, int]
    composite: np.ndarray
    background: np.ndarray
    layers: tuple[LoadedLayer, ...]
    raw_caption: str
    refined_caption: Optional[str]


@dataclass(frozen=True)
class SkipRecord:
    sample_id: str
    reason: str


def _box(values) -> Box:
    x0, y0, x1, y1 = (int(v) for v in values)
    return (x0, y0, x1, y1)


def load_sample(root: Path, manifest_rel: str) -> LoadedSample:
    manifest = json.loads((root / manifest_rel).read_text(encoding="utf-8"))
    layers = []
    for entry in manifest["layers"]:
        layers.append(
            LoadedLayer(
                image=load_rgba(root / entry["image_path"]),
                box=_box(entry["box"]),
                quantized_box=_box(entry["quantized_box"]),
                caption=str(entry["caption"]),
            )
        )
    return LoadedSample(
        sample_id=str(manifest["sample_id"]),
        seed=int(manifest["seed"]),
        canvas=(int(manifest["canvas"][0]), int(manifest["canvas"][1])),
        composite=load_rgba(root / manifest["composite_path"]),
        background=load_rgba(root / manifest["background_path"]),
        layers=tuple(layers),
        raw_caption=str(manifest["raw_caption"]),
        refined_caption=manifest.get("refined_caption"),
    )


@dataclass
class SampleStream:
    """Iterable over a dataset index; `skipped` collects per-sample problems
    when `on_error` is 'skip'."""

    index_path: Path
    on_error: str = "raise"
    skipped: list[SkipRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.on_error not in ("raise", "skip"):
            raise ValueError(f"on_error must be 'raise' or 'skip', got {self.on_error}")
        self.index_path = Path(self.index_path)

    def __iter__(self) -> Iterator[LoadedSample]:
        root = self.index_path.parent
        for entry in read_index_entries(self.index_path):
            sample_id = str(entry.get("sample_id", "?"))
            if entry.get("status") != "ok":
                reason = f"index status {entry.get('status')}: {entry.get('error', '')}"
                if self.on_error == "raise":
                    raise RuntimeError(f"sample {sample_id}: {reason}")
                log.warning("skipping %s: %s", sample_id, reason)
                self.skipped.append(SkipRecord(sample_id, reason))
                continue
            try:
                yield load_sample(root, entry["manifest"])
            except (OSError, KeyError, ValueError) as exc:
                if self.on_error == "raise":
                    raise RuntimeError(f"sample {sample_id}: {exc}") from exc
                log.warning("skipping %s: %s", sample_id, exc)
                self.skipped.append(SkipRecord(sample_id, str(exc)))


def iter_samples(
    index_path: Union[str, Path], on_error: str = "raise"
) -> SampleStream:
    return SampleStream(Path(index_path), on_error=on_error)
