"""Shared fixtures: tiny on-disk asset pools for composition tests."""

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from layerforge.assets import POOL_SIDECAR, SourceKind, ingest_pool
from layerforge.geometry import CanvasSize


def random_rgba(rng, width, height, opaque=False, canonical=False) -> np.ndarray:
    px = rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
    if opaque:
        px[:, :, 3] = 255
    if canonical:
        px[px[:, :, 3] == 0] = 0
    return px


def save_png(path: Path, pixels: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels, mode="RGBA").save(path)


class PoolBuilder:
    """Writes pool directories (PNGs plus pool.jsonl sidecar) under a root."""

    def __init__(self, root: Path):
        self.root = root

    def _write_sidecar(self, pool_dir: Path, entries: list) -> Path:
        lines = [json.dumps(e) for e in entries]
        (pool_dir / POOL_SIDECAR).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return pool_dir

    def layered_pool(
        self,
        kind: SourceKind,
        n_records: int,
        canvas: CanvasSize,
        layers_per_record: tuple[int, int],
        seed: int,
        name: str = None,
    ) -> Path:
        """Base/donor pool: opaque background plus boxed RGBA sub-layers."""
        rng = np.random.default_rng(seed)
        pool_dir = self.root / (name or kind.value)
        pool_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for i in range(n_records):
            rec_id = f"{kind.value}-{i:03d}"
            bg_name = f"{rec_id}_bg.png"
            save_png(pool_dir / bg_name, random_rgba(rng, *canvas, opaque=True))
            n_layers = int(rng.integers(layers_per_record[0], layers_per_record[1] + 1))
            layers = []
            for j in range(n_layers):
                # min 12 px so every layer admits the 11x11 SSIM window
                w = int(rng.integers(12, max(13, canvas.width // 2)))
                h = int(rng.integers(12, max(13, canvas.height // 2)))
                x0 = int(rng.integers(0, canvas.width - w + 1))
                y0 = int(rng.integers(0, canvas.height - h + 1))
                layer_name = f"{rec_id}_layer{j}.png"
                save_png(pool_dir / layer_name, random_rgba(rng, w, h))
                layers.append(
                    {
                        "image": layer_name,
                        "box": [x0, y0, x0 + w, y0 + h],
                        "caption": f"{kind.value} element {i}-{j}",
                    }
                )
            entries.append(
                {
                    "id": rec_id,
                    "kind": kind.value,
                    "image": bg_name,
                    "caption": f"a {kind.value} design numbered {i}",
                    "layers": layers,
                }
            )
        return self._write_sidecar(pool_dir, entries)

    def flat_pool(
        self,
        kind: SourceKind,
        n_records: int,
        size_range: tuple[int, int],
        seed: int,
        opaque: bool = False,
        transparent_border: int = 0,
        name: str = None,
    ) -> Path:
        """Single-image pool for crops, text layers, or foreground objects."""
        rng = np.random.default_rng(seed)
        pool_dir = self.root / (name or kind.value)
        pool_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for i in range(n_records):
            rec_id = f"{kind.value}-{i:03d}"
            w = int(rng.integers(size_range[0], size_range[1] + 1))
            h = int(rng.integers(size_range[0], size_range[1] + 1))
            px = random_rgba(rng, w, h, opaque=opaque)
            if transparent_border and min(w, h) > 2 * transparent_border:
                b = transparent_border
                inner = px[b:-b, b:-b].copy()
                px[:] = 0
                px[b:-b, b:-b] = inner
                px[b:-b, b:-b, 3] = 255
            img_name = f"{rec_id}.png"
            save_png(pool_dir / img_name, px)
            entries.append(
                {
                    "id": rec_id,
                    "kind": kind.value,
                    "image": img_name,
                    "caption": f"a {kind.value} asset numbered {i}",
                }
            )
        return self._write_sidecar(pool_dir, entries)


@pytest.fixture
def pool_builder(tmp_path):
    return PoolBuilder(tmp_path / "pools")


def build_standard_pools(builder: PoolBuilder, canvas: CanvasSize, seed: int = 7):
    """Ingest one pool of every kind, sized for a small test canvas."""
    small = (8, max(10, canvas.width // 6))
    dirs = {
        SourceKind.BASE: builder.layered_pool(
            SourceKind.BASE, 6, canvas, (2, 6), seed
        ),
        SourceKind.DONOR: builder.layered_pool(
            SourceKind.DONOR, 5, canvas, (1, 4), seed + 1
        ),
        SourceKind.IMAGE_CROP: builder.flat_pool(
            SourceKind.IMAGE_CROP, 5, small, seed + 2, opaque=True
        ),
        SourceKind.TEXT: builder.flat_pool(
            SourceKind.TEXT, 4, small, seed + 3, transparent_border=2
        ),
        SourceKind.FOREGROUND_OBJECT: builder.flat_pool(
            SourceKind.FOREGROUND_OBJECT, 5, small, seed + 4
        ),
    }
    return {kind: ingest_pool(path, kind) for kind, path in dirs.items()}


@pytest.fixture
def small_canvas():
    return CanvasSize(128, 128)


@pytest.fixture
def standard_pools(pool_builder, small_canvas):
    return build_standard_pools(pool_builder, small_canvas)
