"""Shared helper for the demo scripts: writes tiny throwaway asset pools
(random PNGs plus pool.jsonl sidecars) so every demo is self-contained."""

import json
from pathlib import Path

import numpy as np
from PIL import Image

from layerforge.assets import SourceKind, ingest_pool


def _png(path: Path, rng, w, h, opaque=False, border=0):
    px = rng.integers(0, 256, size=(h, w, 4), dtype=np.uint8)
    if opaque:
        px[:, :, 3] = 255
    if border and min(w, h) > 2 * border:
        inner = px[border:-border, border:-border].copy()
        px[:] = 0
        px[border:-border, border:-border] = inner
        px[border:-border, border:-border, 3] = 255
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(px, mode="RGBA").save(path)


def build_demo_pools(root: Path, canvas: int = 256, seed: int = 1):
    """Create one pool per source kind under `root` and ingest them."""
    rng = np.random.default_rng(seed)
    dirs = {}

    for kind, n_records in ((SourceKind.BASE, 4), (SourceKind.DONOR, 4)):
        pool = root / kind.value
        entries = []
        for i in range(n_records):
            rec = f"{kind.value}-{i:03d}"
            _png(pool / f"{rec}_bg.png", rng, canvas, canvas, opaque=True)
            layers = []
            for j in range(int(rng.integers(2, 5))):
                w = int(rng.integers(24, canvas // 2))
                h = int(rng.integers(24, canvas // 2))
                x0 = int(rng.integers(0, canvas - w + 1))
                y0 = int(rng.integers(0, canvas - h + 1))
                _png(pool / f"{rec}_l{j}.png", rng, w, h)
                layers.append(
                    {"image": f"{rec}_l{j}.png", "box": [x0, y0, x0 + w, y0 + h],
                     "caption": f"a colorful {kind.value} shape ({i}-{j})"}
                )
            entries.append(
                {"id": rec, "kind": kind.value, "image": f"{rec}_bg.png",
                 "caption": f"a busy abstract {kind.value} backdrop", "layers": layers}
            )
        (pool / "pool.jsonl").write_text(
            "\n".join(json.dumps(e) for e in entries) + "\n", encoding="utf-8"
        )
        dirs[kind] = pool

    flats = (
        (SourceKind.IMAGE_CROP, dict(opaque=True), "a photographic crop"),
        (SourceKind.TEXT, dict(border=4), "bold display text reading 'SALE'"),
        (SourceKind.FOREGROUND_OBJECT, {}, "a cut-out object on alpha"),
    )
    for kind, style, caption in flats:
        pool = root / kind.value
        entries = []
        for i in range(4):
            rec = f"{kind.value}-{i:03d}"
            w = int(rng.integers(32, 72))
            h = int(rng.integers(32, 72))
            _png(pool / f"{rec}.png", rng, w, h, **style)
            entries.append(
                {"id": rec, "kind": kind.value, "image": f"{rec}.png",
                 "caption": f"{caption} ({i})"}
            )
        (pool / "pool.jsonl").write_text(
            "\n".join(json.dumps(e) for e in entries) + "\n", encoding="utf-8"
        )
        dirs[kind] = pool

    return {kind: ingest_pool(path, kind) for kind, path in dirs.items()}
