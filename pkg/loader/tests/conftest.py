"""Fixtures that build datasets by driving the generator CLI, so the loader
is tested purely against the published file formats."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def _save_rgba(path: Path, pixels: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels, mode="RGBA").save(path)


def _random_rgba(rng, w, h, opaque=False) -> np.ndarray:
    px = rng.integers(0, 256, size=(h, w, 4), dtype=np.uint8)
    if opaque:
        px[:, :, 3] = 255
    return px


def build_pools(root: Path, canvas: int, seed: int = 5) -> dict:
    """Write the five pool directories with pool.jsonl sidecars."""
    rng = np.random.default_rng(seed)
    dirs = {}

    def layered(kind: str, n: int, max_layers: int) -> Path:
        pool = root / kind
        pool.mkdir(parents=True, exist_ok=True)
        entries = []
        for i in range(n):
            rec = f"{kind}-{i:03d}"
            _save_rgba(pool / f"{rec}_bg.png", _random_rgba(rng, canvas, canvas, opaque=True))
            layers = []
            for j in range(int(rng.integers(1, max_layers + 1))):
                w = int(rng.integers(12, canvas // 2))
                h = int(rng.integers(12, canvas // 2))
                x0 = int(rng.integers(0, canvas - w + 1))
                y0 = int(rng.integers(0, canvas - h + 1))
                _save_rgba(pool / f"{rec}_l{j}.png", _random_rgba(rng, w, h))
                layers.append(
                    {"image": f"{rec}_l{j}.png", "box": [x0, y0, x0 + w, y0 + h],
                     "caption": f"{kind} piece {i}-{j}"}
                )
            entries.append(
                {"id": rec, "kind": kind, "image": f"{rec}_bg.png",
                 "caption": f"{kind} design {i}", "layers": layers}
            )
        (pool / "pool.jsonl").write_text(
            "\n".join(json.dumps(e) for e in entries) + "\n", encoding="utf-8"
        )
        return pool

    def flat(kind: str, n: int, lo: int, hi: int, opaque=False, border=0) -> Path:
        pool = root / kind
        pool.mkdir(parents=True, exist_ok=True)
        entries = []
        for i in range(n):
            rec = f"{kind}-{i:03d}"
            w = int(rng.integers(lo, hi + 1))
            h = int(rng.integers(lo, hi + 1))
            px = _random_rgba(rng, w, h, opaque=opaque)
            if border and min(w, h) > 2 * border:
                inner = px[border:-border, border:-border].copy()
                px[:] = 0
                px[border:-border, border:-border] = inner
                px[border:-border, border:-border, 3] = 255
            _save_rgba(pool / f"{rec}.png", px)
            entries.append(
                {"id": rec, "kind": kind, "image": f"{rec}.png",
                 "caption": f"{kind} asset {i}"}
            )
        (pool / "pool.jsonl").write_text(
            "\n".join(json.dumps(e) for e in entries) + "\n", encoding="utf-8"
        )
        return pool

    dirs["base"] = layered("base", 6, 5)
    dirs["donor"] = layered("donor", 5, 3)
    dirs["image_crop"] = flat("image-crop", 4, 10, 18, opaque=True)
    dirs["text"] = flat("text", 4, 14, 22, border=2)
    dirs["foreground_object"] = flat("foreground-object", 4, 10, 18)
    return {k: str(v) for k, v in dirs.items()}


def generate_dataset_via_cli(
    root: Path, count: int, workers: int = 2, canvas: int = 96, seed: int = 11
) -> Path:
    pools = build_pools(root / "pools", canvas)
    out_dir = root / "dataset"
    config = {
        "canvas": [canvas, canvas],
        "seed": seed,
        "count": count,
        "workers": workers,
        "out_dir": str(out_dir),
        "pools": pools,
    }
    config_path = root / "run.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    result = subprocess.run(
        [sys.executable, "-m", "layerforge.cli", "generate", "--config", str(config_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert result.returncode == 0, result.stderr
    index = Path(result.stdout.strip())
    assert index.is_file()
    return index


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory) -> Path:
    """12-sample dataset; returns the index path."""
    return generate_dataset_via_cli(tmp_path_factory.mktemp("ds-small"), count=12)
