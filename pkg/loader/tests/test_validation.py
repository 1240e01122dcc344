import json
import shutil
from pathlib import Path

import numpy as np
from PIL import Image

from layerloader import validate_dataset
from layerloader.loading import read_index_entries
from layerloader.validation import source_over


def copy_dataset(index_path: Path, dest: Path) -> Path:
    shutil.copytree(index_path.parent, dest)
    return dest / index_path.name


class TestSourceOver:
    def test_transparent_layer_keeps_canonical_background(self):
        rng = np.random.default_rng(0)
        below = rng.integers(0, 256, size=(6, 6, 4), dtype=np.uint8)
        below[below[:, :, 3] == 0] = 0
        above = np.zeros((6, 6, 4), dtype=np.uint8)
        assert np.array_equal(source_over(below, above), below)

    def test_opaque_layer_wins(self):
        rng = np.random.default_rng(1)
        below = rng.integers(0, 256, size=(6, 6, 4), dtype=np.uint8)
        above = rng.integers(0, 256, size=(6, 6, 4), dtype=np.uint8)
        above[:, :, 3] = 255
        assert np.array_equal(source_over(below, above), above)


class TestValidateDataset:
    def test_fresh_dataset_fully_passes(self, small_dataset):
        report = validate_dataset(small_dataset)
        assert len(report.samples) == 12
        assert report.all_passed(), [
            (s.sample_id, s.failures) for s in report.samples if not s.passed
        ]

    def test_corrupted_box_fails_containment(self, small_dataset, tmp_path):
        index = copy_dataset(Path(small_dataset), tmp_path / "ds")
        root = index.parent
        entry = read_index_entries(index)[0]
        manifest_path = root / entry["manifest"]
        manifest = json.loads(manifest_path.read_text())
        manifest["layers"][0]["box"] = [9000, 9000, 9050, 9060]
        manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
        report = validate_dataset(index)
        bad = next(s for s in report.samples if s.sample_id == entry["sample_id"])
        assert not bad.passed
        assert any("leaves the canvas" in f for f in bad.failures)
        assert report.failed == 1

    def test_flipped_pixel_fails_recomposition(self, small_dataset, tmp_path):
        index = copy_dataset(Path(small_dataset), tmp_path / "ds")
        root = index.parent
        entry = read_index_entries(index)[1]
        manifest = json.loads((root / entry["manifest"]).read_text())
        comp_path = root / manifest["composite_path"]
        with Image.open(comp_path) as im:
            px = np.asarray(im.convert("RGBA"), dtype=np.uint8).copy()
        px[3, 4, 0] ^= 0xFF
        Image.fromarray(px, mode="RGBA").save(comp_path)
        report = validate_dataset(index)
        bad = next(s for s in report.samples if s.sample_id == entry["sample_id"])
        assert not bad.passed
        assert any("recomposition" in f for f in bad.failures)

    def test_misaligned_quantized_box_fails(self, small_dataset, tmp_path):
        index = copy_dataset(Path(small_dataset), tmp_path / "ds")
        root = index.parent
        entry = read_index_entries(index)[2]
        manifest_path = root / entry["manifest"]
        manifest = json.loads(manifest_path.read_text())
        manifest["layers"][0]["quantized_box"] = [1, 0, 17, 16]
        manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
        report = validate_dataset(index)
        bad = next(s for s in report.samples if s.sample_id == entry["sample_id"])
        assert any("not 16-aligned" in f for f in bad.failures)

    def test_failed_index_entries_become_failed_rows(self, small_dataset, tmp_path):
        index = copy_dataset(Path(small_dataset), tmp_path / "ds")
        entries = read_index_entries(index)
        entries.append({"sample_id": "99999999", "status": "failed", "error": "x"})
        index.write_text(
            "\n".join(json.dumps(e) for e in entries) + "\n", encoding="utf-8"
        )
        report = validate_dataset(index)
        assert report.failed == 1
        assert report.samples[-1].sample_id == "99999999"
        assert "validation" in report.summary()
