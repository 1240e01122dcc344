"""Independent invariant checks over a generated dataset.

The recomposition check rebuilds every composite from its stored background
and layers with a fresh implementation of the documented straight-alpha
source-over blend (byte channels c, alphas a scaled to [0, 1]):

    out_a = a_f + a_b * (1 - a_f)
    out_c = (c_f * a_f + c_b * a_b * (1 - a_f)) / out_a   if out_a > 0 else 0

with channels rounded to nearest, and compares byte-for-byte against the
stored composite. Geometry checks cover box containment, box/image agreement,
and 16-pixel alignment of quantized boxes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .loading import Box, LoadedSample, load_sample, read_index_entries


def source_over(below: np.ndarray, above: np.ndarray) -> np.ndarray:
    """Blend two equal-shaped RGBA byte arrays, `above` over `below`."""
    fg = above.astype(np.float64)
    bg = below.astype(np.float64)
    fa = fg[:, :, 3:4] / 255.0
    ba = bg[:, :, 3:4] / 255.0
    oa = fa + ba * (1.0 - fa)
    color = fg[:, :, :3] * fa + bg[:, :, :3] * ba * (1.0 - fa)
    np.divide(color, oa, out=color, where=oa > 0.0)
    out = np.concatenate([np.rint(color), np.rint(oa * 255.0)], axis=2)
    return np.clip(out, 0, 255).astype(np.uint8)


def recomposite(sample: LoadedSample) -> np.ndarray:
    acc = sample.background.copy()
    for layer in sample.layers:
        x0, y0, x1, y1 = layer.box
        acc[y0:y1, x0:x1] = source_over(acc[y0:y1, x0:x1], layer.image)
    return acc


def _aligned(box: Box) -> bool:
    return all(v % 16 == 0 for v in box)


def _contains(outer: Box, inner: Box) -> bool:
    return (
        outer[0] <= inner[0]
        and outer[1] <= inner[1]
        and outer[2] >= inner[2]
        and outer[3] >= inner[3]
    )


@dataclass
class SampleValidation:
    sample_id: str
    passed: bool
    failures: list[str] = field(default_factory=list)


@dataclass
class ValidationReport:
    samples: list[SampleValidation]

    @property
    def passed(self) -> int:
        return sum(s.passed for s in self.samples)

    @property
    def failed(self) -> int:
        return len(self.samples) - self.passed

    def all_passed(self) -> bool:
        return self.failed == 0

    def summary(self) -> str:
        return f"{self.passed}/{len(self.samples)} samples passed validation"


def validate_sample(sample: LoadedSample) -> SampleValidation:
    failures = []
    w, h = sample.canvas
    canvas_box = (0, 0, w, h)
    if sample.composite.shape[:2] != (h, w):
        failures.append(f"composite is {sample.composite.shape[:2]}, canvas {(h, w)}")
    if sample.background.shape[:2] != (h, w):
        failures.append(f"background is {sample.background.shape[:2]}, canvas {(h, w)}")
    if not sample.layers:
        failures.append("no foreground layers")
    for i, layer in enumerate(sample.layers):
        x0, y0, x1, y1 = layer.box
        if not (x0 < x1 and y0 < y1):
            failures.append(f"layer {i}: empty box {layer.box}")
            continue
        if not _contains(canvas_box, layer.box):
            failures.append(f"layer {i}: box {layer.box} leaves the canvas")
        if layer.image.shape[:2] != (y1 - y0, x1 - x0):
            failures.append(
                f"layer {i}: image {layer.image.shape[:2]} vs box {layer.box}"
            )
        if not _aligned(layer.quantized_box):
            failures.append(
                f"layer {i}: quantized box {layer.quantized_box} not 16-aligned"
            )
        if not _contains(layer.quantized_box, layer.box):
            failures.append(
                f"layer {i}: quantized box {layer.quantized_box} "
                f"does not contain {layer.box}"
            )
    if not failures:
        if not np.array_equal(recomposite(sample), sample.composite):
            failures.append("recomposition does not match the stored composite")
    return SampleValidation(sample.sample_id, not failures, failures)


def validate_dataset(index_path: Union[str, Path]) -> ValidationReport:
    """Re-check every sample in the index; failures are report rows, never
    exceptions."""
    index_path = Path(index_path)
    root = index_path.parent
    rows = []
    for entry in read_index_entries(index_path):
        sample_id = str(entry.get("sample_id", "?"))
        if entry.get("status") != "ok":
            rows.append(
                SampleValidation(
                    sample_id, False, [f"index marks sample as {entry.get('status')}"]
                )
            )
            continue
        try:
            sample = load_sample(root, entry["manifest"])
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            rows.append(SampleValidation(sample_id, False, [f"unloadable: {exc}"]))
            continue
        rows.append(validate_sample(sample))
    return ValidationReport(rows)
