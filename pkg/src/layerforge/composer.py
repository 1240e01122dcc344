"""The five-stage sample composition pipeline and parallel dataset generation:
base layout, donor integration, auxiliary augmentation with overlap-minimizing
placement, compositing, and serialization.

Generation is a pure function of (config, pools, global seed): every sample
draws from its own RNG stream derived per sample id, so worker count and
scheduling never change output bytes.
"""

from __future__ import annotations

import logging
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import captioning
from .assets import AssetPool, AssetRecord, SourceKind, sample_asset, sample_distinct, scale_asset
from .geometry import (
    BBox,
    CanvasSize,
    DEFAULT_CANVAS,
    PlacementProblem,
    overlap_ratio,
    place_layer,
    quantize_box,
)
from .imaging import RgbaImage, composite_over, tighten_bbox_to_alpha
from .seeding import derive_seed
from .serialization import (
    ERROR_NAME,
    SAMPLES_DIRNAME,
    ManifestLayer,
    SampleManifest,
    build_index,
    write_manifest,
    write_text,
)

log = logging.getLogger(__name__)

SAMPLE_ID_DIGITS = 8


@dataclass(frozen=True)
class CompositionConfig:
    canvas: CanvasSize = DEFAULT_CANVAS
    p_image_crop: float = 0.60
    crop_scale: tuple[float, float] = (0.3, 0.4)
    p_text: float = 0.35
    text_scale: tuple[float, float] = (0.6, 0.8)
    fg_count_range: tuple[int, int] = (0, 3)
    fg_scale: tuple[float, float] = (0.25, 0.40)
    remove_range: tuple[int, int] = (1, 4)
    donor_count_range: tuple[int, int] = (1, 4)
    donor_layers_range: tuple[int, int] = (0, 2)
    max_candidates: int = 300
    global_seed: int = 0
    max_layers: int = 52

    def __post_init__(self):
        for name in ("p_image_crop", "p_text"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        for name in ("crop_scale", "text_scale", "fg_scale"):
            lo, hi = getattr(self, name)
            if not (0.0 < lo <= hi <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {(lo, hi)}")
        for name in ("fg_count_range", "remove_range", "donor_count_range",
                     "donor_layers_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} is empty or negative: {(lo, hi)}")
        if self.max_candidates < 1 or self.max_layers < 1:
            raise ValueError("max_candidates and max_layers must be positive")
        if self.canvas.width < 1 or self.canvas.height < 1:
            raise ValueError(f"bad canvas {self.canvas}")


@dataclass
class LayerPlan:
    """One placed foreground layer, bottom-up z-order."""

    source: SourceKind
    image: RgbaImage
    placed_box: BBox
    caption: str
    z_order: int


@dataclass
class SampleDraft:
    sample_id: str
    seed: int
    background: RgbaImage
    background_caption: str
    layers: list[LayerPlan] = field(default_factory=list)
    composite: Optional[RgbaImage] = None
    flags: list[str] = field(default_factory=list)


def format_sample_id(index: int) -> str:
    return f"{index:0{SAMPLE_ID_DIGITS}d}"


def _draw_int(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1] + 1))


def build_base_layout(
    base: AssetRecord, cfg: CompositionConfig, rng: np.random.Generator
) -> tuple[RgbaImage, list[LayerPlan]]:
    """Keep the base background intact and drop 1-4 of its foreground layers,
    clamped so at least one foreground remains. Retained layers keep their
    original boxes and z-order."""
    n = len(base.layers)
    if n < 1:
        raise ValueError(f"base {base.id} has no foreground layers")
    n_remove = _draw_int(rng, cfg.remove_range)
    effective = min(n_remove, n - 1)
    removed: set[int] = set()
    if effective > 0:
        removed = {int(i) for i in rng.choice(n, size=effective, replace=False)}
    background = base.load_image()
    if background.size != tuple(cfg.canvas):
        raise ValueError(
            f"base {base.id} background is {background.size}, "
            f"expected canvas {tuple(cfg.canvas)}"
        )
    layers = []
    for i, sub in enumerate(base.layers):
        if i in removed:
            continue
        img = RgbaImage.load_png(sub.image_path)
        if img.size != (sub.box.x1 - sub.box.x0, sub.box.y1 - sub.box.y0):
            raise ValueError(
                f"base {base.id} layer {i}: image {img.size} does not match "
                f"box {list(sub.box)}"
            )
        layers.append(
            LayerPlan(SourceKind.BASE, img, sub.box, sub.caption, len(layers))
        )
    return background, layers


def _place(
    draft: SampleDraft,
    image: RgbaImage,
    cfg: CompositionConfig,
    rng: np.random.Generator,
) -> BBox:
    occupied = [lp.placed_box for lp in draft.layers]
    problem = PlacementProblem(
        layer_size=image.size,
        occupied=occupied,
        canvas=cfg.canvas,
        max_candidates=cfg.max_candidates,
    )
    x, y = place_layer(problem, rng)
    return BBox(x, y, x + image.width, y + image.height)


def _append_layer(
    draft: SampleDraft,
    source: SourceKind,
    image: RgbaImage,
    box: BBox,
    caption: str,
) -> None:
    draft.layers.append(LayerPlan(source, image, box, caption, len(draft.layers)))


def add_donor_layers(
    draft: SampleDraft,
    pools: dict[SourceKind, AssetPool],
    cfg: CompositionConfig,
    rng: np.random.Generator,
) -> SampleDraft:
    """Sample 1-4 distinct donor designs and lift 0-2 foreground layers from
    each at native crop size, placing them with the overlap minimizer."""
    pool = pools.get(SourceKind.DONOR)
    if pool is None or not pool.records:
        raise ValueError("donor pool is empty")
    n_donors = _draw_int(rng, cfg.donor_count_range)
    for donor in sample_distinct(pool, n_donors, rng):
        k = min(_draw_int(rng, cfg.donor_layers_range), len(donor.layers))
        if k == 0:
            continue
        picked = sorted(int(i) for i in rng.choice(len(donor.layers), size=k, replace=False))
        for idx in picked:
            sub = donor.layers[idx]
            img = RgbaImage.load_png(sub.image_path)
            box = _place(draft, img, cfg, rng)
            _append_layer(draft, SourceKind.DONOR, img, box, sub.caption)
    return draft


def add_auxiliary_layers(
    draft: SampleDraft,
    pools: dict[SourceKind, AssetPool],
    cfg: CompositionConfig,
    rng: np.random.Generator,
) -> SampleDraft:
    """Probabilistic augmentation, drawn in a fixed order: one image crop with
    p_image_crop, one alpha-tightened text layer with p_text, then 0-3 scaled
    foreground objects. A triggered branch with an empty pool is skipped with
    a diagnostic flag."""

    def _pool(kind: SourceKind) -> Optional[AssetPool]:
        pool = pools.get(kind)
        return pool if pool is not None and pool.records else None

    if rng.random() < cfg.p_image_crop:
        pool = _pool(SourceKind.IMAGE_CROP)
        if pool is None:
            log.warning("%s: image-crop branch skipped, empty pool", draft.sample_id)
            draft.flags.append("skip_image_crop")
        else:
            rec = sample_asset(pool, rng)
            img, _ = scale_asset(rec, cfg.canvas, cfg.crop_scale, rng)
            _append_layer(draft, SourceKind.IMAGE_CROP, img,
                          _place(draft, img, cfg, rng), rec.caption)

    if rng.random() < cfg.p_text:
        pool = _pool(SourceKind.TEXT)
        if pool is None:
            log.warning("%s: text branch skipped, empty pool", draft.sample_id)
            draft.flags.append("skip_text")
        else:
            rec = sample_asset(pool, rng)
            img, _ = scale_asset(rec, cfg.canvas, cfg.text_scale, rng)
            tight = tighten_bbox_to_alpha(img)
            if tight is None:
                log.warning("%s: text asset %s fully transparent", draft.sample_id, rec.id)
                draft.flags.append("skip_text")
            else:
                # The serialized box is the non-transparent extent, so the
                # layer is cropped to it before placement.
                img = img.crop(tight)
                _append_layer(draft, SourceKind.TEXT, img,
                              _place(draft, img, cfg, rng), rec.caption)

    n_objects = _draw_int(rng, cfg.fg_count_range)
    for _ in range(n_objects):
        pool = _pool(SourceKind.FOREGROUND_OBJECT)
        if pool is None:
            log.warning("%s: foreground-object branch skipped, empty pool", draft.sample_id)
            draft.flags.append("skip_foreground_object")
            break
        rec = sample_asset(pool, rng)
        img, _ = scale_asset(rec, cfg.canvas, cfg.fg_scale, rng)
        _append_layer(draft, SourceKind.FOREGROUND_OBJECT, img,
                      _place(draft, img, cfg, rng), rec.caption)
    return draft


def assemble_sample(draft: SampleDraft, cfg: CompositionConfig) -> SampleDraft:
    """Fold layers over the background in z-order to build the composite,
    trimming any layers beyond the cap from the top."""
    if not draft.layers:
        raise ValueError(f"sample {draft.sample_id} has no foreground layers")
    if len(draft.layers) > cfg.max_layers:
        dropped = len(draft.layers) - cfg.max_layers
        log.warning("%s: dropping %d layer(s) above the %d-layer cap",
                    draft.sample_id, dropped, cfg.max_layers)
        del draft.layers[cfg.max_layers:]
        draft.flags.append("layer_cap_trimmed")
    acc = draft.background
    for lp in draft.layers:
        acc = composite_over(acc, lp.image, (lp.placed_box.x0, lp.placed_box.y0))
    draft.composite = acc
    return draft


def build_manifest(draft: SampleDraft, cfg: CompositionConfig) -> SampleManifest:
    if draft.composite is None:
        raise ValueError("draft not assembled; call assemble_sample first")
    prefix = f"{SAMPLES_DIRNAME}/{draft.sample_id}"
    layers = []
    for k, lp in enumerate(draft.layers):
        prior = [p.placed_box for p in draft.layers[:k]]
        layers.append(
            ManifestLayer(
                index=k,
                source=lp.source.value,
                box=lp.placed_box,
                quantized_box=quantize_box(lp.placed_box, cfg.canvas),
                caption=lp.caption,
                image_path=f"{prefix}/layer_{k}.png",
                overlap_score=overlap_ratio(lp.placed_box, prior) if prior else 0.0,
            )
        )
    raw = captioning.draft_caption(draft, cfg.canvas).raw
    return SampleManifest(
        sample_id=draft.sample_id,
        seed=draft.seed,
        canvas=cfg.canvas,
        composite_path=f"{prefix}/composite.png",
        background_path=f"{prefix}/background.png",
        layers=layers,
        raw_caption=raw,
        refined_caption=None,
        flags=sorted(set(draft.flags)),
    )


def compose_sample(
    pools: dict[SourceKind, AssetPool],
    cfg: CompositionConfig,
    sample_index: int,
) -> tuple[SampleDraft, SampleManifest]:
    """Run the full per-sample pipeline under the sample's derived seed."""
    seed = derive_seed(cfg.global_seed, sample_index)
    rng = np.random.default_rng(seed)
    base_pool = pools.get(SourceKind.BASE)
    if base_pool is None or not base_pool.records:
        raise ValueError("base pool is empty")
    base = sample_asset(base_pool, rng)
    background, retained = build_base_layout(base, cfg, rng)
    draft = SampleDraft(
        sample_id=format_sample_id(sample_index),
        seed=seed,
        background=background,
        background_caption=base.caption,
        layers=retained,
    )
    donor_pool = pools.get(SourceKind.DONOR)
    if donor_pool is not None and donor_pool.records:
        add_donor_layers(draft, pools, cfg, rng)
    else:
        draft.flags.append("skip_donor")
    add_auxiliary_layers(draft, pools, cfg, rng)
    assemble_sample(draft, cfg)
    return draft, build_manifest(draft, cfg)


def write_sample(
    draft: SampleDraft, manifest: SampleManifest, out_dir: Union[str, Path]
) -> None:
    out_dir = Path(out_dir)
    sample_dir = out_dir / SAMPLES_DIRNAME / draft.sample_id
    sample_dir.mkdir(parents=True, exist_ok=True)
    draft.composite.save_png(out_dir / manifest.composite_path)
    draft.background.save_png(out_dir / manifest.background_path)
    for lp, entry in zip(draft.layers, manifest.layers):
        lp.image.save_png(out_dir / entry.image_path)
    write_manifest(manifest, out_dir)


_WORKER_STATE: dict = {}


def _init_worker(pools, cfg, out_dir):
    _WORKER_STATE.update(pools=pools, cfg=cfg, out_dir=out_dir)


def _generate_one(sample_index: int) -> tuple[int, Optional[str]]:
    return generate_one(
        _WORKER_STATE["pools"], _WORKER_STATE["cfg"],
        _WORKER_STATE["out_dir"], sample_index,
    )


def generate_one(
    pools: dict[SourceKind, AssetPool],
    cfg: CompositionConfig,
    out_dir: Union[str, Path],
    sample_index: int,
) -> tuple[int, Optional[str]]:
    """Generate and persist one sample; returns (index, error or None).

    Composition errors are recorded as a per-sample error marker so the index
    can report the failure; I/O errors propagate and abort the run.
    """
    sample_id = format_sample_id(sample_index)
    try:
        draft, manifest = compose_sample(pools, cfg, sample_index)
        write_sample(draft, manifest, out_dir)
        return sample_index, None
    except OSError:
        raise
    except Exception as exc:
        message = f"{type(exc).__name__}: {exc}"
        log.error("sample %s failed: %s", sample_id, message)
        write_text(
            Path(out_dir) / SAMPLES_DIRNAME / sample_id / ERROR_NAME, message + "\n"
        )
        return sample_index, message


def generate_dataset(
    cfg: CompositionConfig,
    pools: dict[SourceKind, AssetPool],
    count: int,
    workers: int,
    out_dir: Union[str, Path],
    progress=None,
) -> Path:
    """Generate samples 0..count-1 into out_dir and build index.jsonl.

    Individual sample failures are recorded in the index and generation
    continues; the output is byte-identical for any worker count.
    """
    out_dir = Path(out_dir)
    (out_dir / SAMPLES_DIRNAME).mkdir(parents=True, exist_ok=True)
    failures = 0
    if workers <= 1:
        for i in range(count):
            _, err = generate_one(pools, cfg, out_dir, i)
            failures += err is not None
            if progress:
                progress(i, err)
    else:
        ctx = multiprocessing.get_context()
        with ctx.Pool(
            processes=workers,
            initializer=_init_worker,
            initargs=(pools, cfg, out_dir),
        ) as pool:
            for i, err in pool.imap_unordered(_generate_one, range(count)):
                failures += err is not None
                if progress:
                    progress(i, err)
    if failures:
        log.warning("%d of %d samples failed; see index for details", failures, count)
    return build_index(out_dir)
