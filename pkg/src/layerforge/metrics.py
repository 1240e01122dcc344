"""Evaluation metrics: strict detection P/R/F1, AP/mAP with uniform scores,
matched-box localization, mask metrics, reconstruction aggregation,
layer-count statistics, and judge-score aggregation.

Dataset-level detection P/R/F1 pools true/false positive counts across
samples (micro-averaging); other aggregates are arithmetic means.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .geometry import BBox, CanvasSize, center_distance, giou, iou
from .imaging import PixelMask, RgbaImage, psnr, ssim
from .serialization import canonical_json, read_index, write_text

MATCH_IOU_DEFAULT = 0.50

# mAP averages AP over IoU thresholds 0.50, 0.55, ..., 0.95.
AP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))

# Layer-count histogram presets: the 6-bin distribution-report bins over the
# 1..52 range and the 4-bin evaluation regrouping over 1..35.
DIST_BINS = ((1, 5), (6, 10), (11, 15), (16, 20), (21, 25), (26, 52))
EVAL_BINS = ((1, 7), (8, 9), (10, 12), (13, 35))

JUDGE_WEIGHTS = (0.35, 0.20, 0.20, 0.20, 0.05)


@dataclass(frozen=True)
class DetectionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "DetectionCounts") -> "DetectionCounts":
        return DetectionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn
        )


class MatchPair(NamedTuple):
    pred_index: int
    gt_index: int
    iou: float


@dataclass
class MatchResult:
    pairs: list[MatchPair]
    unmatched_pred: list[int]
    unmatched_gt: list[int]
    pred_boxes: tuple[BBox, ...] = ()
    gt_boxes: tuple[BBox, ...] = ()

    def counts(self) -> DetectionCounts:
        return DetectionCounts(
            tp=len(self.pairs),
            fp=len(self.unmatched_pred),
            fn=len(self.unmatched_gt),
        )


def match_boxes(
    pred: Sequence[BBox],
    gt: Sequence[BBox],
    iou_threshold: float = MATCH_IOU_DEFAULT,
) -> MatchResult:
    """Greedy one-to-one matching over all pairs in descending IoU order,
    ties broken by (pred index, gt index); pairs below the threshold never
    match."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    scored = []
    for pi, p in enumerate(pred):
        for gi, g in enumerate(gt):
            v = iou(p, g)
            if v >= iou_threshold:
                scored.append((-v, pi, gi))
    scored.sort()
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    pairs: list[MatchPair] = []
    for neg_v, pi, gi in scored:
        if pi in used_pred or gi in used_gt:
            continue
        used_pred.add(pi)
        used_gt.add(gi)
        pairs.append(MatchPair(pi, gi, -neg_v))
    return MatchResult(
        pairs=pairs,
        unmatched_pred=[i for i in range(len(pred)) if i not in used_pred],
        unmatched_gt=[i for i in range(len(gt)) if i not in used_gt],
        pred_boxes=tuple(pred),
        gt_boxes=tuple(gt),
    )


class DetectionPrf(NamedTuple):
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()


def detection_prf(counts: DetectionCounts) -> DetectionPrf:
    """Precision, recall, F1 from pooled counts; degenerate denominators give
    0.0 with a flag rather than an error."""
    flags = []
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 0.0
        flags.append("no_predictions")
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall = 0.0
        flags.append("no_ground_truth")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return DetectionPrf(precision, recall, f1, tuple(flags))


def _pooled_average_precision(
    preds: Sequence[Sequence[BBox]],
    gts: Sequence[Sequence[BBox]],
    iou_threshold: float,
) -> float:
    """AP with uniform confidence over all predictions, processed in stable
    input order (sample order, then box order within a sample), using the
    101-point interpolated precision envelope.

    Conventions: with no ground truth anywhere, AP is 1.0 when there are also
    no predictions and 0.0 otherwise.
    """
    total_gt = sum(len(g) for g in gts)
    total_pred = sum(len(p) for p in preds)
    if total_gt == 0:
        return 1.0 if total_pred == 0 else 0.0
    if total_pred == 0:
        return 0.0

    tp_flags: list[bool] = []
    for pred, gt in zip(preds, gts):
        taken: set[int] = set()
        for p in pred:
            best_gi, best_v = -1, 0.0
            for gi, g in enumerate(gt):
                if gi in taken:
                    continue
                v = iou(p, g)
                if v > best_v:
                    best_gi, best_v = gi, v
            if best_gi >= 0 and best_v >= iou_threshold:
                taken.add(best_gi)
                tp_flags.append(True)
            else:
                tp_flags.append(False)

    cum_tp = np.cumsum(tp_flags)
    ranks = np.arange(1, len(tp_flags) + 1)
    precisions = cum_tp / ranks
    recalls = cum_tp / total_gt
    ap = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        mask = recalls >= r
        ap += float(precisions[mask].max()) if mask.any() else 0.0
    return ap / 101.0


def average_precision(
    pred: Sequence[BBox], gt: Sequence[BBox], iou_threshold: float
) -> float:
    return _pooled_average_precision([pred], [gt], iou_threshold)


def mean_ap(pred: Sequence[BBox], gt: Sequence[BBox]) -> float:
    """Mean AP over IoU thresholds 0.50 to 0.95 in steps of 0.05."""
    return float(
        np.mean([average_precision(pred, gt, t) for t in AP_THRESHOLDS])
    )


class MatchedLocalization(NamedTuple):
    miou: float
    mgiou: float
    center_px: float
    center_norm: float
    flags: tuple[str, ...] = ()


def matched_localization(
    match: MatchResult, canvas: CanvasSize
) -> MatchedLocalization:
    """Mean IoU, GIoU, and center distance over matched pairs only."""
    if not match.pairs:
        return MatchedLocalization(0.0, 0.0, 0.0, 0.0, ("empty_match",))
    ious, gious, dists, norms = [], [], [], []
    for pi, gi, v in match.pairs:
        p, g = match.pred_boxes[pi], match.gt_boxes[gi]
        ious.append(v)
        gious.append(giou(p, g))
        px, norm = center_distance(p, g, canvas)
        dists.append(px)
        norms.append(norm)
    return MatchedLocalization(
        float(np.mean(ious)),
        float(np.mean(gious)),
        float(np.mean(dists)),
        float(np.mean(norms)),
    )


class MaskMetrics(NamedTuple):
    iou: float
    precision: float
    recall: float
    f1: float


def mask_metrics(pred: PixelMask, gt: PixelMask) -> MaskMetrics:
    """Set-theoretic IoU/precision/recall/F1 over mask bits; two empty masks
    compare as a perfect (1, 1, 1, 1)."""
    if pred.bits.shape != gt.bits.shape:
        raise ValueError(
            f"mask size mismatch: {pred.bits.shape} vs {gt.bits.shape}"
        )
    p_count = pred.count()
    g_count = gt.count()
    if p_count == 0 and g_count == 0:
        return MaskMetrics(1.0, 1.0, 1.0, 1.0)
    inter = int(np.logical_and(pred.bits, gt.bits).sum())
    union = p_count + g_count - inter
    miou = inter / union if union > 0 else 0.0
    precision = inter / p_count if p_count > 0 else 0.0
    recall = inter / g_count if g_count > 0 else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return MaskMetrics(miou, precision, recall, f1)


@dataclass
class LayerCountStats:
    bins: tuple[tuple[int, int], ...]
    counts: list[int]
    outside: int
    total: int
    shares: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "bins": [list(b) for b in self.bins],
            "counts": self.counts,
            "outside": self.outside,
            "total": self.total,
            "shares": {k: round(v, 6) for k, v in self.shares.items()},
        }


def _layer_counts_from_index(index_path: Union[str, Path]) -> list[int]:
    return [
        int(e["layer_count"])
        for e in read_index(index_path)
        if e.get("status") == "ok"
    ]


def layer_count_stats(
    index: Union[str, Path, Sequence[int]],
    bins: tuple[tuple[int, int], ...] = DIST_BINS,
) -> LayerCountStats:
    """Histogram of per-sample foreground layer counts over `bins`, plus the
    named 6-15 and 1-20 shares (computed from the raw counts, so they do not
    depend on the bin edges)."""
    if isinstance(index, (str, Path)):
        values = _layer_counts_from_index(index)
    else:
        values = [int(v) for v in index]
    counts = [0] * len(bins)
    outside = 0
    in_6_15 = 0
    in_1_20 = 0
    for v in values:
        in_6_15 += 6 <= v <= 15
        in_1_20 += 1 <= v <= 20
        for i, (lo, hi) in enumerate(bins):
            if lo <= v <= hi:
                counts[i] += 1
                break
        else:
            outside += 1
    total = len(values)
    shares = {
        "6-15": in_6_15 / total if total else 0.0,
        "1-20": in_1_20 / total if total else 0.0,
    }
    return LayerCountStats(tuple(bins), counts, outside, total, shares)


@dataclass(frozen=True)
class JudgeScores:
    """Five 1-5 criterion scores from the caption judge."""

    image_faithfulness: float
    coverage: float
    reference_alignment: float
    text_accuracy: float
    fluency: float
    weights: tuple[float, ...] = JUDGE_WEIGHTS

    def values(self) -> tuple[float, ...]:
        return (
            self.image_faithfulness,
            self.coverage,
            self.reference_alignment,
            self.text_accuracy,
            self.fluency,
        )

    def __post_init__(self):
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {self.weights}")
        for v in self.values():
            if not 1.0 <= v <= 5.0:
                raise ValueError(f"criterion score {v} outside [1, 5]")


def aggregate_judge(scores: JudgeScores) -> float:
    """Overall 0-100 score: weighted mean of the criteria mapped from the
    1-5 scale by /5 * 100."""
    weighted = sum(w * s for w, s in zip(scores.weights, scores.values()))
    return weighted / 5.0 * 100.0


@dataclass
class EvalReport:
    kind: str
    aggregates: dict
    per_sample: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "aggregates": self.aggregates,
            "per_sample": self.per_sample,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return canonical_json(_round_floats(self.to_dict())) + "\n"

    def write_json(self, path: Union[str, Path]) -> Path:
        return write_text(path, self.to_json())

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fieldnames = sorted({k for row in self.per_sample for k in row})
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            for row in self.per_sample:
                writer.writerow(row)
        return path


def _round_floats(obj, digits: int = 6):
    if isinstance(obj, float):
        return round(obj, digits)
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    return obj


def evaluate_boxes(
    preds: Sequence[Sequence[BBox]],
    gts: Sequence[Sequence[BBox]],
    canvas: CanvasSize,
    sample_ids: Optional[Sequence[str]] = None,
) -> EvalReport:
    """Full detection report: pooled strict P/R/F1@0.50, AP@0.50/0.75,
    mAP@[0.50:0.95], and matched-box localization quality."""
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} prediction sets vs {len(gts)} ground truths")
    ids = list(sample_ids) if sample_ids is not None else [
        str(i) for i in range(len(preds))
    ]
    pooled = DetectionCounts(0, 0, 0)
    all_pairs: list[tuple[BBox, BBox, float]] = []
    per_sample = []
    for sid, pred, gt in zip(ids, preds, gts):
        match = match_boxes(pred, gt, MATCH_IOU_DEFAULT)
        counts = match.counts()
        pooled = pooled + counts
        for pi, gi, v in match.pairs:
            all_pairs.append((match.pred_boxes[pi], match.gt_boxes[gi], v))
        per_sample.append(
            {
                "sample_id": sid,
                "pred_count": len(pred),
                "gt_count": len(gt),
                "tp": counts.tp,
                "fp": counts.fp,
                "fn": counts.fn,
            }
        )

    prf = detection_prf(pooled)
    loc_flags: tuple[str, ...] = ()
    if all_pairs:
        miou = float(np.mean([v for _, _, v in all_pairs]))
        mgiou = float(np.mean([giou(p, g) for p, g, _ in all_pairs]))
        dists = [center_distance(p, g, canvas) for p, g, _ in all_pairs]
        center_px = float(np.mean([d for d, _ in dists]))
        center_norm = float(np.mean([n for _, n in dists]))
    else:
        miou = mgiou = center_px = center_norm = 0.0
        loc_flags = ("empty_match",)

    aggregates = {
        "tp": pooled.tp,
        "fp": pooled.fp,
        "fn": pooled.fn,
        "precision@0.50": prf.precision,
        "recall@0.50": prf.recall,
        "f1@0.50": prf.f1,
        "ap@0.50": _pooled_average_precision(preds, gts, 0.50),
        "ap@0.75": _pooled_average_precision(preds, gts, 0.75),
        "map@[0.50:0.95]": float(
            np.mean([_pooled_average_precision(preds, gts, t) for t in AP_THRESHOLDS])
        ),
        "matched_miou": miou,
        "matched_mgiou": mgiou,
        "center_distance_px": center_px,
        "center_distance_norm": center_norm,
    }
    return EvalReport(
        kind="detection",
        aggregates=aggregates,
        per_sample=per_sample,
        flags=sorted(set(prf.flags) | set(loc_flags)),
    )


def reconstruction_sample_metrics(
    pred_composite: RgbaImage,
    gt_composite: RgbaImage,
    pred_layers: Sequence[RgbaImage],
    gt_layers: Sequence[RgbaImage],
) -> dict:
    """Per-sample reconstruction row: composite PSNR/SSIM over RGB, layer
    PSNR/SSIM over RGBA, and alpha-mask metrics, layers paired by index."""
    from .imaging import alpha_mask  # local import keeps module load light

    row: dict = {
        "composite_psnr": psnr(pred_composite, gt_composite, channels=3),
        "composite_ssim": ssim(pred_composite, gt_composite, channels=3),
    }
    n = min(len(pred_layers), len(gt_layers))
    if len(pred_layers) != len(gt_layers):
        row["layer_count_mismatch"] = True
    lp, ls, mi, mp, mr, mf = [], [], [], [], [], []
    for pred, gt in zip(pred_layers[:n], gt_layers[:n]):
        lp.append(psnr(pred, gt, channels=4))
        ls.append(ssim(pred, gt, channels=4))
        mm = mask_metrics(alpha_mask(pred), alpha_mask(gt))
        mi.append(mm.iou)
        mp.append(mm.precision)
        mr.append(mm.recall)
        mf.append(mm.f1)
    if n:
        row.update(
            layer_psnr=float(np.mean(lp)),
            layer_ssim=float(np.mean(ls)),
            mask_iou=float(np.mean(mi)),
            mask_precision=float(np.mean(mp)),
            mask_recall=float(np.mean(mr)),
            mask_f1=float(np.mean(mf)),
        )
    row["layer_count"] = len(gt_layers)
    return row


_RECON_KEYS = (
    "layer_psnr",
    "layer_ssim",
    "mask_iou",
    "mask_precision",
    "mask_recall",
    "mask_f1",
    "composite_psnr",
    "composite_ssim",
)


def evaluate_reconstruction(
    rows: Sequence[dict],
    bins: tuple[tuple[int, int], ...] = EVAL_BINS,
) -> EvalReport:
    """Aggregate per-sample reconstruction rows: dataset means plus means per
    ground-truth layer-count bin."""
    rows = list(rows)
    aggregates: dict = {"samples": len(rows)}
    for key in _RECON_KEYS:
        vals = [r[key] for r in rows if key in r]
        aggregates[key] = float(np.mean(vals)) if vals else None
    by_bin = {}
    for lo, hi in bins:
        in_bin = [r for r in rows if lo <= r.get("layer_count", 0) <= hi]
        entry: dict = {"samples": len(in_bin)}
        for key in _RECON_KEYS:
            vals = [r[key] for r in in_bin if key in r]
            entry[key] = float(np.mean(vals)) if vals else None
        by_bin[f"{lo}-{hi}"] = entry
    aggregates["by_layer_count"] = by_bin
    flags = sorted(
        {"layer_count_mismatch"}
        if any(r.get("layer_count_mismatch") for r in rows)
        else set()
    )
    return EvalReport(
        kind="reconstruction",
        aggregates=aggregates,
        per_sample=rows,
        flags=flags,
    )
