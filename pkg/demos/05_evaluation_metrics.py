"""The evaluation suite: strict detection metrics, matched localization,
mask metrics, and judge-score aggregation on synthetic predictions.
"""

import numpy as np

from layerforge.geometry import BBox, CanvasSize
from layerforge.imaging import PixelMask
from layerforge.metrics import (
    JudgeScores,
    aggregate_judge,
    evaluate_boxes,
    mask_metrics,
)

CANVAS = CanvasSize(1024, 1024)


def jitter(rng, box, shift=12, resize=8):
    dx, dy = rng.integers(-shift, shift + 1, size=2)
    dw, dh = rng.integers(-resize, resize + 1, size=2)
    return BBox(int(box.x0 + dx), int(box.y0 + dy),
                int(box.x1 + dx + dw), int(box.y1 + dy + dh))


def main():
    rng = np.random.default_rng(13)
    gts, preds = [], []
    for _ in range(40):
        gt = [
            BBox(x * 320 + 20, y * 320 + 20, x * 320 + 280, y * 320 + 280)
            for x in range(3) for y in range(3)
            if rng.random() < 0.6
        ]
        pred = [jitter(rng, g) for g in gt if rng.random() < 0.9]  # misses
        pred += [BBox(700, 700, 820, 820)] * (rng.random() < 0.2)  # hallucination
        gts.append(gt)
        preds.append(pred)

    report = evaluate_boxes(preds, gts, CANVAS)
    agg = report.aggregates
    print("detection report over 40 samples of jittered grid layouts:")
    print(f"  counts: tp {agg['tp']}, fp {agg['fp']}, fn {agg['fn']}")
    for key in ("precision@0.50", "recall@0.50", "f1@0.50",
                "ap@0.50", "ap@0.75", "map@[0.50:0.95]"):
        print(f"  {key:18} {agg[key] * 100:6.2f}%")
    print(f"  matched mIoU {agg['matched_miou']:.4f}, "
          f"mGIoU {agg['matched_mgiou']:.4f}, "
          f"center distance {agg['center_distance_px']:.2f}px "
          f"({agg['center_distance_norm']:.4f} normalized)")

    print("\nmask metrics, predicted disc vs shifted disc:")
    ys, xs = np.mgrid[0:128, 0:128]
    gt_mask = PixelMask((ys - 64) ** 2 + (xs - 64) ** 2 <= 40**2)
    pred_mask = PixelMask((ys - 70) ** 2 + (xs - 58) ** 2 <= 40**2)
    m = mask_metrics(pred_mask, gt_mask)
    print(f"  iou {m.iou:.3f}  precision {m.precision:.3f}  "
          f"recall {m.recall:.3f}  f1 {m.f1:.3f}")

    print("\njudge-score aggregation (five 1-5 criteria, weighted):")
    scores = JudgeScores(
        image_faithfulness=4.1, coverage=4.5, reference_alignment=4.2,
        text_accuracy=3.2, fluency=4.9,
    )
    print(f"  weights {scores.weights}")
    print(f"  overall score: {aggregate_judge(scores):.2f} / 100")


if __name__ == "__main__":
    main()
