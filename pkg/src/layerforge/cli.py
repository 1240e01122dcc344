"""Command-line surface binding the library into batch workflows.

Commands: generate, stats, eval-boxes, eval-recon, refine, detector-pairs,
inference-inputs. Progress goes to stderr, machine-readable results to stdout
or --out files. Exit codes: 0 success, 1 runtime failure, 2 usage/config
error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import captioning, metrics, serialization
from .assets import SourceKind, ingest_pool
from .composer import generate_dataset
from .config import ConfigError, RunConfig, load_run_config
from .geometry import BBox, CanvasSize
from .imaging import RgbaImage
from .metrics import DIST_BINS, EVAL_BINS

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _err(message: str) -> None:
    print(f"layerforge: {message}", file=sys.stderr)


def _parse_canvas(text: str) -> CanvasSize:
    try:
        w, h = text.lower().split("x")
        return CanvasSize(int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")


def _parse_bins(text: str):
    if text == "dist":
        return DIST_BINS
    if text == "eval":
        return EVAL_BINS
    try:
        bins = []
        for part in text.split(","):
            lo, hi = part.split("-")
            bins.append((int(lo), int(hi)))
        return tuple(bins)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'dist', 'eval', or 'lo-hi,lo-hi,...', got {text!r}"
        )


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        serialization.write_text(out, text)
        _err(f"wrote {out}")
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    try:
        run: RunConfig = load_run_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_USAGE
    count = args.count if args.count is not None else run.count
    workers = args.workers if args.workers is not None else run.workers
    out_dir = Path(args.out) if args.out else run.out_dir
    composition = run.composition
    if args.seed is not None:
        composition = type(composition)(
            **{**composition.__dict__, "global_seed": args.seed}
        )
    if count < 1:
        _err("nothing to generate: count is 0 (set 'count' or pass --count)")
        return EXIT_USAGE

    pools = {}
    for kind, pool_dir in run.pool_dirs.items():
        if not pool_dir.is_dir():
            _err(f"pool directory does not exist: {pool_dir} ({kind.value})")
            return EXIT_USAGE
        cap = run.image_crop_cap if kind is SourceKind.IMAGE_CROP else None
        try:
            pools[kind] = ingest_pool(pool_dir, kind, cap)
        except (ValueError, FileNotFoundError) as exc:
            _err(f"cannot ingest {kind.value} pool: {exc}")
            return EXIT_USAGE
        _err(f"ingested {len(pools[kind])} {kind.value} asset(s) from {pool_dir}")
    if SourceKind.BASE not in pools:
        _err("config must provide a base pool")
        return EXIT_USAGE

    failures = 0

    def progress(i: int, error: Optional[str]) -> None:
        nonlocal failures
        if error is not None:
            failures += 1
        done = i + 1
        if done % 50 == 0 or done == count:
            _err(f"generated {done}/{count} samples ({failures} failed)")

    try:
        index_path = generate_dataset(
            composition, pools, count, workers, out_dir, progress=progress
        )
    except OSError as exc:
        _err(f"aborted on I/O failure: {exc}")
        return EXIT_RUNTIME
    print(index_path)
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def cmd_stats(args) -> int:
    index = Path(args.index)
    if not index.is_file():
        _err(f"index not found: {index}")
        return EXIT_RUNTIME
    try:
        stats = metrics.layer_count_stats(index, bins=args.bins)
    except (OSError, ValueError, KeyError) as exc:
        _err(f"cannot read index: {exc}")
        return EXIT_RUNTIME
    if args.json:
        _emit(serialization.canonical_json(stats.to_dict()) + "\n", args.out)
        return EXIT_OK
    lines = [f"samples: {stats.total}"]
    for (lo, hi), n in zip(stats.bins, stats.counts):
        share = n / stats.total if stats.total else 0.0
        lines.append(f"  {lo:>3}-{hi:<3} {n:>8}  {share * 100:6.1f}%")
    if stats.outside:
        lines.append(f"  outside bins: {stats.outside}")
    for name, share in stats.shares.items():
        lines.append(f"share {name}: {share * 100:.1f}%")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _load_box_file(path: Path) -> list[tuple[str, list[BBox]]]:
    """Read a detections/ground-truth jsonl file: one object per line with a
    'boxes' list and an optional 'id'/'image' identifier."""
    rows = []
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            boxes = [BBox(*(int(v) for v in b)) for b in obj["boxes"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        rows.append((str(obj.get("id", obj.get("image", lineno - 1))), boxes))
    return rows


def cmd_eval_boxes(args) -> int:
    try:
        pred_rows = _load_box_file(Path(args.pred))
        gt_rows = _load_box_file(Path(args.gt))
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    gt_by_id = dict(gt_rows)
    pred_by_id = dict(pred_rows)
    if len(pred_rows) == len(gt_rows) and set(pred_by_id) != set(gt_by_id):
        # no shared ids: pair by line order
        ids = [rid for rid, _ in gt_rows]
        preds = [boxes for _, boxes in pred_rows]
        gts = [boxes for _, boxes in gt_rows]
    else:
        ids = sorted(gt_by_id)
        missing = [i for i in ids if i not in pred_by_id]
        if missing:
            _err(f"{len(missing)} id(s) missing from predictions, e.g. {missing[0]}")
        preds = [pred_by_id.get(i, []) for i in ids]
        gts = [gt_by_id[i] for i in ids]
    report = metrics.evaluate_boxes(preds, gts, args.canvas, sample_ids=ids)
    _emit(report.to_json(), args.out)
    if args.csv:
        report.write_csv(args.csv)
        _err(f"wrote {args.csv}")
    return EXIT_OK


def _samples_root(path: Path) -> Path:
    nested = path / serialization.SAMPLES_DIRNAME
    return nested if nested.is_dir() else path


def _load_sample_tree(sample_dir: Path) -> tuple[RgbaImage, list[RgbaImage]]:
    composite = RgbaImage.load_png(sample_dir / "composite.png")
    layers = []
    for k in range(10_000):
        layer_path = sample_dir / f"layer_{k}.png"
        if not layer_path.is_file():
            break
        layers.append(RgbaImage.load_png(layer_path))
    return composite, layers


def cmd_eval_recon(args) -> int:
    pred_root = _samples_root(Path(args.pred_dir))
    gt_root = _samples_root(Path(args.gt_dir))
    if not pred_root.is_dir() or not gt_root.is_dir():
        _err("prediction or ground-truth directory does not exist")
        return EXIT_RUNTIME
    gt_ids = sorted(p.name for p in gt_root.iterdir() if p.is_dir())
    rows = []
    skipped = []
    for sid in gt_ids:
        pred_dir = pred_root / sid
        if not pred_dir.is_dir():
            skipped.append((sid, "missing prediction"))
            continue
        try:
            pred_comp, pred_layers = _load_sample_tree(pred_dir)
            gt_comp, gt_layers = _load_sample_tree(gt_root / sid)
            row = metrics.reconstruction_sample_metrics(
                pred_comp, gt_comp, pred_layers, gt_layers
            )
        except Exception as exc:
            skipped.append((sid, str(exc)))
            continue
        row["sample_id"] = sid
        rows.append(row)
    for sid, reason in skipped:
        _err(f"skipped {sid}: {reason}")
    report = metrics.evaluate_reconstruction(rows, bins=args.bins)
    report.aggregates["skipped"] = len(skipped)
    _emit(report.to_json(), args.out)
    if args.csv:
        report.write_csv(args.csv)
        _err(f"wrote {args.csv}")
    return EXIT_OK if rows or not gt_ids else EXIT_RUNTIME


def _refine_one(entry, out_dir, cfg):
    mpath = out_dir / entry["manifest"]
    manifest = serialization.read_manifest(mpath)
    if manifest.refined_caption is not None:
        return entry["sample_id"], "skipped"
    composite = RgbaImage.load_png(out_dir / manifest.composite_path)
    draft = captioning.CaptionDraft(raw=manifest.raw_caption, region_phrases=[])
    outcome = captioning.refine_caption(cfg, composite, draft)
    manifest.refined_caption = outcome.text
    manifest.flags = sorted(set(manifest.flags) | set(outcome.flags))
    serialization.write_manifest(manifest, out_dir)
    return entry["sample_id"], "refined"


def cmd_refine(args) -> int:
    index = Path(args.index)
    if not index.is_file():
        _err(f"index not found: {index}")
        return EXIT_RUNTIME
    out_dir = index.parent
    cfg_kwargs = dict(fallback=args.fallback, max_retries=args.max_retries,
                      timeout=args.timeout)
    if args.endpoint:
        cfg_kwargs["endpoint"] = args.endpoint
    cfg = captioning.RefinerConfig(**cfg_kwargs)
    entries = [
        e for e in serialization.read_index(index) if e.get("status") == "ok"
    ]
    refined = skipped = failed = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=args.concurrency) as ex:
        futures = {
            ex.submit(_refine_one, e, out_dir, cfg): e["sample_id"] for e in entries
        }
        for fut in concurrent.futures.as_completed(futures):
            sid = futures[fut]
            try:
                _, status = fut.result()
            except captioning.RefineError as exc:
                _err(f"{sid}: {exc}")
                failed += 1
                continue
            refined += status == "refined"
            skipped += status == "skipped"
    _err(f"refined {refined}, skipped {skipped} (already refined), failed {failed}")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def cmd_detector_pairs(args) -> int:
    index = Path(args.index)
    if not index.is_file():
        _err(f"index not found: {index}")
        return EXIT_RUNTIME
    out_dir = index.parent
    lines = []
    for entry in serialization.read_index(index):
        if entry.get("status") != "ok":
            continue
        manifest = serialization.read_manifest(out_dir / entry["manifest"])
        lines.append(serialization.build_detector_pair(manifest).to_json_line())
    _emit("\n".join(lines) + ("\n" if lines else ""), args.out)
    _err(f"emitted {len(lines)} detector pair(s)")
    return EXIT_OK


def cmd_inference_inputs(args) -> int:
    detections = Path(args.detections)
    if not detections.is_file():
        _err(f"detections file not found: {detections}")
        return EXIT_RUNTIME
    lines = []
    failures = 0
    for lineno, line in enumerate(
        detections.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            raw = obj["output"]
            caption, boxes = serialization.parse_detector_output(raw, args.canvas)
        except (json.JSONDecodeError, KeyError) as exc:
            _err(f"{detections}:{lineno}: bad input line: {exc}")
            failures += 1
            continue
        except serialization.DetectorOutputError as exc:
            _err(f"{detections}:{lineno}: unparseable detector output: {exc}")
            failures += 1
            continue
        item = serialization.build_inference_input(
            caption, boxes, args.canvas, image_path=str(obj.get("image", ""))
        )
        lines.append(item.to_json_line())
    _emit("\n".join(lines) + ("\n" if lines else ""), args.out)
    _err(f"emitted {len(lines)} inference input(s), {failures} failed")
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layerforge",
        description="Synthetic layered-design dataset generation and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset from a run config")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--count", type=int, default=None, help="samples to generate")
    p.add_argument("--seed", type=int, default=None, help="override global seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--out", default=None, help="override output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="layer-count histogram for an index")
    p.add_argument("--index", required=True)
    p.add_argument("--bins", type=_parse_bins, default=DIST_BINS,
                   help="'dist', 'eval', or custom 'lo-hi,lo-hi,...'")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval-boxes", help="detection metrics for predicted boxes")
    p.add_argument("--pred", required=True, help="predictions jsonl")
    p.add_argument("--gt", required=True, help="ground-truth jsonl")
    p.add_argument("--canvas", type=_parse_canvas, default=CanvasSize(1024, 1024))
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None, help="also write per-sample CSV")
    p.set_defaults(func=cmd_eval_boxes)

    p = sub.add_parser("eval-recon", help="reconstruction metrics for sample trees")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--bins", type=_parse_bins, default=EVAL_BINS)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_eval_recon)

    p = sub.add_parser("refine", help="refine raw captions via the VLM endpoint")
    p.add_argument("--index", required=True)
    p.add_argument("--endpoint", default=None,
                   help="endpoint URL (default: LAYERFORGE_VLM_ENDPOINT)")
    p.add_argument("--fallback", action="store_true",
                   help="keep the raw caption when the endpoint is unreachable")
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("detector-pairs",
                       help="emit detector training pairs from an index")
    p.add_argument("--index", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_detector_pairs)

    p = sub.add_parser("inference-inputs",
                       help="convert detector outputs to decomposition inputs")
    p.add_argument("--detections", required=True,
                   help="jsonl with per-image {'image', 'output'} entries")
    p.add_argument("--canvas", type=_parse_canvas, default=CanvasSize(1024, 1024))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_inference_inputs)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.WARNING, stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching our contract
        return int(exc.code or 0)
    return args.func(args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
