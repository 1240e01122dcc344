"""Caption drafting and detector-side serialization.

Takes a generated sample through: raw grid caption -> detector training pair
-> simulated (messy) detector output -> parsed boxes -> decomposition
inference input. Outputs land in demos/output/04/.
"""

import json
from pathlib import Path

from _pools import build_demo_pools

from layerforge.captioning import draft_caption
from layerforge.composer import CompositionConfig, compose_sample
from layerforge.geometry import CanvasSize
from layerforge.serialization import (
    build_detector_pair,
    build_inference_input,
    parse_detector_output,
)

OUT = Path(__file__).parent / "output" / "04"


def main():
    canvas = CanvasSize(256, 256)
    pools = build_demo_pools(OUT / "pools", canvas=256, seed=9)
    cfg = CompositionConfig(canvas=canvas, global_seed=5)
    draft, manifest = compose_sample(pools, cfg, sample_index=0)

    caption = draft_caption(draft, canvas)
    print("raw grid-based caption:")
    print(f"  {caption.raw}\n")
    print("region phrases in reading order:")
    for region, text in caption.region_phrases:
        print(f"  [{region.value:13}] {text}")

    pair = build_detector_pair(manifest)
    print("\ndetector training pair:")
    print(f"  instruction: {pair.instruction[:88]}...")
    print(f"  target keys: {sorted(pair.target.keys())}, "
          f"{len(pair.target['boxes'])} foreground boxes")

    # a detector reply wrapped in fences, with a trailing comma and an
    # out-of-canvas box: exactly what the bounded repair handles
    messy = (
        "```json\n"
        + json.dumps({"whole_caption": "a dense flyer",
                      "boxes": pair.target["boxes"] + [[-20, 10, 600, 90]]})[:-1]
        + ",}\n```"
    )
    parsed_caption, boxes = parse_detector_output(messy, canvas)
    print(f"\nparsed detector output: caption {parsed_caption!r}, "
          f"{len(boxes)} boxes (last clamped to {tuple(boxes[-1])})")

    item = build_inference_input(parsed_caption, boxes, canvas,
                                 image_path=manifest.composite_path)
    print("\ndecomposition inference input line:")
    print(f"  {item.to_json_line()[:120]}...")
    print(f"  first two boxes span the canvas: {item.boxes[0]}, {item.boxes[1]}")


if __name__ == "__main__":
    main()
