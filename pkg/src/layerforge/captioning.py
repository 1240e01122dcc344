"""Grid-based raw caption drafting and VLM caption refinement.

A raw draft walks the 3x3 canvas grid in reading order, pairing each layer's
region phrase with its source caption, prefixed by the background description.
Refinement posts the composite image plus the draft to a chat-style HTTP
endpoint; batch runs can fall back to the identity refiner when the endpoint
is unreachable.
"""

from __future__ import annotations

import base64
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import TYPE_CHECKING, NamedTuple, Optional

import requests

from .geometry import CanvasSize, GridRegion, assign_grid_region, region_rank
from .imaging import RgbaImage

if TYPE_CHECKING:
    from .composer import SampleDraft

log = logging.getLogger(__name__)

ENDPOINT_ENV = "LAYERFORGE_VLM_ENDPOINT"
API_KEY_ENV = "LAYERFORGE_VLM_API_KEY"

PLACEHOLDER_CAPTION = "a design element"

REGION_PHRASES = {
    GridRegion.TOP_LEFT: "On the top-left",
    GridRegion.TOP: "On the top",
    GridRegion.TOP_RIGHT: "On the top-right",
    GridRegion.LEFT: "On the left",
    GridRegion.CENTER: "In the center",
    GridRegion.RIGHT: "On the right",
    GridRegion.BOTTOM_LEFT: "On the bottom-left",
    GridRegion.BOTTOM: "On the bottom",
    GridRegion.BOTTOM_RIGHT: "On the bottom-right",
}

FALLBACK_FLAG = "refine_fallback"
OVERLENGTH_FLAG = "refined_overlength"


def default_system_prompt() -> str:
    return (
        resources.files("layerforge")
        .joinpath("resources/refiner_system_prompt.txt")
        .read_text(encoding="utf-8")
        .strip()
    )


@dataclass
class CaptionDraft:
    raw: str
    region_phrases: list[tuple[GridRegion, str]]
    refined: Optional[str] = None


def _sentence(text: str) -> str:
    text = text.strip()
    if text and text[-1] not in ".!?":
        text += "."
    return text


def draft_caption(sample: "SampleDraft", canvas: CanvasSize) -> CaptionDraft:
    """Build the raw caption: background description first, then one phrase
    per layer in reading order (grid row-major, then z-order)."""
    if not sample.layers:
        raise ValueError("sample has no layers to caption")
    ranked = sorted(
        enumerate(sample.layers),
        key=lambda item: (
            region_rank(assign_grid_region(item[1].placed_box, canvas)),
            item[1].z_order,
            item[0],
        ),
    )
    phrases: list[tuple[GridRegion, str]] = []
    parts = [_sentence(sample.background_caption or "A blank background.")]
    for _, layer in ranked:
        region = assign_grid_region(layer.placed_box, canvas)
        caption = layer.caption.strip() or PLACEHOLDER_CAPTION
        phrases.append((region, caption))
        parts.append(_sentence(f"{REGION_PHRASES[region]}, {caption}"))
    return CaptionDraft(raw=" ".join(parts), region_phrases=phrases)


@dataclass
class RefinerConfig:
    endpoint: str = field(default_factory=lambda: os.environ.get(ENDPOINT_ENV, ""))
    api_key: str = field(default_factory=lambda: os.environ.get(API_KEY_ENV, ""))
    system_prompt: str = field(default_factory=default_system_prompt)
    timeout: float = 60.0
    max_retries: int = 3
    word_range: tuple[int, int] = (100, 140)
    fallback: bool = False
    retry_delay: float = 0.5

    def __post_init__(self):
        lo, hi = self.word_range
        if lo >= hi:
            raise ValueError(f"word_range lo must be < hi, got {self.word_range}")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")


class RefineError(RuntimeError):
    """Raised when the refiner endpoint fails and fallback is disabled."""

    def __init__(self, endpoint: str, attempts: int, last_error: str):
        self.endpoint = endpoint
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(
            f"caption refinement failed after {attempts} attempt(s) "
            f"against {endpoint or '<unset endpoint>'}: {last_error}"
        )


class RefineOutcome(NamedTuple):
    text: str
    flags: tuple[str, ...]
    attempts: int


def _image_data_url(image: RgbaImage) -> str:
    buf = io.BytesIO()
    image.to_pil().save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def _build_payload(cfg: RefinerConfig, image: RgbaImage, raw_caption: str) -> dict:
    return {
        "model": "caption-refiner",
        "messages": [
            {"role": "system", "content": cfg.system_prompt},
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": raw_caption},
                    {
                        "type": "image_url",
                        "image_url": {"url": _image_data_url(image)},
                    },
                ],
            },
        ],
    }


def _extract_completion(body: dict) -> str:
    content = body["choices"][0]["message"]["content"]
    if not isinstance(content, str):
        raise ValueError("completion content is not text")
    return content.strip()


def refine_caption(
    cfg: RefinerConfig, image: RgbaImage, draft: CaptionDraft
) -> RefineOutcome:
    """Send composite + system prompt + raw caption to the endpoint and return
    the refined text. After `max_retries` failed attempts, returns the raw
    draft unchanged when fallback is enabled, else raises RefineError.
    """
    payload = _build_payload(cfg, image, draft.raw)
    headers = {"Content-Type": "application/json"}
    if cfg.api_key:
        headers["Authorization"] = f"Bearer {cfg.api_key}"

    last_error = "endpoint not configured"
    attempts = 0
    if cfg.endpoint:
        for attempt in range(1, cfg.max_retries + 1):
            attempts = attempt
            try:
                resp = requests.post(
                    cfg.endpoint,
                    data=json.dumps(payload),
                    headers=headers,
                    timeout=cfg.timeout,
                )
                resp.raise_for_status()
                text = _extract_completion(resp.json())
                flags: tuple[str, ...] = ()
                words = len(text.split())
                if words > 2 * cfg.word_range[1]:
                    log.warning(
                        "refined caption has %d words (limit %d); accepted",
                        words, cfg.word_range[1],
                    )
                    flags = (OVERLENGTH_FLAG,)
                return RefineOutcome(text, flags, attempts)
            except Exception as exc:
                last_error = str(exc)
                log.warning(
                    "refine attempt %d/%d failed: %s", attempt, cfg.max_retries, exc
                )
                if attempt < cfg.max_retries and cfg.retry_delay > 0:
                    time.sleep(cfg.retry_delay)

    if cfg.fallback:
        return RefineOutcome(draft.raw, (FALLBACK_FLAG,), attempts)
    raise RefineError(cfg.endpoint, attempts, last_error)
