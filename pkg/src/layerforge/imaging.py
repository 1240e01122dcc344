"""Pixel-level primitives: RGBA buffers, source-over compositing, alpha masks,
alpha-tight bounding boxes, PSNR and SSIM.

Images store straight (non-premultiplied) alpha, matching PNG semantics.
The source-over blend, with byte channels c and alphas a scaled to [0, 1]:

    out_a = a_f + a_b * (1 - a_f)
    out_c = (c_f * a_f + c_b * a_b * (1 - a_f)) / out_a   if out_a > 0 else 0

Output channels round to the nearest integer (numpy ``rint``). Everything here
is a pure function of its inputs and safe to call from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image

from .geometry import BBox

# PSNR reported for byte-identical inputs; a finite stand-in for +inf.
PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DYNAMIC_RANGE = 255.0

# Alpha strictly above this counts as content for masks and tightening.
DEFAULT_ALPHA_THRESHOLD = 0


@dataclass(frozen=True)
class RgbaImage:
    """8-bit RGBA raster; `pixels` is an (h, w, 4) uint8 array, straight alpha."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 4:
            raise ValueError(f"expected (h, w, 4) pixels, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got dtype {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be nonempty")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    @classmethod
    def filled(cls, width: int, height: int, rgba=(0, 0, 0, 0)) -> "RgbaImage":
        px = np.empty((height, width, 4), dtype=np.uint8)
        px[:, :] = np.asarray(rgba, dtype=np.uint8)
        return cls(px)

    @classmethod
    def from_pil(cls, im: Image.Image) -> "RgbaImage":
        return cls(np.asarray(im.convert("RGBA"), dtype=np.uint8))

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels, mode="RGBA")

    @classmethod
    def load_png(cls, path: Union[str, Path]) -> "RgbaImage":
        with Image.open(path) as im:
            return cls.from_pil(im)

    def save_png(self, path: Union[str, Path]) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_pil().save(path, format="PNG")

    def crop(self, box: BBox) -> "RgbaImage":
        return RgbaImage(self.pixels[box.y0 : box.y1, box.x0 : box.x1].copy())

    def resize_bilinear(self, width: int, height: int) -> "RgbaImage":
        if width < 1 or height < 1:
            raise ValueError(f"bad target size {width}x{height}")
        return RgbaImage.from_pil(self.to_pil().resize((width, height), Image.BILINEAR))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RgbaImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class PixelMask:
    """Boolean raster; `bits` is an (h, w) bool array."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or bits.dtype != np.bool_:
            raise ValueError(f"expected 2-d bool array, got {bits.dtype} {bits.shape}")
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


def composite_over(
    below: RgbaImage, above: RgbaImage, offset: tuple[int, int] = (0, 0)
) -> RgbaImage:
    """Source-over blend of `above` placed at `offset` onto `below`.

    Pixels of `above` falling outside the canvas are clipped; offsets may be
    negative. Returns a new image the size of `below`.
    """
    ox, oy = offset
    x0, y0 = max(ox, 0), max(oy, 0)
    x1 = min(ox + above.width, below.width)
    y1 = min(oy + above.height, below.height)
    out = below.pixels.copy()
    if x0 >= x1 or y0 >= y1:
        return RgbaImage(out)

    fg = above.pixels[y0 - oy : y1 - oy, x0 - ox : x1 - ox].astype(np.float64)
    bg = below.pixels[y0:y1, x0:x1].astype(np.float64)
    fa = fg[:, :, 3:4] / 255.0
    ba = bg[:, :, 3:4] / 255.0
    oa = fa + ba * (1.0 - fa)
    color = fg[:, :, :3] * fa + bg[:, :, :3] * ba * (1.0 - fa)
    # Where oa == 0 both alphas are 0, so the numerator is already 0.
    np.divide(color, oa, out=color, where=oa > 0.0)
    blended = np.concatenate([np.rint(color), np.rint(oa * 255.0)], axis=2)
    out[y0:y1, x0:x1] = np.clip(blended, 0, 255).astype(np.uint8)
    return RgbaImage(out)


def alpha_mask(img: RgbaImage, threshold: int = DEFAULT_ALPHA_THRESHOLD) -> PixelMask:
    """Mask of pixels whose alpha strictly exceeds `threshold`."""
    return PixelMask(img.pixels[:, :, 3] > threshold)


def tighten_bbox_to_alpha(
    img: RgbaImage, threshold: int = DEFAULT_ALPHA_THRESHOLD
) -> Optional[BBox]:
    """Minimal box containing all pixels with alpha > threshold; None if empty."""
    ys, xs = np.nonzero(img.pixels[:, :, 3] > threshold)
    if ys.size == 0:
        return None
    return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def _check_same_size(a: RgbaImage, b: RgbaImage) -> None:
    if a.size != b.size:
        raise ValueError(f"image size mismatch: {a.size} vs {b.size}")


def psnr(a: RgbaImage, b: RgbaImage, channels: int = 3) -> float:
    """Peak signal-to-noise ratio in dB over the first `channels` channels.

    Identical inputs return the documented cap of 99.0 dB.
    """
    _check_same_size(a, b)
    if channels not in (3, 4):
        raise ValueError("channels must be 3 or 4")
    x = a.pixels[:, :, :channels].astype(np.float64)
    y = b.pixels[:, :, :channels].astype(np.float64)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(255.0**2 / mse))


def _gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_valid(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable correlation, 'valid' extent (kernel is symmetric).
    w = sliding_window_view(a, kernel.size, axis=0)
    a = np.tensordot(w, kernel, axes=([2], [0]))
    w = sliding_window_view(a, kernel.size, axis=1)
    return w @ kernel


def ssim(a: RgbaImage, b: RgbaImage, channels: int = 3) -> float:
    """Mean structural similarity over a sliding 11x11 Gaussian window
    (sigma 1.5, K1 0.01, K2 0.03, dynamic range 255), per channel then
    averaged. Window statistics use the weighted (population) covariance.
    """
    _check_same_size(a, b)
    if channels not in (3, 4):
        raise ValueError("channels must be 3 or 4")
    if a.width < SSIM_WINDOW or a.height < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.size}"
        )
    kernel = _gaussian_kernel(SSIM_SIGMA, (SSIM_WINDOW - 1) // 2)
    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2
    per_channel = []
    for c in range(channels):
        x = a.pixels[:, :, c].astype(np.float64)
        y = b.pixels[:, :, c].astype(np.float64)
        ux = _filter_valid(x, kernel)
        uy = _filter_valid(y, kernel)
        vx = _filter_valid(x * x, kernel) - ux * ux
        vy = _filter_valid(y * y, kernel) - uy * uy
        cxy = _filter_valid(x * y, kernel) - ux * uy
        score = ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / (
            (ux * ux + uy * uy + c1) * (vx + vy + c2)
        )
        per_channel.append(score.mean())
    return float(np.mean(per_channel))
