"""layerforge: synthetic layered-graphic-design dataset engine.

Composes multi-layer RGBA design samples from local asset pools, serializes
them for decomposition training and detector fine-tuning, and evaluates
decompositions/detections with reconstruction, mask, and detection metrics.
"""

from .geometry import BBox, CanvasSize, GridRegion, PlacementProblem
from .imaging import PixelMask, RgbaImage

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CanvasSize",
    "GridRegion",
    "PixelMask",
    "PlacementProblem",
    "RgbaImage",
    "__version__",
]
