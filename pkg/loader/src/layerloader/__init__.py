"""layerloader: iterate and validate layerforge-generated datasets.

Consumes index.jsonl and per-sample manifest.json files directly; it does not
depend on the generator package, and its compositing check is an independent
re-implementation of the documented source-over blend.
"""

from .loading import LoadedLayer, LoadedSample, SampleStream, SkipRecord, iter_samples
from .validation import SampleValidation, ValidationReport, validate_dataset

__version__ = "0.1.0"

__all__ = [
    "LoadedLayer",
    "LoadedSample",
    "SampleStream",
    "SkipRecord",
    "SampleValidation",
    "ValidationReport",
    "iter_samples",
    "validate_dataset",
    "__version__",
]
