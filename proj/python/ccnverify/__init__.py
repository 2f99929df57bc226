"""Python bindings of the ccn fact-verification library."""

import json

from ._core import (
    CcnError,
    ConfigError,
    DecodeError,
    DimensionError,
    EmbeddingStore,
    FormatError,
    IoError,
    NumericError,
    ValidationError,
    dedupe_snippets,
    gradcheck,
    hamming_distance,
    normalize_caption,
    perceptual_hash,
    perceptual_hash_file,
    render_report,
)
from ._core import verify_json as _verify_json

__all__ = [
    "CcnError",
    "ConfigError",
    "DecodeError",
    "DimensionError",
    "EmbeddingStore",
    "FormatError",
    "IoError",
    "NumericError",
    "ValidationError",
    "dedupe_snippets",
    "gradcheck",
    "hamming_distance",
    "normalize_caption",
    "perceptual_hash",
    "perceptual_hash_file",
    "render_report",
    "verify",
]


def verify(checkpoint, dataset, store, example_id="", k=4):
    """Verdict report of one example as a dict."""
    return json.loads(_verify_json(str(checkpoint), str(dataset), str(store), example_id, k))
