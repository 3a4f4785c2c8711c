"""Python bindings for the corast simulator."""

import json

from ._corast import (
    ConfigError,
    Error,
    UsageError,
    contrastive_loss,
    decode_frame,
    encode_frame,
    entropy,
    report,
    run,
    run_text,
    schedule,
    split_sizes,
    synth,
)

__all__ = [
    "ConfigError",
    "Error",
    "UsageError",
    "contrastive_loss",
    "decode_frame",
    "encode_frame",
    "entropy",
    "load_metrics",
    "report",
    "run",
    "run_text",
    "schedule",
    "split_sizes",
    "synth",
]


def load_metrics(outputs):
    """Parsed metrics.json from the dict returned by run()/run_text()."""
    with open(outputs["metrics"]) as f:
        return json.load(f)
