"""Progressive anchor-scene codec.

Scene models and bitstreams cross the boundary as ``bytes`` in the same
formats the ``pcgs`` command-line tool reads and writes.
"""

from ._core import (
    ArgumentError,
    Error,
    FormatError,
    InvariantError,
    IoError,
    decode,
    encode,
    estimate_rates,
    inspect,
    quantize,
    step,
    synth,
    synth_spec,
    truncate,
    validate,
)

__all__ = [
    "ArgumentError",
    "Error",
    "FormatError",
    "InvariantError",
    "IoError",
    "decode",
    "encode",
    "estimate_rates",
    "inspect",
    "quantize",
    "step",
    "synth",
    "synth_spec",
    "truncate",
    "validate",
]
