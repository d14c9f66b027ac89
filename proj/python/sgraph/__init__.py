"""Python bindings for the sgraph back end."""

from ._sgraph import (
    Error,
    ate,
    compare,
    describe_config,
    keyframe_in_room,
    run,
    se3_exp,
    se3_log,
    simulate,
)

__all__ = [
    "Error",
    "ate",
    "compare",
    "describe_config",
    "keyframe_in_room",
    "run",
    "se3_exp",
    "se3_log",
    "simulate",
]
