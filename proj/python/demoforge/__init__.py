"""Synthetic robot demonstration generation, recording and aggregation."""

from ._core import (
    DemoforgeError,
    Env,
    __version__,
    aggregate,
    builtin_spec,
    container_stats,
    debounce,
    derive_episode_seed,
    format_spec,
    forward_kinematics,
    generate,
    harness,
    integrate_actions,
    lint_spec,
    normalize_trajectory,
    parse_client_message,
    read_container,
    sample_mixture,
    serialize_message,
    task_names,
    validate,
)

__all__ = [
    "DemoforgeError",
    "Env",
    "__version__",
    "aggregate",
    "builtin_spec",
    "container_stats",
    "debounce",
    "derive_episode_seed",
    "format_spec",
    "forward_kinematics",
    "generate",
    "harness",
    "integrate_actions",
    "lint_spec",
    "normalize_trajectory",
    "parse_client_message",
    "read_container",
    "sample_mixture",
    "serialize_message",
    "task_names",
    "validate",
]
