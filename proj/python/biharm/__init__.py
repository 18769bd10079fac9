"""Python access to the biharm reconstruction core."""

from ._core import (
    ConfigError,
    DimensionError,
    DomainConfig,
    Error,
    PipelineConfig,
    StageError,
    attenuated_xray,
    attenuated_xray_of_one,
    chebyshev_offsets,
    chord_angles,
    config_from_text,
    invert_attenuated,
    lambda_grid,
    phantom_names,
    phantom_value,
    read_dtn,
    read_field,
    run,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "DomainConfig",
    "Error",
    "PipelineConfig",
    "StageError",
    "attenuated_xray",
    "attenuated_xray_of_one",
    "chebyshev_offsets",
    "chord_angles",
    "config_from_text",
    "invert_attenuated",
    "lambda_grid",
    "phantom_names",
    "phantom_value",
    "read_dtn",
    "read_field",
    "run",
]
