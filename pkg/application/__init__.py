from .config import RunConfig, config_from_dict, load_config, with_overrides
from .services import (
    ComparisonReport,
    EvaluationResult,
    ExportResult,
    IdentificationResult,
    LinearizationService,
    LutResult,
    SimulationResult,
)

__all__ = [
    "ComparisonReport",
    "EvaluationResult",
    "ExportResult",
    "IdentificationResult",
    "LinearizationService",
    "LutResult",
    "RunConfig",
    "SimulationResult",
    "config_from_dict",
    "load_config",
    "with_overrides",
]
