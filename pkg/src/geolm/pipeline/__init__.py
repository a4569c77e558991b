"""End-to-end orchestration: config, manifest, staged execution, reports."""

from .config import PipelineConfig, load_config
from .manifest import RunManifest, file_hash
from .runner import STAGE_ORDER, ValidationResult, report, run, validate
from .stages import StageFailed, ablation_plans

__all__ = [
    "STAGE_ORDER",
    "PipelineConfig",
    "RunManifest",
    "StageFailed",
    "ValidationResult",
    "ablation_plans",
    "file_hash",
    "load_config",
    "report",
    "run",
    "validate",
]
