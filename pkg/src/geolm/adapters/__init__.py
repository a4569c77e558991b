"""Low-rank adapter tuning: adapter algebra and the staged SFT recipe."""

from .lora import (
    DEFAULT_TARGETS,
    LoraConfig,
    ShapeMismatch,
    UnknownTarget,
    adapted_forward,
    adapter_param_count,
    attach,
    copy_adapters,
    load_adapter_file,
    merge,
    save_adapter_file,
    trainable_view,
)
from .sft import (
    PROMPT_LAYOUT_VERSION,
    EmptyDataset,
    RecipeResult,
    StagePlan,
    StageResult,
    StageSpec,
    build_example,
    conditioned_tokens,
    load_stage_plan,
    render_prompt,
    run_recipe,
    save_stage_plan,
    tune_stage,
)

__all__ = [
    "DEFAULT_TARGETS",
    "PROMPT_LAYOUT_VERSION",
    "EmptyDataset",
    "LoraConfig",
    "RecipeResult",
    "ShapeMismatch",
    "StagePlan",
    "StageResult",
    "StageSpec",
    "UnknownTarget",
    "adapted_forward",
    "adapter_param_count",
    "attach",
    "build_example",
    "conditioned_tokens",
    "copy_adapters",
    "load_adapter_file",
    "load_stage_plan",
    "merge",
    "render_prompt",
    "run_recipe",
    "save_adapter_file",
    "save_stage_plan",
    "trainable_view",
    "tune_stage",
]
