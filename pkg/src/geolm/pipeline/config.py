"""Pipeline configuration: one JSON tree that pins every run-shaping choice.

Seeds are explicit per stage (no wall-clock defaults) and every convention
that affects bytes on disk (prompt, template, layout, checkpoint format) is
carried as a version string so runs stay comparable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..adapters.lora import LoraConfig
from ..adapters.sft import PROMPT_LAYOUT_VERSION, StagePlan, StageSpec
from ..bench.metrics import PROMPT_VERSION
from ..model.config import ModelConfig
from ..model.train import TrainSchedule
from ..signals.templates import TEMPLATE_VERSION

#: Logical dataset names stages may reference instead of paths.
LOGICAL_DATASETS = ("general", "expert")


@dataclass
class PipelineConfig:
    config_dir: Path
    raw_documents: Path
    signals: Path
    sampling_plan: Path
    general_instructions: Path
    benchmark: Path
    out_root: Path
    cleaning_rules: Path | None
    templates: Path | None
    seeds: dict[str, int]
    model: ModelConfig
    pretrain: TrainSchedule
    tune_plan: StagePlan
    ablation: bool
    eval_max_new: int
    versions: dict[str, str]
    config_hash: str = ""
    raw_config: dict = field(default_factory=dict)

    def artifact(self, name: str) -> Path:
        return self.out_root / name


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    raw_bytes = path.read_bytes()
    data = json.loads(raw_bytes)
    base = path.parent

    paths = data["paths"]
    seeds = {key: int(value) for key, value in data.get("seeds", {}).items()}
    for stage in ("forge", "pretrain", "tune", "eval"):
        seeds.setdefault(stage, 0)

    model = ModelConfig.from_dict(data.get("model", {}))

    pretrain_conf = dict(data.get("pretrain", {}))
    pretrain_conf.setdefault("total_steps", 300)
    pretrain_conf["seed"] = seeds["pretrain"]
    pretrain = TrainSchedule.from_dict(pretrain_conf)

    tune_conf = data.get("tune", {})
    lora_conf = tune_conf.get("lora", {})
    lora = LoraConfig(
        r=int(lora_conf.get("r", 8)),
        alpha=float(lora_conf.get("alpha", 16.0)),
        targets=tuple(lora_conf.get("targets", ("q_proj", "k_proj", "v_proj"))),
        seed=int(lora_conf.get("seed", seeds["tune"])),
    )
    stages = [
        StageSpec(**{k: v for k, v in s.items() if k in StageSpec.__dataclass_fields__})
        for s in tune_conf.get("stages", [])
    ]
    tune_plan = StagePlan(
        stages=stages,
        mode=tune_conf.get("mode", "sequential"),
        seed=seeds["tune"],
        lora=lora,
        reinit_between_stages=bool(tune_conf.get("reinit_between_stages", False)),
    )

    eval_conf = data.get("eval", {})
    versions = {
        "prompt": PROMPT_VERSION,
        "templates": TEMPLATE_VERSION,
        "layout": PROMPT_LAYOUT_VERSION,
        "format": "TLM1",
    }
    versions.update(data.get("versions", {}))

    return PipelineConfig(
        config_dir=base,
        raw_documents=_resolve(base, paths["raw_documents"]),
        signals=_resolve(base, paths["signals"]),
        sampling_plan=_resolve(base, paths["sampling_plan"]),
        general_instructions=_resolve(base, paths["general_instructions"]),
        benchmark=_resolve(base, paths["benchmark"]),
        out_root=_resolve(base, paths.get("out_root", "run")),
        cleaning_rules=(
            _resolve(base, paths["cleaning_rules"]) if paths.get("cleaning_rules") else None
        ),
        templates=_resolve(base, paths["templates"]) if paths.get("templates") else None,
        seeds=seeds,
        model=model,
        pretrain=pretrain,
        tune_plan=tune_plan,
        ablation=bool(eval_conf.get("ablation", False)),
        eval_max_new=int(eval_conf.get("max_new", 48)),
        versions=versions,
        config_hash=hashlib.sha256(raw_bytes).hexdigest(),
        raw_config=data,
    )
