"""Pipeline orchestration: validate, run with skip-if-current, report.

Stages execute in dependency order (ingest, forge, pretrain, tune, eval).
A completed stage whose config hash, input hashes, and on-disk outputs all
match the manifest is a no-op on rerun; deleting any stage's outputs and
rerunning regenerates byte-identical artifacts.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..signals.records import read_source_records
from ..signals.restructure import restructure_stream
from ..signals.sampling import load_plan
from ..signals.templates import TemplateSet, load_templates
from .config import PipelineConfig, load_config
from .manifest import RunManifest, StageRecord, hash_paths, stage_is_current, utc_now
from .stages import (
    StageFailed,
    stage_eval,
    stage_forge,
    stage_ingest,
    stage_pretrain,
    stage_tune,
)

STAGE_ORDER = ("ingest", "forge", "pretrain", "tune", "eval")

_STAGE_FUNCS: dict[str, Callable[[PipelineConfig], dict[str, Path]]] = {
    "ingest": stage_ingest,
    "forge": stage_forge,
    "pretrain": stage_pretrain,
    "tune": stage_tune,
    "eval": stage_eval,
}


@dataclass
class ValidationResult:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {"ok": self.ok, "errors": self.errors, "warnings": self.warnings}


def validate(config_path: str | Path) -> ValidationResult:
    result = ValidationResult()
    try:
        config = load_config(config_path)
    except (OSError, KeyError, ValueError) as exc:
        result.errors.append(f"config unreadable: {exc}")
        return result

    for label, path in (
        ("raw_documents", config.raw_documents),
        ("signals", config.signals),
        ("sampling_plan", config.sampling_plan),
        ("general_instructions", config.general_instructions),
        ("benchmark", config.benchmark),
    ):
        if not path.exists():
            result.errors.append(f"missing {label}: {path}")
    for label, path in (("cleaning_rules", config.cleaning_rules), ("templates", config.templates)):
        if path is not None and not path.exists():
            result.errors.append(f"missing {label}: {path}")

    if not config.tune_plan.stages:
        result.warnings.append("tune plan has no stages; adapters will be identity")
    for stage in config.tune_plan.stages:
        if stage.dataset not in ("general", "expert") and not Path(stage.dataset).exists():
            result.errors.append(f"tune stage {stage.name!r}: unknown dataset {stage.dataset!r}")

    # Cross-check plan targets against restructured availability.
    if config.signals.exists() and config.sampling_plan.exists():
        try:
            plan = load_plan(config.sampling_plan)
            templates = (
                load_templates(config.templates, seed=config.seeds["forge"])
                if config.templates
                else TemplateSet(seed=config.seeds["forge"])
            )
            records, _ = restructure_stream(read_source_records(config.signals), templates)
            available: dict[str, int] = {}
            for record in records:
                available[record.task] = available.get(record.task, 0) + 1
            for task, target in sorted(plan.targets.items()):
                have = available.get(task, 0)
                if target > have:
                    result.warnings.append(
                        f"plan target {target} for {task!r} exceeds available {have}"
                        f" (shortfall {target - have})"
                    )
        except (OSError, ValueError) as exc:
            result.errors.append(f"signals/plan check failed: {exc}")
    return result


def run(
    config_path: str | Path,
    stages: list[str] | None = None,
    *,
    force: bool = False,
) -> RunManifest:
    config = load_config(config_path)
    config.out_root.mkdir(parents=True, exist_ok=True)
    manifest_path = config.artifact("manifest.json")
    previous = RunManifest.load(manifest_path) if manifest_path.exists() else None
    manifest = RunManifest(config_hash=config.config_hash, versions=config.versions)
    if previous is not None and previous.config_hash == config.config_hash:
        manifest.stages.update(previous.stages)

    selected = list(STAGE_ORDER) if stages is None else [s for s in STAGE_ORDER if s in stages]
    unknown = set(stages or []) - set(STAGE_ORDER)
    if unknown:
        raise StageFailed(sorted(unknown)[0], "unknown stage name")

    for stage in selected:
        inputs = _stage_inputs(config, stage)
        input_hashes = hash_paths(config.out_root, inputs)
        prior = manifest.stages.get(stage)
        if not force and prior is not None:
            expected = {
                label: config.artifact(label) for label in prior.outputs
            }
            if stage_is_current(
                manifest, stage, config.config_hash, input_hashes, expected, config.out_root
            ):
                continue
        started = time.monotonic()
        try:
            outputs = _STAGE_FUNCS[stage](config)
        except StageFailed:
            raise
        except Exception as exc:
            raise StageFailed(stage, str(exc)) from exc
        manifest.stages[stage] = StageRecord(
            inputs=dict(sorted(input_hashes.items())),
            outputs=hash_paths(config.out_root, outputs),
            elapsed_s=round(time.monotonic() - started, 3),
            completed_utc=utc_now(),
        )
        manifest.save(manifest_path)
    manifest.save(manifest_path)
    return manifest


def _stage_inputs(config: PipelineConfig, stage: str) -> dict[str, Path]:
    inputs: dict[str, Path] = {}

    def add(label: str, path: Path | None) -> None:
        if path is not None and path.exists():
            inputs[label] = path

    if stage == "ingest":
        add("raw_documents", config.raw_documents)
        add("cleaning_rules", config.cleaning_rules)
    elif stage == "forge":
        add("signals", config.signals)
        add("sampling_plan", config.sampling_plan)
        add("templates", config.templates)
    elif stage == "pretrain":
        add("corpus.txt", config.artifact("corpus.txt"))
    elif stage == "tune":
        add("general_instructions", config.general_instructions)
        add("expert.jsonl", config.artifact("expert.jsonl"))
        for path in sorted(config.out_root.glob("ckpt-*.tlm")):
            add(path.name, path)
    elif stage == "eval":
        add("benchmark", config.benchmark)
        add("adapters.tla", config.artifact("adapters.tla"))
        for path in sorted(config.out_root.glob("ckpt-*.tlm")):
            add(path.name, path)
        for path in sorted(config.out_root.glob("arm-*.tla")):
            add(path.name, path)
    return inputs


def report(manifest_path: str | Path) -> str:
    """Render a human-readable markdown summary from a run's artifacts."""
    manifest_path = Path(manifest_path)
    manifest = RunManifest.load(manifest_path)
    root = manifest_path.parent
    lines = ["# Run report", ""]
    lines.append(f"- config hash: `{manifest.config_hash[:16]}`")
    lines.append(f"- fingerprint: `{manifest.fingerprint()[:16]}`")
    for key, value in sorted(manifest.versions.items()):
        lines.append(f"- {key} version: {value}")
    lines.append("")

    stats_path = root / "forge_stats.json"
    if "forge" in manifest.stages and stats_path.exists():
        stats = json.loads(stats_path.read_text(encoding="utf-8"))
        lines.append("## Dataset")
        lines.append("")
        lines.append("| task | available | sampled |")
        lines.append("| --- | --- | --- |")
        for row in stats.get("tasks", []):
            lines.append(f"| {row['task']} | {row['available']} | {row['sampled']} |")
        lines.append(
            f"| total | {stats.get('total_available', 0)} | {stats.get('total_sampled', 0)} |"
        )
        lines.append("")

    report_path = root / "report.json"
    if "eval" in manifest.stages and report_path.exists():
        data = json.loads(report_path.read_text(encoding="utf-8"))
        curve = data.get("curve")
        if curve:
            lines.append("## Accuracy by training step")
            lines.append("")
            lines.append("| step | accuracy |")
            lines.append("| --- | --- |")
            for point in curve["points"]:
                lines.append(f"| {point['step']} | {point['accuracy']:.4f} |")
            lines.append("")
        lines.append("## Final model")
        lines.append("")
        lines.append(f"- tuned accuracy: {data['tuned_accuracy']:.4f}")
        if data.get("baseline_step0_accuracy") is not None:
            lines.append(f"- step-0 accuracy: {data['baseline_step0_accuracy']:.4f}")
            lines.append(f"- gain over step 0: {data['accuracy_gain_over_step0']:.4f}")
        per_subset = data["final"].get("per_subset", {})
        for subset, value in sorted(per_subset.items()):
            lines.append(f"- {subset} accuracy: {value:.4f}")
        lines.append("")
        if data.get("ablation"):
            lines.append("## Ablation")
            lines.append("")
            subsets = sorted(
                {key for row in data["ablation"] for key in row if key not in ("arm", "accuracy")}
            )
            header = "| arm | accuracy | " + " | ".join(subsets) + " |" if subsets else "| arm | accuracy |"
            lines.append(header)
            lines.append("| --- | --- |" + " --- |" * len(subsets))
            for row in data["ablation"]:
                cells = [row["arm"], f"{row['accuracy']:.4f}"]
                cells.extend(f"{row.get(s, float('nan')):.4f}" for s in subsets)
                lines.append("| " + " | ".join(cells) + " |")
            lines.append("")

    lines.append("## Stage timings")
    lines.append("")
    lines.append("| stage | elapsed (s) | outputs |")
    lines.append("| --- | --- | --- |")
    for name in STAGE_ORDER:
        record = manifest.stages.get(name)
        if record:
            lines.append(f"| {name} | {record.elapsed_s} | {len(record.outputs)} |")
    lines.append("")
    return "\n".join(lines)
