"""FastAPI service wrapping the pipeline and scoring operations.

Endpoints operate on server-local paths for file-based stages and inline
payloads for single-item scoring. Scorer specs use the same
``local:<ckpt>[+<adapters>]`` / ``remote:<host>:<port>`` strings as the CLI;
loaded local checkpoints are cached by path and mtime.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..adapters.lora import adapter_param_count, save_adapter_file
from ..adapters.sft import load_stage_plan, run_recipe
from ..bench.items import BadItem, ObjectiveItem, load_benchmark
from ..bench.metrics import MultiTokenLabel, TooShort, gptscore, perplexity, score_choices
from ..bench.reports import evaluate
from ..bench.scorers import Scorer, ScorerUnavailable, parse_scorer_spec
from ..corpus.blocks import (
    MalformedBlock,
    block_from_dict,
    RawDocument,
    read_documents,
    write_normalized,
)
from ..corpus.cleaning import CleaningRuleSet, RuleSetError, load_rules
from ..corpus.markers import validate_markers
from ..corpus.normalize import normalize_document, write_corpus_text
from ..corpus.stats import corpus_stats
from ..fixture import build_fixture
from ..model.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from ..model.config import ModelConfig
from ..model.network import init_params
from ..model.tokenizer import TOKENIZER
from ..model.train import TrainSchedule, train
from ..pipeline.manifest import RunManifest
from ..pipeline.runner import report as render_report
from ..pipeline.runner import run as run_pipeline
from ..pipeline.runner import validate as validate_config
from ..pipeline.stages import StageFailed
from ..signals.records import (
    read_instruction_records,
    read_source_records,
    write_instruction_records,
    write_rejects,
)
from ..signals.restructure import restructure_stream
from ..signals.sampling import SamplingPlan, load_plan, sample_and_clean
from ..signals.templates import TemplateSet, load_templates
from . import schemas

app = FastAPI(
    title="geolm",
    version=__version__,
    description="Desk-scale domain adaptation pipeline for a small language model.",
)

_scorer_cache: dict[tuple[str, float | None], Scorer] = {}


def _scorer(spec: str) -> Scorer:
    key = (spec, None)
    if spec.startswith("local:"):
        ckpt_path = spec.split(":", 1)[1].split("+", 1)[0]
        try:
            key = (spec, Path(ckpt_path).stat().st_mtime)
        except OSError as exc:
            raise HTTPException(status_code=404, detail=f"checkpoint not found: {exc}")
    cached = _scorer_cache.get(key)
    if cached is not None:
        return cached
    try:
        scorer = parse_scorer_spec(spec)
    except (ValueError, CheckpointError, OSError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    if len(_scorer_cache) >= 4:
        _scorer_cache.pop(next(iter(_scorer_cache)))
    _scorer_cache[key] = scorer
    return scorer


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/corpus/normalize", response_model=schemas.NormalizedDocumentModel)
def corpus_normalize(request: schemas.NormalizeRequest) -> schemas.NormalizedDocumentModel:
    try:
        rules = load_rules(request.rules_path) if request.rules_path else CleaningRuleSet()
        doc = RawDocument(
            doc_id=request.document.doc_id,
            source=request.document.source,
            blocks=[
                block_from_dict(block.model_dump(exclude_none=True))
                for block in request.document.blocks
            ],
        )
        normalized = normalize_document(doc, rules)
    except (MalformedBlock, RuleSetError, OSError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.NormalizedDocumentModel(
        doc_id=normalized.doc_id,
        source=normalized.source,
        text=normalized.text,
        token_estimate=normalized.token_estimate,
        unresolved_citations=normalized.unresolved_citations,
        markers_ok=validate_markers(normalized.text).ok,
    )


@app.post("/corpus/ingest", response_model=schemas.IngestResponse)
def corpus_ingest(request: schemas.IngestRequest) -> schemas.IngestResponse:
    try:
        rules = load_rules(request.rules_path) if request.rules_path else CleaningRuleSet()
        normalized = [
            normalize_document(doc, rules) for doc in read_documents(request.input_path)
        ]
        write_normalized(request.output_path, normalized)
        if request.corpus_text_path:
            write_corpus_text(request.corpus_text_path, normalized)
        stats = corpus_stats(normalized)
        if request.stats_path:
            import json

            Path(request.stats_path).write_text(
                json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
    except (MalformedBlock, RuleSetError, OSError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.IngestResponse(
        documents=stats.documents,
        tokens=stats.tokens,
        per_source=stats.per_source,
        marker_counts=stats.marker_counts,
        unresolved_citations=stats.unresolved_citations,
    )


@app.post("/signals/forge", response_model=schemas.ForgeResponse)
def signals_forge(request: schemas.ForgeRequest) -> schemas.ForgeResponse:
    try:
        templates = (
            load_templates(request.templates_path, seed=request.seed)
            if request.templates_path
            else TemplateSet(seed=request.seed)
        )
        plan = load_plan(request.plan_path) if request.plan_path else SamplingPlan()
        records, rejects = restructure_stream(
            read_source_records(request.input_path), templates
        )
        dataset = sample_and_clean(records, plan)
        write_instruction_records(request.output_path, dataset.records)
        if request.rejects_path:
            write_rejects(request.rejects_path, rejects)
        if request.stats_path:
            import json

            stats = dataset.stats_dict()
            stats["rejects"] = len(rejects)
            Path(request.stats_path).write_text(
                json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
    except (OSError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.ForgeResponse(
        tasks=[schemas.TaskStatsModel(**row.to_dict()) for row in dataset.stats],
        total_sampled=sum(s.sampled for s in dataset.stats),
        total_available=sum(s.available for s in dataset.stats),
        rejects=len(rejects),
    )


@app.post("/train/pretrain", response_model=schemas.PretrainResponse)
def train_pretrain(request: schemas.PretrainRequest) -> schemas.PretrainResponse:
    from ..corpus.normalize import read_corpus_text

    try:
        out_dir = Path(request.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        documents = [TOKENIZER.encode(t) for t in read_corpus_text(request.corpus_path)]
        model_config = ModelConfig.from_dict(request.model)
        schedule_conf = dict(request.schedule)
        schedule_conf.setdefault("total_steps", 300)
        schedule_conf.setdefault("seed", request.seed)
        schedule = TrainSchedule.from_dict(schedule_conf)
        ckpt = Checkpoint(
            config=model_config,
            tensors=init_params(model_config, seed=schedule.seed),
            step=0,
            rng_state=schedule.seed,
        )
        infos = []
        init_path = out_dir / "ckpt-000000.tlm"
        save_checkpoint(init_path, ckpt)
        infos.append(schemas.CheckpointInfo(step=0, path=str(init_path)))

        def snapshot(step: int, snap: Checkpoint) -> None:
            path = out_dir / f"ckpt-{step:06d}.tlm"
            save_checkpoint(path, snap)
            infos.append(schemas.CheckpointInfo(step=step, path=str(path)))

        log_path = out_dir / "loss_log.csv"
        train(ckpt, documents, schedule, log_path=log_path, on_checkpoint=snapshot)
        final_loss = float(log_path.read_text().strip().splitlines()[-1].split(",")[1])
    except (OSError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.PretrainResponse(
        checkpoints=infos, log_path=str(log_path), final_loss=final_loss
    )


@app.post("/tune/run", response_model=schemas.TuneResponse)
def tune_run(request: schemas.TuneRequest) -> schemas.TuneResponse:
    try:
        base = load_checkpoint(request.base_checkpoint)
        plan = load_stage_plan(request.plan_path)
        out_dir = Path(request.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        result = run_recipe(base, plan, epoch_checkpoint_dir=out_dir)
        adapter_path = out_dir / "adapters.tla"
        save_adapter_file(adapter_path, result.adapters, plan.lora)
    except (OSError, ValueError, CheckpointError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.TuneResponse(
        adapter_path=str(adapter_path),
        stages=[
            schemas.StageResultModel(
                name=s.name,
                steps=s.steps,
                mean_loss=s.mean_loss,
                records_touched=s.records_touched,
            )
            for s in result.stages
        ],
        trainable_parameters=adapter_param_count(result.adapters),
    )


@app.post("/eval/run", response_model=schemas.EvalResponse)
def eval_run(request: schemas.EvalRequest) -> schemas.EvalResponse:
    try:
        objective, subjective = load_benchmark(request.benchmark_path)
        if not objective:
            raise HTTPException(status_code=400, detail="benchmark has no objective items")
        scorer = _scorer(request.scorer)
        evaluator = _scorer(request.evaluator) if request.evaluator else None
        result = evaluate(
            scorer,
            objective,
            subjective,
            evaluator=evaluator,
            seed=request.seed,
            max_new=request.max_new,
        )
        if request.report_path:
            result.save(request.report_path)
    except (OSError, BadItem, ScorerUnavailable, MultiTokenLabel) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.EvalResponse(
        accuracy=result.accuracy,
        correct=result.correct,
        total=result.total,
        per_subset=result.per_subset,
        subjective_items=len(result.subjective),
        report_path=request.report_path,
    )


@app.post("/eval/choices", response_model=schemas.ChoiceResponse)
def eval_choices(request: schemas.ChoiceRequest) -> schemas.ChoiceResponse:
    try:
        item = ObjectiveItem(
            id=request.item_id,
            question=request.question,
            choices=request.choices,
            answer=next(iter(request.choices)),
            subset=request.subset,
        )
        score = score_choices(_scorer(request.scorer), item)
    except (BadItem, MultiTokenLabel, ScorerUnavailable) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.ChoiceResponse(probabilities=score.probabilities, predicted=score.predicted)


@app.post("/eval/perplexity", response_model=schemas.PerplexityResponse)
def eval_perplexity(request: schemas.PerplexityRequest) -> schemas.PerplexityResponse:
    try:
        value = perplexity(_scorer(request.scorer), request.text)
    except (TooShort, ScorerUnavailable) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.PerplexityResponse(perplexity=value)


@app.post("/eval/gptscore", response_model=schemas.GptScoreResponse)
def eval_gptscore(request: schemas.GptScoreRequest) -> schemas.GptScoreResponse:
    try:
        value = gptscore(_scorer(request.scorer), request.instruction, request.generated)
    except (TooShort, ScorerUnavailable) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.GptScoreResponse(gptscore=value)


@app.post("/generate", response_model=schemas.GenerateResponse)
def generate_text(request: schemas.GenerateRequest) -> schemas.GenerateResponse:
    try:
        text = _scorer(request.scorer).generate(
            request.prompt,
            max_new=request.max_new,
            mode=request.mode,
            temperature=request.temperature,
            seed=request.seed,
        )
    except (ScorerUnavailable, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return schemas.GenerateResponse(text=text)


@app.post("/pipeline/validate", response_model=schemas.ValidationResponse)
def pipeline_validate(request: schemas.PipelineRequest) -> schemas.ValidationResponse:
    result = validate_config(request.config_path)
    return schemas.ValidationResponse(ok=result.ok, errors=result.errors, warnings=result.warnings)


@app.post("/pipeline/run", response_model=schemas.ManifestResponse)
def pipeline_run(request: schemas.PipelineRequest) -> schemas.ManifestResponse:
    validation = validate_config(request.config_path)
    if not validation.ok:
        raise HTTPException(status_code=422, detail={"errors": validation.errors})
    try:
        manifest = run_pipeline(request.config_path, request.stages, force=request.force)
    except StageFailed as exc:
        raise HTTPException(status_code=500, detail={"stage": exc.stage, "cause": exc.cause})
    from ..pipeline.config import load_config

    out_root = load_config(request.config_path).out_root
    return schemas.ManifestResponse(
        fingerprint=manifest.fingerprint(),
        config_hash=manifest.config_hash,
        stages={name: record.to_dict() for name, record in manifest.stages.items()},
        manifest_path=str(out_root / "manifest.json"),
    )


@app.post("/pipeline/report", response_model=schemas.ReportResponse)
def pipeline_report(request: schemas.ReportRequest) -> schemas.ReportResponse:
    if not Path(request.manifest_path).exists():
        raise HTTPException(status_code=404, detail=f"no manifest at {request.manifest_path}")
    return schemas.ReportResponse(markdown=render_report(request.manifest_path))


@app.post("/fixture", response_model=schemas.FixtureResponse)
def fixture(request: schemas.FixtureRequest) -> schemas.FixtureResponse:
    paths = build_fixture(request.output_dir, seed=request.seed)
    return schemas.FixtureResponse(files={k: str(v) for k, v in paths.items()})
