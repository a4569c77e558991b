"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class BlockModel(BaseModel):
    kind: str
    text: str | None = None
    cells: list[list[str]] | None = None
    header_rows: int = 0
    marker_text: str | None = None
    resolved_title: str | None = None


class RawDocumentModel(BaseModel):
    doc_id: str
    source: str
    blocks: list[BlockModel] = Field(default_factory=list)


class NormalizeRequest(BaseModel):
    document: RawDocumentModel
    rules_path: str | None = None


class NormalizedDocumentModel(BaseModel):
    doc_id: str
    source: str
    text: str
    token_estimate: int
    unresolved_citations: int
    markers_ok: bool


class IngestRequest(BaseModel):
    input_path: str
    output_path: str
    rules_path: str | None = None
    stats_path: str | None = None
    corpus_text_path: str | None = None


class IngestResponse(BaseModel):
    documents: int
    tokens: int
    per_source: dict[str, int]
    marker_counts: dict[str, int]
    unresolved_citations: int


class ForgeRequest(BaseModel):
    input_path: str
    output_path: str
    plan_path: str | None = None
    templates_path: str | None = None
    stats_path: str | None = None
    rejects_path: str | None = None
    seed: int = 0


class TaskStatsModel(BaseModel):
    task: str
    available_raw: int
    available: int
    target: int
    sampled: int
    shortfall: int


class ForgeResponse(BaseModel):
    tasks: list[TaskStatsModel]
    total_sampled: int
    total_available: int
    rejects: int


class PretrainRequest(BaseModel):
    corpus_path: str
    output_dir: str
    model: dict = Field(default_factory=dict)
    schedule: dict = Field(default_factory=dict)
    seed: int = 0


class CheckpointInfo(BaseModel):
    step: int
    path: str


class PretrainResponse(BaseModel):
    checkpoints: list[CheckpointInfo]
    log_path: str
    final_loss: float


class TuneRequest(BaseModel):
    base_checkpoint: str
    plan_path: str
    output_dir: str


class StageResultModel(BaseModel):
    name: str
    steps: int
    mean_loss: float
    records_touched: int


class TuneResponse(BaseModel):
    adapter_path: str
    stages: list[StageResultModel]
    trainable_parameters: int


class EvalRequest(BaseModel):
    benchmark_path: str
    scorer: str
    evaluator: str | None = None
    report_path: str | None = None
    seed: int = 0
    max_new: int = 48


class EvalResponse(BaseModel):
    accuracy: float
    correct: int
    total: int
    per_subset: dict[str, float]
    subjective_items: int
    report_path: str | None


class ChoiceRequest(BaseModel):
    scorer: str
    question: str
    choices: dict[str, str]
    item_id: str = "item"
    subset: str = "custom"


class ChoiceResponse(BaseModel):
    probabilities: dict[str, float]
    predicted: str


class PerplexityRequest(BaseModel):
    scorer: str
    text: str


class PerplexityResponse(BaseModel):
    perplexity: float


class GptScoreRequest(BaseModel):
    scorer: str
    instruction: str
    generated: str


class GptScoreResponse(BaseModel):
    gptscore: float


class GenerateRequest(BaseModel):
    scorer: str
    prompt: str
    max_new: int = 64
    mode: str = "greedy"
    temperature: float = 1.0
    seed: int = 0


class GenerateResponse(BaseModel):
    text: str


class PipelineRequest(BaseModel):
    config_path: str
    stages: list[str] | None = None
    force: bool = False


class ValidationResponse(BaseModel):
    ok: bool
    errors: list[str]
    warnings: list[str]


class ManifestResponse(BaseModel):
    fingerprint: str
    config_hash: str
    stages: dict[str, dict]
    manifest_path: str


class ReportRequest(BaseModel):
    manifest_path: str


class ReportResponse(BaseModel):
    markdown: str


class FixtureRequest(BaseModel):
    output_dir: str
    seed: int = 2024


class FixtureResponse(BaseModel):
    files: dict[str, str]
