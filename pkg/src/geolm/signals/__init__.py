"""Signal restructuring: typed knowledge records to instruction datasets."""

from .records import (
    TASKS,
    CaptionRecord,
    CategoryLabel,
    EntityMentions,
    FactStatement,
    InstructionRecord,
    KeyValueRecord,
    PaperContent,
    QAPair,
    ReferencePair,
    RejectRecord,
    RelationRecord,
    SourceRecord,
    TaxonomyRecord,
    WordDescription,
    read_instruction_records,
    read_source_records,
    validate_instruction_record,
    write_instruction_records,
    write_rejects,
    write_source_records,
)
from .restructure import (
    DEFAULT_LABEL_SETS,
    EmptyField,
    EntityNotInParagraph,
    NoNegationSite,
    UnknownLabel,
    negate_statement,
    restructure_classification,
    restructure_explanation,
    restructure_fact_verification,
    restructure_ner,
    restructure_qa,
    restructure_reasoning,
    restructure_record,
    restructure_stream,
    restructure_summarization,
    restructure_word_semantics,
)
from .sampling import (
    DEFAULT_TARGETS,
    SamplingPlan,
    SignalDataset,
    TaskStats,
    load_plan,
    sample_and_clean,
    save_plan,
)
from .templates import TemplateSet, load_templates, save_templates

__all__ = [
    "TASKS",
    "DEFAULT_LABEL_SETS",
    "DEFAULT_TARGETS",
    "CaptionRecord",
    "CategoryLabel",
    "EmptyField",
    "EntityMentions",
    "EntityNotInParagraph",
    "FactStatement",
    "InstructionRecord",
    "KeyValueRecord",
    "NoNegationSite",
    "PaperContent",
    "QAPair",
    "ReferencePair",
    "RejectRecord",
    "RelationRecord",
    "SamplingPlan",
    "SignalDataset",
    "SourceRecord",
    "TaskStats",
    "TaxonomyRecord",
    "TemplateSet",
    "UnknownLabel",
    "WordDescription",
    "load_plan",
    "load_templates",
    "negate_statement",
    "read_instruction_records",
    "read_source_records",
    "restructure_classification",
    "restructure_explanation",
    "restructure_fact_verification",
    "restructure_ner",
    "restructure_qa",
    "restructure_reasoning",
    "restructure_record",
    "restructure_stream",
    "restructure_summarization",
    "restructure_word_semantics",
    "sample_and_clean",
    "save_plan",
    "save_templates",
    "validate_instruction_record",
    "write_instruction_records",
    "write_rejects",
    "write_source_records",
]
