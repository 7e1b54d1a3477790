"""ardata: corpus curation and data-pipeline toolkit for Arabic LLM training.

Subpackages map to the pipeline stages: ``corpus`` (documents, ingestion,
character unification), ``filters`` (quality filtering with before/after
reports), ``tokenization`` (fertility scoring), ``mixture`` (sampling plans),
``schedule`` (learning-rate curves), ``instruct`` (synthetic dialogues and
ChatML), ``evaluation`` (CF/MCF/True-False harness), and ``cli``.
"""

__version__ = "0.1.0"

from .corpus import CharMap, Document, Reject, Source, ingest_jsonl, normalize_chars, strip_title_date
from .filters import CleaningReport, FilterConfig, FilterDecision, GopherConfig, Rule, merge_reports, run_pipeline
from .tokenization import (
    CharacterTokenizer,
    FertilityReport,
    VocabTokenizer,
    WhitespaceTokenizer,
    fertility,
    segment_words,
)
from .mixture import MixturePlan, SourceStats, plan_mixture, sample_stream, sampling_percentages, token_shares
from .schedule import BatchGeometry, ScheduleSpec, batch_tokens, early_cooldown, emit_curve, late_cooldown, lr_at
from .instruct import (
    Dialogue,
    MCQItem,
    MockGenerator,
    Turn,
    build_dialogues,
    build_prompt,
    chunk_document,
    dataset_stats,
    filter_dialogues,
    parse_chatml,
    parse_dialogue_response,
    parse_mcq,
    render_chatml,
    render_mcq,
)
from .evaluation import (
    BenchmarkItem,
    CharNgramScorer,
    ConstantScorer,
    EvalResult,
    OracleScorer,
    cf_mcf_diff,
    evaluate_cf,
    evaluate_mcf,
    evaluate_true_false,
    f1_macro,
)

__all__ = [name for name in dir() if not name.startswith("_")]
