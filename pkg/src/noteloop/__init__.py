"""Iterative retrieval-augmented QA loops with query-focused note extraction."""

from .core import (
    NO_INFO_SENTINEL,
    Note,
    Observation,
    QAItem,
    ReasoningStep,
    RetrievedDocument,
    RunConfig,
    TokenLedger,
    TokenUsage,
    Trace,
    query_step_count,
)
from .evaluation import aggregate, judge_answer, judge_reasoning_quality, normalize_answer, token_f1
from .frameworks import run_flare, run_framework, run_ircot, run_react, should_retrieve
from .notes import PrevContextStore, write_notes

__version__ = "0.1.0"

__all__ = [
    "NO_INFO_SENTINEL",
    "Note",
    "Observation",
    "PrevContextStore",
    "QAItem",
    "ReasoningStep",
    "RetrievedDocument",
    "RunConfig",
    "TokenLedger",
    "TokenUsage",
    "Trace",
    "aggregate",
    "judge_answer",
    "judge_reasoning_quality",
    "normalize_answer",
    "query_step_count",
    "run_flare",
    "run_framework",
    "run_ircot",
    "run_react",
    "should_retrieve",
    "token_f1",
    "write_notes",
]
