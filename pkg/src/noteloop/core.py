"""Domain types shared across the package, plus trace and token bookkeeping."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Optional, Union

from .errors import ContractError

DATASETS = ("fanoutqa", "frames", "hotpotqa", "multihoprag")
SOURCES = ("wikipedia_api", "bm25_corpus", "dense_corpus")
FRAMEWORKS = ("react", "ircot", "flare")
MODES = ("baseline", "notes")
TERMINATIONS = ("finish_action", "answer_tag", "budget_exhausted", "fatal_error")

NO_INFO_SENTINEL = "No relevant information, try a different search term."


@dataclass(frozen=True)
class TokenUsage:
    input: int = 0
    output: int = 0

    def __post_init__(self):
        if self.input < 0 or self.output < 0:
            raise ContractError(f"negative token usage: {self}")

    def __add__(self, other: TokenUsage) -> TokenUsage:
        return TokenUsage(self.input + other.input, self.output + other.output)

    @classmethod
    def from_dict(cls, d: dict) -> TokenUsage:
        return cls(int(d.get("input", 0)), int(d.get("output", 0)))


@dataclass(frozen=True)
class TokenLedger:
    main: TokenUsage = TokenUsage()
    notes: TokenUsage = TokenUsage()

    @classmethod
    def from_dict(cls, d: dict) -> TokenLedger:
        return cls(TokenUsage.from_dict(d["main"]), TokenUsage.from_dict(d["notes"]))


class UsageMeter:
    """Thread-safe accumulator for usages reported during one step."""

    def __init__(self):
        self._lock = threading.Lock()
        self._total = TokenUsage()

    def add(self, usage: TokenUsage) -> None:
        with self._lock:
            self._total = self._total + usage

    @property
    def total(self) -> TokenUsage:
        with self._lock:
            return self._total


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    gold_answers: tuple[str, ...]
    dataset: str
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.question.strip():
            raise ContractError(f"item {self.id!r}: empty question")
        if not self.gold_answers:
            raise ContractError(f"item {self.id!r}: no gold answers")
        if self.dataset not in DATASETS:
            raise ContractError(f"unknown dataset {self.dataset!r}")
        object.__setattr__(self, "gold_answers", tuple(self.gold_answers))


@dataclass(frozen=True)
class RetrievedDocument:
    title: str
    source: str
    body_markdown: str
    rank: int
    fetch_url: Optional[str] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ContractError(f"unknown source {self.source!r}")
        if self.rank < 1:
            raise ContractError(f"rank must be >= 1, got {self.rank}")

    @classmethod
    def from_dict(cls, d: dict) -> RetrievedDocument:
        return cls(**d)


@dataclass(frozen=True)
class Note:
    page_title: str
    content: str
    step_index: int

    def __post_init__(self):
        if not self.content:
            raise ContractError("note content must be non-empty")
        if self.step_index < 1:
            raise ContractError("note step_index must be >= 1")


@dataclass(frozen=True)
class Observation:
    step_index: int
    notes: tuple[Note, ...]
    rendered: str
    empty: bool
    # "notes" when built from extracted notes, "raw" for baseline document text
    kind: str = "notes"

    @classmethod
    def from_dict(cls, d: dict) -> Observation:
        return cls(
            step_index=d["step_index"],
            notes=tuple(Note(**n) for n in d["notes"]),
            rendered=d["rendered"],
            empty=d["empty"],
            kind=d.get("kind", "notes"),
        )


# Actions -------------------------------------------------------------------


@dataclass(frozen=True)
class Search:
    entity: str
    question: str
    variant = "search"

    def __post_init__(self):
        if not self.entity.strip() or not self.question.strip():
            raise ContractError("search needs a non-empty entity and question")


@dataclass(frozen=True)
class Finish:
    answer: str
    variant = "finish"


@dataclass(frozen=True)
class Select:
    title: str
    variant = "select"


@dataclass(frozen=True)
class Lookup:
    term: str
    variant = "lookup"


Action = Union[Search, Finish, Select, Lookup]
_ACTIONS = {cls.variant: cls for cls in (Search, Finish, Select, Lookup)}


def action_to_dict(action: Action) -> dict:
    return {"variant": action.variant, **asdict(action)}


def action_from_dict(d: dict) -> Action:
    d = dict(d)
    return _ACTIONS[d.pop("variant")](**d)


def format_action(action: Action) -> str:
    """Render an action back into the bracket grammar the main LM uses."""
    if isinstance(action, Search):
        if action.entity == action.question:
            return f"search[{action.entity}]"
        return f"search[{action.entity}; {action.question}]"
    if isinstance(action, Finish):
        return f"finish[{action.answer}]"
    if isinstance(action, Select):
        return f"select[{action.title}]"
    return f"lookup[{action.term}]"


@dataclass(frozen=True)
class ReasoningStep:
    index: int
    raw_lm_output: str
    thought: Optional[str] = None
    query: Optional[str] = None
    action: Optional[Action] = None
    observation: Optional[Observation] = None
    main_usage: TokenUsage = TokenUsage()
    notes_usage: TokenUsage = TokenUsage()

    def __post_init__(self):
        if self.index < 1:
            raise ContractError("step index must be >= 1")
        if isinstance(self.action, Finish) and self.observation is not None:
            raise ContractError("a finish step carries no observation")

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "thought": self.thought,
            "query": self.query,
            "action": action_to_dict(self.action) if self.action else None,
            "observation": asdict(self.observation) if self.observation else None,
            "raw_lm_output": self.raw_lm_output,
            "main_usage": asdict(self.main_usage),
            "notes_usage": asdict(self.notes_usage),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ReasoningStep:
        return cls(
            index=d["index"],
            thought=d.get("thought"),
            query=d.get("query"),
            action=action_from_dict(d["action"]) if d.get("action") else None,
            observation=Observation.from_dict(d["observation"]) if d.get("observation") else None,
            raw_lm_output=d["raw_lm_output"],
            main_usage=TokenUsage.from_dict(d["main_usage"]),
            notes_usage=TokenUsage.from_dict(d["notes_usage"]),
        )


@dataclass
class Trace:
    item_id: str
    framework: str
    mode: str
    steps: list[ReasoningStep] = field(default_factory=list)
    final_answer: Optional[str] = None
    terminated_by: Optional[str] = None
    ledger: TokenLedger = TokenLedger()
    wall_time_ms: int = 0
    error: Optional[str] = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "framework": self.framework,
            "mode": self.mode,
            "steps": [s.to_dict() for s in self.steps],
            "final_answer": self.final_answer,
            "terminated_by": self.terminated_by,
            "ledger": asdict(self.ledger),
            "wall_time_ms": self.wall_time_ms,
            "error": self.error,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> Trace:
        return cls(
            item_id=d["item_id"],
            framework=d["framework"],
            mode=d["mode"],
            steps=[ReasoningStep.from_dict(s) for s in d["steps"]],
            final_answer=d.get("final_answer"),
            terminated_by=d.get("terminated_by"),
            ledger=TokenLedger.from_dict(d["ledger"]),
            wall_time_ms=d.get("wall_time_ms", 0),
            error=d.get("error"),
            flags=list(d.get("flags", [])),
        )

    @classmethod
    def from_json(cls, line: str) -> Trace:
        return cls.from_dict(json.loads(line))


def trace_append(trace: Trace, step: ReasoningStep) -> Trace:
    """Append ``step`` in place and fold its usage into the ledger."""
    expected = len(trace.steps) + 1
    if step.index != expected:
        raise ContractError(f"step index {step.index} appended where {expected} was expected")
    trace.steps.append(step)
    trace.ledger = TokenLedger(
        main=trace.ledger.main + step.main_usage,
        notes=trace.ledger.notes + step.notes_usage,
    )
    return trace


def query_step_count(trace: Trace) -> int:
    return sum(1 for s in trace.steps if s.query is not None)


@dataclass(frozen=True)
class RunConfig:
    framework: str = "react"
    mode: str = "notes"
    k: int = 5
    theta: float = 0.8
    max_steps: int = 15
    temperature: float = 0.7
    main_model: str = "gpt-4o-mini"
    notes_model: Optional[str] = None
    judge_model: str = "gpt-4o"
    seed: Optional[int] = None
    chunk_words: int = 120
    notes_max_words: int = 24_000

    def __post_init__(self):
        if self.framework not in FRAMEWORKS:
            raise ContractError(f"unknown framework {self.framework!r}")
        if self.mode not in MODES:
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.k < 1:
            raise ContractError("k must be >= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ContractError("theta must lie in [0, 1]")
        if self.max_steps < 1:
            raise ContractError("max_steps must be >= 1")
        if self.notes_model is None:
            # same LM writes notes unless told otherwise
            object.__setattr__(self, "notes_model", self.main_model)

    def with_(self, **changes: Any) -> RunConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)
