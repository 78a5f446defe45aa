"""Answer metrics, LLM-judge parsing and per-run aggregation."""

from __future__ import annotations

import json
import re
import statistics
import string
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Optional, Sequence

from .assets import load_prompt
from .core import QAItem, TokenLedger, Trace, format_action, query_step_count
from .errors import ContractError, JudgeParseError, QualityParseError
from .llm import ChatMessage, Gateway, ask

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)
_DECISION_RE = re.compile(r"^[ \t>*_-]*decision[*_ \t]*:(.*)$", re.IGNORECASE | re.MULTILINE)
_EXPLANATION_RE = re.compile(r"^[ \t>*_-]*explanation[*_ \t]*:", re.IGNORECASE | re.MULTILINE)
QUALITY_KEYS = ("Criterion 1", "Criterion 2", "Criterion 3")


def normalize_answer(text: str) -> str:
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCT)
    text = _ARTICLES_RE.sub(" ", text)
    return " ".join(text.split())


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(pred: str, golds: Sequence[str]) -> float:
    if isinstance(golds, str):
        golds = [golds]
    if not golds:
        raise ContractError("token_f1 needs at least one gold answer")
    pred_tokens = normalize_answer(pred or "").split()
    return max(_f1_single(pred_tokens, normalize_answer(g).split()) for g in golds)


# Judge ---------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeVerdict:
    correct: bool
    explanation: str


def parse_judge_output(text: str) -> JudgeVerdict:
    decisions = list(_DECISION_RE.finditer(text))
    if not decisions:
        raise JudgeParseError("no Decision line in judge output")
    last = decisions[-1]
    value = last.group(1).strip().strip("\"'`*()[]. ").upper()
    if value not in ("TRUE", "FALSE"):
        raise JudgeParseError(f"unrecognised decision {last.group(1).strip()!r}")
    explanation = ""
    before = [m for m in _EXPLANATION_RE.finditer(text) if m.start() < last.start()]
    if before:
        explanation = text[before[-1].end() : last.start()].strip()
    return JudgeVerdict(value == "TRUE", explanation)


def judge_prompt(question: str, predicted: str, golds: Sequence[str], prompt_dir: Optional[str] = None) -> str:
    values = {
        "<<question>>": question,
        "<<LLM_response>>": predicted,
        "<<ground_truth_answer>>": " / ".join(golds),
    }
    template = load_prompt("judge_prompt.txt", prompt_dir)
    return re.sub("|".join(re.escape(k) for k in values), lambda m: values[m.group(0)], template)


def judge_answer(question: str, predicted: str, golds: Sequence[str], gateway: Gateway, *,
                 model: str = "gpt-4o", prompt_dir: Optional[str] = None) -> JudgeVerdict:
    """Raises JudgeParseError when the verdict cannot be read; callers treat
    that as unjudged."""
    if isinstance(golds, str):
        golds = [golds]
    prompt = judge_prompt(question, predicted, golds, prompt_dir)
    completion = ask(gateway, model, [ChatMessage("user", prompt)], 0.0)
    return parse_judge_output(completion.text)


# Reasoning quality ----------------------------------------------------------


@dataclass(frozen=True)
class QualityScores:
    efficiency: int
    redundancy: int
    coherence: int


def parse_quality_output(text: str) -> QualityScores:
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict) or not all(k in obj for k in QUALITY_KEYS):
            continue
        values = []
        for key in QUALITY_KEYS:
            v = obj[key]
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 5:
                raise QualityParseError(f"{key} must be an integer in 0..5, got {v!r}")
            values.append(v)
        return QualityScores(*values)
    raise QualityParseError("no JSON object with the three criterion keys")


def render_chain(trace: Trace, question: str) -> str:
    lines = [f"Question: {question}"]
    for s in trace.steps:
        if s.thought:
            lines.append(f"Thought {s.index}: {s.thought}")
        if s.action is not None:
            lines.append(f"Action {s.index}: {format_action(s.action)}")
        elif s.query is not None:
            lines.append(f"Query {s.index}: {s.query}")
        if s.observation is not None:
            lines.append(f"Observation {s.index}: {s.observation.rendered}")
    lines.append(f"Final answer: {trace.final_answer or ''}")
    return "\n".join(lines)


def judge_reasoning_quality(trace: Trace, question: str, gateway: Gateway, *,
                            model: str = "gpt-4o", prompt_dir: Optional[str] = None) -> QualityScores:
    template = load_prompt("quality_prompt.txt", prompt_dir)
    head, sep, tail = template.rpartition("{}")
    prompt = head + render_chain(trace, question) + tail if sep else template + render_chain(trace, question)
    completion = ask(gateway, model, [ChatMessage("user", prompt)], 0.0)
    return parse_quality_output(completion.text)


# Aggregation ----------------------------------------------------------------


@dataclass
class ItemResult:
    item_id: str
    predicted: str
    f1: float
    steps: int
    ledger: TokenLedger
    dataset: str = "hotpotqa"
    framework: str = "react"
    mode: str = "notes"
    judge_correct: Optional[bool] = None
    judge_explanation: Optional[str] = None
    quality: Optional[dict[str, int]] = None
    failed: bool = False

    def __post_init__(self):
        if not 0.0 <= self.f1 <= 1.0:
            raise ContractError(f"f1 out of range: {self.f1}")
        if self.quality is not None and any(not 0 <= v <= 5 for v in self.quality.values()):
            raise ContractError(f"quality out of range: {self.quality}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ItemResult:
        d = dict(d)
        d["ledger"] = TokenLedger.from_dict(d["ledger"])
        return cls(**d)


def item_result(trace: Trace, item: QAItem) -> ItemResult:
    failed = trace.terminated_by == "fatal_error"
    predicted = trace.final_answer or ""
    return ItemResult(
        item_id=item.id,
        predicted=predicted,
        f1=0.0 if failed else token_f1(predicted, item.gold_answers),
        steps=query_step_count(trace),
        ledger=trace.ledger,
        dataset=item.dataset,
        framework=trace.framework,
        mode=trace.mode,
        failed=failed,
    )


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


@dataclass
class ReportRow:
    dataset: str
    framework: str
    mode: str
    n: int
    failed: int
    judged: int
    unjudged: int
    f1_pct: float
    judge_pct: Optional[float]
    avg_steps: float
    main_in: float
    main_out: float
    notes_in: float
    notes_out: float
    quality: Optional[dict[str, float]] = None


@dataclass
class Report:
    rows: list[ReportRow]
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> Report:
        return cls([ReportRow(**r) for r in d["rows"]], dict(d.get("config", {})))


def _row(key: tuple[str, str, str], group: list[ItemResult]) -> ReportRow:
    done = [r for r in group if not r.failed]
    judged = [r for r in done if r.judge_correct is not None]
    rated = [r.quality for r in done if r.quality is not None]
    quality = None
    if rated:
        quality = {k: round(_mean(q[k] for q in rated), 2) for k in ("efficiency", "redundancy", "coherence")}
    return ReportRow(
        *key,
        n=len(done),
        failed=len(group) - len(done),
        judged=len(judged),
        unjudged=len(done) - len(judged),
        f1_pct=round(100 * _mean(r.f1 for r in done), 1),
        judge_pct=round(100 * _mean(r.judge_correct for r in judged), 1) if judged else None,
        avg_steps=round(_mean(r.steps for r in done), 2),
        main_in=_mean(r.ledger.main.input for r in done),
        main_out=_mean(r.ledger.main.output for r in done),
        notes_in=_mean(r.ledger.notes.input for r in done),
        notes_out=_mean(r.ledger.notes.output for r in done),
        quality=quality,
    )


def aggregate(results: Sequence[ItemResult], config: Optional[dict] = None) -> Report:
    if not results:
        raise ContractError("cannot aggregate an empty result list")
    groups: dict[tuple[str, str, str], list[ItemResult]] = {}
    for r in results:
        groups.setdefault((r.dataset, r.framework, r.mode), []).append(r)
    rows = [_row(key, groups[key]) for key in sorted(groups)]
    return Report(rows, dict(config or {}))


STD_FIELDS = ("f1_pct", "judge_pct", "avg_steps", "main_in", "main_out", "notes_in", "notes_out")


def repeat_summary(reports: Sequence[Report]) -> list[dict]:
    """Mean and sample std dev of each metric across repeated runs."""
    by_key: dict[tuple, list[ReportRow]] = {}
    for rep in reports:
        for row in rep.rows:
            by_key.setdefault((row.dataset, row.framework, row.mode), []).append(row)
    out = []
    for key in sorted(by_key):
        rows = by_key[key]
        entry: dict[str, Any] = {"dataset": key[0], "framework": key[1], "mode": key[2], "runs": len(rows)}
        for name in STD_FIELDS:
            values = [getattr(r, name) for r in rows if getattr(r, name) is not None]
            entry[name] = round(_mean(values), 3) if values else None
            entry[f"{name}_std"] = round(statistics.stdev(values), 3) if len(values) > 1 else None
        out.append(entry)
    return out
