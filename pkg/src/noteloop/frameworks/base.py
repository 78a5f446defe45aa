"""Machinery shared by the three loops: run state, fatal-error handling,
observation gathering, and forced answer synthesis."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..assets import load_prompt
from ..core import (
    NO_INFO_SENTINEL,
    Finish,
    Observation,
    QAItem,
    ReasoningStep,
    RunConfig,
    Trace,
    UsageMeter,
    format_action,
    trace_append,
)
from ..errors import FatalRunError
from ..llm import ChatMessage, Gateway, ask
from ..notes import PrevContextStore, write_notes
from ..retrieval import Retriever, retrieve_chunks

log = logging.getLogger(__name__)

Clock = Callable[[], float]


@dataclass
class FrameworkState:
    item: QAItem
    config: RunConfig
    trace: Trace
    prev_notes: PrevContextStore = field(default_factory=PrevContextStore)
    prompt_dir: Optional[str] = None

    @property
    def history(self) -> list[ReasoningStep]:
        return self.trace.steps

    @property
    def next_index(self) -> int:
        return len(self.trace.steps) + 1

    def record(self, **fields) -> ReasoningStep:
        step = ReasoningStep(index=self.next_index, **fields)
        trace_append(self.trace, step)
        return step


def raw_observation(step_index: int, text: str) -> Observation:
    if not text.strip():
        return Observation(step_index, (), NO_INFO_SENTINEL, True, kind="raw")
    return Observation(step_index, (), text, False, kind="raw")


def notes_observation(state: FrameworkState, gateway: Gateway, retriever: Retriever,
                      retrieval_query: str, notes_query: str, meter: UsageMeter) -> Observation:
    cfg = state.config
    docs = retriever.retrieve(retrieval_query, cfg.k)
    return write_notes(
        notes_query, docs, state.prev_notes, gateway,
        model=cfg.notes_model, temperature=cfg.temperature, step_index=state.next_index,
        meter=meter, k=cfg.k, max_words=cfg.notes_max_words,
    )


def chunk_observation(state: FrameworkState, retriever: Retriever, query: str) -> Observation:
    cfg = state.config
    passages = retrieve_chunks(retriever, query, cfg.k, cfg.chunk_words)
    text = "\n\n".join(f"{title} - {' '.join(body.split())}" for title, body in passages)
    return raw_observation(state.next_index, text)


def _history_text(steps: list[ReasoningStep]) -> str:
    lines = []
    for s in steps:
        if s.thought:
            lines.append(f"Step {s.index} thought: {s.thought}")
        if s.action is not None:
            lines.append(f"Step {s.index} action: {format_action(s.action)}")
        elif s.query:
            lines.append(f"Step {s.index} query: {s.query}")
    return "\n".join(lines) or "(none)"


def synthesize_final_answer(state: FrameworkState, gateway: Gateway) -> str:
    """One main-LM call over the question, every step, and every observation."""
    observations = [
        f"[Step {s.index}]\n{s.observation.rendered}" for s in state.history if s.observation is not None
    ]
    values = {
        "{question}": state.item.question,
        "{history}": _history_text(state.history),
        "{observations}": "\n\n".join(observations) or "(none)",
    }
    prompt = load_prompt("synthesis_prompt.txt", state.prompt_dir)
    for slot, value in values.items():
        prompt = prompt.replace(slot, value, 1)
    completion = ask(gateway, state.config.main_model, [ChatMessage("user", prompt)], state.config.temperature)
    answer = completion.text.strip()
    if not answer:
        log.warning("item %s: synthesis returned an empty answer", state.item.id)
        state.trace.flags.append("empty_synthesis")
    state.record(raw_lm_output=completion.text, action=Finish(answer), main_usage=completion.usage)
    return answer


def run_with_guard(item: QAItem, config: RunConfig, body, clock: Optional[Clock] = None,
                   prompt_dir: Optional[str] = None) -> Trace:
    """Run ``body(state)`` and convert fatal errors into a terminated trace."""
    clock = clock or time.perf_counter
    trace = Trace(item_id=item.id, framework=config.framework, mode=config.mode)
    state = FrameworkState(item=item, config=config, trace=trace, prompt_dir=prompt_dir)
    start = clock()
    try:
        body(state)
    except FatalRunError as exc:
        log.warning("item %s failed: %s", item.id, exc)
        trace.terminated_by = "fatal_error"
        trace.final_answer = None
        trace.error = f"{type(exc).__name__}: {exc}"
    trace.wall_time_ms = int(round((clock() - start) * 1000))
    return trace


def finish_by_budget(state: FrameworkState, gateway: Gateway) -> None:
    state.trace.final_answer = synthesize_final_answer(state, gateway)
    state.trace.terminated_by = "budget_exhausted"
