"""ReAct loop, in baseline form and with note-extraction observations."""

from __future__ import annotations

from typing import Optional

from ..assets import load_prompt
from ..core import (
    NO_INFO_SENTINEL,
    Finish,
    Lookup,
    Observation,
    QAItem,
    RunConfig,
    Search,
    Select,
    Trace,
    UsageMeter,
    format_action,
)
from ..errors import ContractError, NotFoundError, ParseError
from ..llm import ChatMessage, Gateway, ask
from ..retrieval import Retriever, first_paragraph, leading_passages, lookup
from .base import (
    Clock,
    FrameworkState,
    finish_by_budget,
    notes_observation,
    raw_observation,
    run_with_guard,
)
from .parsing import parse_react_output

NOTES_ACTIONS = """(1) search[entity; question], which searches Wikipedia for pages about the entity and returns notes from those pages that answer the question. Keep the entity short (a page title or name) and the question specific.
(2) finish[answer], which returns the answer and finishes the task."""

BASELINE_ACTIONS = """(1) search[query], which searches Wikipedia and returns the first paragraph of the top 5 matching pages.
(2) select[title], which opens the page with that exact title and returns its first passages.
(3) lookup[term], which returns the paragraphs containing the term in the currently selected page.
(4) finish[answer], which returns the answer and finishes the task."""


def react_system_prompt(mode: str, prompt_dir: Optional[str] = None) -> str:
    actions = NOTES_ACTIONS if mode == "notes" else BASELINE_ACTIONS
    return load_prompt("react_system.txt", prompt_dir).replace("{actions}", actions)


def react_messages(state: FrameworkState) -> list[ChatMessage]:
    messages = [
        ChatMessage("system", react_system_prompt(state.config.mode, state.prompt_dir)),
        ChatMessage("user", f"Question: {state.item.question}"),
    ]
    for s in state.history:
        if s.action is not None:
            turn = f"Thought: {s.thought or ''}\nAction: {format_action(s.action)}"
        else:
            turn = s.raw_lm_output.strip() or "(no output)"
        messages.append(ChatMessage("assistant", turn))
        if s.observation is not None:
            messages.append(ChatMessage("user", f"Observation: {s.observation.rendered}"))
    return messages


def _baseline_search(state: FrameworkState, retriever: Retriever, query: str) -> Observation:
    docs = retriever.retrieve(query, state.config.k)
    blocks = [f"Wikipedia Title: {d.title}\n{first_paragraph(d)}" for d in docs]
    return raw_observation(state.next_index, "\n".join(blocks))


def run_react(
    item: QAItem,
    config: RunConfig,
    gateway: Gateway,
    retriever: Retriever,
    *,
    clock: Optional[Clock] = None,
    prompt_dir: Optional[str] = None,
) -> Trace:
    if config.framework != "react":
        raise ContractError("run_react needs framework=react")

    def body(state: FrameworkState) -> None:
        cfg = state.config
        selected = None  # page opened by select[...] (baseline only)
        budget = 0
        while budget < cfg.max_steps:
            completion = ask(gateway, cfg.main_model, react_messages(state), cfg.temperature)
            try:
                parsed = parse_react_output(completion.text, cfg.mode)
            except ParseError:
                state.record(
                    raw_lm_output=completion.text,
                    observation=Observation(state.next_index, (), NO_INFO_SENTINEL, True),
                    main_usage=completion.usage,
                )
                budget += 1
                continue

            action = parsed.action
            if isinstance(action, Finish):
                state.record(
                    raw_lm_output=completion.text, thought=parsed.thought,
                    action=action, main_usage=completion.usage,
                )
                state.trace.final_answer = action.answer
                state.trace.terminated_by = "finish_action"
                return

            notes_meter = UsageMeter()
            query = None
            if isinstance(action, Search):
                query = action.entity
                if cfg.mode == "notes":
                    obs = notes_observation(state, gateway, retriever, action.entity, action.question, notes_meter)
                else:
                    query = action.entity if action.entity == action.question else f"{action.entity} {action.question}"
                    obs = _baseline_search(state, retriever, query)
            elif isinstance(action, Select):
                try:
                    selected = retriever.fetch(action.title)
                    obs = raw_observation(state.next_index, "\n\n".join(leading_passages(selected, 10)))
                except NotFoundError:
                    obs = raw_observation(state.next_index, f"Could not find page [{action.title}].")
            else:
                assert isinstance(action, Lookup)
                if selected is None:
                    obs = raw_observation(state.next_index, "No page is selected. Use select[title] first.")
                else:
                    hits = lookup(selected, action.term)
                    text = "\n\n".join(hits) if hits else f"No paragraphs containing [{action.term}]."
                    obs = raw_observation(state.next_index, text)

            state.record(
                raw_lm_output=completion.text, thought=parsed.thought, query=query,
                action=action, observation=obs,
                main_usage=completion.usage, notes_usage=notes_meter.total,
            )
            budget += 1
        finish_by_budget(state, gateway)

    return run_with_guard(item, config, body, clock=clock, prompt_dir=prompt_dir)
