"""Chain-of-thought loops with retrieval: IRCoT (retrieve on every new step)
and FLARE (retrieve only when the next step is generated with low confidence)."""

from __future__ import annotations

import math
from typing import Optional

from ..assets import load_prompt
from ..core import Observation, QAItem, RunConfig, Trace, TokenUsage, UsageMeter
from ..errors import ContractError
from ..llm import ChatMessage, Completion, Gateway, ask, min_token_confidence
from ..retrieval import Retriever
from .base import (
    Clock,
    FrameworkState,
    chunk_observation,
    finish_by_budget,
    notes_observation,
    run_with_guard,
)
from .parsing import ParsedCotOutput, parse_cot_output

REPROMPT = (
    "Your reply contained no <s> </s> reasoning steps and no <answer> </answer> tag. "
    "Continue the reasoning chain with steps enclosed in <s> </s>, or give the final answer inside <answer> </answer>."
)


def should_retrieve(conf: float, theta: float) -> bool:
    """Retrieval fires on low confidence only; a tie keeps the sentence."""
    if not (0.0 <= conf <= 1.0 and 0.0 <= theta <= 1.0):
        raise ContractError(f"confidence and threshold must lie in [0, 1], got {conf}, {theta}")
    return conf < theta


class _Chain:
    """Prompt material accumulated over one question."""

    def __init__(self, state: FrameworkState):
        self.state = state
        self.steps: list[str] = []
        self.documents: list[str] = []
        self._fewshot = load_prompt("ircot_flare_fewshot.txt", state.prompt_dir).rstrip()

    def add_observation(self, obs: Optional[Observation]) -> None:
        if obs is None or obs.empty:
            return
        for block in obs.rendered.split("\n" if obs.kind == "notes" else "\n\n"):
            block = block.strip()
            if block and block not in self.documents:
                self.documents.append(block)

    def prompt(self) -> str:
        parts = [self._fewshot, ""]
        if self.documents:
            parts.append("DOCUMENTS:\n" + "\n\n".join(self.documents) + "\n")
        parts.append(f"Question: {self.state.item.question}\nStep-by-step reasoning:")
        text = "\n\n".join(parts) + "\n"
        return text + "".join(f"<s>{s}</s>\n" for s in self.steps)

    def generate(self, gateway: Gateway, want_logprobs: bool = False) -> Completion:
        cfg = self.state.config
        return ask(gateway, cfg.main_model, [ChatMessage("user", self.prompt())], cfg.temperature, want_logprobs)

    def reprompt(self, gateway: Gateway, previous: Completion, want_logprobs: bool = False) -> Completion:
        cfg = self.state.config
        messages = [
            ChatMessage("user", self.prompt()),
            ChatMessage("assistant", previous.text or "(no output)"),
            ChatMessage("user", REPROMPT),
        ]
        return ask(gateway, cfg.main_model, messages, cfg.temperature, want_logprobs)


def _observe(state: FrameworkState, gateway: Gateway, retriever: Retriever, query: str,
             meter: UsageMeter) -> Observation:
    if state.config.mode == "notes":
        # the query both selects the pages and steers note extraction
        return notes_observation(state, gateway, retriever, query, query, meter)
    return chunk_observation(state, retriever, query)


def _is_blank(parsed: ParsedCotOutput) -> bool:
    return not parsed.steps and parsed.answer is None


def run_ircot(
    item: QAItem,
    config: RunConfig,
    gateway: Gateway,
    retriever: Retriever,
    *,
    clock: Optional[Clock] = None,
    prompt_dir: Optional[str] = None,
) -> Trace:
    if config.framework != "ircot":
        raise ContractError("run_ircot needs framework=ircot")

    def body(state: FrameworkState) -> None:
        chain = _Chain(state)
        query = item.question
        for _ in range(state.config.max_steps):
            meter = UsageMeter()
            obs = _observe(state, gateway, retriever, query, meter)
            chain.add_observation(obs)
            completion = chain.generate(gateway)
            usage = completion.usage
            parsed = parse_cot_output(completion.text)
            raw = completion.text
            if _is_blank(parsed):
                completion = chain.reprompt(gateway, completion)
                usage = usage + completion.usage
                parsed = parse_cot_output(completion.text)
                raw = raw + "\n" + completion.text
            state.record(
                raw_lm_output=raw, thought=" ".join(parsed.steps) or None, query=query,
                observation=obs, main_usage=usage, notes_usage=meter.total,
            )
            chain.steps.extend(parsed.steps)
            if parsed.answer is not None:
                state.trace.final_answer = parsed.answer
                state.trace.terminated_by = "answer_tag"
                return
            if parsed.steps:
                query = parsed.steps[-1]
        finish_by_budget(state, gateway)

    return run_with_guard(item, config, body, clock=clock, prompt_dir=prompt_dir)


def _weakest_sentence(completion: Completion, parsed: ParsedCotOutput, fallback: str) -> str:
    """The step holding the least confident token, else the first step."""
    lps, toks = completion.token_logprobs, completion.tokens
    if parsed.steps and lps and toks is not None and len(toks) == len(lps):
        worst = min(range(len(lps)), key=lambda i: lps[i])
        offset = sum(len(t) for t in toks[:worst])
        for step, (start, end) in zip(parsed.steps, parsed.spans):
            if start <= offset < end or offset < start:
                return step
    if parsed.steps:
        return parsed.steps[0]
    return parsed.answer or fallback


def run_flare(
    item: QAItem,
    config: RunConfig,
    gateway: Gateway,
    retriever: Retriever,
    *,
    clock: Optional[Clock] = None,
    prompt_dir: Optional[str] = None,
) -> Trace:
    if config.framework != "flare":
        raise ContractError("run_flare needs framework=flare")

    def body(state: FrameworkState) -> None:
        cfg = state.config
        chain = _Chain(state)
        for _ in range(cfg.max_steps):
            tentative = chain.generate(gateway, want_logprobs=True)
            usage: TokenUsage = tentative.usage
            raw = tentative.text
            parsed = parse_cot_output(tentative.text)
            if _is_blank(parsed):
                tentative = chain.reprompt(gateway, tentative, want_logprobs=True)
                usage = usage + tentative.usage
                raw = raw + "\n" + tentative.text
                parsed = parse_cot_output(tentative.text)

            conf = min_token_confidence(tentative)
            if math.isnan(conf):
                conf = 0.0
            meter = UsageMeter()
            query = obs = None
            if should_retrieve(conf, cfg.theta):
                query = _weakest_sentence(tentative, parsed, item.question)
                obs = _observe(state, gateway, retriever, query, meter)
                chain.add_observation(obs)
                regenerated = chain.generate(gateway)
                usage = usage + regenerated.usage
                raw = raw + "\n" + regenerated.text
                parsed = parse_cot_output(regenerated.text)

            state.record(
                raw_lm_output=raw, thought=" ".join(parsed.steps) or None, query=query,
                observation=obs, main_usage=usage, notes_usage=meter.total,
            )
            chain.steps.extend(parsed.steps)
            if parsed.answer is not None:
                state.trace.final_answer = parsed.answer
                state.trace.terminated_by = "answer_tag"
                return
        finish_by_budget(state, gateway)

    return run_with_guard(item, config, body, clock=clock, prompt_dir=prompt_dir)
