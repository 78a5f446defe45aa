from __future__ import annotations

from typing import Optional

from ..core import QAItem, RunConfig, Trace
from ..llm import Gateway
from ..retrieval import Retriever
from .base import Clock, FrameworkState, synthesize_final_answer
from .cot import run_flare, run_ircot, should_retrieve
from .parsing import ParsedCotOutput, ParsedReactOutput, parse_action, parse_cot_output, parse_react_output
from .react import run_react

RUNNERS = {"react": run_react, "ircot": run_ircot, "flare": run_flare}


def run_framework(item: QAItem, config: RunConfig, gateway: Gateway, retriever: Retriever, *,
                  clock: Optional[Clock] = None, prompt_dir: Optional[str] = None) -> Trace:
    return RUNNERS[config.framework](item, config, gateway, retriever, clock=clock, prompt_dir=prompt_dir)


__all__ = [
    "FrameworkState",
    "ParsedCotOutput",
    "ParsedReactOutput",
    "RUNNERS",
    "parse_action",
    "parse_cot_output",
    "parse_react_output",
    "run_flare",
    "run_framework",
    "run_ircot",
    "run_react",
    "should_retrieve",
    "synthesize_final_answer",
]
