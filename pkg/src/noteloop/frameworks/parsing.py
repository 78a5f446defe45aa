"""Parsers for main-LM output: the ReAct action grammar and ``<s>``-tagged
reasoning chains."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..core import Action, Finish, Lookup, Search, Select
from ..errors import ParseError

_THOUGHT_RE = re.compile(r"^\s*\**thought\s*\d*\s*\**\s*:\s*", re.IGNORECASE | re.MULTILINE)
_ACTION_RE = re.compile(r"^\s*\**action\s*\d*\s*\**\s*:\s*", re.IGNORECASE | re.MULTILINE)
_VERB_RE = re.compile(r"\s*`?\s*([A-Za-z_]+)\s*\[")
_STEP_RE = re.compile(r"<s>(.*?)</s>", re.DOTALL | re.IGNORECASE)
_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL | re.IGNORECASE)

VERBS = ("search", "finish", "select", "lookup")


@dataclass(frozen=True)
class ParsedReactOutput:
    thought: str
    action: Action


@dataclass(frozen=True)
class ParsedCotOutput:
    steps: tuple[str, ...]
    answer: Optional[str]
    # character spans of each step's content inside the parsed text
    spans: tuple[tuple[int, int], ...] = ()


def _bracket_body(text: str, open_at: int) -> str:
    depth = 0
    for i in range(open_at, len(text)):
        ch = text[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return text[open_at + 1 : i]
    raise ParseError("unbalanced brackets in action")


def parse_action(action_text: str, mode: str = "notes") -> Action:
    m = _VERB_RE.match(action_text)
    if not m:
        raise ParseError(f"no verb[...] in action {action_text[:80]!r}")
    verb = m.group(1).lower()
    if verb not in VERBS:
        raise ParseError(f"unknown action verb {verb!r}")
    arg = _bracket_body(action_text, m.end() - 1).strip()
    if verb == "finish":
        return Finish(arg)
    if verb in ("select", "lookup"):
        if mode != "baseline":
            raise ParseError(f"{verb} is only available in baseline mode")
        if not arg:
            raise ParseError(f"{verb} needs an argument")
        return Select(arg) if verb == "select" else Lookup(arg)
    if ";" in arg:
        entity, question = (part.strip() for part in arg.split(";", 1))
    elif mode == "baseline":
        entity = question = arg
    else:
        raise ParseError("search needs 'entity; question' in notes mode")
    if not entity or not question:
        raise ParseError("search entity and question must both be non-empty")
    return Search(entity, question)


def parse_react_output(text: str, mode: str = "notes") -> ParsedReactOutput:
    """Extract the last Thought that is followed by an Action, and that Action."""
    actions = list(_ACTION_RE.finditer(text))
    if not actions:
        raise ParseError("no Action line")
    thoughts = list(_THOUGHT_RE.finditer(text))
    for thought in reversed(thoughts):
        following = [a for a in actions if a.start() > thought.end()]
        if following:
            act = following[0]
            thought_text = text[thought.end() : act.start()].strip()
            return ParsedReactOutput(thought_text, parse_action(text[act.end() :], mode))
    # no Thought label: whatever precedes the first Action is the thought
    act = actions[0]
    return ParsedReactOutput(text[: act.start()].strip(), parse_action(text[act.end() :], mode))


def parse_cot_output(text: str) -> ParsedCotOutput:
    steps, spans = [], []
    for m in _STEP_RE.finditer(text):
        content = m.group(1).strip()
        if content:
            steps.append(content)
            spans.append((m.start(1), m.end(1)))
    answer = _ANSWER_RE.search(text)
    return ParsedCotOutput(tuple(steps), answer.group(1).strip() if answer else None, tuple(spans))
