"""Query-focused note extraction.

Each retrieved page goes to the notes LM on its own together with the query
and whatever was already extracted from that page for the current question.
Accepted notes (``YES#...``) are assembled, in source rank order, into the
observation the main LM sees in place of the raw pages.
"""

from __future__ import annotations

import contextvars
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .assets import load_prompt
from .core import NO_INFO_SENTINEL, Note, Observation, RetrievedDocument, UsageMeter
from .errors import ContractError
from .llm import ChatMessage, Gateway, ask
from .retrieval.text import truncate_words

log = logging.getLogger(__name__)

SLOTS = ("{Context}", "{PrevContext}", "{Query}")
_SLOT_RE = re.compile(r"\{(Context|PrevContext|Query)\}")
_MARKER_RE = re.compile(r"^\s*(yes|no)\s*#", re.IGNORECASE)


@dataclass(frozen=True)
class NotesPrompt:
    template: str

    def __post_init__(self):
        for slot in SLOTS:
            n = self.template.count(slot)
            if n != 1:
                raise ContractError(f"notes template must contain {slot} exactly once (found {n})")

    @classmethod
    def default(cls) -> NotesPrompt:
        return cls(load_prompt("notes_prompt.txt"))

    def fill(self, context: str, prev: str, query: str) -> str:
        # single pass, so slot-like text inside a page body is never expanded
        values = {"Context": context, "PrevContext": prev, "Query": query}
        return _SLOT_RE.sub(lambda m: values[m.group(1)], self.template)


class PrevContextStore:
    """Per-question record of what was already extracted, keyed by page title."""

    def __init__(self):
        self._notes: dict[str, list[str]] = {}
        self._lock = threading.Lock()

    def get(self, title: str) -> list[str]:
        with self._lock:
            return list(self._notes.get(title, ()))

    def add(self, title: str, content: str) -> None:
        with self._lock:
            self._notes.setdefault(title, []).append(content)

    def render(self, title: str) -> str:
        notes = self.get(title)
        return "\n".join(notes) if notes else "None"

    def clear(self) -> None:
        with self._lock:
            self._notes.clear()

    def as_dict(self) -> dict[str, list[str]]:
        with self._lock:
            return {k: list(v) for k, v in self._notes.items()}


def parse_notes_response(text: str) -> Optional[str]:
    """Note content for an accepting response, else None.

    Raises ``ValueError`` when no YES/NO marker is present.
    """
    m = _MARKER_RE.match(text)
    if not m:
        raise ValueError("no YES#/NO# marker")
    if m.group(1).lower() != "yes":
        return None
    content = text[m.end() :].strip()
    return content or None


def extract_note(
    query: str,
    doc: RetrievedDocument,
    prev: PrevContextStore,
    gateway: Gateway,
    *,
    model: str,
    temperature: float = 0.7,
    step_index: int = 1,
    meter: Optional[UsageMeter] = None,
    prompt: Optional[NotesPrompt] = None,
    max_words: int = 24_000,
) -> Optional[Note]:
    if not query or not query.strip():
        raise ContractError("notes query must be non-empty")
    prompt = prompt or NotesPrompt.default()
    body, truncated = truncate_words(doc.body_markdown, max_words)
    if truncated:
        log.warning("truncated %r to %d words for note extraction", doc.title, max_words)
    text = prompt.fill(body, prev.render(doc.title), query.strip())
    completion = ask(gateway, model, [ChatMessage("user", text)], temperature)
    if meter is not None:
        meter.add(completion.usage)
    try:
        content = parse_notes_response(completion.text)
    except ValueError:
        log.warning("malformed notes response for %r rejected: %.80r", doc.title, completion.text)
        return None
    if content is None:
        return None
    prev.add(doc.title, content)
    return Note(page_title=doc.title, content=content, step_index=step_index)


def _one_line(text: str) -> str:
    return " ".join(text.split())


def render_observation(obs: Observation) -> str:
    if not obs.notes:
        return NO_INFO_SENTINEL
    return "\n".join(
        f"(Result {i}) {_one_line(n.page_title)} - {_one_line(n.content)}"
        for i, n in enumerate(obs.notes, start=1)
    )


def make_observation(step_index: int, notes: Sequence[Note]) -> Observation:
    notes = tuple(notes)
    draft = Observation(step_index, notes, "", not notes)
    return Observation(step_index, notes, render_observation(draft), not notes)


def write_notes(
    query: str,
    docs: Sequence[RetrievedDocument],
    prev: PrevContextStore,
    gateway: Gateway,
    *,
    model: str,
    temperature: float = 0.7,
    step_index: int = 1,
    meter: Optional[UsageMeter] = None,
    prompt: Optional[NotesPrompt] = None,
    k: Optional[int] = None,
    max_words: int = 24_000,
) -> Observation:
    if k is not None and len(docs) > k:
        raise ContractError(f"{len(docs)} documents exceed k={k}")
    prompt = prompt or NotesPrompt.default()
    ordered = sorted(docs, key=lambda d: d.rank)

    def work(doc: RetrievedDocument) -> Optional[Note]:
        return extract_note(
            query, doc, prev, gateway,
            model=model, temperature=temperature, step_index=step_index,
            meter=meter, prompt=prompt, max_words=max_words,
        )

    workers = len(ordered) if gateway.parallel_safe else 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            # each task carries the caller's context (playback item scoping)
            futures = [pool.submit(contextvars.copy_context().run, work, d) for d in ordered]
            results = [f.result() for f in futures]
    else:
        results = [work(d) for d in ordered]
    return make_observation(step_index, [n for n in results if n is not None])
