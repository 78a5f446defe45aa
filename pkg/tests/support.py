"""Shared builders for scripted gateways, in-memory retrievers and items."""

from __future__ import annotations

from pathlib import Path

from noteloop.core import QAItem, RetrievedDocument, RunConfig
from noteloop.errors import NotFoundError
from noteloop.llm import PlaybackGateway, parse_playback_entry
from noteloop.retrieval import Retriever, WikipediaRetriever
from noteloop.retrieval.http import FixtureHttp
from noteloop.retrieval.wikipedia import WikipediaClient

FIXTURES = Path(__file__).parent / "fixtures"
MAIN = "Solve a question answering task"
NOTES = "Extract relevant information which is not previously extracted"
SYNTH = "the step budget is exhausted"
COT = "Step-by-step reasoning:"


def entry(response: str, *subs: str, usage=(10, 2), **extra) -> dict:
    d = {"match": "prefix", "prompt_substring": list(subs), "response": response,
         "usage": {"input": usage[0], "output": usage[1]}}
    d.update(extra)
    return d


def gateway(*entries: dict) -> PlaybackGateway:
    return PlaybackGateway([parse_playback_entry(e, i) for i, e in enumerate(entries, start=1)])


def item(question="Which club did he join?", golds=("Atlético Madrid",), id="q1", dataset="frames") -> QAItem:
    return QAItem(id=id, question=question, gold_answers=tuple(golds), dataset=dataset)


def doc(title: str, body: str, rank: int = 1, source="bm25_corpus") -> RetrievedDocument:
    return RetrievedDocument(title, source, body, rank)


class StaticRetriever(Retriever):
    """Answers every query from a fixed table; unknown queries use ``default``."""

    source = "bm25_corpus"

    def __init__(self, table: dict[str, list[tuple[str, str]]] | None = None,
                 default: list[tuple[str, str]] | None = None):
        self.table = table or {}
        self.default = default if default is not None else [("Page A", "Alpha text about things.")]
        self.queries: list[str] = []

    def _candidates(self, query, k):
        self.queries.append(query)
        pages = self.table.get(query, self.default)
        return [doc(t, b, i) for i, (t, b) in enumerate(pages, start=1)]

    def fetch(self, title):
        for pages in [*self.table.values(), self.default]:
            for t, b in pages:
                if t == title:
                    return doc(t, b)
        raise NotFoundError(title)


def wiki_retriever() -> WikipediaRetriever:
    return WikipediaRetriever(WikipediaClient(FixtureHttp.load(FIXTURES / "wiki_http.jsonl")))


def config(**kw) -> RunConfig:
    return RunConfig(**kw)
