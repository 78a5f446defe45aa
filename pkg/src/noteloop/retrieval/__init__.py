"""The ``ret(q)`` primitive behind one interface for every backend."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..core import RetrievedDocument
from ..errors import ContractError, NotFoundError
from .bm25 import Corpus, bm25_build, bm25_rank, load_corpus
from .dense import DEFAULT_EMBED_MODEL, DenseIndex, Embedder
from .text import chunk, first_paragraph, leading_passages, lookup
from .wikipedia import WikipediaClient

log = logging.getLogger(__name__)

BACKENDS = ("wikipedia_api", "bm25_corpus", "dense_corpus")


@dataclass(frozen=True)
class RetrieverSpec:
    backend: str = "wikipedia_api"
    k: int = 5
    corpus_path: Optional[str] = None
    embed_model: Optional[str] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ContractError(f"unknown backend {self.backend!r}")
        if self.k < 1:
            raise ContractError("k must be >= 1")
        if self.backend != "wikipedia_api" and not self.corpus_path:
            raise ContractError(f"{self.backend} needs corpus_path")


def _dedupe(docs: list[RetrievedDocument], k: int) -> list[RetrievedDocument]:
    seen: set[str] = set()
    out = []
    for d in docs:
        if d.title in seen:
            continue
        seen.add(d.title)
        out.append(RetrievedDocument(d.title, d.source, d.body_markdown, len(out) + 1, d.fetch_url))
        if len(out) == k:
            break
    return out


class Retriever:
    """Base class. ``retrieve`` returns at most k documents with unique titles
    and ranks 1..n; ``fetch`` returns one document by title."""

    source = ""

    def _candidates(self, query: str, k: int) -> list[RetrievedDocument]:
        raise NotImplementedError

    def fetch(self, title: str) -> RetrievedDocument:
        raise NotImplementedError

    def retrieve(self, query: str, k: int) -> list[RetrievedDocument]:
        if not query or not query.strip():
            raise ContractError("query must be non-empty")
        if k < 1:
            raise ContractError("k must be >= 1")
        return _dedupe(self._candidates(query.strip(), k), k)


class WikipediaRetriever(Retriever):
    source = "wikipedia_api"

    def __init__(self, client: WikipediaClient, fetch_workers: int = 5):
        self.client = client
        self.fetch_workers = fetch_workers

    def _candidates(self, query: str, k: int) -> list[RetrievedDocument]:
        titles = self.client.search_titles(query, k)

        def get(pair):
            rank, title = pair
            try:
                return self.client.fetch_page(title, rank)
            except NotFoundError as exc:
                log.info("dropping %r: %s", title, exc)
                return None

        workers = max(1, min(self.fetch_workers, len(titles)))
        with ThreadPoolExecutor(workers) as pool:
            docs = list(pool.map(get, enumerate(titles, start=1)))
        return [d for d in docs if d is not None]

    def fetch(self, title: str) -> RetrievedDocument:
        return self.client.fetch_page(title)


class BM25Retriever(Retriever):
    source = "bm25_corpus"

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self._by_title = {}
        for d in corpus.documents:
            self._by_title.setdefault(d.title.lower(), d)

    @classmethod
    def from_path(cls, path: Path | str) -> BM25Retriever:
        return cls(load_corpus(path))

    def _doc(self, d, rank: int) -> RetrievedDocument:
        return RetrievedDocument(d.title or d.id, self.source, d.text, rank)

    def _candidates(self, query: str, k: int) -> list[RetrievedDocument]:
        docs = []
        for doc_id, _ in bm25_rank(self.corpus, query):
            d = self.corpus.doc(doc_id)
            if d.text.strip():
                docs.append(self._doc(d, len(docs) + 1))
        return docs

    def fetch(self, title: str) -> RetrievedDocument:
        d = self._by_title.get(title.lower())
        if d is None:
            raise NotFoundError(f"no document titled {title!r}")
        return self._doc(d, 1)


class DenseRetriever(Retriever):
    source = "dense_corpus"

    def __init__(self, corpus: Corpus, embed: Embedder, chunk_words: int = 120):
        self.corpus = corpus
        passages = []
        for d in corpus.documents:
            for piece in chunk(d.text, chunk_words):
                passages.append((d.title or d.id, piece))
        self.index = DenseIndex(passages, embed)
        self._bm25 = BM25Retriever(corpus)

    def _candidates(self, query: str, k: int) -> list[RetrievedDocument]:
        # over-fetch so title de-duplication can still fill k slots
        hits = self.index.search(query, k * 4)
        docs = []
        for i, _ in hits:
            title, text = self.index.passages[i]
            docs.append(RetrievedDocument(title, self.source, text, len(docs) + 1))
        return docs

    def fetch(self, title: str) -> RetrievedDocument:
        d = self._bm25.fetch(title)
        return RetrievedDocument(d.title, self.source, d.body_markdown, 1)


def build_retriever(spec: RetrieverSpec, http=None, embed: Optional[Embedder] = None, chunk_words: int = 120) -> Retriever:
    if spec.backend == "wikipedia_api":
        if http is None:
            from .http import LiveHttp

            http = LiveHttp()
        return WikipediaRetriever(WikipediaClient(http), fetch_workers=spec.k)
    if spec.backend == "bm25_corpus":
        return BM25Retriever.from_path(spec.corpus_path)
    if embed is None:
        from .dense import openai_embedder

        embed = openai_embedder(spec.embed_model or DEFAULT_EMBED_MODEL)
    return DenseRetriever(load_corpus(spec.corpus_path), embed, chunk_words)


def retrieve(spec: RetrieverSpec, query: str, retriever: Optional[Retriever] = None) -> list[RetrievedDocument]:
    retriever = retriever or build_retriever(spec)
    return retriever.retrieve(query, spec.k)


def retrieve_chunks(retriever: Retriever, query: str, k: int, max_words: int = 120) -> list[tuple[str, str]]:
    """Baseline context for IRCoT/FLARE: the k best (title, chunk) passages
    among the chunks of the retrieved documents, ranked by BM25 against the
    query."""
    docs = retriever.retrieve(query, k)
    passages = []
    for d in docs:
        for i, piece in enumerate(chunk(d, max_words)):
            passages.append((f"{d.rank:03d}-{i:04d}", d.title, piece))
    if not passages:
        return []
    local = bm25_build({"id": pid, "title": "", "text": text} for pid, _, text in passages)
    order = [pid for pid, _ in bm25_rank(local, query)]
    scored = set(order)
    # passages with no lexical overlap keep retrieval order after the scored ones
    order += [pid for pid, _, _ in passages if pid not in scored]
    by_id = {pid: (title, text) for pid, title, text in passages}
    return [by_id[pid] for pid in order[:k]]


__all__ = [
    "BACKENDS",
    "BM25Retriever",
    "DenseRetriever",
    "Retriever",
    "RetrieverSpec",
    "WikipediaRetriever",
    "build_retriever",
    "chunk",
    "first_paragraph",
    "leading_passages",
    "lookup",
    "retrieve",
    "retrieve_chunks",
]
