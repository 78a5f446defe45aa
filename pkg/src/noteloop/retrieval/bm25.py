"""Okapi BM25 over a small JSONL corpus, with a persisted index."""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..errors import ContractError, LoadError, NotFoundError

K1 = 1.2
B = 0.75
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class CorpusDoc:
    id: str
    title: str
    text: str


@dataclass
class Corpus:
    documents: list[CorpusDoc]
    df: dict[str, int] = field(default_factory=dict)
    lengths: dict[str, int] = field(default_factory=dict)
    avg_length: float = 0.0
    _tf: dict[str, Counter] = field(default_factory=dict, repr=False)
    _by_id: dict[str, CorpusDoc] = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.documents)

    def doc(self, doc_id: str) -> CorpusDoc:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise NotFoundError(f"unknown doc id {doc_id!r}")

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log((self.n - df + 0.5) / (df + 0.5) + 1.0)

    def stats(self) -> dict:
        return {
            "n": self.n,
            "avg_length": self.avg_length,
            "df": dict(sorted(self.df.items())),
            "lengths": dict(sorted(self.lengths.items())),
        }


def bm25_build(docs: Iterable[CorpusDoc | dict]) -> Corpus:
    documents = [d if isinstance(d, CorpusDoc) else CorpusDoc(str(d["id"]), d.get("title", ""), d["text"]) for d in docs]
    if not documents:
        raise ContractError("corpus is empty")
    corpus = Corpus(documents)
    for d in documents:
        if d.id in corpus._by_id:
            raise ContractError(f"duplicate doc id {d.id!r}")
        corpus._by_id[d.id] = d
        # title is searchable text too
        tokens = tokenize(f"{d.title} {d.text}")
        tf = Counter(tokens)
        corpus._tf[d.id] = tf
        corpus.lengths[d.id] = len(tokens)
        for term in tf:
            corpus.df[term] = corpus.df.get(term, 0) + 1
    corpus.avg_length = sum(corpus.lengths.values()) / corpus.n
    return corpus


def bm25_score(corpus: Corpus, query: str, doc_id: str) -> float:
    corpus.doc(doc_id)
    tf = corpus._tf[doc_id]
    length = corpus.lengths[doc_id]
    norm = K1 * (1 - B + B * length / corpus.avg_length) if corpus.avg_length else K1
    score = 0.0
    for term in tokenize(query):
        f = tf.get(term, 0)
        if f:
            score += corpus.idf(term) * f * (K1 + 1) / (f + norm)
    return score


def bm25_rank(corpus: Corpus, query: str) -> list[tuple[str, float]]:
    """All documents with a positive score, best first, ties by ascending id."""
    terms = set(tokenize(query))
    candidates = [d.id for d in corpus.documents if terms & corpus._tf[d.id].keys()]
    scored = [(doc_id, bm25_score(corpus, query, doc_id)) for doc_id in candidates]
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored


# Persistence ----------------------------------------------------------------


def read_corpus_jsonl(path: Path | str) -> list[CorpusDoc]:
    path = Path(path)
    docs = []
    with path.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                docs.append(CorpusDoc(str(d["id"]), str(d.get("title", "")), str(d["text"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise LoadError(f"{path}:{n}: malformed corpus line ({exc})")
    if not docs:
        raise LoadError(f"{path}: corpus is empty")
    return docs


def index_path(corpus_path: Path | str) -> Path:
    p = Path(corpus_path)
    return p.with_name(p.name + ".bm25.json")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def index_corpus(corpus_path: Path | str) -> Path:
    """Build the BM25 statistics for a JSONL corpus and write them beside it."""
    corpus_path = Path(corpus_path)
    corpus = bm25_build(read_corpus_jsonl(corpus_path))
    payload = {"corpus_sha256": _digest(corpus_path), "k1": K1, "b": B, **corpus.stats()}
    out = index_path(corpus_path)
    tmp = out.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    os.replace(tmp, out)
    return out


def load_corpus(corpus_path: Path | str) -> Corpus:
    """Load a corpus, rebuilding the on-disk index if it is missing or stale."""
    corpus_path = Path(corpus_path)
    idx = index_path(corpus_path)
    stale = True
    if idx.exists():
        stale = json.loads(idx.read_text(encoding="utf-8")).get("corpus_sha256") != _digest(corpus_path)
    if stale:
        index_corpus(corpus_path)
    # term frequencies are cheap to recompute; the index file is the audit copy
    return bm25_build(read_corpus_jsonl(corpus_path))
