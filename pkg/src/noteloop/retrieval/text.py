"""HTML-to-Markdown normalization and the document shaping helpers used by
the baselines (first paragraph, lookup, chunking)."""

from __future__ import annotations

import re

from bs4 import BeautifulSoup
from markdownify import markdownify

from ..core import RetrievedDocument
from ..errors import ContractError, NotFoundError

# Page furniture that carries no article content.
_STRIP_TAGS = ("script", "style", "nav", "noscript", "link", "meta", "head")
_STRIP_CLASSES = (
    "mw-editsection",
    "navbox",
    "reflist",
    "mw-references-wrap",
    "reference",
    "references",
    "mw-jump-link",
    "metadata",
    "noprint",
)
_TAG_RE = re.compile(r"<(?=[A-Za-z/!?])")
_CODE_RE = re.compile(r"(`+)(.+?)\1", re.S)
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


def html_to_markdown(html: str) -> str:
    """Convert page HTML to Markdown with ATX headings and pipe tables."""
    soup = BeautifulSoup(html or "", "html.parser")
    for tag in soup(_STRIP_TAGS):
        tag.decompose()
    for cls in _STRIP_CLASSES:
        for tag in soup.select(f".{cls}"):
            tag.decompose()
    md = markdownify(str(soup), heading_style="ATX", bullets="-", strip=["img"])
    md = _escape_tag_like(md)
    md = re.sub(r"[ \t]+\n", "\n", md)
    md = re.sub(r"\n{3,}", "\n\n", md)
    return md.strip()


def _escape_tag_like(md: str) -> str:
    # literal "<x" text decoded from entities must not read as markup,
    # code spans are left untouched
    out, pos = [], 0
    for m in _CODE_RE.finditer(md):
        out.append(_TAG_RE.sub("&lt;", md[pos : m.start()]))
        out.append(m.group(0))
        pos = m.end()
    out.append(_TAG_RE.sub("&lt;", md[pos:]))
    return "".join(out)


def document_from_html(title: str, html: str, source: str, rank: int, url: str | None = None) -> RetrievedDocument:
    body = html_to_markdown(html)
    if not body:
        raise NotFoundError(f"page {title!r} has no content")
    return RetrievedDocument(title=title, source=source, body_markdown=body, rank=rank, fetch_url=url)


def paragraphs(text: str) -> list[str]:
    return [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]


def _is_heading(block: str) -> bool:
    return block.lstrip().startswith("#")


def first_paragraph(doc: RetrievedDocument) -> str:
    if not doc.body_markdown.strip():
        raise ContractError("document body is empty")
    for block in paragraphs(doc.body_markdown):
        if not _is_heading(block):
            return block
    return doc.body_markdown.strip()


def leading_passages(doc: RetrievedDocument, n: int = 10) -> list[str]:
    return [b for b in paragraphs(doc.body_markdown) if not _is_heading(b)][:n]


def lookup(doc: RetrievedDocument, term: str) -> list[str]:
    if not term.strip():
        raise ContractError("lookup term must be non-empty")
    needle = term.lower()
    return [p for p in paragraphs(doc.body_markdown) if needle in p.lower()]


def _split_long(paragraph: str, max_words: int) -> list[str]:
    pieces: list[str] = []
    current: list[str] = []
    for sentence in _SENTENCE_RE.split(paragraph):
        words = sentence.split()
        # a sentence longer than the cap is hard-split on words
        while len(words) > max_words:
            if current:
                pieces.append(" ".join(current))
                current = []
            pieces.append(" ".join(words[:max_words]))
            words = words[max_words:]
        if current and len(current) + len(words) > max_words:
            pieces.append(" ".join(current))
            current = []
        current.extend(words)
    if current:
        pieces.append(" ".join(current))
    return pieces


def chunk(doc: RetrievedDocument | str, max_words: int = 120) -> list[str]:
    """Pack whole paragraphs into chunks of at most ``max_words`` words."""
    if max_words < 1:
        raise ContractError("max_words must be >= 1")
    body = doc.body_markdown if isinstance(doc, RetrievedDocument) else doc
    chunks: list[str] = []
    current: list[str] = []
    count = 0
    for para in paragraphs(body):
        n = len(para.split())
        if n > max_words:
            if current:
                chunks.append("\n\n".join(current))
                current, count = [], 0
            chunks.extend(_split_long(para, max_words))
            continue
        if current and count + n > max_words:
            chunks.append("\n\n".join(current))
            current, count = [], 0
        current.append(para)
        count += n
    if current:
        chunks.append("\n\n".join(current))
    return chunks


def truncate_words(text: str, max_words: int) -> tuple[str, bool]:
    """Keep the first ``max_words`` whitespace-delimited words."""
    words = re.findall(r"\S+\s*", text)
    if len(words) <= max_words:
        return text, False
    return "".join(words[:max_words]).rstrip(), True
