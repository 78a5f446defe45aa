"""MediaWiki action API client: title search and page HTML via ``parse``."""

from __future__ import annotations

import logging
from urllib.parse import quote

from ..core import RetrievedDocument
from ..errors import ContractError, NotFoundError, TransportError
from .http import HttpGetter
from .text import document_from_html

log = logging.getLogger(__name__)

API_URL = "https://en.wikipedia.org/w/api.php"
PAGE_URL = "https://en.wikipedia.org/wiki/"


class WikipediaClient:
    def __init__(self, http: HttpGetter, api_url: str = API_URL):
        self.http = http
        self.api_url = api_url

    def search_titles(self, query: str, k: int) -> list[str]:
        if not query or not query.strip():
            raise ContractError("search query must be non-empty")
        if k < 1:
            raise ContractError("k must be >= 1")
        data = self.http.get_json(
            self.api_url,
            {
                "action": "query",
                "list": "search",
                "srsearch": query.strip(),
                "srlimit": k,
                "srprop": "",
                "format": "json",
                "formatversion": 2,
            },
        )
        try:
            hits = data["query"]["search"]
        except (KeyError, TypeError):
            raise TransportError(f"unexpected search payload: {str(data)[:200]}")
        return [h["title"] for h in hits][:k]

    def fetch_page(self, title: str, rank: int = 1) -> RetrievedDocument:
        data = self.http.get_json(
            self.api_url,
            {
                "action": "parse",
                "page": title,
                "prop": "text",
                "redirects": 1,
                "disableeditsection": 1,
                "format": "json",
                "formatversion": 2,
            },
        )
        if "error" in data:
            raise NotFoundError(f"page {title!r}: {data['error'].get('info', data['error'])}")
        parsed = data.get("parse") or {}
        html = parsed.get("text") or ""
        if isinstance(html, dict):  # formatversion=1 payloads
            html = html.get("*", "")
        resolved = parsed.get("title") or title
        if not html.strip():
            raise NotFoundError(f"page {title!r} is empty")
        return document_from_html(
            resolved, html, "wikipedia_api", rank, PAGE_URL + quote(resolved.replace(" ", "_"))
        )


def search_wikipedia_titles(client: WikipediaClient, query: str, k: int) -> list[str]:
    return client.search_titles(query, k)


def fetch_page_markdown(client: WikipediaClient, title: str) -> RetrievedDocument:
    return client.fetch_page(title)
