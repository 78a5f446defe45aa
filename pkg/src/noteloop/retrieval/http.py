"""Minimal GET layer for retrieval backends with record/replay fixtures.

Fixture files are JSONL with one ``{url, params, response_body, status}``
object per request. Headers are never recorded.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any, Optional

import httpx

from ..errors import ConfigurationError, FixtureMissError, LoadError, TransportError


def _norm_params(params: Optional[dict]) -> dict:
    return {str(k): str(v) for k, v in sorted((params or {}).items())}


class HttpGetter:
    def get_json(self, url: str, params: Optional[dict] = None) -> Any:
        raise NotImplementedError


class LiveHttp(HttpGetter):
    def __init__(self, client: Optional[httpx.Client] = None, user_agent: str = "noteloop/0.1", timeout: float = 30.0):
        if client is None:
            if os.environ.get("NOTELOOP_OFFLINE", "") not in ("", "0"):
                raise ConfigurationError("live HTTP is disabled (NOTELOOP_OFFLINE)")
            client = httpx.Client(timeout=timeout, headers={"User-Agent": user_agent})
        self.client = client

    def fetch(self, url: str, params: Optional[dict] = None) -> tuple[int, str]:
        try:
            resp = self.client.get(url, params=_norm_params(params))
        except httpx.TransportError as exc:
            raise TransportError(f"GET {url} failed: {exc}")
        return resp.status_code, resp.text

    def get_json(self, url: str, params: Optional[dict] = None) -> Any:
        status, body = self.fetch(url, params)
        if status >= 400:
            raise TransportError(f"GET {url} returned HTTP {status}")
        return json.loads(body)


class RecordingHttp(HttpGetter):
    def __init__(self, inner: LiveHttp, path: Path | str):
        self.inner = inner
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def get_json(self, url: str, params: Optional[dict] = None) -> Any:
        status, body = self.inner.fetch(url, params)
        row = {"url": url, "params": _norm_params(params), "response_body": body, "status": status}
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        if status >= 400:
            raise TransportError(f"GET {url} returned HTTP {status}")
        return json.loads(body)


class FixtureHttp(HttpGetter):
    """Replays recorded responses; any unrecorded request is an error."""

    def __init__(self, rows: list[dict]):
        self._table: dict[tuple, dict] = {}
        for row in rows:
            key = (row["url"], json.dumps(_norm_params(row.get("params")), sort_keys=True))
            self._table.setdefault(key, row)

    @classmethod
    def load(cls, path: Path | str) -> FixtureHttp:
        rows = []
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                row["url"], row["response_body"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise LoadError(f"{path}:{n}: malformed fixture ({exc})")
            rows.append(row)
        return cls(rows)

    def get_json(self, url: str, params: Optional[dict] = None) -> Any:
        key = (url, json.dumps(_norm_params(params), sort_keys=True))
        row = self._table.get(key)
        if row is None:
            raise FixtureMissError(f"no fixture for GET {url} {_norm_params(params)}")
        if int(row.get("status", 200)) >= 400:
            raise TransportError(f"GET {url} returned HTTP {row['status']}")
        body = row["response_body"]
        return json.loads(body) if isinstance(body, str) else body
