"""Dense retrieval adapter: embeds corpus chunks through an embeddings
endpoint and ranks them by cosine similarity."""

from __future__ import annotations

import os
from typing import Callable, Optional, Sequence

import httpx
import numpy as np

from ..errors import ConfigurationError, ProviderError, TransportError

DEFAULT_EMBED_MODEL = "intfloat/e5-base-v2"

Embedder = Callable[[Sequence[str]], np.ndarray]


def openai_embedder(
    model: str = DEFAULT_EMBED_MODEL,
    base_url: Optional[str] = None,
    api_key: Optional[str] = None,
    client: Optional[httpx.Client] = None,
    batch: int = 64,
) -> Embedder:
    base = (base_url or os.environ.get("NOTELOOP_API_BASE") or "").rstrip("/")
    key = api_key if api_key is not None else os.environ.get("NOTELOOP_API_KEY", "")
    if not base:
        raise ConfigurationError("no embeddings endpoint: set NOTELOOP_API_BASE")
    if client is None:
        if os.environ.get("NOTELOOP_OFFLINE", "") not in ("", "0"):
            raise ConfigurationError("live embedding calls are disabled (NOTELOOP_OFFLINE)")
        client = httpx.Client(timeout=120.0)
    headers = {"Authorization": f"Bearer {key}"} if key else {}

    def embed(texts: Sequence[str]) -> np.ndarray:
        rows = []
        for i in range(0, len(texts), batch):
            try:
                resp = client.post(f"{base}/embeddings", json={"model": model, "input": list(texts[i : i + batch])}, headers=headers)
            except httpx.TransportError as exc:
                raise TransportError(f"embeddings request failed: {exc}")
            if resp.status_code >= 400:
                raise ProviderError(f"embeddings HTTP {resp.status_code}: {resp.text[:300]}")
            data = sorted(resp.json()["data"], key=lambda d: d["index"])
            rows.extend(d["embedding"] for d in data)
        return np.asarray(rows, dtype=np.float64)

    return embed


class DenseIndex:
    def __init__(self, passages: Sequence[tuple[str, str]], embed: Embedder):
        """``passages`` are (title, text) pairs."""
        self.passages = list(passages)
        self.embed = embed
        self._matrix: Optional[np.ndarray] = None

    def _vectors(self) -> np.ndarray:
        if self._matrix is None:
            m = np.atleast_2d(self.embed([f"passage: {t}" for _, t in self.passages]))
            norms = np.linalg.norm(m, axis=1, keepdims=True)
            self._matrix = m / np.where(norms == 0, 1.0, norms)
        return self._matrix

    def search(self, query: str, k: int) -> list[tuple[int, float]]:
        if not self.passages:
            return []
        q = np.asarray(self.embed([f"query: {query}"]), dtype=np.float64).reshape(-1)
        q = q / (np.linalg.norm(q) or 1.0)
        sims = self._vectors() @ q
        order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
        return [(i, float(sims[i])) for i in order[:k]]
