"""Search-engine provider abstraction plus a deterministic corpus-backed mock.

The mock ranks documents by keyword overlap: a document scores one point per
manifest keyword that occurs (case-insensitively) as a substring of the
query, ties broken by URL. Identical queries always return identical lists.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import httpx

from .model import SerpEntry, is_absolute_url

DEFAULT_MAX_RESULTS = 10

MANIFEST_NAME = "manifest.tsv"


class SearchUnavailable(Exception):
    """The search backend failed (transport, quota); no partial results."""


class SearchProvider(ABC):
    """Interface for search backends; safe for concurrent calls."""

    @abstractmethod
    def search(self, query: str, max_results: int = DEFAULT_MAX_RESULTS) -> list[SerpEntry]:
        """Ranked results for the query, at most ``max_results``, ranks from 1."""


@dataclass(frozen=True)
class CorpusDocument:
    url: str
    path: Path
    title: str
    keywords: tuple[str, ...]
    snippet: str = ""


class CorpusIndex:
    """A small local web corpus: one manifest plus a directory of HTML files.

    Manifest line format (tab-separated, ``#`` comments and blank lines
    skipped)::

        url <TAB> file <TAB> title <TAB> keyword,keyword,... [<TAB> snippet]

    ``file`` is relative to the corpus directory and may name a missing file
    to model pages that cannot be fetched.
    """

    def __init__(self, root: Path, documents: dict[str, CorpusDocument]):
        self.root = root
        self.documents = documents

    @classmethod
    def load(cls, corpus_dir: str | Path) -> CorpusIndex:
        root = Path(corpus_dir)
        manifest = root / MANIFEST_NAME
        documents: dict[str, CorpusDocument] = {}
        for lineno, line in enumerate(manifest.read_text("utf-8").splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (4, 5):
                raise ValueError(
                    f"{manifest}:{lineno}: expected 4 or 5 tab-separated fields, got {len(parts)}"
                )
            url, file_name, title, keywords = parts[:4]
            if not is_absolute_url(url):
                raise ValueError(f"{manifest}:{lineno}: not an absolute URL: {url!r}")
            if url in documents:
                raise ValueError(f"{manifest}:{lineno}: duplicate URL {url!r}")
            documents[url] = CorpusDocument(
                url=url,
                path=root / file_name,
                title=title,
                keywords=tuple(k.strip() for k in keywords.split(",") if k.strip()),
                snippet=parts[4] if len(parts) == 5 else "",
            )
        return cls(root, documents)

    def score(self, query: str) -> dict[str, int]:
        """Keyword-overlap score per document URL (0 scores included)."""
        q = query.lower()
        return {
            url: sum(1 for kw in doc.keywords if kw.lower() in q)
            for url, doc in self.documents.items()
        }

    def html(self, url: str) -> str:
        doc = self.documents.get(url)
        if doc is None:
            raise KeyError(url)
        return doc.path.read_text("utf-8")


class CorpusSearchProvider(SearchProvider):
    """Deterministic mock backend over a CorpusIndex; read-only after load."""

    def __init__(self, index: CorpusIndex):
        self._index = index

    def search(self, query: str, max_results: int = DEFAULT_MAX_RESULTS) -> list[SerpEntry]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        if max_results <= 0:
            raise ValueError("max_results must be positive")
        scores = self._index.score(query)
        matched = sorted(
            (url for url, score in scores.items() if score > 0),
            key=lambda url: (-scores[url], url),
        )
        entries = []
        for rank, url in enumerate(matched[:max_results], start=1):
            doc = self._index.documents[url]
            entries.append(
                SerpEntry(rank=rank, title=doc.title, link=url, snippet=doc.snippet)
            )
        return entries


class HttpSearchProvider(SearchProvider):
    """Reference live backend for a JSON SERP endpoint.

    GETs ``?q=<query>&count=<n>`` and expects ``{"results": [{"title",
    "link", "snippet"?}, ...]}`` ranked best-first.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout_s: float = 10.0,
        client: httpx.Client | None = None,
    ):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(
            base_url=base_url, timeout=timeout_s, headers=headers
        )

    def search(self, query: str, max_results: int = DEFAULT_MAX_RESULTS) -> list[SerpEntry]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        try:
            response = self._client.get("/search", params={"q": query, "count": max_results})
            response.raise_for_status()
            payload = response.json()
        except httpx.HTTPError as exc:
            raise SearchUnavailable(f"search backend failed: {exc}") from exc
        entries = []
        seen: set[str] = set()
        for item in payload.get("results", [])[:max_results]:
            link = item["link"]
            if link in seen:
                continue
            seen.add(link)
            entries.append(
                SerpEntry(
                    rank=len(entries) + 1,
                    title=item.get("title", link),
                    link=link,
                    snippet=item.get("snippet", ""),
                )
            )
        return entries
