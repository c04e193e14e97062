"""Page pipeline: fetch result pages, flatten HTML to text, clip to the
token budget, extract references, and filter out results without one.

A token here is a maximal run of non-whitespace characters. That keeps the
cap deterministic and independent of any model tokenizer; the cap stays
configurable for live deployments that want a tighter bound.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path

import httpx

from . import __version__
from .llm.gateway import extract_reference
from .llm.providers import LlmProvider
from .model import Locale, QueryPlan, ReferenceCard, SerpEntry
from .search import CorpusIndex

log = logging.getLogger("searchroom.pages")

DEFAULT_TOKEN_CAP = 5000
DEFAULT_PARALLELISM = 4
DEFAULT_FETCH_TIMEOUT_S = 10.0

# https://developer.mozilla.org/en-US/docs/Web/HTML/Block-level_elements,
# plus structural tags that should split lines when stripped.
_BLOCK_TAGS = frozenset(
    """address article aside blockquote br canvas dd div dl dt fieldset
    figcaption figure footer form h1 h2 h3 h4 h5 h6 header hgroup hr li main
    nav noscript ol option p pre section select table tbody td tfoot th thead
    tr ul video""".split()
)
_SKIP_TAGS = frozenset({"script", "style", "title"})


class FetchError(Exception):
    """A page could not be fetched; never a partial page passed off as one."""


class PageFetcher(ABC):
    """Fetches raw HTML for a result link."""

    timeout_s: float = DEFAULT_FETCH_TIMEOUT_S

    @abstractmethod
    def fetch(self, link: str) -> str:
        """Raw HTML for the link. Raises FetchError on any failure."""


class CorpusFetcher(PageFetcher):
    """Test fetcher reading pages from the mock corpus directory."""

    def __init__(self, index: CorpusIndex):
        self._index = index

    def fetch(self, link: str) -> str:
        try:
            return self._index.html(link)
        except (KeyError, OSError) as exc:
            raise FetchError(f"no corpus page for {link}") from exc


class HttpFetcher(PageFetcher):
    """Live fetcher: plain GET with a timeout and a fixed agent header."""

    def __init__(self, timeout_s: float = DEFAULT_FETCH_TIMEOUT_S, client: httpx.Client | None = None):
        self.timeout_s = timeout_s
        self._client = client or httpx.Client(
            timeout=timeout_s,
            headers={"User-Agent": f"searchroom/{__version__}"},
            follow_redirects=True,
        )

    def fetch(self, link: str) -> str:
        try:
            response = self._client.get(link)
            response.raise_for_status()
            return response.text
        except httpx.HTTPError as exc:
            raise FetchError(f"fetch failed for {link}: {exc}") from exc


@dataclass(frozen=True)
class TokenBudget:
    """Whitespace-token cap applied to page text before extraction."""

    max_tokens: int = DEFAULT_TOKEN_CAP

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


class _TextExtractor(HTMLParser):
    """Tolerant tag scanner: collects text, drops script/style content,
    and marks block boundaries so they become newlines."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.pieces: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self.pieces.append("\n")

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_TAGS:
            if self._skip_depth > 0:
                self._skip_depth -= 1
        elif tag in _BLOCK_TAGS:
            self.pieces.append("\n")

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag in _BLOCK_TAGS:
            self.pieces.append("\n")

    def handle_data(self, data: str) -> None:
        if self._skip_depth == 0:
            self.pieces.append(data)


def html_to_text(html: str) -> str:
    """Deterministic plain text for possibly-malformed HTML.

    Script, style, and comment content is removed, tags are stripped,
    block-level boundaries become single newlines, runs of blanks collapse
    to one space, and anchor text is kept without its URL. Never raises.
    """
    extractor = _TextExtractor()
    extractor.feed(html)
    extractor.close()
    lines = []
    for chunk in "".join(extractor.pieces).split("\n"):
        collapsed = " ".join(chunk.split())
        if collapsed:
            lines.append(collapsed)
    return "\n".join(lines)


def truncate_tokens(text: str, budget: TokenBudget) -> str:
    """First ``budget.max_tokens`` whitespace-delimited tokens of the text,
    joined by single spaces."""
    return " ".join(text.split()[: budget.max_tokens])


def build_references(
    entries: list[SerpEntry],
    query_plan: QueryPlan,
    fetcher: PageFetcher,
    llm: LlmProvider,
    budget: TokenBudget,
    locale: Locale,
    *,
    parallelism: int = DEFAULT_PARALLELISM,
) -> list[ReferenceCard]:
    """Fetch, flatten, clip, and extract for every entry; keep the survivors.

    Entries whose fetch fails or whose extracted reference comes back empty
    are dropped silently (with a diagnostic log line). Survivors are
    re-ranked contiguously from 1 in original SERP order, keeping
    ``source_rank``. Per-entry work is independent and may run concurrently;
    one failure never drops its siblings, and an empty result simply means
    the answer falls back to model knowledge alone.
    """

    def process(entry: SerpEntry) -> str:
        try:
            html = fetcher.fetch(entry.link)
        except FetchError as exc:
            log.info("dropping rank %d: %s", entry.rank, exc)
            return ""
        text = truncate_tokens(html_to_text(html), budget)
        return extract_reference(
            llm, query_plan.rewritten, text, locale, max_input_tokens=budget.max_tokens
        )

    if not entries:
        return []
    workers = max(1, min(parallelism, len(entries)))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        references = list(executor.map(process, entries))

    cards: list[ReferenceCard] = []
    for entry, reference in zip(entries, references):
        if not reference.strip():
            continue
        cards.append(
            ReferenceCard(
                rank=len(cards) + 1,
                title=entry.title,
                link=entry.link,
                reference=reference,
                source_rank=entry.rank,
            )
        )
    return cards
