"""Citation-mark parsing and rendering for generated answers.

Grammar
-------
A citation mark is ``[k]`` where ``k`` is a 1-based integer index into the
filtered reference-card order. A citation *run* is a maximal sequence of
adjacent marks, optionally whitespace-separated (``[1] [2]`` and ``[1][2]``
are the same run). A *segment* is the maximal text span between the end of
one run and the start of the next run or the string boundaries; a run's
marks attach to the segment before it. Bracketed text that is not a mark
(``[foo]``, ``[1.5]``) is ordinary segment text.

Rendering normalizes runs to the compact form ``[a][b]`` with no internal
whitespace, so ``render_text(parse_citations(raw, n))`` equals ``raw`` up
to that normalization whenever all marks are in range.
"""

from __future__ import annotations

import re
from typing import Sequence

from .model import AnswerSegment, CitedAnswer, ReferenceCard

_MARK = re.compile(r"\[(\d+)\]")
_RUN = re.compile(r"\[\d+\](?:\s*\[\d+\])*")


class MissingReference(Exception):
    """A validated citation points past the provided reference list."""


def parse_citations(raw: str, reference_count: int) -> CitedAnswer:
    """Decompose a raw answer string into segments and citation sets.

    Marks outside ``1..reference_count`` are dropped from the citation set
    and reported in the answer's ``warnings``; duplicated marks within one
    run are kept once. ``llm_only`` is set exactly when there are no
    references at all.
    """
    if reference_count < 0:
        raise ValueError("reference_count must be non-negative")

    segments: list[AnswerSegment] = []
    warnings: list[str] = []
    pos = 0
    for run in _RUN.finditer(raw):
        text = raw[pos:run.start()]
        kept: list[int] = []
        seen: set[int] = set()
        for mark in _MARK.findall(run.group(0)):
            index = int(mark)
            if not 1 <= index <= reference_count:
                warnings.append(
                    f"citation [{index}] out of range 1..{reference_count}, dropped"
                )
            elif index not in seen:
                kept.append(index)
                seen.add(index)
        segments.append(AnswerSegment(text=text, citations=tuple(kept)))
        pos = run.end()
    tail = raw[pos:]
    if tail:
        segments.append(AnswerSegment(text=tail))

    return CitedAnswer(
        segments=tuple(segments),
        reference_count=reference_count,
        llm_only=reference_count == 0,
        warnings=tuple(warnings),
    )


def render_text(answer: CitedAnswer) -> str:
    """The answer text with normalized citation marks and nothing else."""
    parts: list[str] = []
    for segment in answer.segments:
        parts.append(segment.text)
        parts.extend(f"[{c}]" for c in segment.citations)
    return "".join(parts)


def render(answer: CitedAnswer, references: Sequence[ReferenceCard]) -> str:
    """Display string: answer text plus a numbered list of the cited references.

    Uses the wire-protocol markup subset (``**bold**`` titles, ``<link>``
    URLs). References that are never cited are left out of the answer block;
    they stay visible in the result cards. Marks are only ever parsed from
    answer text, so reference titles need no escaping here.
    """
    text = render_text(answer)
    cited = answer.cited_ranks()
    if not cited:
        return text
    by_rank = {card.rank: card for card in references}
    lines = [text, "", "References:"]
    for rank in cited:
        card = by_rank.get(rank)
        if card is None:
            raise MissingReference(f"citation [{rank}] has no matching reference card")
        lines.append(f"[{rank}] **{card.title}** - <{card.link}>")
    return "\n".join(lines)
