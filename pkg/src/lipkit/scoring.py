"""Character error rate scoring.

Transcripts are tokenized into Unicode grapheme clusters with all whitespace
removed (the usual convention for Chinese CER), then aligned with a unit-cost
edit-distance DP.  When several minimum-cost alignments exist, the reported
S/D/I split prefers substitution over insertion over deletion so golden
outputs are reproducible; the total S+D+I is the same for every minimum
alignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import regex

_GRAPHEME = regex.compile(r"\X")


class EmptyReferenceError(ValueError):
    """The error ratio is undefined for an empty reference with edits."""


class TranscriptFormatError(ValueError):
    """A transcript file line does not match `<utt_id><TAB><transcript>`."""


def tokenize(text: str) -> list[str]:
    """Split text into grapheme-cluster tokens, dropping all whitespace."""
    return [g for g in _GRAPHEME.findall(text) if not g.isspace()]


@dataclass(frozen=True)
class CerReport:
    """Edit counts for one (reference, hypothesis) pair or an aggregate."""

    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def cer(self) -> float:
        """(S + D + I) / ref_len; may exceed 1.  Errors on 0/positive."""
        if self.ref_len == 0:
            if self.edits == 0:
                return 0.0
            raise EmptyReferenceError(
                f"{self.edits} edits against an empty reference: ratio undefined"
            )
        return self.edits / self.ref_len

    def __add__(self, other: "CerReport") -> "CerReport":
        return CerReport(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )


def edit_ops(ref: Sequence[str], hyp: Sequence[str]) -> tuple[int, int, int]:
    """Minimum-edit (substitutions, deletions, insertions) from ref to hyp.

    Unit costs.  Backtrace ties prefer substitution, then insertion, then
    deletion, which fixes the split deterministically.
    """
    m, n = len(ref), len(hyp)
    width = n + 1
    # Flat DP table of edit distances; row i col j = distance ref[:i] -> hyp[:j].
    dist = list(range(width))
    table = [dist[:]]
    for i in range(1, m + 1):
        prev = dist
        dist = [i] + [0] * n
        ri = ref[i - 1]
        for j in range(1, width):
            sub = prev[j - 1] + (ri != hyp[j - 1])
            delete = prev[j] + 1
            insert = dist[j - 1] + 1
            best = sub if sub <= delete else delete
            if insert < best:
                best = insert
            dist[j] = best
        table.append(dist)

    subs = dels = ins = 0
    i, j = m, n
    while i > 0 or j > 0:
        here = table[i][j]
        if i > 0 and j > 0 and table[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]) == here:
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i -= 1
            j -= 1
        elif j > 0 and table[i][j - 1] + 1 == here:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return subs, dels, ins


def cer(ref: Sequence[str], hyp: Sequence[str]) -> CerReport:
    """Score one hypothesis token sequence against its reference."""
    subs, dels, ins = edit_ops(ref, hyp)
    return CerReport(subs, dels, ins, len(ref))


def read_transcripts(lines: Iterable[str], source: str = "<input>") -> dict[str, str]:
    """Parse the shared transcript line format `<utt_id><TAB><transcript>`."""
    table: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        if "\t" not in line:
            raise TranscriptFormatError(f"{source}:{lineno}: missing tab separator")
        utt_id, text = line.split("\t", 1)
        if utt_id in table:
            raise TranscriptFormatError(f"{source}:{lineno}: duplicate utterance id {utt_id!r}")
        table[utt_id] = text
    return table


def score_transcripts(
    refs: dict[str, str], hyps: dict[str, str]
) -> tuple[list[tuple[str, CerReport]], CerReport]:
    """Score every common utterance; rows sorted by id, plus a count-aggregated total.

    The total divides summed edits by summed reference length (not a mean of
    per-utterance ratios).
    """
    rows = []
    total = CerReport(0, 0, 0, 0)
    for utt_id in sorted(refs.keys() & hyps.keys()):
        report = cer(tokenize(refs[utt_id]), tokenize(hyps[utt_id]))
        rows.append((utt_id, report))
        total = total + report
    return rows, total


def format_report(rows: list[tuple[str, CerReport]], total: CerReport) -> str:
    """Render per-utterance rows plus a TOTAL row as TSV."""
    out = ["utt_id\tsub\tdel\tins\tref_len\tcer"]

    def ratio(report: CerReport) -> str:
        try:
            return f"{report.cer:.6f}"
        except EmptyReferenceError:
            return "NA"

    for utt_id, report in rows:
        out.append(
            f"{utt_id}\t{report.substitutions}\t{report.deletions}"
            f"\t{report.insertions}\t{report.ref_len}\t{ratio(report)}"
        )
    out.append(
        f"TOTAL\t{total.substitutions}\t{total.deletions}"
        f"\t{total.insertions}\t{total.ref_len}\t{ratio(total)}"
    )
    return "\n".join(out) + "\n"
