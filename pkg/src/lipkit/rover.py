"""Transcript fusion: iterative DP alignment into a word transition network, then voting.

The first hypothesis seeds one slot per token.  Each further hypothesis is
aligned against the slot sequence with a unit-cost DP (match costs 0 when the
token already appears in the slot), growing NULL entries where a hypothesis
skipped a slot and new NULL-padded slots where it inserted a token.  Voting
scores each slot entry by a blend of occupancy frequency and mean confidence
and emits the winner, dropping slots won by NULL.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

NULL_TOKEN = "@"
DEFAULT_NULL_CONFIDENCE = 0.7


class AlignmentError(ValueError):
    """Hypotheses for different utterances cannot be merged."""


class ParameterError(ValueError):
    """A fusion parameter is out of range or the input set is unusable."""


@dataclass(frozen=True)
class Hypothesis:
    """One system's token sequence for one utterance."""

    system_id: str
    utt_id: str
    tokens: tuple[str, ...]
    confidences: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.confidences is not None and len(self.confidences) != len(self.tokens):
            raise ParameterError(
                f"{self.system_id}/{self.utt_id}: {len(self.confidences)} confidences "
                f"for {len(self.tokens)} tokens"
            )
        if NULL_TOKEN in self.tokens:
            raise ParameterError(
                f"{self.system_id}/{self.utt_id}: token {NULL_TOKEN!r} is reserved"
            )


@dataclass
class Slot:
    """Competing tokens at one network position.

    Entry insertion order is the merge order of the contributing systems,
    which vote() uses to break exact score ties.
    """

    entries: dict[str, tuple[int, float]] = field(default_factory=dict)

    def add(self, token: str, confidence: float = 0.0) -> None:
        count, conf = self.entries.get(token, (0, 0.0))
        self.entries[token] = (count + 1, conf + confidence)

    def total_count(self) -> int:
        return sum(count for count, _ in self.entries.values())

    def copy(self) -> "Slot":
        return Slot(dict(self.entries))


@dataclass
class WordTransitionNetwork:
    utt_id: str
    num_systems: int
    slots: list[Slot]
    has_confidences: bool = True

    def to_json(self) -> str:
        return json.dumps(
            {"slots": [{tok: [c, s] for tok, (c, s) in slot.entries.items()} for slot in self.slots]}
        )


def wtn_init(hyp: Hypothesis) -> WordTransitionNetwork:
    """Seed a network from one hypothesis: one single-entry slot per token."""
    slots = []
    for k, token in enumerate(hyp.tokens):
        slot = Slot()
        slot.add(token, hyp.confidences[k] if hyp.confidences else 0.0)
        slots.append(slot)
    return WordTransitionNetwork(
        utt_id=hyp.utt_id,
        num_systems=1,
        slots=slots,
        has_confidences=hyp.confidences is not None,
    )


_DIAG, _DELETE, _INSERT = 0, 1, 2


def _align(slots: list[Slot], tokens: Sequence[str]) -> tuple[list[tuple[int, int]], int]:
    """Minimum-cost alignment of a slot sequence with a token sequence.

    Returns (moves, cost) where moves walk from the start as (kind, payload):
    (_DIAG, slot_idx/token pair implied), (_DELETE, slot_idx), (_INSERT, token_idx).
    Ties prefer diagonal, then deletion, then insertion.
    """
    s, m = len(slots), len(tokens)
    in_slot = [set(slot.entries) for slot in slots]

    dp = [[0] * (m + 1) for _ in range(s + 1)]
    for i in range(1, s + 1):
        dp[i][0] = i
    for j in range(1, m + 1):
        dp[0][j] = j
    for i in range(1, s + 1):
        row = dp[i]
        prev = dp[i - 1]
        members = in_slot[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if tokens[j - 1] in members else 1)
            delete = prev[j] + 1
            insert = row[j - 1] + 1
            best = diag if diag <= delete else delete
            if insert < best:
                best = insert
            row[j] = best

    moves: list[tuple[int, int]] = []
    i, j = s, m
    while i > 0 or j > 0:
        here = dp[i][j]
        if (
            i > 0
            and j > 0
            and dp[i - 1][j - 1] + (0 if tokens[j - 1] in in_slot[i - 1] else 1) == here
        ):
            moves.append((_DIAG, i - 1))
            i -= 1
            j -= 1
        elif i > 0 and dp[i - 1][j] + 1 == here:
            moves.append((_DELETE, i - 1))
            i -= 1
        else:
            moves.append((_INSERT, j - 1))
            j -= 1
    moves.reverse()
    return moves, dp[s][m]


def alignment_cost(wtn: WordTransitionNetwork, hyp: Hypothesis) -> int:
    """DP cost that wtn_align would pay to merge `hyp` (without merging)."""
    if wtn.utt_id != hyp.utt_id:
        raise AlignmentError(f"utterance mismatch: {wtn.utt_id!r} vs {hyp.utt_id!r}")
    return _align(wtn.slots, hyp.tokens)[1]


def wtn_align(wtn: WordTransitionNetwork, hyp: Hypothesis) -> WordTransitionNetwork:
    """Merge one more hypothesis into the network along a minimum-cost alignment."""
    if wtn.utt_id != hyp.utt_id:
        raise AlignmentError(f"utterance mismatch: {wtn.utt_id!r} vs {hyp.utt_id!r}")
    moves, _ = _align(wtn.slots, hyp.tokens)

    def conf(j: int) -> float:
        return hyp.confidences[j] if hyp.confidences else 0.0

    merged: list[Slot] = []
    j = 0
    for kind, idx in moves:
        if kind == _DIAG:
            slot = wtn.slots[idx].copy()
            slot.add(hyp.tokens[j], conf(j))
            j += 1
        elif kind == _DELETE:
            slot = wtn.slots[idx].copy()
            slot.add(NULL_TOKEN)
        else:
            # Fresh slot: the new token plus one NULL per previously merged system.
            slot = Slot()
            slot.add(hyp.tokens[idx], conf(idx))
            count, total = slot.entries.get(NULL_TOKEN, (0, 0.0))
            slot.entries[NULL_TOKEN] = (count + wtn.num_systems, total)
            j += 1
        merged.append(slot)
    return WordTransitionNetwork(
        utt_id=wtn.utt_id,
        num_systems=wtn.num_systems + 1,
        slots=merged,
        has_confidences=wtn.has_confidences and hyp.confidences is not None,
    )


def vote(
    wtn: WordTransitionNetwork,
    alpha: float = 1.0,
    null_confidence: float = DEFAULT_NULL_CONFIDENCE,
) -> list[str]:
    """Pick each slot's winner and emit the fused token sequence.

    score(w) = alpha * count(w)/N + (1 - alpha) * mean_conf(w), with NULL's
    mean confidence fixed at `null_confidence`.  Networks merged from any
    hypothesis lacking confidences vote on frequency alone (alpha forced
    to 1).  Exact ties prefer non-NULL entries, then earliest merge order.
    A NULL win emits nothing for that slot.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
    if not wtn.has_confidences:
        alpha = 1.0
    n = wtn.num_systems
    fused: list[str] = []
    for slot in wtn.slots:
        best_token = None
        best_score = float("-inf")
        for token, (count, conf_sum) in slot.entries.items():
            mean_conf = null_confidence if token == NULL_TOKEN else conf_sum / count
            score = alpha * (count / n) + (1.0 - alpha) * mean_conf
            if score > best_score or (
                score == best_score and best_token == NULL_TOKEN and token != NULL_TOKEN
            ):
                best_token = token
                best_score = score
        if best_token != NULL_TOKEN:
            fused.append(best_token)
    return fused


def rover_fuse(
    hypotheses: Sequence[Hypothesis],
    alpha: float = 1.0,
    null_confidence: float = DEFAULT_NULL_CONFIDENCE,
) -> list[str]:
    """Fuse hypotheses in the given order: init on the first, align the rest, vote."""
    if not hypotheses:
        raise ParameterError("need at least one hypothesis")
    wtn = build_wtn(hypotheses)
    return vote(wtn, alpha, null_confidence)


def build_wtn(hypotheses: Sequence[Hypothesis]) -> WordTransitionNetwork:
    """The intermediate network behind rover_fuse, exposed for dumps and tests."""
    if not hypotheses:
        raise ParameterError("need at least one hypothesis")
    wtn = wtn_init(hypotheses[0])
    for hyp in hypotheses[1:]:
        wtn = wtn_align(wtn, hyp)
    return wtn
