import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipkit.rover import (
    NULL_TOKEN,
    AlignmentError,
    Hypothesis,
    ParameterError,
    Slot,
    WordTransitionNetwork,
    alignment_cost,
    build_wtn,
    rover_fuse,
    vote,
    wtn_align,
    wtn_init,
)


def hyp(tokens, system_id="sys", utt_id="u1", confidences=None):
    return Hypothesis(system_id, utt_id, tuple(tokens), confidences)


def counts(wtn):
    return [{tok: c for tok, (c, _) in slot.entries.items()} for slot in wtn.slots]


def exhaustive_min_cost(slots, tokens):
    """Enumerate every monotone alignment recursively; no DP table."""
    member_sets = [set(slot.entries) for slot in slots]

    def go(i, j):
        if i == 0 and j == 0:
            return 0
        best = None
        if i > 0 and j > 0:
            cost = go(i - 1, j - 1) + (0 if tokens[j - 1] in member_sets[i - 1] else 1)
            best = cost if best is None else min(best, cost)
        if i > 0:
            cost = go(i - 1, j) + 1
            best = cost if best is None else min(best, cost)
        if j > 0:
            cost = go(i, j - 1) + 1
            best = cost if best is None else min(best, cost)
        return best

    return go(len(slots), len(tokens))


class TestInit:
    def test_two_tokens_two_slots(self):
        wtn = wtn_init(hyp(["a", "b"]))
        assert counts(wtn) == [{"a": 1}, {"b": 1}]
        assert wtn.num_systems == 1

    def test_empty_hypothesis_zero_slots(self):
        assert wtn_init(hyp([])).slots == []

    def test_confidence_recorded(self):
        wtn = wtn_init(hyp(["a"], confidences=(0.9,)))
        assert wtn.slots[0].entries["a"] == (1, 0.9)
        assert wtn.has_confidences

    def test_reserved_token_rejected(self):
        with pytest.raises(ParameterError, match="reserved"):
            hyp(["a", NULL_TOKEN])


class TestAlign:
    def test_identical_merge(self):
        wtn = wtn_align(wtn_init(hyp("abc")), hyp("abc"))
        assert counts(wtn) == [{"a": 2}, {"b": 2}, {"c": 2}]

    def test_substitution_shares_slot(self):
        wtn = wtn_align(wtn_init(hyp("abc")), hyp("axc"))
        assert counts(wtn) == [{"a": 2}, {"b": 1, "x": 1}, {"c": 2}]

    def test_insertion_creates_null_padded_slot(self):
        wtn = wtn_align(wtn_init(hyp("ac")), hyp("abc"))
        assert counts(wtn) == [{"a": 2}, {"b": 1, NULL_TOKEN: 1}, {"c": 2}]

    def test_deletion_adds_null(self):
        wtn = wtn_align(wtn_init(hyp("abc")), hyp("ac"))
        assert counts(wtn) == [{"a": 2}, {"b": 1, NULL_TOKEN: 1}, {"c": 2}]

    def test_counts_sum_to_merged_hypotheses(self):
        wtn = build_wtn([hyp("abc"), hyp("ax"), hyp("xbcy"), hyp("")])
        assert wtn.num_systems == 4
        for slot in wtn.slots:
            assert slot.total_count() == 4

    def test_utt_mismatch_rejected(self):
        with pytest.raises(AlignmentError):
            wtn_align(wtn_init(hyp("ab", utt_id="u1")), hyp("ab", utt_id="u2"))

    def test_align_onto_empty_network(self):
        wtn = wtn_align(wtn_init(hyp([])), hyp("ab"))
        assert counts(wtn) == [{"a": 1, NULL_TOKEN: 1}, {"b": 1, NULL_TOKEN: 1}]

    def test_cost_of_identical_is_zero(self):
        assert alignment_cost(wtn_init(hyp("abc")), hyp("abc")) == 0

    def test_match_into_multi_token_slot_is_free(self):
        wtn = wtn_align(wtn_init(hyp("abc")), hyp("axc"))
        assert alignment_cost(wtn, hyp("axc")) == 0


tokens3 = st.lists(st.sampled_from("abc"), max_size=5).map(tuple)


@given(st.lists(tokens3, min_size=1, max_size=5))
@settings(max_examples=200)
def test_token_conservation(token_seqs):
    hyps = [hyp(toks, system_id=f"s{i}") for i, toks in enumerate(token_seqs)]
    wtn = build_wtn(hyps)
    n = len(hyps)
    for slot in wtn.slots:
        assert slot.total_count() == n
    non_null = sum(
        c for slot in wtn.slots for tok, (c, _) in slot.entries.items() if tok != NULL_TOKEN
    )
    assert non_null == sum(len(h.tokens) for h in hyps)
    assert len(wtn.slots) <= sum(len(h.tokens) for h in hyps)
    assert len(wtn.slots) >= max(len(h.tokens) for h in hyps)


@given(tokens3, tokens3, tokens3)
@settings(max_examples=150)
def test_alignment_cost_is_minimal(a, b, c):
    wtn = build_wtn([hyp(a, "s0"), hyp(b, "s1")])
    assert alignment_cost(wtn, hyp(c)) == exhaustive_min_cost(wtn.slots, c)


class TestVote:
    def test_unanimous(self):
        wtn = build_wtn([hyp("ab", f"s{i}") for i in range(3)])
        assert vote(wtn, alpha=1.0) == ["a", "b"]

    def test_majority_wins(self):
        assert rover_fuse([hyp("abc"), hyp("axc"), hyp("abc")], alpha=1.0) == ["a", "b", "c"]

    def test_null_majority_deletes(self):
        assert rover_fuse([hyp("ac"), hyp("ac"), hyp("abc")], alpha=1.0) == ["a", "c"]

    def test_alpha_out_of_range(self):
        wtn = wtn_init(hyp("a"))
        with pytest.raises(ParameterError):
            vote(wtn, alpha=1.5)
        with pytest.raises(ParameterError):
            vote(wtn, alpha=-0.1)

    def test_tie_prefers_non_null(self):
        # Two systems: one has the token, one skipped the slot.
        wtn = build_wtn([hyp("ab"), hyp("a")])
        assert vote(wtn, alpha=1.0) == ["a", "b"]

    def test_tie_among_tokens_prefers_earlier_system(self):
        wtn = build_wtn([hyp("ax"), hyp("ay")])
        assert vote(wtn, alpha=1.0) == ["a", "x"]

    def test_confidence_voting_can_override_counts(self):
        hyps = [
            hyp("ab", "s0", confidences=(0.5, 0.2)),
            hyp("ab", "s1", confidences=(0.5, 0.3)),
            hyp("ax", "s2", confidences=(0.5, 0.99)),
        ]
        wtn = build_wtn(hyps)
        assert vote(wtn, alpha=1.0)[1] == "b"  # frequency alone
        assert vote(wtn, alpha=0.0)[1] == "x"  # confidence alone

    def test_missing_confidences_force_frequency_voting(self):
        hyps = [
            hyp("ab", "s0", confidences=(0.1, 0.1)),
            hyp("ab", "s1"),
            hyp("ax", "s2", confidences=(0.9, 0.9)),
        ]
        wtn = build_wtn(hyps)
        assert not wtn.has_confidences
        assert vote(wtn, alpha=0.0) == ["a", "b"]

    def test_null_confidence_constant_applies(self):
        # One deletion against one detection: with alpha=0 the NULL constant decides.
        hyps = [hyp("ab", "s0", confidences=(0.9, 0.6)), hyp("a", "s1", confidences=(0.9,))]
        wtn = build_wtn(hyps)
        assert vote(wtn, alpha=0.0, null_confidence=0.7) == ["a"]
        assert vote(wtn, alpha=0.0, null_confidence=0.5) == ["a", "b"]


class TestFuse:
    def test_single_hypothesis_identity(self):
        assert rover_fuse([hyp("xyz")]) == ["x", "y", "z"]

    def test_empty_list_rejected(self):
        with pytest.raises(ParameterError):
            rover_fuse([])

    @given(tokens3, st.integers(1, 5), st.floats(0.0, 1.0))
    @settings(max_examples=100)
    def test_unanimity_identity(self, tokens, n, alpha):
        hyps = [
            hyp(tokens, f"s{i}", confidences=tuple(0.5 for _ in tokens)) for i in range(n)
        ]
        assert rover_fuse(hyps, alpha=alpha) == list(tokens)

    # Affine rescaling preserves the argmax only while the frequency term
    # survives, so alpha stays strictly positive here; at alpha=0 every
    # equal-confidence entry ties and the tie chain decides instead.
    @given(st.lists(tokens3, min_size=1, max_size=4), st.floats(0.01, 1.0))
    @settings(max_examples=100)
    def test_alpha_irrelevant_when_confidences_equal(self, token_seqs, alpha):
        hyps = [
            hyp(toks, f"s{i}", confidences=tuple(0.7 for _ in toks))
            for i, toks in enumerate(token_seqs)
        ]
        assert rover_fuse(hyps, alpha=alpha, null_confidence=0.7) == rover_fuse(hyps, alpha=1.0)

    def test_fused_length_bounded_by_slots(self):
        hyps = [hyp("abc"), hyp("xy"), hyp("abcxy")]
        wtn = build_wtn(hyps)
        fused = rover_fuse(hyps)
        assert len(fused) <= len(wtn.slots)


def test_wtn_json_dump_shape():
    wtn = build_wtn([hyp("ab"), hyp("a")])
    assert wtn.to_json() == '{"slots": [{"a": [2, 0.0]}, {"b": [1, 0.0], "@": [1, 0.0]}]}'
