"""Property transforms mapping a sampled alignment to an improved one.

Each transform returns ``(improved, applicable)``. When ``applicable`` is
False the improved alignment is the input unchanged and the pair carries no
training signal.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .text_metrics import Op, Vocabulary, edit_distance, split_words


@dataclass
class AlignmentPair:
    sampled: np.ndarray
    improved: np.ndarray
    applicable: bool


def repetition_positions(alignment: Sequence[int]) -> np.ndarray:
    """0-based indices j >= 1 with a[j] == a[j-1]."""
    a = np.asarray(alignment)
    return np.flatnonzero(a[1:] == a[:-1]) + 1


def shift_left(alignment: Sequence[int], j: int, blank_id: int) -> np.ndarray:
    """Drop frame ``j - 1`` and pad with a trailing blank (0-based ``j``).

    With ``a[j] == a[j-1]`` the collapsed text is unchanged and every token
    starting after ``j - 1`` is emitted one frame earlier.
    """
    a = np.asarray(alignment, dtype=np.int64)
    out = np.empty_like(a)
    out[:j - 1] = a[:j - 1]
    out[j - 1:-1] = a[j:]
    out[-1] = blank_id
    return out


def f_low_latency(alignment: Sequence[int], k: int = 1, rng: Optional[np.random.Generator] = None,
                  blank_id: int = 0) -> Tuple[np.ndarray, bool]:
    """Shift ``alignment`` left by one frame at a random repetition, ``k`` times."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    out = np.asarray(alignment, dtype=np.int64).copy()
    applied = 0
    for _ in range(k):
        positions = repetition_positions(out)
        if len(positions) == 0:
            break
        j = int(positions[rng.integers(len(positions))])
        out = shift_left(out, j, blank_id)
        applied += 1
    return out, applied > 0


def _collapsed_runs(alignment: np.ndarray, blank_id: int) -> List[Tuple[int, int, int]]:
    """(token, start, stop) for every non-blank run, i.e. every collapsed character."""
    runs = []
    T = len(alignment)
    t = 0
    while t < T:
        tok = int(alignment[t])
        stop = t + 1
        while stop < T and alignment[stop] == tok:
            stop += 1
        if tok != blank_id:
            runs.append((tok, t, stop))
        t = stop
    return runs


def _words_with_runs(runs, space_id: Optional[int]):
    """Group collapsed characters into words; returns a list of run lists."""
    words, cur = [], []
    for run in runs:
        if run[0] == space_id:
            if cur:
                words.append(cur)
            cur = []
        else:
            cur.append(run)
    if cur:
        words.append(cur)
    return words


def _fix_one_word(a: np.ndarray, ref_words: List[Tuple[int, ...]], blank_id: int,
                  space_id: Optional[int]) -> Optional[np.ndarray]:
    runs = _collapsed_runs(a, blank_id)
    hyp_runs = _words_with_runs(runs, space_id)
    hyp_words = [tuple(r[0] for r in w) for w in hyp_runs]
    _, script = edit_distance(ref_words, hyp_words)

    candidates = []
    for o in script.ops:
        if o.op is not Op.SUBSTITUTE:
            continue
        ref_w, hyp_w = ref_words[o.ref_pos], hyp_words[o.hyp_pos]
        dist, _ = edit_distance(ref_w, hyp_w)
        candidates.append((dist, o.hyp_pos, o.ref_pos))
    candidates.sort()

    for _, hyp_pos, ref_pos in candidates:
        ref_w = ref_words[ref_pos]
        word_runs = hyp_runs[hyp_pos]
        if len(ref_w) != len(word_runs):
            continue
        out = a.copy()
        for (tok, start, stop), want in zip(word_runs, ref_w):
            if tok != want:
                out[start:stop] = want
        expected = list(hyp_words)
        expected[hyp_pos] = ref_w
        got = [tuple(r[0] for r in w)
               for w in _words_with_runs(_collapsed_runs(out, blank_id), space_id)]
        # relabeling can merge a character with an identical unblanked neighbour
        if got == expected:
            return out
    return None


def f_mwer(alignment: Sequence[int], target_text: str, m: int, vocab: Vocabulary
           ) -> Tuple[np.ndarray, bool]:
    """Correct up to ``m`` substituted words of B(alignment) toward ``target_text``.

    Each round word-aligns the collapsed text with the target and picks the
    substituted word closest to its reference word (leftmost on ties). Only
    words fixable by same-length character substitutions are eligible: the
    frames of every wrong character are relabeled with the reference
    character. Each applied round lowers the word error count by exactly one.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    space = vocab.symbols[vocab.space_id] if vocab.space_id is not None else " "
    ref_words = [tuple(vocab.encode(w)) for w in split_words(target_text, space)]
    if not ref_words:
        raise ValueError("target text must contain at least one word")
    out = np.asarray(alignment, dtype=np.int64).copy()
    applied = 0
    for _ in range(m):
        fixed = _fix_one_word(out, ref_words, vocab.blank_id, vocab.space_id)
        if fixed is None:
            break
        out = fixed
        applied += 1
    return out, applied > 0


class TransformKind(str, enum.Enum):
    LOW_LATENCY = "low_latency"
    MIN_WER = "min_wer"


@dataclass(frozen=True)
class PropertyTransform:
    """Configured property function f_prop."""

    kind: TransformKind = TransformKind.LOW_LATENCY
    k_shifts: int = 1
    m_words: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", TransformKind(self.kind))
        if self.k_shifts < 1 or self.m_words < 1:
            raise ValueError("k_shifts and m_words must be >= 1")

    def __call__(self, alignment: Sequence[int], *, vocab: Vocabulary, target_text: str = "",
                 rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, bool]:
        if self.kind is TransformKind.LOW_LATENCY:
            return f_low_latency(alignment, self.k_shifts, rng, vocab.blank_id)
        return f_mwer(alignment, target_text, self.m_words, vocab)

    def make_pairs(self, samples: Sequence[np.ndarray], *, vocab: Vocabulary,
                   target_text: str = "", rng: Optional[np.random.Generator] = None
                   ) -> List[AlignmentPair]:
        pairs = []
        for a in samples:
            improved, ok = self(a, vocab=vocab, target_text=target_text, rng=rng)
            pairs.append(AlignmentPair(np.asarray(a), improved, ok))
        return pairs
