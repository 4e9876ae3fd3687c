"""Vocabulary, the CTC collapse operator, edit distance and WER/CER.

Text is handled as a sequence of single-character graphemes. Words are
separated by the vocabulary's space symbol; runs of spaces count as a single
separator because collapsed CTC output can emit several spaces split by
blanks.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, List, Optional, Sequence, Tuple

BLANK_SYMBOL = "∅"


class UndefinedMetricError(ValueError):
    """Raised when an error rate is requested for an empty reference."""


@dataclass(frozen=True)
class Vocabulary:
    """Token inventory V' = V plus the blank.

    ``symbols`` holds every id in order (blank included), so ids are dense
    ``0..len(symbols)-1``.
    """

    symbols: Tuple[str, ...]
    blank_id: int = 0
    space_id: Optional[int] = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = tuple(self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if len(set(symbols)) != len(symbols):
            raise ValueError("vocabulary symbols must be unique")
        if not 0 <= self.blank_id < len(symbols):
            raise ValueError(f"blank_id {self.blank_id} out of range")
        if self.space_id is not None:
            if not 0 <= self.space_id < len(symbols) or self.space_id == self.blank_id:
                raise ValueError(f"invalid space_id {self.space_id}")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    @classmethod
    def from_tokens(cls, tokens: Iterable[str], blank: str = BLANK_SYMBOL,
                    space: Optional[str] = " ") -> "Vocabulary":
        """Build V' from the non-blank tokens V.

        The blank is placed at id 0 unless it already appears in ``tokens``,
        in which case its position is kept.
        """
        tokens = list(tokens)
        if blank not in tokens:
            tokens = [blank] + tokens
        space_id = tokens.index(space) if space is not None and space in tokens else None
        return cls(tuple(tokens), blank_id=tokens.index(blank), space_id=space_id)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def blank(self) -> str:
        return self.symbols[self.blank_id]

    @property
    def tokens(self) -> Tuple[str, ...]:
        """Non-blank tokens V, in id order."""
        return tuple(s for i, s in enumerate(self.symbols) if i != self.blank_id)

    def token_id(self, symbol: str) -> int:
        return self._index[symbol]

    def encode(self, text: str) -> List[int]:
        """Map text to token ids; the blank symbol is rejected."""
        ids = []
        for ch in text:
            if ch not in self._index:
                raise KeyError(f"symbol {ch!r} not in vocabulary")
            i = self._index[ch]
            if i == self.blank_id:
                raise ValueError("text may not contain the blank symbol")
            ids.append(i)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(self.symbols[i] for i in ids)

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "blank": self.blank,
            "space": None if self.space_id is None else self.symbols[self.space_id],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls.from_tokens(obj["tokens"], blank=obj.get("blank", BLANK_SYMBOL),
                               space=obj.get("space"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False, indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def collapse_ids(alignment: Sequence[int], blank_id: int) -> List[int]:
    """B(a) on raw ids: merge consecutive duplicates, then drop blanks."""
    out = []
    prev = None
    for tok in alignment:
        tok = int(tok)
        if tok != prev and tok != blank_id:
            out.append(tok)
        prev = tok
    return out


def collapse(alignment: Sequence[int], vocab: Vocabulary) -> str:
    """Collapse an alignment to text with the vocabulary's symbols."""
    return vocab.decode(collapse_ids(alignment, vocab.blank_id))


class Op(enum.Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    DELETE = "delete"
    INSERT = "insert"


@dataclass(frozen=True)
class EditOp:
    """One edit step. ``ref_pos``/``hyp_pos`` are None for insert/delete."""

    op: Op
    ref_pos: Optional[int]
    hyp_pos: Optional[int]


@dataclass(frozen=True)
class EditScript:
    ops: Tuple[EditOp, ...]

    @property
    def cost(self) -> int:
        return sum(1 for o in self.ops if o.op is not Op.MATCH)

    def count(self, op: Op) -> int:
        return sum(1 for o in self.ops if o.op is op)

    def apply(self, ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> list:
        """Replay the script on ``ref``; the result equals ``hyp``."""
        out = []
        for o in self.ops:
            if o.op is Op.MATCH:
                out.append(ref[o.ref_pos])
            elif o.op in (Op.SUBSTITUTE, Op.INSERT):
                out.append(hyp[o.hyp_pos])
        return out


def edit_distance(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> Tuple[int, EditScript]:
    """Unit-cost Levenshtein distance with a witnessing edit script.

    The backtrace prefers Match > Substitute > Delete > Insert so the script
    is deterministic.
    """
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = i
    for j in range(1, m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        r = ref[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (r != hyp[j - 1])
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and d[i][j] == d[i - 1][j - 1]:
            ops.append(EditOp(Op.MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + 1:
            ops.append(EditOp(Op.SUBSTITUTE, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops.append(EditOp(Op.DELETE, i - 1, None))
            i -= 1
        else:
            ops.append(EditOp(Op.INSERT, None, j - 1))
            j -= 1
    ops.reverse()
    return d[n][m], EditScript(tuple(ops))


def split_words(text: str, space: str = " ") -> List[str]:
    return [w for w in text.split(space) if w]


def normalize_spaces(text: str, space: str = " ") -> str:
    return space.join(split_words(text, space))


def word_errors(ref_text: str, hyp_text: str, space: str = " ") -> Tuple[int, int]:
    """Return (word edit distance, reference word count)."""
    ref = split_words(ref_text, space)
    hyp = split_words(hyp_text, space)
    cost, _ = edit_distance(ref, hyp)
    return cost, len(ref)


def char_errors(ref_text: str, hyp_text: str, space: str = " ") -> Tuple[int, int]:
    """Return (character edit distance, reference character count).

    Spaces count as characters; runs of spaces are normalized first.
    """
    ref = normalize_spaces(ref_text, space)
    hyp = normalize_spaces(hyp_text, space)
    cost, _ = edit_distance(ref, hyp)
    return cost, len(ref)


def wer(ref_text: str, hyp_text: str, space: str = " ") -> float:
    errors, n = word_errors(ref_text, hyp_text, space)
    if n == 0:
        raise UndefinedMetricError("WER is undefined for an empty reference")
    return errors / n


def cer(ref_text: str, hyp_text: str, space: str = " ") -> float:
    errors, n = char_errors(ref_text, hyp_text, space)
    if n == 0:
        raise UndefinedMetricError("CER is undefined for an empty reference")
    return errors / n
