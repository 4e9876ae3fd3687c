"""Synthetic speech-like utterances with known token emission times.

Each target token occupies a run of frames whose features are the token's
prototype vector plus Gaussian noise. The evidence lags the token onset by
``cue_delay`` frames, so a model with little future context has an
incentive to emit late.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..sampler import stream
from ..text_metrics import Vocabulary

_MAGIC = b"AWPD"
_VERSION = 1
_FILE_HEADER = struct.Struct("<4sIIIdI")
_UTT_HEADER = struct.Struct("<III")

DEFAULT_LETTERS = "abcdefgh"


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``prototype_overlap`` in [0, 1) mixes every letter prototype with a
    shared direction, making letters harder to tell apart. ``confusable_pairs``
    additionally pulls selected letter pairs toward each other, which creates
    same-length substitution errors inside words. Unless ``allow_repeats`` is
    set, words never contain the same letter twice in a row.
    """

    letters: str = DEFAULT_LETTERS
    words_per_utt: Tuple[int, int] = (2, 4)
    letters_per_word: Tuple[int, int] = (2, 4)
    d_min: int = 2
    d_max: int = 4
    gap_max: int = 2
    feature_dim: int = 12
    sigma: float = 0.6
    prototype_overlap: float = 0.0
    confusable_pairs: Tuple[Tuple[str, str], ...] = ()
    confusable_mix: float = 0.0
    cue_delay: int = 2
    allow_repeats: bool = False
    frame_duration_ms: float = 32.0
    seed: int = 0

    def __post_init__(self):
        if self.d_min < 1 or self.d_max < self.d_min:
            raise ValueError("need 1 <= d_min <= d_max")
        if self.sigma < 0 or self.cue_delay < 0 or self.gap_max < 0:
            raise ValueError("sigma, cue_delay and gap_max must be non-negative")
        if len(set(self.letters)) != len(self.letters) or " " in self.letters:
            raise ValueError("letters must be distinct and exclude the space")
        if not 0 <= self.prototype_overlap < 1 or not 0 <= self.confusable_mix < 1:
            raise ValueError("overlap/mix must lie in [0, 1)")
        object.__setattr__(self, "words_per_utt", tuple(self.words_per_utt))
        object.__setattr__(self, "letters_per_word", tuple(self.letters_per_word))
        object.__setattr__(self, "confusable_pairs",
                           tuple(tuple(p) for p in self.confusable_pairs))

    def vocabulary(self) -> Vocabulary:
        return Vocabulary.from_tokens(list(self.letters) + [" "])


@dataclass
class SynthUtterance:
    frames: np.ndarray
    target: np.ndarray
    gt_emission: np.ndarray
    frame_duration_ms: float
    text: str = ""
    uid: int = 0

    @property
    def T(self) -> int:
        return self.frames.shape[0]


def prototypes(cfg: SynthConfig, vocab: Vocabulary) -> np.ndarray:
    """Unit-norm feature prototype per vocabulary id (row ``blank_id`` is silence)."""
    rng = stream(cfg.seed, 0)
    V = vocab.size
    protos = rng.normal(size=(V, cfg.feature_dim))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    if cfg.prototype_overlap > 0:
        shared = rng.normal(size=cfg.feature_dim)
        shared /= np.linalg.norm(shared)
        letters = [vocab.token_id(ch) for ch in cfg.letters]
        protos[letters] = (1 - cfg.prototype_overlap) * protos[letters] + \
            cfg.prototype_overlap * shared
    base = protos.copy()
    for a, b in cfg.confusable_pairs:
        ia, ib = vocab.token_id(a), vocab.token_id(b)
        protos[ia] = (1 - cfg.confusable_mix) * base[ia] + cfg.confusable_mix * base[ib]
        protos[ib] = (1 - cfg.confusable_mix) * base[ib] + cfg.confusable_mix * base[ia]
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    # silence carries a clear non-speech cue
    protos[vocab.blank_id] *= 0.5
    return protos


def _random_text(cfg: SynthConfig, rng: np.random.Generator) -> str:
    n_words = rng.integers(cfg.words_per_utt[0], cfg.words_per_utt[1] + 1)
    words = []
    for _ in range(n_words):
        n = rng.integers(cfg.letters_per_word[0], cfg.letters_per_word[1] + 1)
        if cfg.allow_repeats or len(cfg.letters) < 2:
            idx = rng.integers(len(cfg.letters), size=n)
        else:
            # each later letter is drawn from the alphabet minus its predecessor
            idx = [int(rng.integers(len(cfg.letters)))]
            for _ in range(n - 1):
                idx.append((idx[-1] + 1 + int(rng.integers(len(cfg.letters) - 1))) % len(cfg.letters))
        words.append("".join(cfg.letters[i] for i in idx))
    return " ".join(words)


def synth_utterance(cfg: SynthConfig, vocab: Vocabulary, protos: np.ndarray,
                    rng: np.random.Generator, uid: int = 0,
                    text: Optional[str] = None) -> SynthUtterance:
    text = _random_text(cfg, rng) if text is None else text
    target = np.array(vocab.encode(text), dtype=np.int64)
    labels: List[int] = []
    onsets = []
    labels.extend([vocab.blank_id] * int(rng.integers(1, cfg.gap_max + 1)))
    for u, tok in enumerate(target):
        if u > 0:
            gap = int(rng.integers(0, cfg.gap_max + 1))
            if tok == target[u - 1]:
                gap = max(gap, 1)
            labels.extend([vocab.blank_id] * gap)
        onsets.append(len(labels))
        labels.extend([int(tok)] * int(rng.integers(cfg.d_min, cfg.d_max + 1)))
    labels.extend([vocab.blank_id] * (cfg.cue_delay + int(rng.integers(1, cfg.gap_max + 1))))
    labels = np.array(labels, dtype=np.int64)
    T = len(labels)
    cue = np.full(T, vocab.blank_id, dtype=np.int64)
    cue[cfg.cue_delay:] = labels[:T - cfg.cue_delay]
    frames = protos[cue] + cfg.sigma * rng.normal(size=(T, cfg.feature_dim))
    return SynthUtterance(frames, target, np.array(onsets, dtype=np.int64),
                          cfg.frame_duration_ms, text, uid)


def gen_dataset(cfg: SynthConfig, n_utts: int, split: int = 0) -> List[SynthUtterance]:
    """Deterministic list of utterances; ``split`` selects an independent stream."""
    vocab = cfg.vocabulary()
    protos = prototypes(cfg, vocab)
    return [synth_utterance(cfg, vocab, protos, stream(cfg.seed, 1, split, i), uid=i)
            for i in range(n_utts)]


def save_split(path, utts: Sequence[SynthUtterance]) -> None:
    """Binary split file: file header then one record per utterance.

    Header: magic, version, n_utts, feature_dim, frame_duration_ms, reserved.
    Record: T, U, uid, then T*F float64 features, U int32 target ids and
    U int32 ground-truth onset frames (all little-endian).
    """
    F = utts[0].frames.shape[1] if utts else 0
    frame_ms = utts[0].frame_duration_ms if utts else 0.0
    chunks = [_FILE_HEADER.pack(_MAGIC, _VERSION, len(utts), F, frame_ms, 0)]
    for u in utts:
        chunks.append(_UTT_HEADER.pack(u.T, len(u.target), u.uid))
        chunks.append(np.ascontiguousarray(u.frames, dtype="<f8").tobytes())
        chunks.append(np.asarray(u.target, dtype="<i4").tobytes())
        chunks.append(np.asarray(u.gt_emission, dtype="<i4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_split(path, vocab: Optional[Vocabulary] = None) -> List[SynthUtterance]:
    buf = Path(path).read_bytes()
    magic, version, n, F, frame_ms, _ = _FILE_HEADER.unpack_from(buf, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not a dataset split file")
    off = _FILE_HEADER.size
    utts = []
    for _ in range(n):
        T, U, uid = _UTT_HEADER.unpack_from(buf, off)
        off += _UTT_HEADER.size
        frames = np.frombuffer(buf, "<f8", T * F, off).reshape(T, F).astype(np.float64)
        off += 8 * T * F
        target = np.frombuffer(buf, "<i4", U, off).astype(np.int64)
        off += 4 * U
        onsets = np.frombuffer(buf, "<i4", U, off).astype(np.int64)
        off += 4 * U
        text = vocab.decode(target) if vocab is not None else ""
        utts.append(SynthUtterance(frames, target, onsets, frame_ms, text, uid))
    return utts
