"""Decoding, latency measurement and corpus-level evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ctc import NEG_INF, ctc_loss, first_emission_frames, forced_align
from .text_metrics import Vocabulary, char_errors, collapse, word_errors

LanguageModel = Callable[[Tuple[int, ...]], float]


@dataclass(frozen=True)
class BeamConfig:
    """Beam search settings.

    The hypothesis score is ``log P_acoustic(y|x) + beta * char_lm(y) +
    gamma * word_lm(y)``; both LM weights default to 0 and no LM ships with
    the package.
    """

    beam_width: int = 1
    lm_char_weight: float = 0.0
    lm_word_weight: float = 0.0

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


def greedy_decode(m, vocab: Vocabulary) -> str:
    """Best-path decoding: collapse of the per-frame argmax."""
    values = np.asarray(getattr(m, "values", m))
    return collapse(np.argmax(values, axis=1), vocab)


def prefix_beam_search(m, vocab: Vocabulary, cfg: BeamConfig,
                       char_lm: Optional[LanguageModel] = None,
                       word_lm: Optional[LanguageModel] = None
                       ) -> List[Tuple[Tuple[int, ...], float]]:
    """CTC prefix beam search; returns the final beam as ``(prefix, score)`` best first.

    Each prefix keeps separate log-masses for paths ending in blank and in
    its last token. Ties in score are broken by the lexicographically
    smaller prefix.
    """
    values = np.asarray(getattr(m, "values", m), dtype=np.float64)
    T, V = values.shape
    blank = vocab.blank_id
    tokens = [c for c in range(V) if c != blank]

    def score(prefix, pb, pnb):
        s = np.logaddexp(pb, pnb)
        if char_lm is not None and cfg.lm_char_weight:
            s += cfg.lm_char_weight * char_lm(prefix)
        if word_lm is not None and cfg.lm_word_weight:
            s += cfg.lm_word_weight * word_lm(prefix)
        return float(s)

    beam: Dict[Tuple[int, ...], List[float]] = {(): [0.0, NEG_INF]}
    for t in range(T):
        row = values[t]
        nxt: Dict[Tuple[int, ...], List[float]] = {}

        def add(prefix, idx, val):
            cell = nxt.get(prefix)
            if cell is None:
                cell = nxt[prefix] = [NEG_INF, NEG_INF]
            cell[idx] = np.logaddexp(cell[idx], val)

        for prefix, (pb, pnb) in beam.items():
            total = np.logaddexp(pb, pnb)
            add(prefix, 0, total + row[blank])
            last = prefix[-1] if prefix else None
            if last is not None:
                add(prefix, 1, pnb + row[last])
            for c in tokens:
                if c == last:
                    add(prefix + (c,), 1, pb + row[c])
                else:
                    add(prefix + (c,), 1, total + row[c])
        ranked = sorted(((score(p, *v), p) for p, v in nxt.items()),
                        key=lambda sp: (-sp[0], sp[1]))
        # prefixes that cannot fit into the frames seen so far have zero mass
        kept = [p for s, p in ranked[:cfg.beam_width] if s > NEG_INF] or [ranked[0][1]]
        beam = {p: nxt[p] for p in kept}
    ranked = sorted(((score(p, *v), p) for p, v in beam.items()), key=lambda sp: (-sp[0], sp[1]))
    return [(p, s) for s, p in ranked]


def beam_decode(m, vocab: Vocabulary, cfg: BeamConfig,
                char_lm: Optional[LanguageModel] = None,
                word_lm: Optional[LanguageModel] = None) -> str:
    best, _ = prefix_beam_search(m, vocab, cfg, char_lm, word_lm)[0]
    return vocab.decode(best)


def decode(m, vocab: Vocabulary, cfg: BeamConfig) -> str:
    """Greedy decoding for ``beam_width == 1``, prefix beam search otherwise."""
    if cfg.beam_width == 1:
        return greedy_decode(m, vocab)
    return beam_decode(m, vocab, cfg)


@dataclass
class LatencyReport:
    """Drift of token first-emission frames against a reference.

    ``drifts`` holds one entry per target token occurrence (frames); the
    total latency is the data-collection latency plus the drift latency.
    """

    drifts: List[int]
    frame_duration_ms: float
    dcl_ms: float = 0.0

    @property
    def dl_frames(self) -> float:
        return float(np.mean(self.drifts)) if self.drifts else 0.0

    @property
    def dl_ms(self) -> float:
        return self.dl_frames * self.frame_duration_ms

    @property
    def tl_ms(self) -> float:
        return self.dcl_ms + self.dl_ms

    def as_dict(self) -> dict:
        return {"dl_frames": self.dl_frames, "dl_ms": self.dl_ms, "dcl_ms": self.dcl_ms,
                "tl_ms": self.tl_ms, "n_tokens": len(self.drifts)}

    @classmethod
    def pooled(cls, reports: Sequence["LatencyReport"], frame_duration_ms: float,
               dcl_ms: float = 0.0) -> "LatencyReport":
        drifts: List[int] = []
        for r in reports:
            drifts.extend(r.drifts)
        return cls(drifts, frame_duration_ms, dcl_ms)


def _frame_ms(m, default: float = 10.0) -> float:
    return float(getattr(m, "frame_duration_ms", default))


def measure_drift(m_ref, m_online, target: Sequence[int], blank_id: int = 0,
                  dcl_ms: float = 0.0) -> LatencyReport:
    """Drift of the online model's forced alignment against the reference model's.

    Both matrices are force-aligned to the same target; drift is the
    difference in first-appearance frame of every target token occurrence.
    """
    ref_ms, on_ms = _frame_ms(m_ref), _frame_ms(m_online)
    if ref_ms != on_ms:
        raise ValueError("reference and online matrices must share frame_duration_ms")
    ref_frames = first_emission_frames(forced_align(m_ref, target, blank_id), blank_id)
    on_frames = first_emission_frames(forced_align(m_online, target, blank_id), blank_id)
    drifts = [o - r for o, r in zip(on_frames, ref_frames)]
    return LatencyReport(drifts, on_ms, dcl_ms)


def measure_drift_vs_truth(m, utt, blank_id: int = 0, dcl_ms: float = 0.0) -> LatencyReport:
    """Drift of forced-alignment first frames against the utterance's true onsets."""
    frames = first_emission_frames(forced_align(m, utt.target, blank_id), blank_id)
    drifts = [int(f - g) for f, g in zip(frames, utt.gt_emission)]
    return LatencyReport(drifts, _frame_ms(m, utt.frame_duration_ms), dcl_ms)


@dataclass
class EvalReport:
    n_utts: int
    word_errors: int
    ref_words: int
    char_errors: int
    ref_chars: int
    mean_frame_ctc_loss: float
    latency_truth: LatencyReport
    latency_ref: Optional[LatencyReport] = None
    hypotheses: List[str] = field(default_factory=list)

    @property
    def wer(self) -> float:
        return self.word_errors / self.ref_words if self.ref_words else 0.0

    @property
    def cer(self) -> float:
        return self.char_errors / self.ref_chars if self.ref_chars else 0.0

    def as_dict(self) -> dict:
        out = {"n_utts": self.n_utts, "wer": self.wer, "cer": self.cer,
               "word_errors": self.word_errors, "ref_words": self.ref_words,
               "char_errors": self.char_errors, "ref_chars": self.ref_chars,
               "mean_frame_ctc_loss": self.mean_frame_ctc_loss,
               "latency_truth": self.latency_truth.as_dict()}
        out["latency_ref"] = self.latency_ref.as_dict() if self.latency_ref else None
        return out


def evaluate(model, dataset, vocab: Vocabulary, cfg: BeamConfig = BeamConfig(),
             ref_model=None) -> EvalReport:
    """Pooled WER/CER (total errors over total reference length) and drift.

    Drift is measured against the true onsets and, when ``ref_model`` is
    given, against that model's forced alignments.
    """
    space = vocab.symbols[vocab.space_id] if vocab.space_id is not None else " "
    werr = wref = cerr = cref = 0
    frame_loss = 0.0
    n_frames = 0
    truth, ref = [], []
    hyps = []
    frame_ms = dataset[0].frame_duration_ms if dataset else 10.0
    dcl_ms = model.dcl_frames * frame_ms
    for utt in dataset:
        m = model.forward(utt.frames, utt.frame_duration_ms)
        text = utt.text or vocab.decode(utt.target)
        hyp = decode(m, vocab, cfg)
        hyps.append(hyp)
        e, n = word_errors(text, hyp, space)
        werr, wref = werr + e, wref + n
        e, n = char_errors(text, hyp, space)
        cerr, cref = cerr + e, cref + n
        frame_loss += ctc_loss(m, utt.target, vocab.blank_id)
        n_frames += utt.T
        truth.append(measure_drift_vs_truth(m, utt, vocab.blank_id))
        if ref_model is not None:
            m_ref = ref_model.forward(utt.frames, utt.frame_duration_ms)
            ref.append(measure_drift(m_ref, m, utt.target, vocab.blank_id))
    return EvalReport(
        n_utts=len(dataset), word_errors=werr, ref_words=wref, char_errors=cerr,
        ref_chars=cref, mean_frame_ctc_loss=frame_loss / max(n_frames, 1),
        latency_truth=LatencyReport.pooled(truth, frame_ms, dcl_ms),
        latency_ref=LatencyReport.pooled(ref, frame_ms, dcl_ms) if ref_model is not None else None,
        hypotheses=hyps,
    )
