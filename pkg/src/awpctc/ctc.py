"""Log-space CTC lattice: loss, gradients and Viterbi forced alignment.

All dynamic programming runs in the log domain. ``-inf`` is a legal value
everywhere and is combined exactly by :func:`numpy.logaddexp`.
"""
from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

NEG_INF = -np.inf
_MAGIC = b"LPM1"
_HEADER = struct.Struct("<4sIId")


class InfeasibleTargetError(ValueError):
    """The target cannot be aligned to the available number of frames."""


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    return np.exp(log_softmax(logits, axis=axis))


def logsumexp(x: np.ndarray, axis=None) -> np.ndarray:
    """logsumexp that returns -inf (without warnings) for all -inf input."""
    x = np.asarray(x, dtype=float)
    peak = np.max(x, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - peak), axis=axis, keepdims=True)) + peak
    if axis is None:
        return out.reshape(())[()]
    return np.squeeze(out, axis=axis)


@dataclass
class LogProbMatrix:
    """T x |V'| per-frame log-probabilities."""

    values: np.ndarray
    frame_duration_ms: float = 10.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError(f"expected a T x V matrix with T >= 1, got {self.values.shape}")
        if not self.frame_duration_ms > 0:
            raise ValueError("frame_duration_ms must be positive")

    @classmethod
    def from_logits(cls, logits: np.ndarray, frame_duration_ms: float = 10.0) -> "LogProbMatrix":
        return cls(log_softmax(np.asarray(logits, dtype=np.float64)), frame_duration_ms)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.values.shape[1]

    def is_normalized(self, atol: float = 1e-6) -> bool:
        return bool(np.all(np.abs(logsumexp(self.values, axis=1)) <= atol))

    def to_bytes(self) -> bytes:
        T, V = self.values.shape
        return _HEADER.pack(_MAGIC, T, V, float(self.frame_duration_ms)) + \
            np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "LogProbMatrix":
        magic, T, V, frame_ms = _HEADER.unpack_from(buf, 0)
        if magic != _MAGIC:
            raise ValueError("not a LogProbMatrix file")
        body = np.frombuffer(buf, dtype="<f8", count=T * V, offset=_HEADER.size)
        return cls(body.reshape(T, V).astype(np.float64), frame_ms)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "LogProbMatrix":
        return cls.from_bytes(Path(path).read_bytes())

    def to_json(self) -> dict:
        return {"T": self.T, "num_tokens": self.num_tokens,
                "frame_duration_ms": self.frame_duration_ms,
                "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "LogProbMatrix":
        return cls(np.array(obj["values"], dtype=np.float64), obj["frame_duration_ms"])

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _as_values(m) -> np.ndarray:
    return m.values if isinstance(m, LogProbMatrix) else np.asarray(m, dtype=np.float64)


def path_log_prob(m, alignment: Sequence[int]) -> float:
    """log P(a|x): sum over frames of the log-probability of each aligned token."""
    values = _as_values(m)
    a = np.asarray(alignment, dtype=np.int64)
    if a.shape != (values.shape[0],):
        raise ValueError(f"alignment length {a.shape} does not match T={values.shape[0]}")
    return float(np.sum(values[np.arange(values.shape[0]), a]))


def min_frames(target: Sequence[int]) -> int:
    """Fewest frames able to carry ``target``: one per token plus one blank per adjacent repeat."""
    repeats = sum(1 for u in range(1, len(target)) if target[u] == target[u - 1])
    return len(target) + repeats


def check_feasible(T: int, target: Sequence[int], blank_id: int) -> None:
    if any(int(y) == blank_id for y in target):
        raise ValueError("target may not contain the blank token")
    need = min_frames(target)
    if need > T:
        raise InfeasibleTargetError(
            f"target of length {len(target)} needs at least {need} frames, got T={T}")


def extend_target(target: Sequence[int], blank_id: int) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, blank_id, dtype=np.int64)
    ext[1::2] = np.asarray(target, dtype=np.int64)
    return ext


def _skip_allowed(ext: np.ndarray, blank_id: int) -> np.ndarray:
    """skip[s]: the transition s-2 -> s is legal."""
    skip = np.zeros(len(ext), dtype=bool)
    if len(ext) > 2:
        skip[2:] = (ext[2:] != blank_id) & (ext[2:] != ext[:-2])
    return skip


@dataclass
class CtcLattice:
    """Forward/backward tables over the blank-extended target.

    ``alpha[t, s]`` and ``beta[t, s]`` both include the emission of frame t,
    so ``alpha + beta - emit`` is the log-mass of paths through (t, s).
    """

    extended_target: np.ndarray
    emit: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def log_likelihood(self) -> float:
        """log P(y|x) from the alpha termination."""
        return float(logsumexp(self.alpha[-1, -2:]))

    @property
    def log_likelihood_beta(self) -> float:
        return float(logsumexp(self.beta[0, :2]))

    def _through(self) -> np.ndarray:
        finite = np.isfinite(self.emit)
        return np.where(finite, self.alpha + self.beta - np.where(finite, self.emit, 0.0), NEG_INF)

    def log_likelihood_at(self, t: int) -> float:
        return float(logsumexp(self._through()[t]))

    def occupancy(self, num_tokens: int) -> np.ndarray:
        """Posterior probability that frame t emits token c, as a T x V matrix."""
        T = self.alpha.shape[0]
        logp = self.log_likelihood
        post = self._through()
        gamma = np.full((T, num_tokens), NEG_INF)
        for c in np.unique(self.extended_target):
            cols = post[:, self.extended_target == c]
            gamma[:, c] = logsumexp(cols, axis=1)
        return np.exp(gamma - logp)


def build_lattice(m, target: Sequence[int], blank_id: int = 0) -> CtcLattice:
    values = _as_values(m)
    T = values.shape[0]
    check_feasible(T, target, blank_id)
    ext = extend_target(target, blank_id)
    S = len(ext)
    emit = values[:, ext]
    skip = _skip_allowed(ext, blank_id)

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = emit[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = emit[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc + emit[t]
    return CtcLattice(ext, emit, alpha, beta)


def ctc_loss(m, target: Sequence[int], blank_id: int = 0) -> float:
    """-log P(y|x), summing over every alignment that collapses to ``target``."""
    values = _as_values(m)
    T = values.shape[0]
    check_feasible(T, target, blank_id)
    ext = extend_target(target, blank_id)
    emit = values[:, ext]
    skip = _skip_allowed(ext, blank_id)[2:]
    alpha = np.full(len(ext), NEG_INF)
    alpha[:2] = emit[0, :2]
    for t in range(1, T):
        acc = alpha.copy()
        acc[1:] = np.logaddexp(acc[1:], alpha[:-1])
        acc[2:] = np.where(skip, np.logaddexp(acc[2:], alpha[:-2]), acc[2:])
        alpha = acc + emit[t]
    return -float(logsumexp(alpha[-2:]))


def ctc_loss_and_grad(m, target: Sequence[int], blank_id: int = 0) -> Tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the log-probability entries.

    Every entry of ``m`` is treated as a free variable, so the gradient is
    minus the frame/token occupancy.
    """
    values = _as_values(m)
    lat = build_lattice(values, target, blank_id)
    grad = -lat.occupancy(values.shape[1])
    return -lat.log_likelihood, grad


def ctc_grad(m, target: Sequence[int], blank_id: int = 0) -> np.ndarray:
    return ctc_loss_and_grad(m, target, blank_id)[1]


def logits_grad(grad_logprobs: np.ndarray, logprobs: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. log_softmax outputs back to the logits."""
    probs = np.exp(logprobs)
    return grad_logprobs - probs * np.sum(grad_logprobs, axis=-1, keepdims=True)


def ctc_grad_logits(logits: np.ndarray, target: Sequence[int], blank_id: int = 0) -> np.ndarray:
    """Gradient of the CTC loss w.r.t. pre-softmax logits (softmax - occupancy)."""
    logp = log_softmax(np.asarray(logits, dtype=np.float64))
    return logits_grad(ctc_grad(logp, target, blank_id), logp)


def viterbi(m, target: Sequence[int], blank_id: int = 0) -> Tuple[float, np.ndarray, np.ndarray]:
    """Best path through the lattice.

    Returns (score, alignment, states) where ``states[t]`` is the extended
    target index occupied at frame t. Ties resolve toward the predecessor
    with the lower extended index, i.e. every advance happens at the latest
    frame compatible with the optimal score; at termination the final blank
    state wins ties.
    """
    values = _as_values(m)
    T = values.shape[0]
    check_feasible(T, target, blank_id)
    ext = extend_target(target, blank_id)
    S = len(ext)
    emit = values[:, ext]
    skip = _skip_allowed(ext, blank_id)

    score = np.full(S, NEG_INF)
    score[:2] = emit[0, :2]
    back = np.zeros((T, S), dtype=np.int64)
    cand = np.full((3, S), NEG_INF)
    for t in range(1, T):
        cand[:] = NEG_INF
        cand[0, 2:] = np.where(skip[2:], score[:-2], NEG_INF)
        cand[1, 1:] = score[:-1]
        cand[2] = score
        best = np.argmax(cand, axis=0)
        back[t] = np.arange(S) - 2 + best
        score = cand[best, np.arange(S)] + emit[t]

    if S > 1 and score[S - 2] > score[S - 1]:
        s = S - 2
    else:
        s = S - 1
    total = float(score[s])
    states = np.empty(T, dtype=np.int64)
    for t in range(T - 1, -1, -1):
        states[t] = s
        s = back[t, s]
    return total, ext[states], states


def forced_align(m, target: Sequence[int], blank_id: int = 0) -> np.ndarray:
    """The maximum-probability alignment that collapses to ``target``."""
    return viterbi(m, target, blank_id)[1]


def first_emission_frames(alignment: Sequence[int], blank_id: int = 0) -> List[int]:
    """Frame index where each emitted token occurrence starts."""
    frames = []
    prev = None
    for t, tok in enumerate(alignment):
        tok = int(tok)
        if tok != blank_id and tok != prev:
            frames.append(t)
        prev = tok
    return frames


def batch_ctc_loss(items: Sequence[Tuple[object, Sequence[int]]], blank_id: int = 0,
                   workers: Optional[int] = None) -> List[float]:
    """CTC loss for several (matrix, target) pairs, optionally on a thread pool.

    Each item is evaluated independently, so the result does not depend on
    scheduling order.
    """
    if not workers or workers <= 1:
        return [ctc_loss(m, y, blank_id) for m, y in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: ctc_loss(it[0], it[1], blank_id), items))
