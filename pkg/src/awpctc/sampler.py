"""Alignment sampling from per-frame output distributions."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from .ctc import log_softmax

# Below this temperature sampling degenerates to the per-frame argmax.
ARGMAX_TEMPERATURE = 1e-6


class SamplingMode(str, enum.Enum):
    CATEGORICAL = "categorical"
    GUMBEL_SOFTMAX = "gumbel_softmax"


@dataclass(frozen=True)
class SamplerConfig:
    n_alignments: int = 5
    temperature: float = 1.0
    mode: SamplingMode = SamplingMode.CATEGORICAL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SamplingMode(self.mode))
        if self.n_alignments < 1:
            raise ValueError("n_alignments must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Streams for different keys are independent, so a per-utterance stream
    does not depend on the order utterances are visited in.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))


RngLike = Union[np.random.Generator, Sequence[int], int, None]


def _rng(cfg: SamplerConfig, rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return stream(cfg.seed)
    if isinstance(rng, int):
        return stream(cfg.seed, rng)
    return stream(cfg.seed, *rng)


def _values(m) -> np.ndarray:
    return np.asarray(getattr(m, "values", m), dtype=np.float64)


def _argmax_batch(values: np.ndarray, n: int) -> List[np.ndarray]:
    best = np.argmax(values, axis=1)
    return [best.copy() for _ in range(n)]


def sample_categorical(m, cfg: SamplerConfig, rng: RngLike = None) -> List[np.ndarray]:
    """Draw N alignments, each frame independently from softmax(logp / temperature)."""
    values = _values(m)
    if cfg.temperature < ARGMAX_TEMPERATURE:
        return _argmax_batch(values, cfg.n_alignments)
    gen = _rng(cfg, rng)
    probs = np.exp(log_softmax(values / cfg.temperature, axis=1))
    cdf = np.cumsum(probs, axis=1)
    u = gen.random((cfg.n_alignments, values.shape[0]))
    idx = np.sum(cdf[None, :, :] <= u[:, :, None], axis=2)
    # guard against the cdf summing to slightly below 1
    idx = np.minimum(idx, values.shape[1] - 1)
    return list(idx.astype(np.int64))


def sample_gumbel(m, cfg: SamplerConfig, rng: RngLike = None) -> List[np.ndarray]:
    """Gumbel-max sampling: argmax of logp / temperature plus Gumbel(0, 1) noise."""
    values = _values(m)
    if cfg.temperature < ARGMAX_TEMPERATURE:
        return _argmax_batch(values, cfg.n_alignments)
    gen = _rng(cfg, rng)
    noise = gen.gumbel(size=(cfg.n_alignments,) + values.shape)
    with np.errstate(invalid="ignore"):
        scores = values[None] / cfg.temperature + noise
    scores = np.where(np.isnan(scores), -np.inf, scores)
    return list(np.argmax(scores, axis=2).astype(np.int64))


def sample_alignments(m, cfg: SamplerConfig, rng: RngLike = None) -> List[np.ndarray]:
    """Draw ``cfg.n_alignments`` alignments using the configured sampling mode.

    ``rng`` may be a Generator, an integer key or a tuple of keys combined
    with ``cfg.seed``; identical arguments give identical samples.
    """
    if cfg.mode is SamplingMode.GUMBEL_SOFTMAX:
        return sample_gumbel(m, cfg, rng)
    return sample_categorical(m, cfg, rng)
