"""Windowed-context frame classifier with hand-written backward pass.

Frame t sees features ``t - past_context .. t + future_context`` (zero
padded at the edges), passes them through one tanh hidden layer and a linear
output layer producing |V'| logits.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from ..ctc import LogProbMatrix, log_softmax
from ..sampler import stream

Params = Dict[str, np.ndarray]


def window_features(frames: np.ndarray, past: int, future: int) -> np.ndarray:
    """Stack each frame's context window into one row: T x (past+1+future)*F."""
    T, F = frames.shape
    padded = np.zeros((T + past + future, F))
    padded[past:past + T] = frames
    cols = [padded[k:k + T] for k in range(past + future + 1)]
    return np.concatenate(cols, axis=1)


@dataclass
class WindowModel:
    past_context: int
    future_context: int
    feature_dim: int
    num_tokens: int
    hidden: int = 64
    params: Optional[Params] = None

    def __post_init__(self):
        if self.past_context < 0 or self.future_context < 0:
            raise ValueError("context sizes must be non-negative")

    @property
    def input_dim(self) -> int:
        return (self.past_context + 1 + self.future_context) * self.feature_dim

    def init(self, seed: int) -> "WindowModel":
        rng = stream(seed, 2)
        D, H, V = self.input_dim, self.hidden, self.num_tokens
        self.params = {
            "W1": rng.normal(scale=1.0 / np.sqrt(D), size=(D, H)),
            "b1": np.zeros(H),
            "W2": rng.normal(scale=1.0 / np.sqrt(H), size=(H, V)),
            "b2": np.zeros(V),
        }
        return self

    def windows(self, frames: np.ndarray) -> np.ndarray:
        return window_features(frames, self.past_context, self.future_context)

    def logits(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Logits for pre-windowed input ``X``; also returns the hidden activations."""
        p = self.params
        h = np.tanh(X @ p["W1"] + p["b1"])
        return h @ p["W2"] + p["b2"], h

    def forward(self, frames: np.ndarray, frame_duration_ms: float = 10.0) -> LogProbMatrix:
        z, _ = self.logits(self.windows(frames))
        return LogProbMatrix(log_softmax(z), frame_duration_ms)

    def backward(self, X: np.ndarray, h: np.ndarray, dlogits: np.ndarray) -> Params:
        """Parameter gradients given the upstream gradient w.r.t. the logits."""
        p = self.params
        dh = (dlogits @ p["W2"].T) * (1.0 - h * h)
        return {
            "W1": X.T @ dh,
            "b1": dh.sum(axis=0),
            "W2": h.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }

    @property
    def dcl_frames(self) -> int:
        return self.future_context

    def save(self, path) -> None:
        meta = np.array([self.past_context, self.future_context, self.feature_dim,
                         self.num_tokens, self.hidden])
        np.savez(path, meta=meta, **self.params)

    @classmethod
    def load(cls, path) -> "WindowModel":
        with np.load(Path(path)) as data:
            P, Fc, F, V, H = (int(x) for x in data["meta"])
            params = {k: data[k].copy() for k in ("W1", "b1", "W2", "b2")}
        return cls(P, Fc, F, V, H, params)

    def copy(self) -> "WindowModel":
        return WindowModel(self.past_context, self.future_context, self.feature_dim,
                           self.num_tokens, self.hidden,
                           {k: v.copy() for k, v in self.params.items()})
