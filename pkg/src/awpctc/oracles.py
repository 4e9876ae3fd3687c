"""Exhaustive-enumeration oracles for tiny CTC instances.

These enumerate all |V'|^T alignments and are exponential by design; they
exist to check the lattice code, the Viterbi aligner and the beam decoder.
"""
from __future__ import annotations

import functools
from typing import Dict, Sequence, Tuple

import numpy as np

MAX_FRAMES = 10
MAX_TOKENS = 5


class InstanceTooLargeError(ValueError):
    pass


def _guard(T: int, V: int) -> None:
    if T > MAX_FRAMES or V > MAX_TOKENS:
        raise InstanceTooLargeError(
            f"brute force limited to T<={MAX_FRAMES}, |V'|<={MAX_TOKENS}; got T={T}, |V'|={V}")


@functools.lru_cache(maxsize=64)
def _enumeration(T: int, V: int, blank_id: int) -> Tuple[np.ndarray, np.ndarray]:
    """All alignments (V**T x T) and an integer code of each collapsed labelling.

    Codes are base-(V+1) numbers whose digits are token id + 1, so distinct
    label sequences never share a code.
    """
    grids = np.indices((V,) * T).reshape(T, -1).T
    keep = grids != blank_id
    keep[:, 1:] &= grids[:, 1:] != grids[:, :-1]
    codes = np.zeros(len(grids), dtype=np.int64)
    for t in range(T):
        codes = np.where(keep[:, t], codes * (V + 1) + grids[:, t] + 1, codes)
    grids.setflags(write=False)
    codes.setflags(write=False)
    return grids, codes


def label_code(labels: Sequence[int], V: int) -> int:
    code = 0
    for tok in labels:
        code = code * (V + 1) + int(tok) + 1
    return code


def decode_label_code(code: int, V: int) -> Tuple[int, ...]:
    out = []
    while code:
        code, digit = divmod(code, V + 1)
        out.append(digit - 1)
    return tuple(reversed(out))


def _path_log_probs(values: np.ndarray, blank_id: int):
    T, V = values.shape
    _guard(T, V)
    grids, codes = _enumeration(T, V, blank_id)
    logp = values[np.arange(T), grids].sum(axis=1)
    return grids, codes, logp


def brute_force_seq_prob(m, target: Sequence[int], blank_id: int = 0) -> float:
    """P(y|x) as an explicit sum over every alignment whose collapse is ``target``."""
    values = getattr(m, "values", m)
    values = np.asarray(values, dtype=np.float64)
    _, codes, logp = _path_log_probs(values, blank_id)
    mask = codes == label_code(target, values.shape[1])
    return float(np.sum(np.exp(logp[mask])))


def brute_force_label_distribution(m, blank_id: int = 0) -> Dict[Tuple[int, ...], float]:
    """P(y|x) for every label sequence y reachable in T frames."""
    values = np.asarray(getattr(m, "values", m), dtype=np.float64)
    V = values.shape[1]
    _, codes, logp = _path_log_probs(values, blank_id)
    uniq, inverse = np.unique(codes, return_inverse=True)
    mass = np.bincount(inverse, weights=np.exp(logp))
    return {decode_label_code(int(c), V): float(p) for c, p in zip(uniq, mass)}


def brute_force_best_label(m, blank_id: int = 0) -> Tuple[Tuple[int, ...], float]:
    """Most probable label sequence; ties go to the lexicographically smallest."""
    dist = brute_force_label_distribution(m, blank_id)
    return min(dist.items(), key=lambda kv: (-kv[1], kv[0]))


def brute_force_best_path(m, target: Sequence[int], blank_id: int = 0) -> Tuple[float, np.ndarray]:
    """Highest-scoring alignment among B^-1(target) and its log-probability."""
    values = np.asarray(getattr(m, "values", m), dtype=np.float64)
    grids, codes, logp = _path_log_probs(values, blank_id)
    mask = codes == label_code(target, values.shape[1])
    if not mask.any():
        raise ValueError("no alignment collapses to the target")
    idx = np.flatnonzero(mask)
    best = idx[np.argmax(logp[idx])]
    return float(logp[best]), grids[best].copy()


def enumerate_alignments(T: int, V: int, blank_id: int = 0) -> np.ndarray:
    _guard(T, V)
    return _enumeration(T, V, blank_id)[0]
