"""Hinge loss over (sampled, improved) alignment pairs and the combined objective."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .ctc import ctc_loss_and_grad, path_log_prob
from .properties import AlignmentPair


@dataclass(frozen=True)
class AwpConfig:
    """Weighting and scheduling of the auxiliary term.

    ``alpha_schedule`` is a list of ``(step, alpha)`` pairs, piecewise
    constant, with steps counted from the moment the term activates. When
    ``log_domain`` is set the hinge compares log-probabilities instead of
    raw path probabilities.
    """

    alpha: float = 0.0
    lambda_margin: float = 0.0
    start_epoch: float = 0.0
    alpha_schedule: Optional[Tuple[Tuple[int, float], ...]] = None
    log_domain: bool = False

    def __post_init__(self):
        if self.alpha < 0 or self.lambda_margin < 0 or self.start_epoch < 0:
            raise ValueError("alpha, lambda_margin and start_epoch must be non-negative")
        if self.alpha_schedule is not None:
            sched = tuple((int(s), float(a)) for s, a in self.alpha_schedule)
            steps = [s for s, _ in sched]
            if not sched or any(b <= a for a, b in zip(steps, steps[1:])):
                raise ValueError("alpha_schedule steps must be strictly increasing")
            if any(a < 0 for _, a in sched):
                raise ValueError("scheduled alpha must be non-negative")
            object.__setattr__(self, "alpha_schedule", sched)

    def effective_alpha(self, epoch: float, steps_active: int = 0) -> float:
        if epoch < self.start_epoch:
            return 0.0
        if not self.alpha_schedule:
            return self.alpha
        value = self.alpha
        for step, a in self.alpha_schedule:
            if steps_active >= step:
                value = a
            else:
                break
        return value


class AwpResult(NamedTuple):
    loss: float
    grad: np.ndarray
    n_pairs: int
    n_active: int

    @property
    def no_pairs(self) -> bool:
        return self.n_pairs == 0

    @property
    def hinge_active_frac(self) -> float:
        return self.n_active / self.n_pairs if self.n_pairs else 0.0


def _retained(pairs: Sequence[AlignmentPair]) -> List[AlignmentPair]:
    return [p for p in pairs if p.applicable]


def awp_loss_and_grad(m, pairs: Sequence[AlignmentPair], lambda_margin: float = 0.0,
                      log_domain: bool = False) -> AwpResult:
    """Mean hinge max{P(a) - P(a_bar) + lambda, 0} over applicable pairs.

    The gradient is taken w.r.t. the log-probability entries:
    dP(a)/dlogp[t, c] = P(a) [a_t = c]. At the hinge kink the zero
    subgradient is used. With no applicable pairs the loss is 0.
    """
    values = np.asarray(getattr(m, "values", m), dtype=np.float64)
    T = values.shape[0]
    grad = np.zeros_like(values)
    kept = _retained(pairs)
    if not kept:
        return AwpResult(0.0, grad, 0, 0)
    frames = np.arange(T)
    total = 0.0
    active = 0
    for p in kept:
        lp_a = path_log_prob(values, p.sampled)
        lp_b = path_log_prob(values, p.improved)
        if log_domain:
            margin = lp_a - lp_b + lambda_margin
            w_a = w_b = 1.0
        else:
            pa, pb = np.exp(lp_a), np.exp(lp_b)
            margin = pa - pb + lambda_margin
            w_a, w_b = pa, pb
        if margin > 0:
            total += margin
            active += 1
            np.add.at(grad, (frames, p.sampled), w_a)
            np.add.at(grad, (frames, p.improved), -w_b)
    n = len(kept)
    return AwpResult(total / n, grad / n, n, active)


def awp_loss(m, pairs: Sequence[AlignmentPair], lambda_margin: float = 0.0,
             log_domain: bool = False) -> float:
    return awp_loss_and_grad(m, pairs, lambda_margin, log_domain).loss


def awp_grad(m, pairs: Sequence[AlignmentPair], lambda_margin: float = 0.0,
             log_domain: bool = False) -> np.ndarray:
    return awp_loss_and_grad(m, pairs, lambda_margin, log_domain).grad


class CombinedLoss(NamedTuple):
    total: float
    ctc_part: float
    awp_part: float
    grad: np.ndarray
    alpha: float
    awp: Optional[AwpResult]


def combined_loss_and_grad(m, target: Sequence[int], pairs: Sequence[AlignmentPair],
                           cfg: AwpConfig, epoch: float, steps_active: int = 0,
                           blank_id: int = 0) -> CombinedLoss:
    """L = L_CTC + alpha_eff * L_AWP, with alpha_eff = 0 before ``start_epoch``."""
    ctc, grad = ctc_loss_and_grad(m, target, blank_id)
    alpha = cfg.effective_alpha(epoch, steps_active)
    if alpha == 0.0:
        return CombinedLoss(ctc, ctc, 0.0, grad, 0.0, None)
    res = awp_loss_and_grad(m, pairs, cfg.lambda_margin, cfg.log_domain)
    return CombinedLoss(ctc + alpha * res.loss, ctc, res.loss, grad + alpha * res.grad,
                        alpha, res)


def combined_loss(m, target: Sequence[int], pairs: Sequence[AlignmentPair], cfg: AwpConfig,
                  epoch: float, steps_active: int = 0, blank_id: int = 0
                  ) -> Tuple[float, float, float]:
    """Return ``(total, ctc_part, awp_part)``."""
    out = combined_loss_and_grad(m, target, pairs, cfg, epoch, steps_active, blank_id)
    return out.total, out.ctc_part, out.awp_part
