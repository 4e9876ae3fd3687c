"""Training loop: CTC warm-up followed by CTC + alpha * AWP."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..awp import AwpConfig, combined_loss_and_grad
from ..ctc import log_softmax, logits_grad
from ..evaluation import BeamConfig, evaluate
from ..properties import PropertyTransform
from ..sampler import SamplerConfig, sample_alignments, stream
from ..text_metrics import Vocabulary, collapse, word_errors
from .model import WindowModel
from .optim import AdamState, OptimizerConfig, adam_step

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("step", "epoch", "ctc_loss", "awp_loss", "hinge_active_frac", "train_wer",
                   "eval_wer", "eval_cer", "dl_frames", "dl_ms", "tl_ms")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: float = 10.0
    eval_every: int = 0
    ema_decay: float = 0.0

    def __post_init__(self):
        if self.epochs <= 0 or self.eval_every < 0 or not 0 <= self.ema_decay < 1:
            raise ValueError("invalid training configuration")


@dataclass
class MetricsRecord:
    step: int
    epoch: float
    ctc_loss: float
    awp_loss: float
    hinge_active_frac: float
    train_wer: float
    eval_wer: float
    eval_cer: float
    dl_frames: float
    dl_ms: float
    tl_ms: float
    alpha: float = 0.0
    no_pairs_frac: float = 0.0

    def row(self) -> List[str]:
        return [repr(getattr(self, c)) for c in METRICS_COLUMNS]


@dataclass
class TrainState:
    model: WindowModel
    optimizer: AdamState
    steps_per_epoch: int
    step: int = 0
    steps_active: int = 0
    ema: Optional[Dict[str, np.ndarray]] = None

    @property
    def epoch(self) -> float:
        return self.step / self.steps_per_epoch

    def eval_model(self) -> WindowModel:
        if self.ema is None:
            return self.model
        m = self.model.copy()
        m.params = {k: v.copy() for k, v in self.ema.items()}
        return m


def metrics_csv(history: Sequence[MetricsRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    for rec in history:
        writer.writerow(rec.row())
    return buf.getvalue()


class _Window:
    """Running averages between two metric records."""

    def __init__(self):
        self.ctc = self.awp = 0.0
        self.n = 0
        self.pairs = self.active = 0
        self.awp_steps = self.no_pairs = 0
        self.werr = self.wref = 0
        self.alpha = 0.0


def train(dataset, model: WindowModel, vocab: Vocabulary, awp: AwpConfig = AwpConfig(),
          sampler: SamplerConfig = SamplerConfig(), transform: PropertyTransform = PropertyTransform(),
          optimizer: OptimizerConfig = OptimizerConfig(), train_cfg: TrainConfig = TrainConfig(),
          *, seed: int = 0, eval_set=None, beam: BeamConfig = BeamConfig()):
    """Train ``model`` in place and return ``(state, history)``.

    One step consumes one utterance; the optimizer updates every
    ``optimizer.grad_accum`` steps with the averaged gradient. Metrics are
    recorded every ``train_cfg.eval_every`` steps (once per epoch when 0)
    and after the final step.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    n = len(dataset)
    total_steps = int(round(train_cfg.epochs * n))
    eval_every = train_cfg.eval_every or n
    eval_set = eval_set if eval_set is not None else dataset
    space = vocab.symbols[vocab.space_id] if vocab.space_id is not None else " "

    state = TrainState(model, AdamState(model.params), n)
    if train_cfg.ema_decay > 0:
        state.ema = {k: v.copy() for k, v in model.params.items()}
    windows = [model.windows(u.frames) for u in dataset]
    texts = [u.text or vocab.decode(u.target) for u in dataset]
    accum = {k: np.zeros_like(v) for k, v in model.params.items()}
    pending = 0
    history: List[MetricsRecord] = []
    win = _Window()
    order = None

    for step in range(total_steps):
        epoch_idx, pos = divmod(step, n)
        if pos == 0:
            order = stream(seed, 3, epoch_idx).permutation(n)
        i = int(order[pos])
        utt = dataset[i]
        epoch = step / n

        z, h = model.logits(windows[i])
        logp = log_softmax(z)
        alpha = awp.effective_alpha(epoch, state.steps_active)
        pairs = []
        if alpha > 0:
            samples = sample_alignments(logp, sampler, rng=(step,))
            pairs = transform.make_pairs(samples, vocab=vocab, target_text=texts[i],
                                         rng=stream(seed, 4, step))
        out = combined_loss_and_grad(logp, utt.target, pairs, awp, epoch, state.steps_active,
                                     vocab.blank_id)
        if not np.isfinite(out.total):
            raise TrainingDivergedError(
                f"non-finite loss at step {step} (epoch {epoch:.3f}, utterance {utt.uid}): "
                f"ctc={out.ctc_part!r} awp={out.awp_part!r} alpha={alpha!r}")

        grads = model.backward(windows[i], h, logits_grad(out.grad, logp))
        for k, g in grads.items():
            accum[k] += g
        pending += 1
        if out.awp is not None:
            state.steps_active += 1
            win.awp_steps += 1
            win.no_pairs += out.awp.no_pairs
            win.pairs += out.awp.n_pairs
            win.active += out.awp.n_active
        win.ctc += out.ctc_part
        win.awp += out.awp_part
        win.alpha = alpha
        win.n += 1
        e, r = word_errors(texts[i], collapse(np.argmax(logp, axis=1), vocab), space)
        win.werr += e
        win.wref += r

        if pending == optimizer.grad_accum or step == total_steps - 1:
            for k in accum:
                accum[k] /= pending
            if optimizer.clip_norm > 0:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in accum.values()))
                if norm > optimizer.clip_norm:
                    for k in accum:
                        accum[k] *= optimizer.clip_norm / norm
            adam_step(state.optimizer, accum, optimizer.lr, optimizer.beta1, optimizer.beta2,
                      optimizer.eps)
            for k in accum:
                accum[k][...] = 0.0
            pending = 0
            if state.ema is not None:
                d = train_cfg.ema_decay
                for k, v in model.params.items():
                    state.ema[k] = d * state.ema[k] + (1 - d) * v

        state.step = step + 1
        if state.step % eval_every == 0 or state.step == total_steps:
            history.append(_record(state, win, eval_set, vocab, beam))
            log.info("step %d epoch %.2f ctc %.4f awp %.4g eval_wer %.4f dl %.3f",
                     history[-1].step, history[-1].epoch, history[-1].ctc_loss,
                     history[-1].awp_loss, history[-1].eval_wer, history[-1].dl_frames)
            win = _Window()
    return state, history


def _record(state: TrainState, win: _Window, eval_set, vocab, beam) -> MetricsRecord:
    report = evaluate(state.eval_model(), eval_set, vocab, beam)
    lat = report.latency_truth
    n_prev = max(win.n, 1)
    return MetricsRecord(
        step=state.step,
        epoch=state.epoch,
        ctc_loss=win.ctc / n_prev,
        awp_loss=win.awp / n_prev,
        hinge_active_frac=win.active / win.pairs if win.pairs else 0.0,
        train_wer=win.werr / win.wref if win.wref else 0.0,
        eval_wer=report.wer,
        eval_cer=report.cer,
        dl_frames=lat.dl_frames,
        dl_ms=lat.dl_ms,
        tl_ms=lat.tl_ms,
        alpha=win.alpha,
        no_pairs_frac=win.no_pairs / win.awp_steps if win.awp_steps else 0.0,
    )
