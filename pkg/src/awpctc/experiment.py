"""Run orchestration: data generation, training, evaluation, sweeps and run directories."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from .config import ExperimentConfig
from .evaluation import EvalReport, evaluate
from .text_metrics import Vocabulary
from .toybench.model import WindowModel
from .toybench.synth import SynthUtterance, gen_dataset, load_split, save_split
from .toybench.train import MetricsRecord, TrainState, metrics_csv, train

log = logging.getLogger(__name__)

TRAIN_SPLIT, EVAL_SPLIT = "train", "eval"


@dataclass
class Dataset:
    vocab: Vocabulary
    train: List[SynthUtterance]
    eval: List[SynthUtterance]


@dataclass
class RunResult:
    config: ExperimentConfig
    model: WindowModel
    state: TrainState
    history: List[MetricsRecord]

    @property
    def final(self) -> MetricsRecord:
        return self.history[-1]


def generate(cfg: ExperimentConfig) -> Dataset:
    vocab = cfg.synth.vocabulary()
    train_utts = gen_dataset(cfg.synth, cfg.data.n_train, split=0)
    eval_utts = gen_dataset(cfg.synth, cfg.data.n_eval, split=1)
    for u in train_utts + eval_utts:
        u.text = vocab.decode(u.target)
    return Dataset(vocab, train_utts, eval_utts)


def save_dataset(data: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data.vocab.save(out / "vocab.json")
    save_split(out / f"{TRAIN_SPLIT}.bin", data.train)
    save_split(out / f"{EVAL_SPLIT}.bin", data.eval)


def load_dataset(data_dir) -> Dataset:
    d = Path(data_dir)
    vocab = Vocabulary.load(d / "vocab.json")
    return Dataset(vocab, load_split(d / f"{TRAIN_SPLIT}.bin", vocab),
                   load_split(d / f"{EVAL_SPLIT}.bin", vocab))


def build_model(cfg: ExperimentConfig, vocab: Vocabulary) -> WindowModel:
    return WindowModel(cfg.model.past_context, cfg.model.future_context, cfg.synth.feature_dim,
                       vocab.size, cfg.model.hidden).init(cfg.seed)


def run(cfg: ExperimentConfig, data: Optional[Dataset] = None) -> RunResult:
    data = data if data is not None else generate(cfg)
    model = build_model(cfg, data.vocab)
    state, history = train(data.train, model, data.vocab, cfg.awp, cfg.sampler, cfg.transform,
                           cfg.optimizer, cfg.train, seed=cfg.seed, eval_set=data.eval,
                           beam=cfg.eval)
    return RunResult(cfg, state.eval_model(), state, history)


def save_run(result: RunResult, out_dir, data_dir=None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.config.save(out / "config.json")
    (out / "metrics.csv").write_text(metrics_csv(result.history))
    (out / "history.json").write_text(json.dumps(
        [vars(r) for r in result.history], indent=1) + "\n")
    result.model.save(out / "model.npz")
    meta = {"steps": result.state.step, "epoch": result.state.epoch,
            "data": str(Path(data_dir).resolve()) if data_dir is not None else None}
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n")
    return out


def load_run(run_dir) -> Tuple[ExperimentConfig, WindowModel, Dict[str, Any]]:
    d = Path(run_dir)
    meta = json.loads((d / "run.json").read_text()) if (d / "run.json").exists() else {}
    return ExperimentConfig.load(d / "config.json"), WindowModel.load(d / "model.npz"), meta


def eval_run(run_dir, data: Dataset, ref_dir=None, split: str = EVAL_SPLIT) -> EvalReport:
    cfg, model, _ = load_run(run_dir)
    ref_model = load_run(ref_dir)[1] if ref_dir is not None else None
    utts = data.eval if split == EVAL_SPLIT else data.train
    return evaluate(model, utts, data.vocab, cfg.eval, ref_model=ref_model)


def report_rows(report: EvalReport) -> List[Dict[str, Any]]:
    """Flat CSV-ready rows for an evaluation report."""
    row = {"n_utts": report.n_utts, "wer": report.wer, "cer": report.cer,
           "mean_frame_ctc_loss": report.mean_frame_ctc_loss}
    for name, lat in (("truth", report.latency_truth), ("ref", report.latency_ref)):
        for k in ("dl_frames", "dl_ms", "dcl_ms", "tl_ms"):
            row[f"{k}_{name}"] = getattr(lat, k) if lat is not None else ""
    return [row]


def rows_csv(rows: Sequence[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def expand_grid(grid: Dict[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def sweep(base: ExperimentConfig, grid: Dict[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """Run every combination of ``grid`` (dotted keys) and return one row each.

    Datasets are cached per (seed, synth, data) so runs sharing data reuse it.
    """
    rows = []
    cache: Dict[str, Dataset] = {}
    for overrides in expand_grid(grid):
        cfg = base.with_overrides(overrides)
        key = json.dumps([cfg.to_dict()["synth"], cfg.to_dict()["data"]], sort_keys=True)
        if key not in cache:
            cache[key] = generate(cfg)
        result = run(cfg, cache[key])
        f = result.final
        log.info("sweep %s -> wer %.4f dl %.3f", overrides, f.eval_wer, f.dl_frames)
        rows.append({**overrides, "eval_wer": f.eval_wer, "eval_cer": f.eval_cer,
                     "dl_frames": f.dl_frames, "dl_ms": f.dl_ms, "tl_ms": f.tl_ms,
                     "ctc_loss": f.ctc_loss, "awp_loss": f.awp_loss})
    return rows


def trend(rows: Sequence[Dict[str, Any]], key: str, metric: str) -> Tuple[List[Any], List[float], float]:
    """Mean of ``metric`` per value of ``key`` (averaging other axes) and the Spearman rho."""
    values = sorted({r[key] for r in rows})
    means = [float(np.mean([r[metric] for r in rows if r[key] == v])) for v in values]
    if len(values) < 2 or len(set(means)) < 2:
        return values, means, float("nan")
    rho = float(spearmanr(values, means).statistic)
    return values, means, rho
