"""Command-line entry point: ``awpctc {gen,train,eval,align,sweep}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import ExperimentConfig
from .ctc import forced_align
from .experiment import (eval_run, generate, load_dataset, load_run, report_rows, rows_csv,
                         run, save_dataset, save_run, sweep, trend)

log = logging.getLogger("awpctc")


def _cmd_gen(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    data = generate(cfg)
    save_dataset(data, args.out)
    cfg.save(Path(args.out) / "config.json")
    print(f"wrote {len(data.train)} train / {len(data.eval)} eval utterances to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    data = load_dataset(args.data) if args.data else generate(cfg)
    result = run(cfg, data)
    save_run(result, args.out, args.data)
    f = result.final
    print(f"step {f.step} eval_wer {f.eval_wer:.4f} eval_cer {f.eval_cer:.4f} "
          f"dl {f.dl_frames:.3f} frames ({f.dl_ms:.1f} ms)")
    return 0


def _data_for_run(run_dir, data_arg):
    if data_arg:
        return load_dataset(data_arg)
    _, _, meta = load_run(run_dir)
    if meta.get("data"):
        return load_dataset(meta["data"])
    return generate(load_run(run_dir)[0])


def _cmd_eval(args) -> int:
    data = _data_for_run(args.run, args.data)
    report = eval_run(args.run, data, args.ref, args.split)
    out = Path(args.out) if args.out else Path(args.run)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.json").write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    (out / "eval.csv").write_text(rows_csv(report_rows(report)))
    print(json.dumps(report.as_dict(), indent=2))
    return 0


def _cmd_align(args) -> int:
    cfg, model, _ = load_run(args.run)
    data = _data_for_run(args.run, args.data)
    utts = data.eval if args.split == "eval" else data.train
    by_id = {u.uid: u for u in utts}
    if args.utt not in by_id:
        print(f"no utterance {args.utt} in split {args.split}", file=sys.stderr)
        return 2
    utt = by_id[args.utt]
    m = model.forward(utt.frames, utt.frame_duration_ms)
    a = forced_align(m, utt.target, data.vocab.blank_id)
    doc = {
        "uid": utt.uid,
        "text": utt.text,
        "frame_duration_ms": utt.frame_duration_ms,
        "tokens": list(data.vocab.symbols),
        "target": [int(x) for x in utt.target],
        "gt_emission": [int(x) for x in utt.gt_emission],
        "alignment": [int(x) for x in a],
        "posteriors": np.exp(m.values).round(6).tolist(),
    }
    text = json.dumps(doc) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_sweep(args) -> int:
    base = ExperimentConfig.load(args.config)
    grid = json.loads(Path(args.grid).read_text())
    rows = sweep(base, grid)
    csv_text = rows_csv(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(csv_text)
    sys.stdout.write(csv_text)
    for key in grid:
        if len(grid[key]) > 1:
            for metric in ("dl_frames", "eval_wer"):
                _, _, rho = trend(rows, key, metric)
                print(f"# spearman({key}, {metric}) = {rho:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="awpctc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="synthesize dataset splits")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    t = sub.add_parser("train", help="train a model and write a run directory")
    t.add_argument("--config", required=True)
    t.add_argument("--data", help="dataset directory from `gen` (generated on the fly if omitted)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="WER/CER/DL/TL report as JSON and CSV")
    e.add_argument("--run", required=True)
    e.add_argument("--data")
    e.add_argument("--ref", help="reference run (e.g. an offline model) for drift")
    e.add_argument("--split", choices=("train", "eval"), default="eval")
    e.add_argument("--out", help="output directory (defaults to the run directory)")
    e.set_defaults(func=_cmd_eval)

    a = sub.add_parser("align", help="dump forced alignment and posteriors as JSON")
    a.add_argument("--run", required=True)
    a.add_argument("--utt", type=int, required=True)
    a.add_argument("--data")
    a.add_argument("--split", choices=("train", "eval"), default="eval")
    a.add_argument("--out")
    a.set_defaults(func=_cmd_align)

    s = sub.add_parser("sweep", help="run a grid of dotted-key overrides")
    s.add_argument("--config", required=True)
    s.add_argument("--grid", required=True, help='JSON like {"awp.alpha": [0.001, 0.01]}')
    s.add_argument("--out", help="CSV output path")
    s.set_defaults(func=_cmd_sweep)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
