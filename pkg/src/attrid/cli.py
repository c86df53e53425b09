"""Command-line front end: dataset generation, training, adaptation, evaluation,
and multi-mode comparison tables."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import evaluation, trainer
from .config import ConfigError, gen_config_from, load_config, train_config_from
from .data import Dataset, LabelAccessError, generate_pair, load_dataset, save_dataset
from .model import load_checkpoint, save_checkpoint
from .trainer import MODES

EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_LABEL_LEAK = 4

CMC_RANKS = (1, 5, 10, 20)


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    sys.exit(code)


def _load_cfg(path):
    try:
        return load_config(path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        _fail(EXIT_CONFIG, f"cannot read config {path}: {exc}")


def _datasets(cfg):
    """Source/target pair from explicit paths or generated from gen.* keys."""
    try:
        if "data.source" in cfg and "data.target" in cfg:
            return load_dataset(cfg["data.source"]), load_dataset(cfg["data.target"])
        return generate_pair(gen_config_from(cfg))
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))


def _write_report(report, out_dir, name):
    with open(os.path.join(out_dir, f"{name}.txt"), "w") as f:
        for metric, value in evaluation.report_lines(report, CMC_RANKS):
            f.write(f"{metric}, {value!r}\n")
    with open(os.path.join(out_dir, f"{name}_cmc.txt"), "w") as f:
        for k, v in enumerate(report.cmc, start=1):
            f.write(f"{k} {v!r}\n")


# ---------------------------------------------------------------------------
# commands

def cmd_gen_data(args):
    cfg = _load_cfg(args.config)
    try:
        gen = gen_config_from(cfg)
        if args.seed is not None:
            gen.seed = args.seed
    except (ConfigError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    source, target = generate_pair(gen)
    os.makedirs(args.out, exist_ok=True)
    save_dataset(source, os.path.join(args.out, "source.jsonl"))
    save_dataset(target, os.path.join(args.out, "target.jsonl"))
    for name, d in (("source", source), ("target", target)):
        print(f"{name}: {len(d)} samples, {d.n_identities()} identities, "
              f"m={d.m}, input_dim={d.input_dim}")
    return 0


def _run_and_save(cfg_dict, args, adapt):
    tcfg = train_config_from(cfg_dict, seed=args.seed, mode=getattr(args, "mode", None))
    source, target = _datasets(cfg_dict)
    report = trainer.run(tcfg, source, target, adapt=adapt)
    os.makedirs(args.out, exist_ok=True)
    extra = {
        "mode": tcfg.mode,
        "train_seed": tcfg.seed,
        "phase": "final" if (adapt and tcfg.mode == "tj-aidl") else "pre-adapt",
        "optimizer": report.optimizer.to_dict(),
    }
    save_checkpoint(os.path.join(args.out, "checkpoint.json"), report.model, extra)
    trainer.write_metrics_log(report, os.path.join(args.out, "metrics.log"))
    eval_report = evaluation.evaluate_dataset(report.model, target, tcfg.mode)
    _write_report(eval_report, args.out, "target_eval")
    print(f"mode={tcfg.mode} seed={tcfg.seed} "
          f"rank1={eval_report.rank(1):.4f} map={eval_report.map:.4f}")
    return 0


def cmd_train(args):
    cfg = _load_cfg(args.config)
    try:
        return _run_and_save(cfg, args, adapt=not args.no_adapt)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except LabelAccessError as exc:
        _fail(EXIT_LABEL_LEAK, str(exc))


def cmd_adapt(args):
    cfg = _load_cfg(args.config)
    if not os.path.exists(args.checkpoint):
        _fail(EXIT_CHECKPOINT, f"checkpoint not found: {args.checkpoint}")
    model, extra = load_checkpoint(args.checkpoint)
    seed = args.seed if args.seed is not None else extra.get("train_seed", 0)
    try:
        tcfg = train_config_from(cfg, seed=seed, mode=extra.get("mode", "tj-aidl"))
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    _, target = _datasets(cfg)
    opt = trainer.GroupOptimizer(tcfg)
    opt.load_dict(extra.get("optimizer", {}))
    report = trainer.TrainReport(seed=tcfg.seed, mode=tcfg.mode, model=model)
    try:
        trainer.adapt_model(model, target.unlabelled_view(), tcfg, opt, report)
    except LabelAccessError as exc:
        _fail(EXIT_LABEL_LEAK, str(exc))
    os.makedirs(args.out, exist_ok=True)
    extra_out = {"mode": tcfg.mode, "train_seed": tcfg.seed, "phase": "final",
                 "optimizer": opt.to_dict()}
    save_checkpoint(os.path.join(args.out, "checkpoint.json"), model, extra_out)
    trainer.write_metrics_log(report, os.path.join(args.out, "metrics.log"))
    eval_report = evaluation.evaluate_dataset(model, target, tcfg.mode)
    _write_report(eval_report, args.out, "target_eval")
    print(f"adapted: rank1={eval_report.rank(1):.4f} map={eval_report.map:.4f}")
    return 0


def cmd_eval(args):
    cfg = _load_cfg(args.config)
    if not os.path.exists(args.checkpoint):
        _fail(EXIT_CHECKPOINT, f"checkpoint not found: {args.checkpoint}")
    model, extra = load_checkpoint(args.checkpoint)
    mode = extra.get("mode", "tj-aidl")
    source, target = _datasets(cfg)
    os.makedirs(args.out, exist_ok=True)
    for name, d in (("source", source), ("target", target)):
        report = evaluation.evaluate_dataset(model, d, mode)
        _write_report(report, args.out, f"{name}_eval")
        print(f"{name}: rank1={report.rank(1):.4f} map={report.map:.4f} "
              f"consistency={report.consistency:.6f}")
    return 0


def cmd_compare(args):
    cfg = _load_cfg(args.config)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not modes or not seeds:
        _fail(EXIT_CONFIG, "compare requires at least one mode and one seed")
    for m in modes:
        if m not in MODES:
            _fail(EXIT_CONFIG, f"unknown mode {m!r}; expected one of {MODES}")
    source, target = _datasets(cfg)
    os.makedirs(args.out, exist_ok=True)

    records = []
    log_path = os.path.join(args.out, "compare.log")
    with open(log_path, "w") as log:
        for mode in modes:
            for seed in seeds:
                try:
                    tcfg = train_config_from(cfg, seed=seed, mode=mode)
                except ConfigError as exc:
                    _fail(EXIT_CONFIG, str(exc))
                t0 = time.perf_counter()
                report = trainer.run(tcfg, source, target, adapt=not args.no_adapt)
                ev = evaluation.evaluate_dataset(report.model, target, mode)
                log.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {mode} seed={seed} "
                          f"{time.perf_counter() - t0:.1f}s\n")
                log.flush()
                rec = {"mode": mode, "seed": seed, "map": ev.map,
                       "consistency": ev.consistency}
                rec.update({f"rank{k}": ev.rank(k) for k in CMC_RANKS})
                records.append(rec)

    with open(os.path.join(args.out, "records.jsonl"), "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")

    header = f"{'mode':<14}" + "".join(f"{f'Rank{k}':>9}" for k in CMC_RANKS) + f"{'mAP':>9}"
    lines = [header]
    for mode in modes:
        rows = [r for r in records if r["mode"] == mode]
        cells = [float(np.mean([r[f"rank{k}"] for r in rows])) for k in CMC_RANKS]
        cells.append(float(np.mean([r["map"] for r in rows])))
        lines.append(f"{mode:<14}" + "".join(f"{100 * c:>8.2f}%" for c in cells[:-1])
                     + f"{100 * cells[-1]:>8.2f}%")
    table = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "table.txt"), "w") as f:
        f.write(table)
    print(table, end="")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="attrid",
                                description="Cross-domain attribute-identity re-id experiments")
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic source/target pair")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.set_defaults(func=cmd_gen_data)

    tr = sub.add_parser("train", help="run supervised training (and adaptation)")
    tr.add_argument("--config", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--mode", default=None, choices=MODES)
    tr.add_argument("--no-adapt", action="store_true")
    tr.set_defaults(func=cmd_train)

    adp = sub.add_parser("adapt", help="adapt a trained checkpoint on target data")
    adp.add_argument("--config", required=True)
    adp.add_argument("--checkpoint", required=True)
    adp.add_argument("--out", required=True)
    adp.add_argument("--seed", type=int, default=None)
    adp.set_defaults(func=cmd_adapt)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on source and target")
    ev.add_argument("--config", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    cmp_ = sub.add_parser("compare", help="run several modes/seeds and emit a table")
    cmp_.add_argument("--config", required=True)
    cmp_.add_argument("--modes", required=True)
    cmp_.add_argument("--seeds", required=True)
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--no-adapt", action="store_true")
    cmp_.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
