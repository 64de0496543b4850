"""Command-line front end.

Subcommands: train, eval, baseline, sweep, report. All randomness flows from
--seed; rerunning a command with the same config and seed reproduces its
outputs byte for byte.
"""

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .env import SimConfig
from .harness import (
    Campaign,
    emit_report,
    load_config_file,
    load_records,
    run_campaign,
    sweep_tbler,
    write_sweep_csv,
)
from .marl import EP_TEST, TrainConfig, eval_seeds, evaluate, load_checkpoint


def _load_configs(path):
    if path is None:
        return SimConfig(), TrainConfig()
    return load_config_file(path)


def _print_episode_csv(goodputs, rates, durations, out=None):
    writer = csv.writer(out if out is not None else sys.stdout)
    writer.writerow(["episode", "goodput", "delivery_rate", "duration"])
    for i, (g, d, n) in enumerate(zip(goodputs, rates, durations)):
        writer.writerow([i, repr(g), repr(d), repr(float(n))])
    writer.writerow(["mean", repr(float(np.mean(goodputs))),
                     repr(float(np.mean(rates))), repr(float(np.mean(durations)))])


def cmd_train(args) -> int:
    sim, cfg = _load_configs(args.config)
    if args.ablation:
        cfg = replace(cfg, ablation=args.ablation)
    campaign = Campaign(
        sim_config=sim, train_config=cfg,
        repetitions=args.reps, base_seed=args.seed, out_dir=args.out,
        sdus_grid=(sim.total_sdus,), tbler_grid=(sim.tbler,),
    )
    records = run_campaign(campaign, workers=args.workers)
    if not records:
        print("no repetition finished successfully", file=sys.stderr)
        return 1
    detail, summary = emit_report(records, Path(args.out) / "report.csv")
    for rec in records:
        print(f"rep {rec.repetition}: final eval goodput {rec.final_eval_goodput:.4f}, "
              f"test goodput {rec.test_goodput:.4f}, "
              f"test delivery rate {rec.test_delivery_rate:.5f}")
    print(f"wrote {detail} and {summary}")
    return 0


def cmd_eval(args) -> int:
    learner, _ = load_checkpoint(args.checkpoint)
    seeds = eval_seeds(args.seed, args.episodes, tag=EP_TEST)
    res = evaluate(learner, learner.sim, seeds)
    _print_episode_csv(res.goodputs, res.delivery_rates, res.durations)
    return 0


def cmd_baseline(args) -> int:
    from .harness import evaluate_baseline

    sim, _ = _load_configs(args.config)
    seeds = eval_seeds(args.seed, args.episodes, tag=EP_TEST)
    goodputs, rates, durations = evaluate_baseline(sim, seeds)
    _print_episode_csv(goodputs, rates, durations)
    return 0


def cmd_sweep(args) -> int:
    sim, cfg = _load_configs(args.config)
    tblers = tuple(float(x) for x in args.tbler.split(","))
    campaign = Campaign(
        sim_config=sim, train_config=cfg,
        repetitions=1, base_seed=args.seed, out_dir=args.out or ".",
        sdus_grid=(args.sdus,), tbler_grid=tblers,
    )
    records = load_records(args.records) if args.records else None
    rows = sweep_tbler(campaign, records=records, episodes=args.episodes,
                       total_sdus=args.sdus)
    if args.out:
        write_sweep_csv(args.out, rows)
        print(f"wrote {args.out}")
    else:
        _print_sweep(rows)
    return 0


def _print_sweep(rows) -> None:
    from .harness import SWEEP_COLUMNS

    writer = csv.DictWriter(sys.stdout, fieldnames=SWEEP_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def cmd_report(args) -> int:
    records = load_records(Path(args.indir) / "records.json")
    detail, summary = emit_report(records, args.out)
    print(f"wrote {detail} and {summary}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emergemac",
                                     description="MAC-protocol emergence workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run seeded training repetitions")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out", type=str, default="runs")
    p.add_argument("--ablation", choices=["full", "nocomm", "ddpg"], default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint greedily")
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="run the contention-free baseline")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="goodput vs TBLER for baseline or checkpoints")
    p.add_argument("--tbler", type=str, default="0.1,0.01,0.001,0.0001",
                   help="comma-separated TBLER list")
    p.add_argument("--sdus", type=int, default=2)
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--records", type=str, default=None,
                   help="records.json of a finished campaign (default: baseline)")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="emit detail/summary CSVs from a campaign")
    p.add_argument("--in", dest="indir", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
