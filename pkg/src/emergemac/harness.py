"""Experiment orchestration: repetition campaigns, selection, sweeps, reports.

A campaign crosses a (total_sdus, tbler) grid with seeded training
repetitions. Each repetition trains one protocol, evaluates it on a held-out
test seed set, and leaves behind a checkpoint plus an evaluation-trace CSV.
Reports are emitted as tidy CSV only; plotting is left to external tooling.
"""

import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .baseline import run_baseline_episode
from .env import ConfigError, SimConfig, delivery_rate, goodput
from .marl import (
    EP_TEST,
    EvalPoint,
    TrainConfig,
    eval_seeds,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train_run,
)

SOLUTION_NAMES = {"full": "maddpg", "ddpg": "ddpg", "nocomm": "nocomm"}
BASELINE_NAME = "contention-free"

DETAIL_COLUMNS = ["solution", "tbler", "P", "repetition", "train_episode",
                  "goodput", "delivery_rate", "duration"]
SUMMARY_COLUMNS = ["solution", "tbler", "P", "repetition",
                   "final_goodput", "final_delivery_rate", "final_duration",
                   "test_goodput", "test_delivery_rate", "test_duration"]
SWEEP_COLUMNS = ["solution", "tbler", "P", "episodes",
                 "mean_goodput", "ci95_goodput",
                 "mean_delivery_rate", "ci95_delivery_rate",
                 "ci_method", "ci_basis"]


@dataclass(frozen=True)
class Campaign:
    sim_config: SimConfig
    train_config: TrainConfig
    repetitions: int = 32
    base_seed: int = 0
    out_dir: str = "runs"
    sdus_grid: tuple = (1, 2)
    tbler_grid: tuple = (1e-1, 1e-2, 1e-3, 1e-4)

    def validate(self) -> None:
        self.sim_config.validate()
        self.train_config.validate()
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.sdus_grid or not self.tbler_grid:
            raise ConfigError("campaign grid must be non-empty")

    def grid_points(self):
        for p in self.sdus_grid:
            for t in self.tbler_grid:
                yield replace(self.sim_config, total_sdus=p, tbler=t)


@dataclass
class ProtocolRecord:
    solution: str
    tbler: float
    total_sdus: int
    repetition: int
    seed: int
    checkpoint: str
    final_eval_goodput: float   # mean goodput over the last evaluation episodes
    eval_points: list
    test_goodput: float
    test_delivery_rate: float
    test_duration: float

    def validate(self) -> None:
        values = [self.final_eval_goodput, self.test_goodput,
                  self.test_delivery_rate, self.test_duration]
        if not all(np.isfinite(values)):
            raise ValueError(f"non-finite metrics in record {self.solution} rep {self.repetition}")


def repetition_seed(base_seed: int, repetition: int) -> int:
    """Derived, collision-free seed for one repetition (shared across grid points)."""
    return int(np.random.SeedSequence(entropy=(base_seed, repetition)).generate_state(1)[0])


def ci95_halfwidth(values) -> float:
    """95% normal-approximation confidence halfwidth of the mean."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    return float(1.96 * v.std(ddof=1) / np.sqrt(v.size))


def _tag(sim: SimConfig, solution: str, rep: int) -> str:
    return f"{solution}_P{sim.total_sdus}_tbler{sim.tbler:g}_rep{rep}"


def _campaign_job(campaign: Campaign, sim: SimConfig, rep: int):
    cfg = campaign.train_config
    solution = SOLUTION_NAMES[cfg.ablation]
    seed = repetition_seed(campaign.base_seed, rep)
    try:
        learner, trace = train_run(sim, cfg, seed)
        test = evaluate(learner, sim, eval_seeds(seed, cfg.episodes_test, tag=EP_TEST))
        out = Path(campaign.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = _tag(sim, solution, rep)
        ckpt = out / f"checkpoint_{tag}.npz"
        save_checkpoint(ckpt, learner, seed)
        _write_eval_trace(out / f"evaltrace_{tag}.csv", trace)
        record = ProtocolRecord(
            solution=solution, tbler=sim.tbler, total_sdus=sim.total_sdus,
            repetition=rep, seed=seed, checkpoint=str(ckpt),
            final_eval_goodput=trace[-1].mean_goodput, eval_points=trace,
            test_goodput=test.mean_goodput,
            test_delivery_rate=test.mean_delivery_rate,
            test_duration=test.mean_duration,
        )
        record.validate()
        return record
    except Exception as exc:  # isolate failures; other repetitions keep running
        return {"error": f"{type(exc).__name__}: {exc}",
                "solution": solution, "tbler": sim.tbler,
                "total_sdus": sim.total_sdus, "repetition": rep}


def _write_eval_trace(path, trace) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["episode_index_of_training", "mean_goodput",
                         "mean_delivery_rate", "mean_duration"])
        for p in trace:
            writer.writerow([p.train_episode, repr(p.mean_goodput),
                             repr(p.mean_delivery_rate), repr(p.mean_duration)])


def run_campaign(campaign: Campaign, workers: int = 1) -> list:
    """Train every (grid point, repetition) pair; returns the ProtocolRecords.

    Failures are reported on stderr and skipped, never aborting the rest.
    Also dumps records.json into the campaign's output directory.
    """
    campaign.validate()
    jobs = [(campaign, sim, rep)
            for sim in campaign.grid_points()
            for rep in range(campaign.repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_campaign_job, *zip(*jobs)))
    else:
        results = [_campaign_job(*job) for job in jobs]
    records = []
    for res in results:
        if isinstance(res, dict):
            print(f"campaign job failed ({res['solution']} P={res['total_sdus']} "
                  f"tbler={res['tbler']:g} rep={res['repetition']}): {res['error']}",
                  file=sys.stderr)
        else:
            records.append(res)
    out = Path(campaign.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_records(out / "records.json", records)
    return records


def save_records(path, records) -> None:
    payload = [asdict(r) for r in records]
    with open(path, "w") as f:
        json.dump(payload, f, indent=1)


def load_records(path) -> list:
    with open(path) as f:
        payload = json.load(f)
    records = []
    for item in payload:
        item["eval_points"] = [EvalPoint(**p) for p in item["eval_points"]]
        records.append(ProtocolRecord(**item))
    return records


def select_best(records) -> ProtocolRecord:
    """Highest final-evaluation mean goodput; ties go to the lowest repetition id."""
    if not records:
        raise ValueError("select_best needs at least one record")
    return min(records, key=lambda r: (-r.final_eval_goodput, r.repetition))


def evaluate_baseline(sim: SimConfig, episode_seeds, trace_sink=None):
    """Per-episode baseline metrics over the given seeds."""
    goodputs, rates, durations = [], [], []
    for seed in episode_seeds:
        trace = [] if trace_sink is not None else None
        stats = run_baseline_episode(sim, seed, trace=trace)
        goodputs.append(goodput(stats))
        rates.append(delivery_rate(stats, sim))
        durations.append(stats.n_ttis)
        if trace_sink is not None:
            trace_sink(trace, stats)
    return goodputs, rates, durations


def sweep_tbler(campaign: Campaign, records=None, episodes=None, total_sdus=None) -> list:
    """Mean goodput with a 95% CI per TBLER point, for a protocol or the baseline.

    With records, each matching repetition's checkpoint is re-evaluated on
    fresh test seeds and the CI spans repetitions; without records the
    contention-free baseline is evaluated and the CI spans episodes.
    """
    cfg = campaign.train_config
    episodes = episodes or cfg.episodes_test
    p = total_sdus or campaign.sdus_grid[0]
    rows = []
    for tbler in campaign.tbler_grid:
        sim = replace(campaign.sim_config, total_sdus=p, tbler=tbler)
        if records is None:
            seeds = eval_seeds(campaign.base_seed, episodes, tag=EP_TEST)
            goodputs, rates, _ = evaluate_baseline(sim, seeds)
            rows.append(_sweep_row(BASELINE_NAME, sim, episodes, goodputs, rates, "episodes"))
        else:
            matching = [r for r in records if r.tbler == tbler and r.total_sdus == p]
            if not matching:
                continue
            goodputs, rates = [], []
            for rec in matching:
                learner, seed = load_checkpoint(rec.checkpoint)
                res = evaluate(learner, sim, eval_seeds(seed, episodes, tag=EP_TEST))
                goodputs.append(res.mean_goodput)
                rates.append(res.mean_delivery_rate)
            rows.append(_sweep_row(matching[0].solution, sim, episodes,
                                   goodputs, rates, "repetitions"))
    return rows


def _sweep_row(solution, sim, episodes, goodputs, rates, basis) -> dict:
    return {
        "solution": solution, "tbler": sim.tbler, "P": sim.total_sdus,
        "episodes": episodes,
        "mean_goodput": float(np.mean(goodputs)),
        "ci95_goodput": ci95_halfwidth(goodputs),
        "mean_delivery_rate": float(np.mean(rates)),
        "ci95_delivery_rate": ci95_halfwidth(rates),
        "ci_method": "normal-approx", "ci_basis": basis,
    }


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in row.items()})


def emit_report(records, detail_path, summary_path=None) -> tuple:
    """Tidy CSVs: one detail row per evaluation point per repetition, plus a
    per-repetition summary with the final evaluation and test aggregates."""
    if not records:
        raise ValueError("emit_report needs at least one record")
    detail_path = Path(detail_path)
    if summary_path is None:
        summary_path = detail_path.with_name(detail_path.stem + "_summary.csv")
    with open(detail_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DETAIL_COLUMNS)
        for rec in records:
            for point in rec.eval_points:
                writer.writerow([rec.solution, repr(rec.tbler), rec.total_sdus,
                                 rec.repetition, point.train_episode,
                                 repr(point.mean_goodput),
                                 repr(point.mean_delivery_rate),
                                 repr(point.mean_duration)])
    with open(summary_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for rec in records:
            final = rec.eval_points[-1]
            writer.writerow([rec.solution, repr(rec.tbler), rec.total_sdus,
                             rec.repetition,
                             repr(final.mean_goodput),
                             repr(final.mean_delivery_rate),
                             repr(final.mean_duration),
                             repr(rec.test_goodput),
                             repr(rec.test_delivery_rate),
                             repr(rec.test_duration)])
    return detail_path, summary_path


def load_config_file(path):
    """Flat key/value config mirroring SimConfig + TrainConfig field names.

    Unknown keys are rejected; omitted keys keep their defaults.
    """
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must be a flat key-value mapping")
    sim_names = {f.name for f in fields(SimConfig)}
    train_names = {f.name for f in fields(TrainConfig)}
    unknown = set(raw) - sim_names - train_names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sim_kwargs = {k: v for k, v in raw.items() if k in sim_names}
    train_kwargs = {k: v for k, v in raw.items() if k in train_names}
    if "hidden" in train_kwargs:
        train_kwargs["hidden"] = tuple(train_kwargs["hidden"])
    sim = SimConfig(**sim_kwargs)
    cfg = TrainConfig(**train_kwargs)
    sim.validate()
    cfg.validate()
    return sim, cfg
