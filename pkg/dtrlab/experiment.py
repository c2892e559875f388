"""
Benchmark runs: INI experiment files, replications on a worker pool, CSV reports.

Execution Flow Map:
• load_experiment → configparser sections [experiment], [train], [arm NAME] → ExperimentConfig
• run_replication → fresh training set → fit every arm → evaluate each on shared evaluation seeds
• run_benchmark → SeedSequence children per replication, bounded ProcessPoolExecutor, rows sorted by rep
• BenchmarkResult.write → benchmark.csv (one row per rep x arm x evaluation) and benchmark_summary.csv

A failing arm never aborts the run: its row carries status "failed: ..." and a NaN value.
"""
import configparser
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from dtrlab.core import read_csv
from dtrlab.errors import ConfigError
from dtrlab.evalkit import dr_value, ipw_value
from dtrlab.models.configs import PAPER_SCALE_REPS, ArmSpec, ExperimentConfig, SettingSpec
from dtrlab.models.data import Dataset
from dtrlab.qlearn import fit_q_learning
from dtrlab.simlab import generate, mc_value, oracle_rule
from dtrlab.trainer import train

logger = logging.getLogger(__name__)

ROW_COLUMNS = ["rep", "arm", "evaluation", "value", "se", "status", "seconds"]
SUMMARY_COLUMNS = ["arm", "evaluation", "setting", "n_train", "reps", "mean", "sd", "failed", "scale"]
ROWS_FILE = "benchmark.csv"
SUMMARY_FILE = "benchmark_summary.csv"
ARM_PREFIX = "arm "


def default_threads() -> int:
    return int(os.getenv("DTRLAB_THREADS", os.cpu_count() or 1))


def load_experiment(path: str | Path) -> ExperimentConfig:
    """
    Parse an INI experiment file.

    Raises:
        ConfigError: unreadable file, missing [experiment] section or invalid values.
    """
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        if not parser.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read experiment file {path}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed experiment file {path}: {exc}") from exc
    if not parser.has_section("experiment"):
        raise ConfigError(f"{path} has no [experiment] section")

    fields: dict = dict(parser["experiment"])
    if "evaluation" in fields:
        fields["evaluation"] = [m.strip() for m in fields["evaluation"].split(",") if m.strip()]
    if "data" in fields and not Path(fields["data"]).is_absolute():
        fields["data"] = path.parent / fields["data"]
    if fields.get("scale") == "paper" and "reps" not in fields:
        fields["reps"] = PAPER_SCALE_REPS
    if parser.has_section("train"):
        fields["train"] = dict(parser["train"])
    fields["arms"] = [
        {"name": section[len(ARM_PREFIX):].strip(), **parser[section]}
        for section in parser.sections() if section.startswith(ARM_PREFIX)
    ]
    try:
        return ExperimentConfig.model_validate(fields)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment file {path}: {exc}") from exc


@dataclass(frozen=True)
class ReplicationSeeds:
    data: int
    train: int
    evaluation: int

    @classmethod
    def spawn(cls, seed: int, reps: int) -> list["ReplicationSeeds"]:
        return [cls(*(int(v) for v in child.generate_state(3))) for child in np.random.SeedSequence(seed).spawn(reps)]


def _fit_arm(arm: ArmSpec, cfg: ExperimentConfig, d: Dataset, seed: int):
    if arm.method == "qlearn":
        return fit_q_learning(d, arm.q_form, seed)[2]
    update = {"seed": seed}
    if arm.surrogate:
        update["surrogate"] = arm.surrogate
    return train(d, arm.class1, arm.class2, cfg.train.model_copy(update=update)).pair


def _evaluate(method: str, regime, cfg: ExperimentConfig, seeds: ReplicationSeeds, d_train: Dataset):
    if method == "mc":
        return mc_value(cfg.setting, regime, cfg.n_eval, seeds.evaluation)
    if cfg.setting is None:
        d_eval = d_train
    else:
        d_eval = generate(SettingSpec(id=cfg.setting, n=cfg.n_eval, seed=seeds.evaluation))
    if method == "ipw":
        return ipw_value(d_eval, regime)
    if cfg.setting is None:
        q1, q2, _ = fit_q_learning(d_eval, seed=seeds.evaluation)
    else:
        q1, q2 = oracle_rule(cfg.setting, d_eval.offset).q_models()
    return dr_value(d_eval, regime, q1, q2)


def run_replication(cfg: ExperimentConfig, rep: int, seeds: ReplicationSeeds) -> list[dict]:
    """One replication; every (arm, evaluation) pair yields a row, failed or not."""
    if cfg.setting is not None:
        d = generate(SettingSpec(id=cfg.setting, n=cfg.n_train, seed=seeds.data))
    else:
        d = read_csv(cfg.data)
    rows = []
    for arm in cfg.arms:
        started = time.perf_counter()
        try:
            regime = _fit_arm(arm, cfg, d, seeds.train)
        except Exception as exc:
            logger.warning(f"rep {rep}, arm {arm.name}: fit failed: {type(exc).__name__}: {exc}")
            rows.extend(
                _row(rep, arm.name, method, np.nan, np.nan, f"failed: {type(exc).__name__}: {exc}", started)
                for method in cfg.evaluation
            )
            continue
        for method in cfg.evaluation:
            try:
                estimate = _evaluate(method, regime, cfg, seeds, d)
                rows.append(_row(rep, arm.name, method, estimate.raw_value, estimate.sd, "ok", started))
            except Exception as exc:
                logger.warning(f"rep {rep}, arm {arm.name}: {method} evaluation failed: {type(exc).__name__}: {exc}")
                rows.append(_row(rep, arm.name, method, np.nan, np.nan, f"failed: {type(exc).__name__}: {exc}", started))
    logger.info(f"Replication {rep} finished ({len(cfg.arms)} arms)")
    return rows


def _row(rep: int, arm: str, method: str, value: float, se: float, status: str, started: float) -> dict:
    return {
        "rep": rep, "arm": arm, "evaluation": method, "value": value, "se": se,
        "status": status, "seconds": time.perf_counter() - started,
    }


def _replication_task(task: tuple[ExperimentConfig, int, ReplicationSeeds]) -> list[dict]:
    return run_replication(*task)


@dataclass(frozen=True, eq=False)
class BenchmarkResult:
    rows: pd.DataFrame
    summary: pd.DataFrame

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows_path = out_dir / ROWS_FILE
        summary_path = out_dir / SUMMARY_FILE
        self.rows.to_csv(rows_path, index=False, float_format="%.10g", lineterminator="\n")
        self.summary.to_csv(summary_path, index=False, float_format="%.10g", lineterminator="\n")
        return rows_path, summary_path


def summarize(rows: pd.DataFrame, cfg: ExperimentConfig) -> pd.DataFrame:
    """Mean and SD of the successful replications per (arm, evaluation)."""
    records = []
    for (arm, method), group in rows.groupby(["arm", "evaluation"], sort=False):
        ok = group.loc[group["status"] == "ok", "value"].to_numpy(dtype=np.float64)
        records.append({
            "arm": arm, "evaluation": method, "setting": cfg.setting if cfg.setting is not None else "data",
            "n_train": cfg.n_train, "reps": cfg.reps,
            "mean": float(ok.mean()) if ok.size else np.nan,
            "sd": float(ok.std(ddof=1)) if ok.size > 1 else 0.0 if ok.size else np.nan,
            "failed": int(group.shape[0] - ok.size), "scale": cfg.scale,
        })
    return pd.DataFrame.from_records(records, columns=SUMMARY_COLUMNS)


def run_benchmark(cfg: ExperimentConfig, threads: int | None = None) -> BenchmarkResult:
    """
    All replications of an experiment; threads=1 runs in-process.

    Raises:
        ConfigError: Monte Carlo evaluation requested for a dataset-backed experiment.
    """
    if cfg.setting is None and "mc" in cfg.evaluation:
        raise ConfigError("Monte Carlo evaluation needs a simulation setting, not a data file")
    threads = max(1, threads or default_threads())
    seeds = ReplicationSeeds.spawn(cfg.seed, cfg.reps)
    tasks = [(cfg, rep, rep_seeds) for rep, rep_seeds in enumerate(seeds)]
    logger.info(
        f"Benchmark: {cfg.reps} reps x {len(cfg.arms)} arms, evaluation {cfg.evaluation}, "
        f"{threads} workers, {cfg.scale} scale"
    )
    if threads == 1:
        batches = [_replication_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(_replication_task, tasks))
    rows = pd.DataFrame.from_records([row for batch in batches for row in batch], columns=ROW_COLUMNS)
    rows = rows.sort_values(["rep"], kind="stable").reset_index(drop=True)
    return BenchmarkResult(rows=rows, summary=summarize(rows, cfg))
