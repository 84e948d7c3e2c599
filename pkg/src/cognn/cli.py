"""Command-line driver: simulate, run, sweep, graph-score.

Configuration is a flat text file, one ``key = value`` per line, ``#`` starts a
comment. Keys are the fields of EngineConfig, SimSchedule and RunOptions;
``num_agents`` and ``window`` are shared by the engine and the simulator.
Run ``cognn <command> --help`` for the full key list.
"""

from __future__ import annotations

import argparse
import enum
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .core import CognnError, ConfigError, DataError, DimensionError, DomainError, EngineConfig, NumericalError
from .dataio import load_csv_series, write_csv_series, write_rows
from .experiment import RunResult, run_online, series_from_run, simulate_table
from .regret import mean_static_regret, theoretical_bound
from .scoring import edge_auc, topk_precision
from .simulator import SimSchedule, simulate_run

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
METRIC_NAMES = ("mse", "mae", "rmse", "mape", "euclid")


@dataclass(frozen=True)
class RunOptions:
    source: str = "simulate"  # simulate | csv
    csv_path: str = ""
    csv_header: bool = False
    missing_policy: str = "reject"
    normalize: str = "global"  # none | global | per_column
    normalize_scale: float = 0.2
    baseline: str = "none"  # none | zerov
    max_steps: int = 5000
    snapshot_every: int = 100
    regret_every: int = 100
    run_index: int = 0
    runs: int = 1
    final_window: int = 500
    sweep: str = "eta"
    sweep_eta: tuple = (0.0075, 0.01, 0.05, 0.075, 0.125)
    sweep_num_copus: tuple = (1, 2, 3, 4)
    snapshots_path: str = ""
    truth_dir: str = ""
    score_after: int = 200

    def __post_init__(self):
        choices = {
            "source": ("simulate", "csv"),
            "normalize": ("none", "global", "per_column"),
            "baseline": ("none", "zerov"),
            "sweep": ("eta", "num_copus"),
            "missing_policy": ("reject", "forward_fill"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if self.source == "csv" and not self.csv_path:
            raise ConfigError("source = csv needs csv_path")
        if min(self.max_steps, self.runs, self.final_window) < 1 or self.normalize_scale <= 0:
            raise ConfigError("max_steps, runs, final_window and normalize_scale must be positive")
        if min(self.snapshot_every, self.regret_every, self.run_index, self.score_after) < 0:
            raise ConfigError("snapshot_every, regret_every, run_index and score_after must be >= 0")


@dataclass(frozen=True)
class Settings:
    engine: EngineConfig
    schedule: SimSchedule
    options: RunOptions


_SHARED = {"num_agents": "n", "window": "window"}


def _coerce(key: str, raw: str, annotation):
    text = raw.strip()
    default = annotation
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, enum.Enum):
            return type(default)(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            items = [t.strip() for t in text.split(",") if t.strip()]
            if not items:
                raise ValueError(text)
            return tuple(kind(t) for t in items)
        return text
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for key {key!r}") from None


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        out[key] = value
    return out


def _defaults(cls) -> dict:
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in fields(cls)}


def build_settings(pairs: dict[str, str], seed: int | None = None) -> Settings:
    eng_d, sim_d, opt_d = _defaults(EngineConfig), _defaults(SimSchedule), _defaults(RunOptions)
    eng, sim, opt = {}, {}, {}
    for key, raw in pairs.items():
        if key in eng_d:
            eng[key] = _coerce(key, raw, eng_d[key])
            if key in _SHARED:
                sim[_SHARED[key]] = eng[key]
        elif key in sim_d and key not in ("n", "window"):
            sim[key] = _coerce(key, raw, sim_d[key])
        elif key in opt_d:
            opt[key] = _coerce(key, raw, opt_d[key])
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if seed is not None:
        eng["seed"] = seed
    eng.setdefault("num_agents", sim_d["n"])
    sim.setdefault("n", eng["num_agents"])
    try:
        return Settings(EngineConfig(**eng), SimSchedule(**sim), RunOptions(**opt))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_settings(path, seed: int | None = None) -> Settings:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return build_settings(parse_config_text(text), seed)


def config_help() -> str:
    lines = ["config keys (key = value):"]
    for cls in (EngineConfig, SimSchedule, RunOptions):
        for name, value in _defaults(cls).items():
            if cls is SimSchedule and name in ("n", "window"):
                continue
            if isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"  {name} = {value}")
    return "\n".join(lines)


# -- data ----------------------------------------------------------------------


def _table_for(settings: Settings, run_index: int):
    opt, eng = settings.options, settings.engine
    if opt.source == "csv":
        try:
            table = load_csv_series(opt.csv_path, eng.num_agents, eng.feature_dim, opt.missing_policy, opt.csv_header)
        except OSError as exc:
            raise DataError(f"cannot read {opt.csv_path}: {exc.strerror}") from None
        return table, None
    if eng.feature_dim != 2:
        raise ConfigError("simulated streams have feature_dim = 2")
    return simulate_table(settings.schedule, run_index, eng.seed)


def _execute(settings: Settings, run_index: int, engine: EngineConfig | None = None) -> tuple[RunResult, object]:
    opt = settings.options
    engine = settings.engine if engine is None else engine
    table, run = _table_for(settings, run_index)
    result = run_online(
        engine,
        table,
        max_steps=opt.max_steps,
        normalize=opt.normalize,
        normalize_scale=opt.normalize_scale,
        snapshot_every=opt.snapshot_every,
        regret_every=opt.regret_every,
        baseline=opt.baseline,
    )
    if result.steps == 0:
        raise DataError("stream is shorter than two windows")
    return result, run


# -- writers -------------------------------------------------------------------


def _per_step_metric(result: RunResult, name: str) -> np.ndarray:
    if name == "rmse":
        return np.sqrt(result.sq_err.mean(axis=(1, 2)))
    arr = {"mse": result.sq_err, "mae": result.abs_err, "mape": result.ape, "euclid": result.euclid}[name]
    return arr.mean(axis=(1, 2))


def _summary_metrics(result: RunResult, axes) -> dict[str, np.ndarray]:
    mse = result.sq_err.mean(axis=axes)
    return {
        "mse": mse,
        "mae": result.abs_err.mean(axis=axes),
        "rmse": np.sqrt(mse),
        "mape": result.ape.mean(axis=axes),
        "euclid": result.euclid.mean(axis=axes),
    }


def write_metrics(path, result: RunResult) -> None:
    """Per-step rows use agent = horizon = '*' (averaged); trailing rows use step = '*'."""
    rows = []
    per_step = {m: _per_step_metric(result, m) for m in METRIC_NAMES}
    per_step_h = result.sq_err.mean(axis=1)
    delta = result.sq_err.shape[2]
    for s in range(result.steps):
        t = s + 1
        for m in METRIC_NAMES:
            rows.append((t, "*", "*", m, float(per_step[m][s])))
        for h in range(delta):
            rows.append((t, "*", h + 1, "mse", float(per_step_h[s, h])))
    by_agent_h = _summary_metrics(result, 0)
    by_h = _summary_metrics(result, (0, 1))
    overall = _summary_metrics(result, None)
    n = result.sq_err.shape[1]
    for m in METRIC_NAMES:
        for p in range(n):
            for h in range(delta):
                rows.append(("*", p, h + 1, m, float(by_agent_h[m][p, h])))
        for h in range(delta):
            rows.append(("*", "*", h + 1, m, float(by_h[m][h])))
        rows.append(("*", "*", "*", m, float(overall[m])))
    write_rows(path, ("step", "agent", "horizon", "metric", "value"), rows)


def write_regret(path, result: RunResult) -> None:
    rows = []
    for t, regs, bound in result.regret_rows:
        for p, r in enumerate(regs):
            rows.append((t, p, float(r), float(bound)))
    write_rows(path, ("step", "agent", "regret", "bound"), rows)


def write_snapshots(out: Path, result: RunResult) -> list[Path]:
    if not result.snapshots:
        return []
    k = len(result.snapshots[0][1])
    paths = []
    for i in range(k):
        rows = []
        for t, mats in result.snapshots:
            w = mats[i]
            for p in range(w.shape[0]):
                for q in range(w.shape[1]):
                    rows.append((t, p, q, float(w[p, q])))
        path = out / f"graph_copu{i}.csv"
        write_rows(path, ("step", "p", "q", "weight"), rows)
        paths.append(path)
    return paths


def write_adjacencies(directory: Path, adjacencies: np.ndarray) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, adj in enumerate(adjacencies):
        path = directory / f"segment_{j:03d}.csv"
        np.savetxt(path, adj.astype(int), fmt="%d", delimiter=",")
        paths.append(path)
    return paths


def summarize(result: RunResult, engine: EngineConfig, final_window: int) -> dict[str, float]:
    out = {"steps": result.steps, "mse": float(result.sq_err.mean())}
    start = max(result.steps - final_window, 0)
    out["mse_final_window"] = float(result.sq_err[start:].mean())
    for h in (1, 2, 5, 8, 10):
        if h <= result.sq_err.shape[2]:
            out[f"mse_h{h}"] = result.mse_at_horizon(h)
    out["mae"] = float(result.abs_err.mean())
    out["mape"] = float(result.ape.mean())
    out["euclid"] = float(result.euclid.mean())
    if result.ledger is not None and result.ledger.history_len > 0:
        out["mean_static_regret"] = mean_static_regret(result.ledger)
        out["regret_bound"] = theoretical_bound(result.ledger, engine.eta, engine.num_agents)
    return out


def _format_summary(summary: dict) -> str:
    return "".join(f"{k} = {v:.9g}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in summary.items())


# -- commands ------------------------------------------------------------------


def cmd_simulate(settings: Settings, out: Path) -> list[Path]:
    sched, seed = settings.schedule, settings.engine.seed
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for r in range(sched.num_runs):
        run = simulate_run(sched, seed + r)
        rdir = out / f"run_{r:02d}"
        rdir.mkdir(exist_ok=True)
        series = rdir / "series.csv"
        write_csv_series(series, series_from_run(run))
        written.append(series)
        written.extend(write_adjacencies(rdir / "truth", run.adjacencies))
    manifest = out / "manifest.txt"
    manifest.write_text("".join(f"{p.relative_to(out)}\n" for p in written))
    print(manifest.read_text(), end="")
    return written


def cmd_run(settings: Settings, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    result, run = _execute(settings, settings.options.run_index)
    write_metrics(out / "metrics.csv", result)
    if settings.options.baseline == "none":
        write_regret(out / "regret.csv", result)
        write_snapshots(out, result)
    if run is not None:
        write_adjacencies(out / "truth", run.adjacencies)
    summary = summarize(result, settings.engine, settings.options.final_window)
    (out / "summary.txt").write_text(_format_summary(summary))
    print(_format_summary(summary), end="")
    return summary


def _sweep_point(args):
    settings, engine, run_index = args
    result, _ = _execute(settings, run_index, engine)
    return summarize(result, engine, settings.options.final_window)


def _workers() -> int:
    raw = os.environ.get("COGNN_THREADS", "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        raise ConfigError(f"COGNN_THREADS must be an integer, got {raw!r}") from None


def cmd_sweep(settings: Settings, out: Path, sweep: str | None = None) -> list[dict]:
    opt = settings.options
    sweep = sweep or opt.sweep
    if sweep not in ("eta", "num_copus"):
        raise ConfigError(f"sweep must be eta or num_copus, got {sweep!r}")
    grid = opt.sweep_eta if sweep == "eta" else opt.sweep_num_copus
    engines = [replace(settings.engine, **{sweep: v}) for v in grid]
    jobs = [(settings, e, opt.run_index + r) for e in engines for r in range(opt.runs)]
    workers = min(_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    keys = ("mse", "mse_final_window", "mse_h1", "mse_h10", "mean_static_regret")
    rows, table = [], []
    for i, value in enumerate(grid):
        chunk = results[i * opt.runs : (i + 1) * opt.runs]
        means = {k: float(np.mean([c[k] for c in chunk if k in c])) for k in keys if k in chunk[0]}
        table.append({"value": value, **means})
        rows.append((sweep, value, opt.runs) + tuple(means.get(k, float("nan")) for k in keys))
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / f"sweep_{sweep}.csv", ("param", "value", "runs") + keys, rows)
    print((out / f"sweep_{sweep}.csv").read_text(), end="")
    return table


def _read_snapshots(path) -> dict[int, np.ndarray]:
    try:
        raw = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read snapshots {path}: {exc}") from None
    if raw.size == 0 or raw.shape[1] != 4:
        raise DataError(f"{path} is not a step,p,q,weight table")
    snaps = {}
    for step in np.unique(raw[:, 0]).astype(int):
        block = raw[raw[:, 0] == step]
        n = int(block[:, 1].max()) + 1
        w = np.zeros((n, n))
        w[block[:, 1].astype(int), block[:, 2].astype(int)] = block[:, 3]
        snaps[int(step)] = w
    return snaps


def score_snapshots(
    snapshots: dict[int, np.ndarray], truths: list[np.ndarray], frames_per_segment: int, score_after: int
) -> tuple[list[tuple], list[tuple]]:
    """Per-snapshot and per-segment (AUC, top-k precision).

    A snapshot taken after step t was last trained on the window starting at
    frame t-1; it belongs to that frame's segment and is scored only when that
    frame lies at least ``score_after`` frames into the segment.
    """
    per_snap = []
    for t, w in sorted(snapshots.items()):
        frame = t - 1
        seg = frame // frames_per_segment
        if seg >= len(truths):
            raise DataError(f"snapshot at step {t} falls in segment {seg}, only {len(truths)} truth files")
        if w.shape != truths[seg].shape:
            raise DimensionError(f"snapshot at step {t} is {w.shape}, truth is {truths[seg].shape}")
        if frame - seg * frames_per_segment < score_after:
            continue
        per_snap.append((t, seg, edge_auc(w, truths[seg]), topk_precision(w, truths[seg])))
    per_seg = []
    for seg in sorted({r[1] for r in per_snap}):
        sel = [r for r in per_snap if r[1] == seg]
        per_seg.append((seg, len(sel), float(np.nanmean([r[2] for r in sel])), float(np.nanmean([r[3] for r in sel]))))
    return per_snap, per_seg


def cmd_graph_score(settings: Settings, out: Path) -> list[tuple]:
    opt = settings.options
    snap_path = Path(opt.snapshots_path or out / f"graph_copu{settings.engine.num_copus - 1}.csv")
    truth_dir = Path(opt.truth_dir or out / "truth")
    truth_files = sorted(truth_dir.glob("segment_*.csv"))
    if not truth_files:
        raise DataError(f"no segment_*.csv files under {truth_dir}")
    truths = [np.loadtxt(f, delimiter=",", ndmin=2) for f in truth_files]
    per_snap, per_seg = score_snapshots(
        _read_snapshots(snap_path), truths, settings.schedule.frames_per_segment, opt.score_after
    )
    if not per_seg:
        raise DataError("no snapshot lies far enough into any segment to be scored")
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "graph_score_snapshots.csv", ("step", "segment", "auc", "topk_precision"), per_snap)
    write_rows(out / "graph_score.csv", ("segment", "snapshots", "auc", "topk_precision"), per_seg)
    mean_auc = float(np.nanmean([r[2] for r in per_seg]))
    print(f"segments = {len(per_seg)}\nmean_auc = {mean_auc:.9g}")
    return per_seg


# -- entry point ---------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cognn",
        description="Online collaborative graph forecasting experiments.",
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "run", "sweep", "graph-score"):
        p = sub.add_parser(name, epilog=config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        if name == "sweep":
            p.add_argument("--sweep", choices=("eta", "num_copus"), default=None)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    started = time.perf_counter()
    try:
        settings = load_settings(args.config, args.seed)
        out = Path(args.out)
        if args.command == "simulate":
            cmd_simulate(settings, out)
        elif args.command == "run":
            cmd_run(settings, out)
        elif args.command == "sweep":
            cmd_sweep(settings, out, args.sweep)
        else:
            cmd_graph_score(settings, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, DimensionError, DomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CognnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"elapsed {time.perf_counter() - started:.1f}s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
