"""Online loop shared by the CLI, the scripts and the acceptance suite."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import EngineConfig
from .dataio import SeriesTable, ZScoreStats, sliding_windows, zscore_fit_transform
from .network import CognnState, cognn_online_step, init_cognn
from .regret import RegretLedger, mean_static_regret, record_step, static_regret, theoretical_bound
from .simulator import SimRun, SimSchedule, simulate_run


@dataclass
class RunResult:
    sq_err: np.ndarray  # (steps, N, delta): squared error averaged over features
    abs_err: np.ndarray
    ape: np.ndarray
    euclid: np.ndarray  # (steps, N, delta)
    copu_loss: np.ndarray  # (steps, K): mean aggregate loss of each CoPU
    snapshots: list = field(default_factory=list)  # (step, [normalized weights per CoPU])
    regret_rows: list = field(default_factory=list)  # (step, per-agent regrets, bound)
    ledger: RegretLedger | None = None
    state: CognnState | None = None
    start_times: np.ndarray | None = None
    jensen_slack_min: float = np.inf
    simplex_ok: bool = True

    @property
    def steps(self) -> int:
        return self.sq_err.shape[0]

    def mse_at_horizon(self, h: int, start: int = 0) -> float:
        """Mean squared error at future frame ``h`` (1-based) over steps >= start."""
        return float(self.sq_err[start:, :, h - 1].mean())


def series_from_run(run: SimRun) -> SeriesTable:
    F, N, d = run.frames.shape
    return SeriesTable(run.frames.reshape(F, N * d), N, d)


def _simplex_ok(w: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all(np.abs(w.sum(axis=1) - 1.0) <= tol) and np.all(w > 0) and np.all(w <= 1.0))


def run_online(
    config: EngineConfig,
    table: SeriesTable,
    max_steps: int | None = None,
    normalize: str = "none",
    normalize_scale: float = 1.0,
    metrics_in_raw_units: bool = True,
    snapshot_every: int = 100,
    regret_every: int = 100,
    baseline: str = "none",
    check_invariants: bool = False,
    state: CognnState | None = None,
) -> RunResult:
    """Feed stride-1 windows of ``table`` to a CoGNN one by one, testing then training."""
    stats: ZScoreStats | None = None
    work = table
    if normalize != "none":
        work, stats = zscore_fit_transform(table, normalize, normalize_scale)
    n, d, delta = table.n, table.d, config.window
    windows = sliding_windows(work, delta)
    raw = table.as_agents()
    if max_steps is not None:
        windows = itertools.islice(windows, max_steps)

    state = init_cognn(config) if state is None else state
    ledger = RegretLedger.empty(n)
    sq, ab, ap, eu, closs, starts = [], [], [], [], [], []
    res = RunResult(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
    for step, (inp, tgt) in enumerate(windows):
        if baseline == "zerov":
            pred = np.repeat(inp.data[:, -1:], delta, axis=1)
            closs.append([np.mean((pred - tgt.data) ** 2)])
        else:
            state, m = cognn_online_step(state, inp, tgt)
            pred = m.prediction
            closs.append(m.copu_losses.mean(axis=1))
            info = m.last
            ledger = record_step(ledger, info.bounded, info.theta_norm, info.max_pair_grad_norm, info.weights_used)
            if check_invariants:
                for unit_info in m.infos:
                    upper = np.sum(unit_info.weights_used * unit_info.losses.per_pair, axis=1)
                    slack = float(np.min(upper - unit_info.losses.per_agent_ensemble))
                    res.jensen_slack_min = min(res.jensen_slack_min, slack)
                for unit in state.copus:
                    res.simplex_ok &= _simplex_ok(unit.graph.normalized)
            t = step + 1
            if snapshot_every and t % snapshot_every == 0:
                res.snapshots.append((t, [u.graph.normalized for u in state.copus]))
            if regret_every and t % regret_every == 0:
                regs = np.array([static_regret(ledger, p) for p in range(n)])
                res.regret_rows.append((t, regs, theoretical_bound(ledger, config.eta, n)))
        if stats is not None and metrics_in_raw_units:
            pred = stats.inverse_clip(pred, n, d)
            truth = raw[:, tgt.start_time : tgt.start_time + delta]
        else:
            truth = tgt.data
        err = pred - truth
        sq.append(np.mean(err**2, axis=-1))
        ab.append(np.mean(np.abs(err), axis=-1))
        ap.append(np.mean(np.abs(err) / np.maximum(np.abs(truth), 1e-3), axis=-1))
        eu.append(np.linalg.norm(err, axis=-1))
        starts.append(inp.start_time)
    res.sq_err = np.array(sq)
    res.abs_err = np.array(ab)
    res.ape = np.array(ap)
    res.euclid = np.array(eu)
    res.copu_loss = np.array(closs)
    res.ledger = ledger
    res.state = state
    res.start_times = np.array(starts)
    return res


def simulate_table(schedule: SimSchedule, run_index: int, seed: int) -> tuple[SeriesTable, SimRun]:
    run = simulate_run(schedule, seed + run_index)
    return series_from_run(run), run


def regret_curve(result: RunResult) -> list[tuple[int, float, float]]:
    """(T, mean regret over agents, bound) per logged step."""
    return [(t, float(np.mean(r)), b) for t, r, b in result.regret_rows]


__all__ = ["RunResult", "run_online", "simulate_table", "series_from_run", "regret_curve", "mean_static_regret"]
