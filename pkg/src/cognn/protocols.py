"""Fixed experiment protocols shared by the scripts and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import EngineConfig, GraphMode
from .experiment import run_online, simulate_table
from .scoring import edge_auc
from .simulator import SimSchedule


@dataclass(frozen=True)
class AblationProtocol:
    """Learned vs frozen graph, and one vs two units, on seeded spring runs."""

    runs: int = 10
    steps: int = 3000
    horizon: int = 10
    seed: int = 0
    normalize_scale: float = 0.2
    engine: EngineConfig = field(default_factory=lambda: EngineConfig(eta=0.2, loss_scale=0.01))
    schedule: SimSchedule = field(default_factory=SimSchedule)

    def variants(self) -> dict[str, EngineConfig]:
        e = self.engine
        return {
            "learned_k2": replace(e, num_copus=2, graph_mode=GraphMode.LEARNED),
            "frozen_k2": replace(e, num_copus=2, graph_mode=GraphMode.FROZEN_UNIFORM),
            "learned_k1": replace(e, num_copus=1, graph_mode=GraphMode.LEARNED),
        }


def run_ablation(protocol: AblationProtocol, progress=None) -> dict[str, np.ndarray]:
    """Per-run MSE at ``protocol.horizon`` (raw units) for every variant."""
    out = {name: [] for name in protocol.variants()}
    for r in range(protocol.runs):
        table, _ = simulate_table(protocol.schedule, r, protocol.seed)
        for name, cfg in protocol.variants().items():
            res = run_online(
                replace(cfg, seed=protocol.seed + r),
                table,
                max_steps=protocol.steps,
                normalize="global",
                normalize_scale=protocol.normalize_scale,
                snapshot_every=0,
                regret_every=0,
            )
            out[name].append(res.mse_at_horizon(protocol.horizon))
            if progress:
                progress(r, name, out[name][-1])
    return {k: np.array(v) for k, v in out.items()}


@dataclass(frozen=True)
class RecoveryProtocol:
    """Ranking agreement of learned weights with the active spring graph."""

    runs: int = 3
    steps: int = 4981
    seed: int = 0
    score_after: int = 200
    snapshot_every: int = 10
    copu: int = -1
    normalize_scale: float = 0.2
    engine: EngineConfig = field(default_factory=lambda: EngineConfig(eta=0.2, loss_scale=0.01))
    schedule: SimSchedule = field(default_factory=SimSchedule)


def run_recovery(protocol: RecoveryProtocol) -> list[float]:
    """Mean AUC per (run, segment) over snapshots at least ``score_after`` frames into the segment."""
    fps = protocol.schedule.frames_per_segment
    seg_scores = []
    for r in range(protocol.runs):
        table, run = simulate_table(protocol.schedule, r, protocol.seed)
        res = run_online(
            replace(protocol.engine, seed=protocol.seed + r),
            table,
            max_steps=protocol.steps,
            normalize="global",
            normalize_scale=protocol.normalize_scale,
            snapshot_every=protocol.snapshot_every,
            regret_every=0,
        )
        by_seg: dict[int, list[float]] = {}
        for t, mats in res.snapshots:
            frame = t - 1
            seg = run.segment_of_frame(frame)
            if frame - seg * fps >= protocol.score_after:
                by_seg.setdefault(seg, []).append(edge_auc(mats[protocol.copu], run.adjacencies[seg]))
        seg_scores.extend(float(np.nanmean(v)) for v in by_seg.values())
    return seg_scores
