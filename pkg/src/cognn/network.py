"""Cascade of K CoPUs, each residual and each trained against the true future clip."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .copu import CopuOutput, CopuState, UpdateInfo, _update, copu_forward, init_copu
from .core import ClipBatch, ConfigError, EngineConfig


@dataclass(frozen=True)
class CognnState:
    copus: tuple[CopuState, ...]
    config: EngineConfig

    def __post_init__(self):
        object.__setattr__(self, "copus", tuple(self.copus))
        if len(self.copus) < 1:
            raise ConfigError("a CoGNN needs at least one CoPU")

    @property
    def step_count(self) -> int:
        return self.copus[-1].step_count


def init_cognn(config: EngineConfig, zero: bool = False) -> CognnState:
    seeds = np.random.SeedSequence(config.seed).spawn(config.num_copus)
    copus = [init_copu(config, np.random.default_rng(s), zero=zero) for s in seeds]
    return CognnState(tuple(copus), config)


@dataclass(frozen=True)
class StepMetrics:
    step: int
    prediction: np.ndarray  # final forecast (N, delta, d)
    final_loss: np.ndarray  # per-agent l2 loss of the final forecast
    copu_losses: np.ndarray  # (K, N) per-CoPU aggregate losses
    last: UpdateInfo  # pair/ensemble losses and norms of the last CoPU
    infos: tuple[UpdateInfo, ...] = ()  # one per CoPU, in stack order


def _forward_all(state: CognnState, clip: ClipBatch) -> list[CopuOutput]:
    outs = []
    current = clip
    for unit in state.copus:
        out = copu_forward(unit, current)
        outs.append(out)
        current = out.prediction
    return outs


def cognn_forward(state: CognnState, clip: ClipBatch) -> tuple[ClipBatch, list[ClipBatch]]:
    outs = _forward_all(state, clip)
    inter = [o.prediction for o in outs]
    return inter[-1], inter


def cognn_online_step(state: CognnState, clip: ClipBatch, target: ClipBatch) -> tuple[CognnState, StepMetrics]:
    outs = _forward_all(state, clip)
    new_units, infos = [], []
    for unit, out in zip(state.copus, outs):
        u, info = _update(unit, out, target)
        new_units.append(u)
        infos.append(info)
    metrics = StepMetrics(
        step=state.step_count,
        prediction=outs[-1].prediction.data,
        final_loss=infos[-1].losses.per_agent_ensemble,
        copu_losses=np.stack([i.losses.per_agent_ensemble for i in infos]),
        last=infos[-1],
        infos=tuple(infos),
    )
    return CognnState(tuple(new_units), state.config), metrics
