"""One collaborative prediction unit.

Forward: every ordered pair (p, q) gets a pair state, the shared predictor
turns it into a displacement for agent p, and agent p's forecast is its own
input clip plus the graph-weighted mean of its N pair displacements.

Update: theta takes a clipped OGD step on the weighted pair losses; the
graph takes a multiplicative exponentiated step on the bounded pair losses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    WEIGHT_FLOOR,
    ClipBatch,
    CollaborativeGraph,
    DimensionError,
    EngineConfig,
    GraphMode,
    LossMatrix,
    NumericalError,
    ThetaGrad,
    new_uniform_graph,
    normalize_rows,
)
from .predictors import (
    ParamVector,
    bounded_loss,
    combine_all,
    grad_theta_with_norms,
    init_params,
    loss_mse,
    predict,
    predictor_shape,
    zero_params,
)


@dataclass(frozen=True)
class CopuState:
    graph: CollaborativeGraph
    theta: ParamVector
    config: EngineConfig
    step_count: int = 0

    def __post_init__(self):
        if self.graph.num_agents != self.config.num_agents:
            raise DimensionError("graph size does not match num_agents")
        if self.theta.meta != predictor_shape(self.config):
            raise DimensionError("theta does not match the configured predictor")


def init_copu(config: EngineConfig, rng: np.random.Generator | None = None, zero: bool = False) -> CopuState:
    meta = predictor_shape(config)
    if zero:
        theta = zero_params(meta)
    else:
        rng = np.random.default_rng(config.seed) if rng is None else rng
        theta = init_params(meta, rng, config.init_scale)
    return CopuState(new_uniform_graph(config.num_agents), theta, config)


@dataclass(frozen=True)
class CopuOutput:
    prediction: ClipBatch
    per_pair_predictions: np.ndarray  # (N, N, delta, d) displacements, residual not added
    pair_losses: LossMatrix | None = None
    input_clip: ClipBatch | None = None
    pair_states: np.ndarray | None = None


@dataclass(frozen=True)
class UpdateInfo:
    """Loss and norm bookkeeping from one copu_update."""

    losses: LossMatrix  # raw l2 losses
    bounded: LossMatrix  # same, mapped through bounded_loss
    weights_used: np.ndarray  # normalized weights that produced this step's forecast
    theta_norm: float  # ||theta_t|| before the step
    grad_norm: float  # aggregated gradient norm, pre-clipping
    max_pair_grad_norm: float  # max over pairs of ||grad of the bounded pair loss||


def _check_clip(config: EngineConfig, clip: ClipBatch, what: str):
    want = (config.num_agents, config.window, config.feature_dim)
    if clip.data.shape != want:
        raise DimensionError(f"{what} has shape {clip.data.shape}, expected {want}")


def copu_forward(state: CopuState, clip: ClipBatch) -> CopuOutput:
    cfg = state.config
    _check_clip(cfg, clip, "input clip")
    x = clip.data
    states = combine_all(x, cfg.predictor_kind, cfg.ar_order)
    disp = predict(state.theta, states)
    if not np.all(np.isfinite(disp)):
        raise NumericalError("non-finite pair prediction", step=state.step_count)
    agg = np.einsum("pq,pqtd->ptd", state.graph.normalized, disp)
    pred = x + agg
    if not np.all(np.isfinite(pred)):
        raise NumericalError("non-finite prediction", step=state.step_count)
    return CopuOutput(
        prediction=ClipBatch(pred, clip.start_time),
        per_pair_predictions=disp,
        input_clip=clip,
        pair_states=states,
    )


def pair_losses(output: CopuOutput, target: ClipBatch) -> LossMatrix:
    """Raw l2 losses of residual-adjusted pair forecasts and of the aggregate."""
    x = output.input_clip.data
    y = target.data
    per_pair = loss_mse(x[:, None] + output.per_pair_predictions, y[:, None])
    ens = loss_mse(output.prediction.data, y)
    return LossMatrix(np.atleast_2d(per_pair), np.atleast_1d(ens))


def multiplicative_step(wbar: np.ndarray, bounded: np.ndarray, eta: float) -> CollaborativeGraph:
    """wbar * exp(-eta * bounded), floored at WEIGHT_FLOOR, then row-normalized."""
    raw = np.asarray(wbar) * np.exp(-eta * np.asarray(bounded))
    return CollaborativeGraph.from_weights(np.maximum(raw, WEIGHT_FLOOR))


def _clip_grad(g: np.ndarray, limit: float) -> np.ndarray:
    return np.clip(g, -limit, limit)


def _update(state: CopuState, output: CopuOutput, target: ClipBatch) -> tuple[CopuState, UpdateInfo]:
    cfg = state.config
    _check_clip(cfg, target, "target clip")
    if output.input_clip is None or output.pair_states is None:
        raise DimensionError("output was not produced by copu_forward")
    n, eta = cfg.num_agents, cfg.eta
    x = output.input_clip.data
    wbar = state.graph.normalized

    losses = pair_losses(output, target)
    if not (np.all(np.isfinite(losses.per_pair)) and np.all(np.isfinite(losses.per_agent_ensemble))):
        raise NumericalError("non-finite loss", step=state.step_count)
    b_pair = bounded_loss(losses.per_pair, cfg.loss_scale)
    b_ens = bounded_loss(losses.per_agent_ensemble, cfg.loss_scale)

    # theta step on the weighted pair losses; pair target is the displacement target[p] - x[p]
    states = output.pair_states.reshape((n * n,) + output.pair_states.shape[2:])
    disp_target = np.broadcast_to((target.data - x)[:, None], (n, n) + x.shape[1:]).reshape(
        (n * n,) + x.shape[1:]
    )
    theta = state.theta
    g, pair_norms = grad_theta_with_norms(theta, states, disp_target, wbar.ravel())
    if not np.all(np.isfinite(g.values)):
        raise NumericalError("non-finite gradient", step=state.step_count)
    grad_norm = float(np.linalg.norm(g.values))
    unsaturated = (losses.per_pair.ravel() < cfg.loss_scale)
    max_pair = float(np.max(pair_norms * unsaturated, initial=0.0)) / cfg.loss_scale

    if cfg.theta_grad is ThetaGrad.WEIGHTED_SUM:
        new_theta = theta.values - eta * _clip_grad(g.values, cfg.grad_clip)
    else:
        vals = theta.values.copy()
        w_flat = wbar.ravel()
        for i in range(n * n):
            gi, _ = grad_theta_with_norms(
                theta.replace(vals), states[i], disp_target[i], want_norms=False
            )
            vals = vals - eta * _clip_grad(w_flat[i] * gi.values, cfg.grad_clip)
        new_theta = vals
    if not np.all(np.isfinite(new_theta)):
        raise NumericalError("non-finite parameters", step=state.step_count)

    # graph step
    if cfg.graph_mode is GraphMode.LEARNED:
        graph = multiplicative_step(wbar, b_pair, eta)
    elif cfg.graph_mode is GraphMode.E2E:
        # gradient of the aggregate loss (not its upper bound) w.r.t. normalized weights
        delta, d = x.shape[1:]
        resid = output.prediction.data - target.data
        gw = (2.0 / (delta * d)) * np.einsum("ptd,pqtd->pq", resid, output.per_pair_predictions)
        raw = wbar - eta * _clip_grad(gw, cfg.grad_clip)
        graph = CollaborativeGraph.from_weights(np.maximum(raw, WEIGHT_FLOOR))
    else:
        graph = state.graph

    info = UpdateInfo(
        losses=losses,
        bounded=LossMatrix(np.atleast_2d(b_pair), np.atleast_1d(b_ens)),
        weights_used=wbar,
        theta_norm=float(np.linalg.norm(theta.values)),
        grad_norm=grad_norm,
        max_pair_grad_norm=max_pair,
    )
    new_state = replace(state, graph=graph, theta=theta.replace(new_theta), step_count=state.step_count + 1)
    return new_state, info


def copu_update(state: CopuState, output: CopuOutput, target: ClipBatch) -> CopuState:
    return _update(state, output, target)[0]


def graph_simplex_ok(graph: CollaborativeGraph, tol: float = 1e-9) -> bool:
    w = graph.normalized
    return bool(
        np.all(np.abs(w.sum(axis=1) - 1.0) <= tol) and np.all(w > 0) and np.all(w <= 1.0)
    )


__all__ = [
    "CopuState",
    "CopuOutput",
    "UpdateInfo",
    "init_copu",
    "copu_forward",
    "copu_update",
    "multiplicative_step",
    "pair_losses",
    "graph_simplex_ok",
    "normalize_rows",
]
