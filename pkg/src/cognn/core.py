"""Shared value types: clips, collaborative graphs, engine configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

WEIGHT_FLOOR = 1e-12


class CognnError(Exception):
    """Base class for engine errors."""


class DimensionError(CognnError, ValueError):
    pass


class DomainError(CognnError, ValueError):
    pass


class ConfigError(CognnError, ValueError):
    pass


class DataError(CognnError, ValueError):
    pass


class NumericalError(CognnError, ArithmeticError):
    """Raised when a state or loss stops being finite.

    ``step`` carries the online step index (or integrator ``dt`` for the
    simulator) so the failure can be located in a long run.
    """

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class EmptyLedgerError(CognnError, LookupError):
    pass


class PredictorKind(str, enum.Enum):
    LINEAR_AR = "linear_ar"
    TEMPORAL_CONV = "temporal_conv"


class GraphMode(str, enum.Enum):
    LEARNED = "learned"
    FROZEN_UNIFORM = "frozen_uniform"
    E2E = "e2e"


class ThetaGrad(str, enum.Enum):
    WEIGHTED_SUM = "weighted_sum"
    PER_PAIR_SWEEP = "per_pair_sweep"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ClipBatch:
    """Measurements of all agents over one window, shape (N, delta, d)."""

    data: np.ndarray
    start_time: int = 0

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DimensionError(f"clip must have shape (N, delta, d) with all dims >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DomainError("clip contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def num_agents(self) -> int:
        return self.data.shape[0]

    @property
    def window(self) -> int:
        return self.data.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.data.shape[2]


def normalize_rows(weights: np.ndarray) -> np.ndarray:
    """Divide every row by its sum. Entries must be strictly positive and finite."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise DomainError("weights must be strictly positive and finite")
    return w / w.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class CollaborativeGraph:
    weights: np.ndarray
    normalized: np.ndarray = field(default=None)

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"graph must be square, got {w.shape}")
        norm = self.normalized
        norm = _frozen(normalize_rows(w) if norm is None else norm)
        if norm.shape != w.shape:
            raise DimensionError("normalized view does not match raw weights")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "normalized", norm)

    @classmethod
    def from_weights(cls, weights: np.ndarray) -> "CollaborativeGraph":
        return cls(weights=weights, normalized=normalize_rows(weights))

    @property
    def num_agents(self) -> int:
        return self.weights.shape[0]


def new_uniform_graph(n: int) -> CollaborativeGraph:
    if n < 1:
        raise DimensionError(f"agent count must be >= 1, got {n}")
    w = np.full((n, n), 1.0 / n)
    return CollaborativeGraph(weights=w, normalized=w.copy())


@dataclass(frozen=True)
class LossMatrix:
    per_pair: np.ndarray
    per_agent_ensemble: np.ndarray

    def __post_init__(self):
        pp = _frozen(self.per_pair)
        pe = _frozen(self.per_agent_ensemble)
        for a in (pp, pe):
            if not np.all(np.isfinite(a)):
                raise NumericalError("loss is not finite")
            if np.any(a < 0):
                raise DomainError("losses must be nonnegative")
        if pp.ndim != 2 or pp.shape[0] != pp.shape[1] or pe.shape != (pp.shape[0],):
            raise DimensionError("per_pair must be NxN and per_agent_ensemble length N")
        object.__setattr__(self, "per_pair", pp)
        object.__setattr__(self, "per_agent_ensemble", pe)


@dataclass(frozen=True)
class EngineConfig:
    eta: float = 0.05
    num_agents: int = 20
    window: int = 10
    feature_dim: int = 2
    predictor_kind: PredictorKind = PredictorKind.LINEAR_AR
    ar_order: int = 10
    hidden_dim: int = 64
    kernel_size: int = 3
    num_copus: int = 2
    grad_clip: float = 10.0
    loss_scale: float = 1.0
    init_scale: float = 1.0
    graph_mode: GraphMode = GraphMode.LEARNED
    theta_grad: ThetaGrad = ThetaGrad.WEIGHTED_SUM
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "predictor_kind", PredictorKind(self.predictor_kind))
        object.__setattr__(self, "graph_mode", GraphMode(self.graph_mode))
        object.__setattr__(self, "theta_grad", ThetaGrad(self.theta_grad))
        if not 0.0 < self.eta < 1.0:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta}")
        for name in ("num_agents", "window", "feature_dim", "ar_order", "hidden_dim", "kernel_size", "num_copus"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd for same-length padding")
        if self.grad_clip <= 0 or self.loss_scale <= 0 or self.init_scale < 0:
            raise ConfigError("grad_clip and loss_scale must be positive, init_scale nonnegative")

    @property
    def pair_features(self) -> int:
        """Per-frame width of a pair state for the configured combiner."""
        if self.predictor_kind is PredictorKind.LINEAR_AR:
            return (self.ar_order + 1) * self.feature_dim
        return 2 * self.feature_dim
