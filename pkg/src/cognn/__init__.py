"""Online multi-agent forecasting with collaborative prediction units and learned interaction graphs."""

from .copu import CopuOutput, CopuState, copu_forward, copu_update, graph_simplex_ok, init_copu, pair_losses
from .core import (
    ClipBatch,
    CognnError,
    CollaborativeGraph,
    ConfigError,
    DataError,
    DimensionError,
    DomainError,
    EmptyLedgerError,
    EngineConfig,
    GraphMode,
    LossMatrix,
    NumericalError,
    PredictorKind,
    ThetaGrad,
    new_uniform_graph,
    normalize_rows,
)
from .network import CognnState, cognn_forward, cognn_online_step, init_cognn
from .regret import RegretLedger, best_pair_in_hindsight, record_step, static_regret, theoretical_bound
from .simulator import SimSchedule, generate_stream, simulate_run

__version__ = "0.1.0"
