"""Static regret against the best single collaborative pair, and the closed-form bound."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import DomainError, EmptyLedgerError, LossMatrix


@dataclass(frozen=True)
class RegretLedger:
    """Running sums of bounded losses for one stream.

    ``cumulative_weighted_loss[p]`` is sum_t sum_q wbar_t[p, q] * L_t[p, q], the
    left-hand side quantity of the ensemble-vs-fixed-pair inequality.
    """

    cumulative_pair_loss: np.ndarray
    cumulative_ensemble_loss: np.ndarray
    cumulative_weighted_loss: np.ndarray
    history_len: int = 0
    measured_C_theta: float = 0.0
    measured_L: float = 0.0

    @classmethod
    def empty(cls, n: int) -> "RegretLedger":
        return cls(np.zeros((n, n)), np.zeros(n), np.zeros(n))

    @property
    def n(self) -> int:
        return self.cumulative_ensemble_loss.shape[0]


def record_step(
    ledger: RegretLedger,
    pair_losses: LossMatrix,
    theta_norm: float,
    grad_norm: float,
    weights: np.ndarray | None = None,
) -> RegretLedger:
    """Advance every accumulator by one step of bounded losses."""
    pp, pe = pair_losses.per_pair, pair_losses.per_agent_ensemble
    if np.any(pp < 0) or np.any(pe < 0):
        raise DomainError("losses must be nonnegative")
    if weights is None:
        weights = np.full(pp.shape, 1.0 / pp.shape[1])
    return replace(
        ledger,
        cumulative_pair_loss=ledger.cumulative_pair_loss + pp,
        cumulative_ensemble_loss=ledger.cumulative_ensemble_loss + pe,
        cumulative_weighted_loss=ledger.cumulative_weighted_loss + np.sum(weights * pp, axis=1),
        history_len=ledger.history_len + 1,
        measured_C_theta=max(ledger.measured_C_theta, float(theta_norm)),
        measured_L=max(ledger.measured_L, float(grad_norm)),
    )


def _need_history(ledger: RegretLedger):
    if ledger.history_len < 1:
        raise EmptyLedgerError("regret ledger has no recorded steps")


def best_pair_in_hindsight(ledger: RegretLedger, p: int) -> tuple[int, float]:
    _need_history(ledger)
    row = ledger.cumulative_pair_loss[p]
    q = int(np.argmin(row))  # first minimum, so ties go to the smallest index
    return q, float(row[q])


def static_regret(ledger: RegretLedger, p: int) -> float:
    _need_history(ledger)
    _, best = best_pair_in_hindsight(ledger, p)
    return (float(ledger.cumulative_ensemble_loss[p]) - best) / ledger.history_len


def mean_static_regret(ledger: RegretLedger) -> float:
    return float(np.mean([static_regret(ledger, p) for p in range(ledger.n)]))


def theoretical_bound(ledger: RegretLedger, eta: float, n: float) -> float:
    """log N/(eta T) + C^2/(2 eta T) + eta L^2/2 + eta, with measured C and L."""
    _need_history(ledger)
    if not 0.0 < eta < 1.0:
        raise DomainError("eta must lie in (0, 1)")
    T = ledger.history_len
    C, L = ledger.measured_C_theta, ledger.measured_L
    return float(np.log(n) / (eta * T) + C**2 / (2 * eta * T) + eta * L**2 / 2 + eta)


def weighted_gap(ledger: RegretLedger) -> np.ndarray:
    """(1/T) * (weighted ensemble loss - loss of each fixed pair), shape (N, N)."""
    _need_history(ledger)
    return (ledger.cumulative_weighted_loss[:, None] - ledger.cumulative_pair_loss) / ledger.history_len


def ensemble_gap_bound(ledger: RegretLedger, eta: float) -> float:
    """eta + log N / (eta T): the distribution-free cap on ``weighted_gap``."""
    _need_history(ledger)
    return float(eta + np.log(ledger.n) / (eta * ledger.history_len))


def replay_pair_losses(copu_state, stream, loss_scale: float | None = None) -> np.ndarray:
    """Re-score stored (input, target) clips with a fixed CoPU; returns summed bounded pair losses.

    This is the hindsight baseline evaluated with final parameters instead of
    the online trajectory; weights of ``copu_state`` are irrelevant here.
    """
    from .copu import copu_forward, pair_losses
    from .predictors import bounded_loss

    scale = copu_state.config.loss_scale if loss_scale is None else loss_scale
    total = None
    for inp, tgt in stream:
        out = copu_forward(copu_state, inp)
        b = bounded_loss(pair_losses(out, tgt).per_pair, scale)
        total = b if total is None else total + b
    if total is None:
        raise EmptyLedgerError("empty replay stream")
    return total
