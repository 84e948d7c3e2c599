"""Pair-state combiners and the shared collaborative predictor.

Every function accepts leading batch axes: a pair state has shape
``(..., delta, d_in)`` and predictions ``(..., delta, d_out)``. The engine
stacks all N*N pairs into one batch, so nothing here loops over pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError, DomainError, PredictorKind


@dataclass(frozen=True)
class PredictorShape:
    kind: PredictorKind
    window: int
    in_features: int
    out_features: int
    hidden: int = 0
    kernel: int = 1

    @property
    def size(self) -> int:
        if self.kind is PredictorKind.LINEAR_AR:
            n_in = self.window * self.in_features
            n_out = self.window * self.out_features
            return n_out * n_in + n_out
        h, k = self.hidden, self.kernel
        return h * self.in_features * k + h + self.out_features * h * k + self.out_features

    def fan_ins(self) -> list[int]:
        """Fan-in of each parameter block, in storage order."""
        if self.kind is PredictorKind.LINEAR_AR:
            return [self.window * self.in_features] * 2
        return [self.in_features * self.kernel] * 2 + [self.hidden * self.kernel] * 2

    def block_sizes(self) -> list[int]:
        if self.kind is PredictorKind.LINEAR_AR:
            n_in = self.window * self.in_features
            n_out = self.window * self.out_features
            return [n_out * n_in, n_out]
        h, k, c, o = self.hidden, self.kernel, self.in_features, self.out_features
        return [h * c * k, h, o * h * k, o]


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    meta: PredictorShape

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size != self.meta.size:
            raise DimensionError(f"parameter vector has {v.size} entries, shape needs {self.meta.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def blocks(self) -> list[np.ndarray]:
        out, i = [], 0
        for n in self.meta.block_sizes():
            out.append(self.values[i : i + n])
            i += n
        return out

    def replace(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values, self.meta)


def predictor_shape(config) -> PredictorShape:
    return PredictorShape(
        kind=config.predictor_kind,
        window=config.window,
        in_features=config.pair_features,
        out_features=config.feature_dim,
        hidden=config.hidden_dim if config.predictor_kind is PredictorKind.TEMPORAL_CONV else 0,
        kernel=config.kernel_size if config.predictor_kind is PredictorKind.TEMPORAL_CONV else 1,
    )


def init_params(meta: PredictorShape, rng: np.random.Generator, scale: float = 1.0) -> ParamVector:
    """Uniform U(-a, a) per block with a = scale / sqrt(fan_in)."""
    parts = [
        rng.uniform(-1.0, 1.0, size=n) * (scale / np.sqrt(fan))
        for n, fan in zip(meta.block_sizes(), meta.fan_ins())
    ]
    return ParamVector(np.concatenate(parts), meta)


def zero_params(meta: PredictorShape) -> ParamVector:
    return ParamVector(np.zeros(meta.size), meta)


# -- combiners -------------------------------------------------------------


def _check_pair(x_p, x_q):
    x_p = np.asarray(x_p, dtype=np.float64)
    x_q = np.asarray(x_q, dtype=np.float64)
    if x_p.shape[-2:] != x_q.shape[-2:]:
        raise DimensionError(f"agent clips differ in shape: {x_p.shape} vs {x_q.shape}")
    return np.broadcast_arrays(x_p, x_q)


def combine_ar(x_p, x_q, order: int) -> np.ndarray:
    """[x_p, dx, dx**2, ..., dx**order] with dx = x_q - x_p (elementwise powers)."""
    if order < 1:
        raise DimensionError("difference order must be >= 1")
    x_p, x_q = _check_pair(x_p, x_q)
    diff = x_q - x_p
    blocks = [x_p]
    power = diff
    for _ in range(order):
        blocks.append(power)
        power = power * diff
    return np.concatenate(blocks, axis=-1)


def combine_concat(x_p, x_q) -> np.ndarray:
    x_p, x_q = _check_pair(x_p, x_q)
    return np.concatenate([x_p, x_q], axis=-1)


def combine_all(clip: np.ndarray, kind: PredictorKind, order: int) -> np.ndarray:
    """Pair states for every ordered pair: result[p, q] = f_cb(clip[p], clip[q])."""
    x_p = clip[:, None]
    x_q = clip[None, :]
    if kind is PredictorKind.LINEAR_AR:
        return combine_ar(x_p, x_q, order)
    return combine_concat(x_p, x_q)


# -- forward passes --------------------------------------------------------


def _check_state(theta: ParamVector, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64)
    m = theta.meta
    if state.ndim < 2 or state.shape[-2:] != (m.window, m.in_features):
        raise DimensionError(
            f"pair state shape {state.shape[-2:]} does not match predictor ({m.window}, {m.in_features})"
        )
    return state


def _linear_ab(theta: ParamVector):
    m = theta.meta
    a, b = theta.blocks()
    return a.reshape(m.window * m.out_features, m.window * m.in_features), b


def predict_linear(theta: ParamVector, state) -> np.ndarray:
    if theta.meta.kind is not PredictorKind.LINEAR_AR:
        raise DimensionError("parameters are not for the linear predictor")
    state = _check_state(theta, state)
    m = theta.meta
    A, b = _linear_ab(theta)
    flat = state.reshape(state.shape[:-2] + (-1,))
    y = flat @ A.T + b
    return y.reshape(state.shape[:-2] + (m.window, m.out_features))


def _conv_blocks(theta: ParamVector):
    m = theta.meta
    w1, b1, w2, b2 = theta.blocks()
    return (
        w1.reshape(m.hidden, m.in_features * m.kernel),
        b1,
        w2.reshape(m.out_features, m.hidden * m.kernel),
        b2,
    )


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, T, C) -> (B, T, C*k) with column c*k + j = x[t + j - k//2, c], zero padded."""
    pad = k // 2
    B, T, C = x.shape
    xp = np.zeros((B, T + 2 * pad, C))
    xp[:, pad : pad + T] = x
    cols = np.stack([xp[:, j : j + T] for j in range(k)], axis=-1)  # B, T, C, k
    return cols.reshape(B, T, C * k)


def _col2im(cols: np.ndarray, k: int, channels: int) -> np.ndarray:
    """Adjoint of ``_im2col``."""
    pad = k // 2
    B, T, _ = cols.shape
    c4 = cols.reshape(B, T, channels, k)
    out = np.zeros((B, T + 2 * pad, channels))
    for j in range(k):
        out[:, j : j + T] += c4[..., j]
    return out[:, pad : pad + T]


def _tc_forward(theta: ParamVector, state: np.ndarray):
    m = theta.meta
    W1, b1, W2, b2 = _conv_blocks(theta)
    x = state.reshape((-1, m.window, m.in_features))
    xc = _im2col(x, m.kernel)
    a = np.tanh(xc @ W1.T + b1)
    ac = _im2col(a, m.kernel)
    y = ac @ W2.T + b2
    return y, (xc, a, ac)


def predict_tc(theta: ParamVector, state) -> np.ndarray:
    """conv(k) -> tanh -> conv(k) along time, same-length zero padding."""
    if theta.meta.kind is not PredictorKind.TEMPORAL_CONV:
        raise DimensionError("parameters are not for the temporal-convolution predictor")
    state = _check_state(theta, state)
    y, _ = _tc_forward(theta, state)
    return y.reshape(state.shape[:-2] + y.shape[-2:])


def predict(theta: ParamVector, state) -> np.ndarray:
    if theta.meta.kind is PredictorKind.LINEAR_AR:
        return predict_linear(theta, state)
    return predict_tc(theta, state)


# -- losses ----------------------------------------------------------------


def loss_mse(pred, target) -> np.ndarray | float:
    """Mean squared error over the last two axes (one value per batch entry)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape[-2:] != target.shape[-2:]:
        raise DimensionError(f"prediction {pred.shape} and target {target.shape} differ")
    err = np.mean((pred - target) ** 2, axis=(-2, -1))
    return float(err) if np.ndim(err) == 0 else err


def bounded_loss(raw, loss_scale: float):
    raw_a = np.asarray(raw, dtype=np.float64)
    if np.any(raw_a < 0):
        raise DomainError("raw loss must be nonnegative")
    if loss_scale <= 0:
        raise DomainError("loss_scale must be positive")
    out = np.minimum(raw_a / loss_scale, 1.0)
    return float(out) if out.ndim == 0 else out


# -- gradients -------------------------------------------------------------


def _batch(theta, state, target, weights):
    state = _check_state(theta, state)
    target = np.asarray(target, dtype=np.float64)
    m = theta.meta
    s = state.reshape((-1, m.window, m.in_features))
    t = target.reshape((-1, m.window, m.out_features))
    if s.shape[0] != t.shape[0]:
        raise DimensionError("state and target batch sizes differ")
    w = np.ones(s.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != s.shape[0]:
        raise DimensionError("weights do not match batch size")
    return s, t, w


def grad_theta(theta: ParamVector, state, target, weights=None) -> ParamVector:
    """Analytic gradient of sum_i weights[i] * loss_mse(predict(theta, state[i]), target[i]).

    With no batch axis and no weights this is the plain gradient of one pair loss.
    """
    grad, _ = grad_theta_with_norms(theta, state, target, weights, want_norms=False)
    return grad


def grad_theta_with_norms(theta: ParamVector, state, target, weights=None, want_norms: bool = True):
    """Weighted gradient plus the l2 norm of each unweighted per-sample gradient."""
    s, t, w = _batch(theta, state, target, weights)
    m = theta.meta
    scale = 2.0 / (m.window * m.out_features)
    if m.kind is PredictorKind.LINEAR_AR:
        A, b = _linear_ab(theta)
        flat = s.reshape(s.shape[0], -1)
        r = (flat @ A.T + b) - t.reshape(t.shape[0], -1)
        dy = scale * r  # dL_i/dy_i
        wdy = w[:, None] * dy
        gA = wdy.T @ flat
        gb = wdy.sum(axis=0)
        g = np.concatenate([gA.ravel(), gb])
        norms = None
        if want_norms:
            norms = np.linalg.norm(dy, axis=1) * np.sqrt(np.einsum("ij,ij->i", flat, flat) + 1.0)
        return ParamVector(g, m), norms

    W1, b1, W2, b2 = _conv_blocks(theta)
    y, (xc, a, ac) = _tc_forward(theta, s)
    dy = scale * (y - t)  # B, T, O
    if not want_norms:
        wdy = w[:, None, None] * dy
        gW2 = np.einsum("bto,btk->ok", wdy, ac)
        gb2 = wdy.sum(axis=(0, 1))
        da = _col2im(wdy @ W2, m.kernel, m.hidden)
        dz = da * (1.0 - a * a)
        gW1 = np.einsum("bth,btk->hk", dz, xc)
        gb1 = dz.sum(axis=(0, 1))
        g = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])
        return ParamVector(g, m), None
    # per-sample gradients, then reduce
    pW2 = np.einsum("bto,btk->bok", dy, ac)
    pb2 = dy.sum(axis=1)
    da = _col2im(dy @ W2, m.kernel, m.hidden)
    dz = da * (1.0 - a * a)
    pW1 = np.einsum("bth,btk->bhk", dz, xc)
    pb1 = dz.sum(axis=1)
    per = np.concatenate(
        [pW1.reshape(len(w), -1), pb1, pW2.reshape(len(w), -1), pb2], axis=1
    )
    g = w @ per
    return ParamVector(g, m), np.linalg.norm(per, axis=1)
