"""Property-based checks of the algebraic invariants."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cognn.copu import CopuState, copu_forward, init_copu, multiplicative_step, pair_losses
from cognn.core import ClipBatch, CollaborativeGraph, EngineConfig, normalize_rows
from cognn.dataio import SeriesTable, load_csv_series, num_windows, write_csv_series
from cognn.predictors import bounded_loss, combine_ar

positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)
finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


def matrices(elements, max_n=6):
    return st.integers(1, max_n).flatmap(lambda n: arrays(np.float64, (n, n), elements=elements))


@given(matrices(positive))
def test_normalize_idempotent(w):
    once = normalize_rows(w)
    assert np.allclose(normalize_rows(once), once, rtol=0, atol=1e-12)


@given(matrices(positive), st.floats(min_value=1e-3, max_value=1e3))
def test_normalize_scale_invariant(w, c):
    assert np.allclose(normalize_rows(c * w), normalize_rows(w), rtol=0, atol=1e-12)


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1e-6, 1e3))
def test_bounded_loss_monotone_and_capped(a, b, scale):
    lo, hi = sorted((a, b))
    assert bounded_loss(lo, scale) <= bounded_loss(hi, scale) <= 1.0


@given(
    st.integers(2, 6).flatmap(
        lambda n: st.tuples(
            arrays(np.float64, (n, n), elements=st.floats(1e-3, 1.0)),
            arrays(np.float64, (n, n), elements=st.floats(0.0, 1.0)),
        )
    ),
    st.floats(1e-4, 0.999),
)
def test_weight_step_stays_on_simplex(wl, eta):
    w, losses = wl
    g = multiplicative_step(normalize_rows(w), losses, eta)
    assert np.all(np.abs(g.normalized.sum(axis=1) - 1.0) <= 1e-9)
    assert np.all(g.normalized > 0) and np.all(g.normalized <= 1.0)


@given(
    arrays(np.float64, (4,), elements=st.floats(1e-3, 1.0)),
    arrays(np.float64, (4,), elements=st.floats(0.0, 1.0)),
    st.floats(0.01, 0.99),
)
def test_lower_loss_gains_relative_weight(w, losses, eta):
    a, b = int(np.argmin(losses)), int(np.argmax(losses))
    assume(losses[b] - losses[a] > 1e-6)
    wbar = normalize_rows(np.tile(w, (4, 1)))
    new = multiplicative_step(wbar, np.tile(losses, (4, 1)), eta).normalized
    assert new[0, a] / new[0, b] > wbar[0, a] / wbar[0, b]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 3))
def test_aggregate_loss_below_weighted_pair_losses(seed, n, order):
    cfg = EngineConfig(num_agents=n, window=3, feature_dim=2, ar_order=order, seed=seed)
    rng = np.random.default_rng(seed)
    st_ = init_copu(cfg)
    st_ = CopuState(CollaborativeGraph.from_weights(rng.random((n, n)) + 1e-3), st_.theta, cfg)
    out = copu_forward(st_, ClipBatch(rng.normal(size=(n, 3, 2))))
    lm = pair_losses(out, ClipBatch(rng.normal(size=(n, 3, 2))))
    upper = np.sum(st_.graph.normalized * lm.per_pair, axis=1)
    assert np.all(lm.per_agent_ensemble <= upper + 1e-9)


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 3)), elements=finite), st.data())
def test_first_order_combiner_is_difference(xp, data):
    xq = data.draw(arrays(np.float64, xp.shape, elements=finite))
    assert np.array_equal(combine_ar(xp, xq, 1), np.hstack([xp, xq - xp]))


@given(st.integers(1, 12), st.integers(0, 50))
def test_window_count_formula(delta, extra):
    t = SeriesTable(np.zeros((2 * delta + extra, 1)), 1, 1)
    assert num_windows(t, delta) == extra + 1


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 3), st.integers(1, 2)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_clip_csv_round_trip_is_bit_exact(tmp_path_factory, clip):
    n, delta, d = clip.shape
    table = SeriesTable(clip.transpose(1, 0, 2).reshape(delta, n * d), n, d)
    path = tmp_path_factory.mktemp("rt") / "c.csv"
    write_csv_series(path, table)
    back = load_csv_series(path, n, d).as_agents()
    assert np.array_equal(back, clip)
