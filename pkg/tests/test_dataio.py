import numpy as np
import pytest

from cognn.core import ClipBatch, DataError, DimensionError
from cognn.dataio import (
    SeriesTable,
    load_csv_series,
    metrics,
    num_windows,
    sliding_windows,
    write_csv_series,
    write_rows,
    zscore_fit_transform,
)


def _write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_simple(tmp_path):
    t = load_csv_series(_write(tmp_path, "1,2\n3,4\n5,6\n"), n=2, d=1)
    assert t.values.tolist() == [[1, 2], [3, 4], [5, 6]]
    assert t.as_agents().shape == (2, 3, 1)


def test_missing_cell_rejected_with_location(tmp_path):
    with pytest.raises(DataError, match="row 2, column 1"):
        load_csv_series(_write(tmp_path, "1,2\n3,\n5,6\n"), n=2, d=1)


def test_forward_fill(tmp_path):
    t = load_csv_series(_write(tmp_path, "1,2\n,4\n5,6\n"), n=2, d=1, missing_policy="forward_fill")
    assert t.values[1, 0] == 1.0


def test_forward_fill_first_row_missing(tmp_path):
    with pytest.raises(DataError):
        load_csv_series(_write(tmp_path, ",2\n3,4\n"), n=2, d=1, missing_policy="forward_fill")


def test_parse_and_schema_errors(tmp_path):
    with pytest.raises(DataError, match="row 2, column 0"):
        load_csv_series(_write(tmp_path, "1,2\nabc,4\n"), n=2, d=1)
    with pytest.raises(DataError, match="schema"):
        load_csv_series(_write(tmp_path, "1,2,3\n"), n=2, d=1)


def test_header_skipped(tmp_path):
    t = load_csv_series(_write(tmp_path, "a_x,b_x\n1,2\n"), n=2, d=1, header=True)
    assert t.values.tolist() == [[1, 2]]


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(7, 6)) * 10.0 ** rng.integers(-300, 300, size=(7, 6))
    p = tmp_path / "r.csv"
    write_csv_series(p, SeriesTable(vals, 3, 2))
    assert np.array_equal(load_csv_series(p, 3, 2).values, vals)


def test_agent_major_layout():
    t = SeriesTable(np.arange(12.0).reshape(2, 6), n=3, d=2)
    agents = t.as_agents()
    assert agents[1, 0].tolist() == [2.0, 3.0]
    assert agents[2, 1].tolist() == [10.0, 11.0]


def _table(T, n=2, d=1, seed=0):
    return SeriesTable(np.random.default_rng(seed).normal(size=(T, n * d)), n, d)


def test_window_counts():
    assert len(list(sliding_windows(_table(20), 10))) == 1
    assert len(list(sliding_windows(_table(21), 10))) == 2
    for T in range(20, 71):
        assert len(list(sliding_windows(_table(T), 10))) == num_windows(_table(T), 10) == T - 19


def test_window_too_short():
    with pytest.raises(DataError, match="at least 20"):
        list(sliding_windows(_table(19), 10))


def test_first_window_reassembles_rows():
    t = _table(30, n=3, d=2)
    inp, tgt = next(sliding_windows(t, 5))
    whole = np.concatenate([inp.data, tgt.data], axis=1)
    assert np.array_equal(whole, t.as_agents()[:, :10])
    assert (inp.start_time, tgt.start_time) == (0, 5)


def test_zscore_hand_and_round_trip():
    t = SeriesTable(np.array([[0.0, 5.0], [2.0, 5.0]]), n=2, d=1)
    z, stats = zscore_fit_transform(t, "per_column")
    assert z.values[:, 0].tolist() == [-1.0, 1.0]
    assert z.values[:, 1].tolist() == [5.0, 5.0]
    assert stats.passthrough.tolist() == [False, True]
    assert np.allclose(stats.inverse(z.values), t.values, atol=1e-12)


def test_zscore_global_and_target_std():
    t = _table(50, n=3, d=2, seed=4)
    z, stats = zscore_fit_transform(t, "global", target_std=0.2)
    assert z.values.std() == pytest.approx(0.2)
    assert np.allclose(stats.inverse(z.values), t.values, atol=1e-12)
    with pytest.raises(DataError):
        zscore_fit_transform(t, "bogus")


def test_global_zscore_keeps_distance_ranking():
    t = _table(40, n=4, d=2, seed=5)
    z, _ = zscore_fit_transform(t, "global")
    a, b = t.as_agents()[:, 0], z.as_agents()[:, 0]
    da = np.linalg.norm(a[:, None] - a[None], axis=-1)[np.triu_indices(4, 1)]
    db = np.linalg.norm(b[:, None] - b[None], axis=-1)[np.triu_indices(4, 1)]
    assert np.array_equal(np.argsort(da), np.argsort(db))


def test_metrics_scalar_example():
    m = metrics([np.full((1, 1, 1), 3.0)], [np.full((1, 1, 1), 1.0)])
    assert (m["mse"], m["mae"], m["rmse"], m["mape"]) == (4.0, 2.0, 2.0, 2.0)


def test_metrics_identity_and_zero_guard():
    y = np.random.default_rng(0).normal(size=(3, 4, 2))
    m = metrics([ClipBatch(y)], [ClipBatch(y)])
    assert all(m[k] == 0 for k in ("mse", "mae", "rmse", "mape", "euclid"))
    m = metrics([np.ones((1, 2, 1))], [np.zeros((1, 2, 1))])
    assert np.isfinite(m["mape"]) and m["mape"] == pytest.approx(1e3)


def test_metrics_per_horizon_and_euclid():
    pred = np.zeros((2, 3, 2))
    truth = np.zeros((2, 3, 2))
    truth[:, 2] = [3.0, 4.0]
    m = metrics([pred], [truth])
    assert m["per_horizon"]["mse"].tolist() == [0.0, 0.0, 12.5]
    assert m["per_horizon"]["euclid"].tolist() == [0.0, 0.0, 5.0]
    assert m["rmse"] ** 2 == pytest.approx(m["mse"], abs=1e-12)


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(2)
    p, t = rng.normal(size=(5, 3, 2)), rng.normal(size=(5, 3, 2))
    perm = rng.permutation(5)
    a, b = metrics([p], [t]), metrics([p[perm]], [t[perm]])
    for k in ("mse", "mae", "mape", "euclid"):
        assert a[k] == pytest.approx(b[k], abs=1e-14)


def test_metrics_misaligned():
    with pytest.raises(DimensionError):
        metrics([np.zeros((1, 2, 1))], [np.zeros((1, 3, 1))])


def test_write_rows_formats_nine_digits(tmp_path):
    p = tmp_path / "o.csv"
    write_rows(p, ("a", "b"), [(1, np.pi), ("*", 1e-20)])
    assert p.read_text().splitlines() == ["a,b", "1,3.14159265", "*,1e-20"]
    assert not (tmp_path / "o.csv.tmp").exists()
