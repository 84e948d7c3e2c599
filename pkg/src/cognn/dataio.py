"""Wide-format CSV ingestion, sliding windows, z-scoring and forecast metrics."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ClipBatch, DataError, DimensionError


class MissingPolicy(str, enum.Enum):
    REJECT = "reject"
    FORWARD_FILL = "forward_fill"


@dataclass(frozen=True)
class SeriesTable:
    """values has shape (T, N*d); columns are agent-major (agent 0's d features first)."""

    values: np.ndarray
    n: int
    d: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != self.n * self.d:
            raise DataError(f"table has shape {v.shape}, layout needs {self.n * self.d} columns")
        if not np.all(np.isfinite(v)):
            raise DataError("table contains non-finite values")
        object.__setattr__(self, "values", v)

    def as_agents(self) -> np.ndarray:
        """(N, T, d) view of the table."""
        return self.values.reshape(-1, self.n, self.d).transpose(1, 0, 2)


def load_csv_series(path, n: int, d: int, missing_policy="reject", header: bool = False) -> SeriesTable:
    policy = MissingPolicy(missing_policy)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, raw in enumerate(reader, start=1):
            if header and line_no == 1:
                continue
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != n * d:
                raise DataError(f"schema error: row {line_no} has {len(raw)} columns, expected {n * d}")
            row = []
            for col, cell in enumerate(raw):
                cell = cell.strip()
                if cell == "" or cell.lower() in ("nan", "na"):
                    if policy is MissingPolicy.REJECT:
                        raise DataError(f"missing value at row {line_no}, column {col}")
                    row.append(np.nan)
                    continue
                try:
                    row.append(float(cell))
                except ValueError:
                    raise DataError(f"cannot parse {cell!r} at row {line_no}, column {col}") from None
            rows.append(row)
    if not rows:
        raise DataError(f"{path} holds no data rows")
    values = np.array(rows)
    if policy is MissingPolicy.FORWARD_FILL:
        for j in range(values.shape[1]):
            col = values[:, j]
            if np.isnan(col[0]):
                raise DataError(f"missing value at row 1, column {j} cannot be forward-filled")
            for i in range(1, len(col)):
                if np.isnan(col[i]):
                    col[i] = col[i - 1]
    return SeriesTable(values, n, d)


def write_csv_series(path, table: SeriesTable) -> None:
    np.savetxt(path, table.values, delimiter=",", fmt="%.17g")


def sliding_windows(table: SeriesTable, delta: int):
    """Stride-1 windows: input rows [w, w+delta), target rows [w+delta, w+2*delta)."""
    T = table.values.shape[0]
    if T < 2 * delta:
        raise DataError(f"table has {T} rows; windows of {delta} need at least {2 * delta}")
    agents = table.as_agents()
    for w in range(T - 2 * delta + 1):
        yield (
            ClipBatch(agents[:, w : w + delta], start_time=w),
            ClipBatch(agents[:, w + delta : w + 2 * delta], start_time=w + delta),
        )


def num_windows(table: SeriesTable, delta: int) -> int:
    return max(table.values.shape[0] - 2 * delta + 1, 0)


@dataclass(frozen=True)
class ZScoreStats:
    mode: str
    mean: np.ndarray
    std: np.ndarray
    passthrough: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def inverse_clip(self, clip: np.ndarray, n: int, d: int) -> np.ndarray:
        """Undo the transform on an (N, delta, d) clip."""
        flat = clip.transpose(1, 0, 2).reshape(clip.shape[1], n * d)
        return self.inverse(flat).reshape(clip.shape[1], n, d).transpose(1, 0, 2)


def zscore_fit_transform(
    table: SeriesTable, mode: str = "global", target_std: float = 1.0
) -> tuple[SeriesTable, ZScoreStats]:
    """Standardize with population statistics, then scale to ``target_std``.

    Zero-variance columns pass through unscaled and are flagged in the stats.
    """
    v = table.values
    if mode == "global":
        mean = np.full(v.shape[1], v.mean())
        std = np.full(v.shape[1], v.std())
    elif mode == "per_column":
        mean = v.mean(axis=0)
        std = v.std(axis=0)
    else:
        raise DataError(f"unknown normalization mode {mode!r}")
    flat = std == 0
    mean = np.where(flat, 0.0, mean)
    std = np.where(flat, 1.0, std / target_std)
    stats = ZScoreStats(mode, mean, std, flat)
    return SeriesTable(stats.transform(v), table.n, table.d), stats


def metrics(pred, truth, mape_floor: float = 1e-3) -> dict:
    """Forecast errors over aligned clip sequences.

    ``per_horizon`` maps each metric to an array indexed by future frame
    (entry 0 is frame 1); ``euclid`` is the mean per-agent l2 distance.
    """
    P = np.stack([p.data if isinstance(p, ClipBatch) else np.asarray(p) for p in pred])
    Y = np.stack([t.data if isinstance(t, ClipBatch) else np.asarray(t) for t in truth])
    if P.shape != Y.shape:
        raise DimensionError(f"prediction {P.shape} and truth {Y.shape} are not aligned")
    err = P - Y
    ape = np.abs(err) / np.maximum(np.abs(Y), mape_floor)
    dist = np.linalg.norm(err, axis=-1)
    axes = (0, 1, 3)  # everything except the horizon axis
    per_h = {
        "mse": np.mean(err**2, axis=axes),
        "mae": np.mean(np.abs(err), axis=axes),
        "mape": np.mean(ape, axis=axes),
        "euclid": np.mean(dist, axis=(0, 1)),
    }
    per_h["rmse"] = np.sqrt(per_h["mse"])
    mse = float(np.mean(err**2))
    return {
        "mse": mse,
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(np.sqrt(mse)),
        "mape": float(np.mean(ape)),
        "euclid": float(np.mean(dist)),
        "per_horizon": per_h,
    }


def write_rows(path, header, rows) -> None:
    """Write CSV rows, formatting floats with 9 significant digits; atomic replace."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.9g}" if isinstance(v, (float, np.floating)) else v for v in row])
    tmp.replace(path)
