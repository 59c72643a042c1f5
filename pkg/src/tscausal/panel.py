"""Multivariate sensor time-series panels.

A panel holds equally spaced observations of ``d`` variables for one subject.
Missing observations are NaN and are never silently imputed: downstream lagged
sample matrices drop any row touching a missing value (listwise deletion).

CSV format: a ``timestamp`` column (ISO-8601) followed by one real-valued
column per variable; an empty cell marks a missing value.  ``load_panel`` and
``write_panel_csv`` round-trip this format.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateVariableError,
    EmptyInputError,
    InsufficientDataError,
    IntegrityError,
    ParseError,
)
from .graph import LaggedVariable

BIN_VARIABLES = tuple(f"bin{i}" for i in range(7))
BINS_SUM = "bins_sum"


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Aligned multivariate observations for one subject.

    ``values`` is a T x d float matrix with NaN marking missing entries; the
    i-th row was observed at ``start_time + i * resolution_seconds``.  Panels
    are immutable after construction and safe to share across threads.
    """

    subject_id: str
    start_time: datetime
    resolution_seconds: int
    variable_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.resolution_seconds <= 0:
            raise ValueError("resolution_seconds must be positive")
        if self.start_time.tzinfo is None:
            object.__setattr__(
                self, "start_time", self.start_time.replace(tzinfo=timezone.utc)
            )
        else:
            object.__setattr__(self, "start_time", self.start_time.astimezone(timezone.utc))
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be a T x d matrix")
        if values.shape[1] != len(self.variable_names):
            raise ValueError("values width must match variable_names")
        if len(set(self.variable_names)) != len(self.variable_names):
            raise ValueError("variable_names must be unique")
        if not self.variable_names:
            raise ValueError("panel needs at least one variable")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def variable_index(self, name: str) -> int:
        try:
            return self.variable_names.index(name)
        except ValueError:
            raise ValueError(f"unknown variable {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.variable_index(name)]

    def timestamp(self, row: int) -> datetime:
        return self.start_time + timedelta(seconds=row * self.resolution_seconds)


@dataclass(frozen=True)
class LaggedSampleMatrix:
    """Row-complete lagged samples for one CI test.

    Column 0 of ``rows`` holds the target; the remaining columns follow the
    order of ``columns``.  Rows touching a missing value have been dropped.
    """

    target: LaggedVariable
    columns: tuple[LaggedVariable, ...]
    rows: np.ndarray
    n: int

    @property
    def target_values(self) -> np.ndarray:
        return self.rows[:, 0]

    def column_values(self, i: int) -> np.ndarray:
        return self.rows[:, i + 1]


def _parse_timestamp(text: str, row_number: int) -> datetime:
    try:
        ts = datetime.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"row {row_number}: malformed timestamp {text!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_value(text: str, row_number: int, column: str) -> float:
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"row {row_number}: malformed value {text!r} in column {column!r}"
        ) from None


def load_panel(
    path: "str | Path",
    schema: "dict[str, str] | None" = None,
    subject_id: "str | None" = None,
    resolution_seconds: "int | None" = None,
) -> TimeSeriesPanel:
    """Read a panel from CSV, sort it, and gap-fill to equal spacing.

    ``schema`` maps CSV column names to variable names; the key mapping to
    ``"timestamp"`` names the timestamp column.  Without a schema the column
    literally named ``timestamp`` is used and every other column becomes a
    variable under its own name.  Gaps are filled with all-missing rows;
    duplicate timestamps are rejected.  The row spacing is inferred as the
    GCD of the observed gaps unless ``resolution_seconds`` is given.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]

        if schema is None:
            if "timestamp" not in header:
                raise ParseError(f"{path}: no 'timestamp' column in header")
            ts_col = header.index("timestamp")
            var_cols = [(i, name) for i, name in enumerate(header) if i != ts_col]
        else:
            inverse = {csv_name: var for csv_name, var in schema.items()}
            ts_candidates = [c for c, v in inverse.items() if v == "timestamp"]
            if len(ts_candidates) != 1:
                raise ValueError("schema must map exactly one column to 'timestamp'")
            if ts_candidates[0] not in header:
                raise ParseError(f"{path}: timestamp column {ts_candidates[0]!r} missing")
            ts_col = header.index(ts_candidates[0])
            var_cols = []
            for csv_name, var in schema.items():
                if var == "timestamp":
                    continue
                if csv_name not in header:
                    raise ParseError(f"{path}: column {csv_name!r} missing from header")
                var_cols.append((header.index(csv_name), var))
        if not var_cols:
            raise ParseError(f"{path}: header has no variable columns")

        names = tuple(var for _, var in var_cols)
        rows: list[tuple[datetime, list[float]]] = []
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"row {row_number}: expected {len(header)} cells, got {len(row)}"
                )
            ts = _parse_timestamp(row[ts_col], row_number)
            vals = [_parse_value(row[i], row_number, name) for i, name in var_cols]
            rows.append((ts, vals))

    if not rows:
        raise EmptyInputError(f"{path}: no data rows")

    rows.sort(key=lambda item: item[0])
    for (a, _), (b, _) in zip(rows, rows[1:]):
        if a == b:
            raise IntegrityError(f"duplicate timestamp {a.isoformat()}")

    start = rows[0][0]
    gaps = []
    for (a, _), (b, _) in zip(rows, rows[1:]):
        delta = (b - a).total_seconds()
        if delta != int(delta):
            raise ParseError(f"sub-second spacing near {b.isoformat()} is not supported")
        gaps.append(int(delta))

    if resolution_seconds is None:
        resolution_seconds = math.gcd(*gaps) if gaps else 60
    for gap in gaps:
        if gap % resolution_seconds:
            raise IntegrityError(
                f"gap of {gap}s is not a multiple of the {resolution_seconds}s resolution"
            )

    total = int((rows[-1][0] - start).total_seconds()) // resolution_seconds + 1
    values = np.full((total, len(names)), np.nan)
    for ts, vals in rows:
        idx = int((ts - start).total_seconds()) // resolution_seconds
        values[idx] = vals

    return TimeSeriesPanel(
        subject_id=subject_id if subject_id is not None else path.stem,
        start_time=start,
        resolution_seconds=resolution_seconds,
        variable_names=names,
        values=values,
    )


def panel_to_csv_text(panel: TimeSeriesPanel) -> str:
    """The panel in the same CSV format ``load_panel`` reads."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["timestamp", *panel.variable_names])
    for i in range(panel.n_samples):
        cells = [panel.timestamp(i).isoformat()]
        for v in panel.values[i]:
            cells.append("" if math.isnan(v) else repr(float(v)))
        writer.writerow(cells)
    return buf.getvalue()


def write_panel_csv(panel: TimeSeriesPanel, path: "str | Path") -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, panel_to_csv_text(panel))


def resample(panel: TimeSeriesPanel, new_resolution_seconds: int) -> TimeSeriesPanel:
    """Average non-overlapping windows down to a coarser resolution.

    Each output sample is the mean of its window's non-missing values and is
    missing when fewer than half of the window's slots are non-missing.
    """
    if new_resolution_seconds <= 0:
        raise ValueError("new_resolution_seconds must be positive")
    if new_resolution_seconds % panel.resolution_seconds:
        raise ValueError(
            f"new resolution {new_resolution_seconds}s is not a multiple of "
            f"{panel.resolution_seconds}s"
        )
    factor = new_resolution_seconds // panel.resolution_seconds
    if factor == 1:
        return panel

    n_out = math.ceil(panel.n_samples / factor)
    out = np.full((n_out, panel.d), np.nan)
    for w in range(n_out):
        window = panel.values[w * factor : (w + 1) * factor]
        counts = np.sum(~np.isnan(window), axis=0)
        keep = counts / factor >= 0.5
        with np.errstate(invalid="ignore"):
            means = np.nanmean(window, axis=0)
        out[w, keep] = means[keep]

    return TimeSeriesPanel(
        subject_id=panel.subject_id,
        start_time=panel.start_time,
        resolution_seconds=new_resolution_seconds,
        variable_names=panel.variable_names,
        values=out,
    )


def standardize(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Rescale each variable to mean 0 and variance 1 over its non-missing entries.

    Uses the population convention (divide by N, not N-1), so the sample
    values {2, 4, 6} map to {-1.2247, 0, 1.2247}.  Missing markers are kept.
    Idempotent to within float rounding.
    """
    out = np.array(panel.values, copy=True)
    for j, name in enumerate(panel.variable_names):
        col = out[:, j]
        present = col[~np.isnan(col)]
        if present.size < 2:
            raise DegenerateVariableError(
                f"variable {name!r} has fewer than 2 non-missing values"
            )
        sd = float(np.std(present))
        if sd == 0.0:
            raise DegenerateVariableError(f"variable {name!r} has zero variance")
        out[:, j] = (col - float(np.mean(present))) / sd
    return TimeSeriesPanel(
        subject_id=panel.subject_id,
        start_time=panel.start_time,
        resolution_seconds=panel.resolution_seconds,
        variable_names=panel.variable_names,
        values=out,
    )


def with_bins_sum(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Append a ``bins_sum`` variable summing bin0..bin6 (missing if any bin is)."""
    missing = [b for b in BIN_VARIABLES if b not in panel.variable_names]
    if missing:
        raise ValueError(f"panel lacks bin columns: {missing}")
    if BINS_SUM in panel.variable_names:
        return panel
    cols = [panel.variable_index(b) for b in BIN_VARIABLES]
    total = panel.values[:, cols].sum(axis=1)  # NaN propagates
    values = np.column_stack([panel.values, total])
    return TimeSeriesPanel(
        subject_id=panel.subject_id,
        start_time=panel.start_time,
        resolution_seconds=panel.resolution_seconds,
        variable_names=panel.variable_names + (BINS_SUM,),
        values=values,
    )


def build_lagged_matrix(
    panel: TimeSeriesPanel,
    target: LaggedVariable,
    columns: "list[LaggedVariable] | tuple[LaggedVariable, ...]",
    tau_max: int,
) -> LaggedSampleMatrix:
    """Materialize rows (target(t - target.lag), columns...(t - lag)) for t in [tau_max, T).

    Any row referencing a missing value is dropped.  ``tau_max`` must bound
    every lag used, including the target's.
    """
    if tau_max < 0:
        raise ValueError("tau_max must be >= 0")
    if tau_max >= panel.n_samples:
        raise InsufficientDataError(
            f"tau_max={tau_max} leaves no rows in a panel of length {panel.n_samples}"
        )
    for lv in (target, *columns):
        if not 0 <= lv.var_index < panel.d:
            raise ValueError(f"variable index {lv.var_index} out of range [0, {panel.d})")
        if lv.lag > tau_max:
            raise ValueError(f"lag {lv.lag} exceeds tau_max={tau_max}")

    T = panel.n_samples
    stacked = np.empty((T - tau_max, len(columns) + 1))
    for k, lv in enumerate((target, *columns)):
        stacked[:, k] = panel.values[tau_max - lv.lag : T - lv.lag, lv.var_index]
    keep = ~np.isnan(stacked).any(axis=1)
    rows = stacked[keep]
    return LaggedSampleMatrix(
        target=target,
        columns=tuple(columns),
        rows=rows,
        n=rows.shape[0],
    )
