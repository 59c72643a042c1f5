"""Cohort-level aggregation of per-subject discovery outputs.

Turns a collection of per-subject graphs and diagnostics into the standard
analysis products: the distribution of link counts for a variable pair, the
per-lag probability of a link across the cohort, mean per-lag statistic
trajectories, and pooled correlation reports between link families.

Lag-0 links are matched orientation-agnostically throughout: a contemporaneous
adjacency between the queried pair counts regardless of stored direction.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import rankdata

from .discovery import LinkTestRecord
from .errors import UndefinedCorrelationError
from .fileio import atomic_write_text
from .graph import CausalGraph

KIND_P_VALUES = "p_values"
KIND_STATISTICS = "statistics"
KIND_RAW_SERIES = "raw_series"
_KINDS = (KIND_P_VALUES, KIND_STATISTICS, KIND_RAW_SERIES)


@dataclass(frozen=True)
class CohortSummary:
    n_subjects: int
    lag_probability: np.ndarray
    link_count_per_subject: np.ndarray
    mean_normalized_statistic: np.ndarray


@dataclass(frozen=True)
class CorrelationRow:
    variable: str
    pearson_r: float
    spearman_rho: float


@dataclass(frozen=True)
class CorrelationReport:
    rows: tuple[CorrelationRow, ...]
    comparison_kind: str

    def __post_init__(self) -> None:
        if self.comparison_kind not in _KINDS:
            raise ValueError(f"unknown comparison kind {self.comparison_kind!r}")


def _check_shapes(graphs: "list[CausalGraph]") -> None:
    if not graphs:
        raise ValueError("need at least one graph")
    first = graphs[0]
    for g in graphs[1:]:
        if g.d != first.d or g.tau_max != first.tau_max:
            raise ValueError(
                f"graph shapes differ: subject {g.subject_id!r} has "
                f"(d={g.d}, tau_max={g.tau_max}), expected "
                f"(d={first.d}, tau_max={first.tau_max})"
            )


def link_count_histogram(
    graphs: "list[CausalGraph]", source_var: int, target_var: int
) -> np.ndarray:
    """Per-subject count of links source_var @ tau -> target_var over all lags."""
    _check_shapes(graphs)
    return np.array(
        [int(g.lag_link_indicator(source_var, target_var).sum()) for g in graphs],
        dtype=np.intp,
    )


def lag_probability_curve(
    graphs: "list[CausalGraph]", source_var: int, target_var: int
) -> np.ndarray:
    """Fraction of the cohort with the link at each lag, exact before rounding."""
    if not graphs:
        raise ValueError("need at least one graph")
    _check_shapes(graphs)
    n = len(graphs)
    hits = np.zeros(graphs[0].tau_max + 1, dtype=np.intp)
    for g in graphs:
        hits += g.lag_link_indicator(source_var, target_var)
    return np.array([float(Fraction(int(h), n)) for h in hits])


def _record_lookup(
    records: "tuple[LinkTestRecord, ...] | list[LinkTestRecord]",
    source_var: int,
    target_var: int,
) -> dict[int, LinkTestRecord]:
    """Tested-link records for the pair keyed by lag, lag 0 matched either way."""
    out: dict[int, LinkTestRecord] = {}
    for r in records:
        if r.skipped:
            continue
        i, tau = r.source.var_index, r.source.lag
        if tau == 0:
            if {i, r.target_var} == {source_var, target_var} and 0 not in out:
                out[0] = r
        elif i == source_var and r.target_var == target_var and tau not in out:
            out[tau] = r
    return out


def statistic_trajectory(
    diagnostics: "list[tuple[LinkTestRecord, ...]] | list[list[LinkTestRecord]]",
    source_var: int,
    target_var: int,
    tau_max: int,
    normalize: bool = True,
) -> np.ndarray:
    """Mean |statistic| of the pair's momentary tests at each lag 0..tau_max.

    With ``normalize`` each subject's trajectory is scaled to unit maximum
    before averaging, removing per-subject scale so trajectories from runs at
    different resolutions are comparable.  Every lag must have a non-skipped
    record for every subject.
    """
    if not diagnostics:
        raise ValueError("need diagnostics for at least one subject")
    per_subject = []
    for idx, records in enumerate(diagnostics):
        lookup = _record_lookup(records, source_var, target_var)
        gaps = [tau for tau in range(tau_max + 1) if tau not in lookup]
        if gaps:
            raise ValueError(
                f"subject {idx}: no tested-link record for lags {gaps} of the pair "
                f"{source_var}->{target_var}"
            )
        traj = np.array([abs(lookup[tau].statistic) for tau in range(tau_max + 1)])
        if normalize:
            peak = traj.max()
            if peak > 0:
                traj = traj / peak
        per_subject.append(traj)
    return np.mean(per_subject, axis=0)


def pooled_correlation(series_a, series_b) -> tuple[float, float]:
    """Pearson r and Spearman rho of per-subject vectors pooled across the cohort.

    Spearman is Pearson on tie-averaged ranks.  Pairs with a missing entry on
    either side are dropped.
    """
    a = np.concatenate([np.asarray(v, dtype=np.float64).ravel() for v in series_a])
    b = np.concatenate([np.asarray(v, dtype=np.float64).ravel() for v in series_b])
    if a.shape != b.shape:
        raise ValueError("pooled series lengths differ")
    keep = ~(np.isnan(a) | np.isnan(b))
    a, b = a[keep], b[keep]
    if a.size < 2:
        raise ValueError("need at least 2 pooled pairs")

    def pearson(u: np.ndarray, v: np.ndarray) -> float:
        u = u - u.mean()
        v = v - v.mean()
        su = float(np.sqrt(u @ u))
        sv = float(np.sqrt(v @ v))
        if su == 0.0 or sv == 0.0:
            raise UndefinedCorrelationError("correlation of a constant vector is undefined")
        return float(np.clip((u @ v) / (su * sv), -1.0, 1.0))

    r = pearson(a, b)
    rho = pearson(rankdata(a, method="average"), rankdata(b, method="average"))
    return r, rho


def correlation_report(
    series_a, series_b, kind: str, variable: str = "value"
) -> CorrelationReport:
    """Single-row correlation report for one pooled comparison."""
    r, rho = pooled_correlation(series_a, series_b)
    return CorrelationReport(
        rows=(CorrelationRow(variable=variable, pearson_r=r, spearman_rho=rho),),
        comparison_kind=kind,
    )


def build_cohort_summary(
    graphs: "list[CausalGraph]",
    diagnostics: "list[tuple[LinkTestRecord, ...]]",
    source_var: int,
    target_var: int,
    normalize: bool = True,
) -> CohortSummary:
    if len(graphs) != len(diagnostics):
        raise ValueError("graphs and diagnostics must pair up one per subject")
    _check_shapes(graphs)
    return CohortSummary(
        n_subjects=len(graphs),
        lag_probability=lag_probability_curve(graphs, source_var, target_var),
        link_count_per_subject=link_count_histogram(graphs, source_var, target_var),
        mean_normalized_statistic=statistic_trajectory(
            diagnostics, source_var, target_var, graphs[0].tau_max, normalize
        ),
    )


def align_trajectories(
    lags_seconds_a: np.ndarray,
    values_a: np.ndarray,
    lags_seconds_b: np.ndarray,
    values_b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Restrict two trajectories to their common lag grid (in seconds)."""
    common, idx_a, idx_b = np.intersect1d(
        np.asarray(lags_seconds_a, dtype=np.int64),
        np.asarray(lags_seconds_b, dtype=np.int64),
        return_indices=True,
    )
    if common.size == 0:
        raise ValueError("trajectories share no lag values")
    return common, np.asarray(values_a)[idx_a], np.asarray(values_b)[idx_b]


# -- delimited outputs ------------------------------------------------------


def _write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_histogram_csv(path, subject_ids: "list[str]", counts: np.ndarray) -> None:
    if len(subject_ids) != len(counts):
        raise ValueError("subject_ids and counts must align")
    _write_csv(
        path,
        ["subject_id", "link_count"],
        ([sid, int(c)] for sid, c in zip(subject_ids, counts)),
    )


def write_lag_probability_csv(path, lags_seconds: np.ndarray, probabilities: np.ndarray) -> None:
    _write_csv(
        path,
        ["lag_minutes", "probability"],
        ([_fmt(s / 60.0), _fmt(p)] for s, p in zip(lags_seconds, probabilities)),
    )


def write_trajectory_csv(
    path,
    lags_seconds: np.ndarray,
    mean_stat_1min: "np.ndarray | list",
    mean_stat_15min: "np.ndarray | list | None" = None,
) -> None:
    """Trajectory table on the primary lag grid; the 15-min column may be sparse."""
    n = len(lags_seconds)
    secondary = [None] * n if mean_stat_15min is None else list(mean_stat_15min)
    if len(mean_stat_1min) != n or len(secondary) != n:
        raise ValueError("trajectory columns must align with the lag grid")
    _write_csv(
        path,
        ["lag_minutes", "mean_stat_1min", "mean_stat_15min"],
        (
            [_fmt(s / 60.0), _fmt(v1), _fmt(v2)]
            for s, v1, v2 in zip(lags_seconds, mean_stat_1min, secondary)
        ),
    )


def write_correlations_csv(path, reports: "list[CorrelationReport]") -> None:
    rows = []
    for report in reports:
        for row in report.rows:
            rows.append(
                [row.variable, _fmt(row.pearson_r), _fmt(row.spearman_rho), report.comparison_kind]
            )
    _write_csv(path, ["variable", "pearson_r", "spearman_rho", "kind"], rows)
