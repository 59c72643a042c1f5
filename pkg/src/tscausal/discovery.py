"""Two-stage constraint-based causal discovery for multivariate time series.

Stage one estimates, for every variable, a superset of its causal parents by
iteratively removing lagged candidates that test conditionally independent of
the target given the strongest q other candidates (q = 0, 1, 2, ...).  Stage
two runs, for every candidate link source @ tau -> target, a momentary
conditional-independence test conditioning on the parent supersets of *both*
endpoints; this extra conditioning is what keeps false-positive rates low on
highly autocorrelated series.

Every candidate link is tested and recorded in the diagnostics (so per-lag
statistic trajectories can be assembled later), but a link enters the output
graph only when its momentary test rejects at ``alpha`` *and* the candidate
survived stage one.  Contemporaneous (lag-0) links between distinct variables
are tested once per unordered pair, oriented by time order plus a collider
check where determined, and kept unoriented otherwise.

The discovery pre-conditions are the usual ones for this family of methods:
every variable is independent of its non-effects given its causal parents,
observed independences reflect the graph, all common causes are measured, and
link existence is stable over the recording window.  None of these can be
verified from data alone; the synthetic generator in :mod:`tscausal.synth`
produces data satisfying them by construction for validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .citest import CMI_KNN, PARCORR, CITestResult, cmi_knn_test, parcorr_test
from .errors import ConditioningError, InsufficientDataError
from .graph import DIRECTED, UNORIENTED, CausalGraph, LaggedVariable, Link
from .panel import TimeSeriesPanel, build_lagged_matrix

CMI_CONDITION_CAP = 5  # default conditioning-dimension cap for the kNN test
MIN_EFFECTIVE_SAMPLES = 10
_STANDARDIZED_ATOL = 1e-6


@dataclass(frozen=True)
class DiscoveryConfig:
    """Knobs for one discovery run; all randomness flows from ``seed``."""

    tau_max: int
    alpha: float = 0.02
    ci_test: str = PARCORR
    pc_alpha: "float | None" = None  # stage-one level; defaults to alpha
    max_condition_dim: "int | None" = None  # None: unlimited (parcorr) / 5 (cmi_knn)
    q_max: "int | None" = None
    seed: int = 0
    knn_k: int = 10
    n_shuffles: int = 200
    include_contemporaneous: bool = True

    def __post_init__(self) -> None:
        if self.tau_max < 1:
            raise ValueError("tau_max must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.pc_alpha is not None and not 0.0 < self.pc_alpha < 1.0:
            raise ValueError("pc_alpha must be in (0, 1)")
        if self.ci_test not in (PARCORR, CMI_KNN):
            raise ValueError(f"unknown ci_test {self.ci_test!r}")
        if self.max_condition_dim is not None and self.max_condition_dim < 0:
            raise ValueError("max_condition_dim must be >= 0")
        if self.q_max is not None and self.q_max < 0:
            raise ValueError("q_max must be >= 0")
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        if self.n_shuffles < 1:
            raise ValueError("n_shuffles must be >= 1")

    @property
    def effective_pc_alpha(self) -> float:
        return self.alpha if self.pc_alpha is None else self.pc_alpha

    @property
    def effective_max_condition_dim(self) -> "int | None":
        if self.max_condition_dim is not None:
            return self.max_condition_dim
        return CMI_CONDITION_CAP if self.ci_test == CMI_KNN else None


@dataclass(frozen=True)
class ParentSuperset:
    """Stage-one output: surviving candidates sorted by descending |statistic|."""

    target: LaggedVariable
    candidates: tuple[tuple[LaggedVariable, float, float], ...]

    def members(self) -> tuple[LaggedVariable, ...]:
        return tuple(lv for lv, _, _ in self.candidates)


@dataclass(frozen=True)
class LinkTestRecord:
    """Diagnostics record for one momentary conditional-independence test."""

    source: LaggedVariable
    target_var: int
    statistic: "float | None"
    p_value: "float | None"
    cond_dim: int
    n: int
    skipped: bool = False
    reason: "str | None" = None


@dataclass(frozen=True)
class DiscoveryResult:
    """Graph plus the full per-link diagnostics of the run."""

    graph: CausalGraph
    records: tuple[LinkTestRecord, ...]
    supersets: dict[int, ParentSuperset] = field(default_factory=dict)


def _test_seed(seed: int, stage: int, target: int, level: int, cand: LaggedVariable) -> int:
    ss = np.random.SeedSequence((seed, stage, target, level, cand.var_index, cand.lag))
    return int(ss.generate_state(1, np.uint64)[0])


def _check_panel(panel: TimeSeriesPanel, config: DiscoveryConfig) -> None:
    if panel.n_samples - config.tau_max < MIN_EFFECTIVE_SAMPLES:
        raise InsufficientDataError(
            f"panel of length {panel.n_samples} leaves fewer than "
            f"{MIN_EFFECTIVE_SAMPLES} samples at tau_max={config.tau_max}"
        )
    for j, name in enumerate(panel.variable_names):
        col = panel.values[:, j]
        present = col[~np.isnan(col)]
        if (
            abs(float(np.mean(present))) > _STANDARDIZED_ATOL
            or abs(float(np.std(present)) - 1.0) > _STANDARDIZED_ATOL
        ):
            raise ValueError(
                f"panel is not standardized (variable {name!r}); "
                "call panel.standardize() before discovery"
            )


def _run_ci(
    panel: TimeSeriesPanel,
    target: LaggedVariable,
    source: LaggedVariable,
    cond: "list[LaggedVariable]",
    config: DiscoveryConfig,
    seed: int,
    trim_lag: "int | None" = None,
) -> CITestResult:
    """One CI test on lag-trimmed, listwise-complete samples."""
    max_lag = max(target.lag, source.lag, max((c.lag for c in cond), default=0))
    if trim_lag is not None:
        max_lag = max(max_lag, trim_lag)
    matrix = build_lagged_matrix(panel, target, [source, *cond], tau_max=max_lag)
    y = matrix.target_values
    x = matrix.column_values(0)
    z = matrix.rows[:, 2:] if cond else None
    if config.ci_test == PARCORR:
        return parcorr_test(x, y, z)
    return cmi_knn_test(
        x, y, z, k=config.knn_k, n_shuffles=config.n_shuffles, seed=seed
    )


def _rank_key(item: tuple[LaggedVariable, float]) -> tuple[float, int, int]:
    lv, stat = item
    return (-abs(stat), lv.lag, lv.var_index)


def pc_stage(panel: TimeSeriesPanel, target_var: int, config: DiscoveryConfig) -> ParentSuperset:
    """Parent-superset search for one target variable.

    Starts from every (variable, lag) with lag in [1, tau_max] (plus lag-0
    other variables when contemporaneous links are enabled) and sweeps subset
    sizes q = 0, 1, 2, ...; at each level candidates are re-sorted by absolute
    statistic and each is tested against the target conditional on the q
    strongest *other* candidates.  Candidates whose null is not rejected at
    the stage-one alpha are removed at the end of the level, so results do not
    depend on iteration order.
    """
    if not 0 <= target_var < panel.d:
        raise ValueError(f"target_var {target_var} out of range [0, {panel.d})")
    _check_panel(panel, config)

    target = LaggedVariable(target_var, 0)
    candidates: list[LaggedVariable] = [
        LaggedVariable(v, lag)
        for lag in range(1, config.tau_max + 1)
        for v in range(panel.d)
    ]
    if config.include_contemporaneous:
        candidates.extend(
            LaggedVariable(v, 0) for v in range(panel.d) if v != target_var
        )

    stats: dict[LaggedVariable, tuple[float, float]] = {}
    pc_alpha = config.effective_pc_alpha
    cap = config.effective_max_condition_dim

    q = 0
    while candidates and q <= len(candidates):
        if config.q_max is not None and q > config.q_max:
            break
        if cap is not None and q > cap:
            break
        ranked = sorted(((c, stats[c][0]) for c in candidates), key=_rank_key) if q else []
        ranked_vars = [c for c, _ in ranked]
        removals = []
        for cand in candidates:
            others = [o for o in ranked_vars if o != cand][:q]
            result = _run_ci(
                panel,
                target,
                cand,
                others,
                config,
                seed=_test_seed(config.seed, 0, target_var, q, cand),
                trim_lag=config.tau_max,
            )
            stats[cand] = (result.statistic, result.p_value)
            if result.p_value >= pc_alpha:
                removals.append(cand)
        for cand in removals:
            candidates.remove(cand)
        q += 1

    final = sorted(((c, stats[c][0]) for c in candidates), key=_rank_key)
    return ParentSuperset(
        target=target,
        candidates=tuple((c, stats[c][0], stats[c][1]) for c, _ in final),
    )


def _mci_condition(
    supersets: dict[int, ParentSuperset],
    source: LaggedVariable,
    target_var: int,
    cap: "int | None",
) -> list[LaggedVariable]:
    """Parents of the target plus time-shifted parents of the lagged source.

    The source itself and the target are excluded; each side is truncated to
    the ``cap`` strongest parents (supersets are sorted by strength).
    """
    exclude = {source, LaggedVariable(target_var, 0)}
    tgt_side = [lv for lv in supersets[target_var].members() if lv not in exclude]
    src_side = [
        lv.shifted(source.lag)
        for lv in supersets[source.var_index].members()
        if lv.shifted(source.lag) not in exclude
    ]
    if cap is not None:
        tgt_side = tgt_side[:cap]
        src_side = src_side[:cap]
    cond: list[LaggedVariable] = []
    seen: set[LaggedVariable] = set()
    for lv in (*tgt_side, *src_side):
        if lv not in seen:
            seen.add(lv)
            cond.append(lv)
    return cond


def _orient_contemporaneous(
    pairs: "list[tuple[int, int, float, float]]",
    lagged_keys: "set[tuple[int, int, int]]",
) -> list[Link]:
    """Collider-rule orientation of significant lag-0 adjacencies.

    For the pair i--j: if some lagged link k @ tau -> j exists while k @ tau
    is not adjacent to i (an unshielded triple with its collider at j), the
    edge is oriented i -> j; symmetric evidence for i wins the other way;
    conflicting or absent evidence leaves the edge unoriented.  Orientations
    that would close a contemporaneous cycle are dropped back to unoriented.
    """

    def head_evidence(at: int, other: int) -> bool:
        # A lagged parent of `at` that is not adjacent to `other` forms an
        # unshielded triple whose collider sits at `at`.
        return any(
            (k, tau, other) not in lagged_keys
            for (k, tau, tgt) in lagged_keys
            if tgt == at
        )

    children: dict[int, set[int]] = {}

    def reaches(start: int, goal: int) -> bool:
        stack, seen = [start], {start}
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            for child in children.get(node, ()):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return False

    links = []
    for i, j, stat, p in sorted(pairs):
        into_j = head_evidence(j, i)
        into_i = head_evidence(i, j)
        if into_j != into_i:
            src, dst = (i, j) if into_j else (j, i)
            if not reaches(dst, src):
                children.setdefault(src, set()).add(dst)
                links.append(
                    Link(LaggedVariable(src, 0), dst, DIRECTED, stat, p)
                )
                continue
        links.append(Link(LaggedVariable(i, 0), j, UNORIENTED, stat, p))
    return links


def mci_stage(
    panel: TimeSeriesPanel,
    supersets: dict[int, ParentSuperset],
    config: DiscoveryConfig,
) -> DiscoveryResult:
    """Momentary conditional-independence tests over every candidate link.

    All candidates are tested and recorded; a link is emitted iff its p-value
    falls below ``alpha`` and the candidate is a stage-one survivor (for lag-0
    pairs: a survivor from both endpoints' searches).  Tests whose sample or
    conditioning budget cannot be met are skipped with a reason recorded.
    """
    missing = [v for v in range(panel.d) if v not in supersets]
    if missing:
        raise ValueError(f"supersets missing for variables {missing}")
    _check_panel(panel, config)

    cap = config.effective_max_condition_dim
    member_sets = {v: set(supersets[v].members()) for v in range(panel.d)}

    records: list[LinkTestRecord] = []
    lagged_links: list[Link] = []
    contemporaneous: list[tuple[int, int, float, float]] = []

    for j in range(panel.d):
        target = LaggedVariable(j, 0)
        for tau in range(config.tau_max + 1):
            for i in range(panel.d):
                if tau == 0 and (not config.include_contemporaneous or i >= j):
                    continue
                source = LaggedVariable(i, tau)
                cond = _mci_condition(supersets, source, j, cap)
                try:
                    result = _run_ci(
                        panel,
                        target,
                        source,
                        cond,
                        config,
                        seed=_test_seed(config.seed, 1, j, 0, source),
                    )
                except (InsufficientDataError, ConditioningError) as exc:
                    records.append(
                        LinkTestRecord(
                            source=source,
                            target_var=j,
                            statistic=None,
                            p_value=None,
                            cond_dim=len(cond),
                            n=0,
                            skipped=True,
                            reason=str(exc),
                        )
                    )
                    continue
                records.append(
                    LinkTestRecord(
                        source=source,
                        target_var=j,
                        statistic=result.statistic,
                        p_value=result.p_value,
                        cond_dim=len(cond),
                        n=result.n,
                    )
                )
                if result.p_value >= config.alpha:
                    continue
                if tau > 0:
                    if source in member_sets[j]:
                        lagged_links.append(
                            Link(source, j, DIRECTED, result.statistic, result.p_value)
                        )
                else:
                    if (
                        LaggedVariable(i, 0) in member_sets[j]
                        and LaggedVariable(j, 0) in member_sets[i]
                    ):
                        contemporaneous.append((i, j, result.statistic, result.p_value))

    lagged_keys = {ln.key for ln in lagged_links}
    links = lagged_links + _orient_contemporaneous(contemporaneous, lagged_keys)
    graph = CausalGraph(
        d=panel.d,
        tau_max=config.tau_max,
        links=links,
        variable_names=panel.variable_names,
        subject_id=panel.subject_id,
        resolution_seconds=panel.resolution_seconds,
    )
    return DiscoveryResult(graph=graph, records=tuple(records), supersets=dict(supersets))


def run_discovery(panel: TimeSeriesPanel, config: DiscoveryConfig) -> DiscoveryResult:
    """Full run: stage one for every variable, then the momentary tests.

    Deterministic given (panel, config); per-test seeds are derived from the
    link identity so results do not depend on scheduling.
    """
    _check_panel(panel, config)
    supersets = {v: pc_stage(panel, v, config) for v in range(panel.d)}
    return mci_stage(panel, supersets, config)


# -- diagnostics sidecar serialization -------------------------------------


def records_to_json_dict(
    records: "tuple[LinkTestRecord, ...] | list[LinkTestRecord]",
    subject_id: str,
    tau_max: int,
    resolution_seconds: int,
) -> dict:
    return {
        "subject_id": subject_id,
        "tau_max": tau_max,
        "resolution_seconds": resolution_seconds,
        "records": [
            {
                "source_var": r.source.var_index,
                "lag": r.source.lag,
                "target_var": r.target_var,
                "statistic": r.statistic,
                "p_value": r.p_value,
                "cond_dim": r.cond_dim,
                "n": r.n,
                "skipped": r.skipped,
                "reason": r.reason,
            }
            for r in records
        ],
    }


def records_from_json_dict(doc: dict) -> tuple[LinkTestRecord, ...]:
    return tuple(
        LinkTestRecord(
            source=LaggedVariable(item["source_var"], item["lag"]),
            target_var=item["target_var"],
            statistic=item["statistic"],
            p_value=item["p_value"],
            cond_dim=item["cond_dim"],
            n=item["n"],
            skipped=item["skipped"],
            reason=item.get("reason"),
        )
        for item in doc["records"]
    )
