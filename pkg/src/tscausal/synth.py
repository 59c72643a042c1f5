"""Synthetic structural causal models with known ground truth.

Generated panels satisfy the discovery preconditions by construction: each
variable is driven only by its declared parents plus independent noise, all
common causes are part of the system, and the link structure is constant over
time.  Linear specifications are checked for stationarity via the spectral
radius of the companion form; every simulation additionally runs an empirical
first-half/second-half mean comparison as a stationarity sanity check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import IntegrityError
from .graph import DIRECTED, CausalGraph, LaggedVariable, Link
from .panel import TimeSeriesPanel

MECH_LINEAR = "linear"
MECH_QUADRATIC = "quadratic"
MECH_TANH = "tanh"
_MECHANISMS = (MECH_LINEAR, MECH_QUADRATIC, MECH_TANH)

NOISE_GAUSSIAN = "gaussian"
NOISE_UNIFORM = "uniform"

DEFAULT_BURN_IN = 500
_START_TIME = datetime(2020, 1, 1, tzinfo=timezone.utc)

# Sentinel statistic/p-value carried by ground-truth links.
TRUTH_STATISTIC = 0.0
TRUTH_P_VALUE = 0.0


@dataclass(frozen=True)
class ScmLink:
    """One structural dependency: target_t += f(source_{t-lag})."""

    source_var: int
    lag: int
    target_var: int
    mechanism: str = MECH_LINEAR
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        if self.mechanism not in _MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.lag < 0:
            raise ValueError("lag must be >= 0")
        if self.lag == 0 and self.source_var == self.target_var:
            raise ValueError("contemporaneous self-links are not allowed")

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.mechanism == MECH_LINEAR:
            return self.coefficient * x
        if self.mechanism == MECH_QUADRATIC:
            return self.coefficient * x * x
        return self.coefficient * np.tanh(x)


@dataclass(frozen=True)
class NoiseSpec:
    """Innovation distribution: gaussian with sigma=scale, or uniform of full width=scale."""

    kind: str = NOISE_GAUSSIAN
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (NOISE_GAUSSIAN, NOISE_UNIFORM):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("noise scale must be positive")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == NOISE_GAUSSIAN:
            return rng.normal(0.0, self.scale, size)
        half_width = self.scale / 2.0
        return rng.uniform(-half_width, half_width, size)


@dataclass(frozen=True)
class ScmSpec:
    """Generative ground truth for validation runs."""

    d: int
    links: tuple[ScmLink, ...]
    T: int
    burn_in: int = DEFAULT_BURN_IN
    noise: "tuple[NoiseSpec, ...] | None" = None
    variable_names: "tuple[str, ...] | None" = None
    resolution_seconds: int = 60

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        object.__setattr__(self, "links", tuple(self.links))
        if self.noise is None:
            object.__setattr__(self, "noise", tuple(NoiseSpec() for _ in range(self.d)))
        else:
            object.__setattr__(self, "noise", tuple(self.noise))
        if len(self.noise) != self.d:
            raise ValueError("noise must list one spec per variable")
        if self.variable_names is None:
            object.__setattr__(
                self, "variable_names", tuple(f"x{i}" for i in range(self.d))
            )
        else:
            object.__setattr__(self, "variable_names", tuple(self.variable_names))
        if len(self.variable_names) != self.d:
            raise ValueError("variable_names must list one name per variable")

        seen = set()
        for ln in self.links:
            for v in (ln.source_var, ln.target_var):
                if not 0 <= v < self.d:
                    raise ValueError(f"link variable {v} out of range [0, {self.d})")
            key = (ln.source_var, ln.lag, ln.target_var)
            if key in seen:
                raise IntegrityError(f"duplicate link {key}")
            seen.add(key)

        self._topological_contemporaneous()  # raises on lag-0 cycles
        if all(ln.mechanism == MECH_LINEAR for ln in self.links):
            radius = self._spectral_radius()
            if radius >= 1.0:
                raise ValueError(
                    f"linear system is unstable (spectral radius {radius:.3f} >= 1)"
                )

    @property
    def max_lag(self) -> int:
        return max((ln.lag for ln in self.links), default=0)

    def _topological_contemporaneous(self) -> list[int]:
        children: dict[int, set[int]] = {i: set() for i in range(self.d)}
        indeg = {i: 0 for i in range(self.d)}
        for ln in self.links:
            if ln.lag == 0 and ln.target_var not in children[ln.source_var]:
                children[ln.source_var].add(ln.target_var)
                indeg[ln.target_var] += 1
        order = sorted(i for i in range(self.d) if indeg[i] == 0)
        out: list[int] = []
        queue = list(order)
        while queue:
            node = queue.pop(0)
            out.append(node)
            for child in sorted(children[node]):
                indeg[child] -= 1
                if indeg[child] == 0:
                    queue.append(child)
        if len(out) != self.d:
            raise IntegrityError("contemporaneous links form a cycle")
        return out

    def _spectral_radius(self) -> float:
        """Spectral radius of the companion form of the linear system.

        Contemporaneous links are first solved out: with lag-0 matrix A0 and
        lag-tau matrices A_tau, the reduced transition uses (I - A0)^-1 A_tau.
        """
        p = self.max_lag
        if p == 0:
            return 0.0
        a0 = np.zeros((self.d, self.d))
        lagged = np.zeros((p, self.d, self.d))
        for ln in self.links:
            if ln.lag == 0:
                a0[ln.target_var, ln.source_var] = ln.coefficient
            else:
                lagged[ln.lag - 1, ln.target_var, ln.source_var] = ln.coefficient
        inv = np.linalg.inv(np.eye(self.d) - a0)
        companion = np.zeros((self.d * p, self.d * p))
        for tau in range(p):
            companion[: self.d, tau * self.d : (tau + 1) * self.d] = inv @ lagged[tau]
        if p > 1:
            companion[self.d :, : self.d * (p - 1)] = np.eye(self.d * (p - 1))
        return float(np.max(np.abs(np.linalg.eigvals(companion))))

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "T": self.T,
            "burn_in": self.burn_in,
            "resolution_seconds": self.resolution_seconds,
            "variable_names": list(self.variable_names),
            "noise": [{"kind": ns.kind, "scale": ns.scale} for ns in self.noise],
            "links": [
                {
                    "source_var": ln.source_var,
                    "lag": ln.lag,
                    "target_var": ln.target_var,
                    "mechanism": ln.mechanism,
                    "coefficient": ln.coefficient,
                }
                for ln in self.links
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ScmSpec":
        return cls(
            d=doc["d"],
            T=doc["T"],
            burn_in=doc.get("burn_in", DEFAULT_BURN_IN),
            resolution_seconds=doc.get("resolution_seconds", 60),
            variable_names=tuple(doc["variable_names"]) if "variable_names" in doc else None,
            noise=tuple(
                NoiseSpec(kind=ns["kind"], scale=ns["scale"]) for ns in doc["noise"]
            )
            if "noise" in doc
            else None,
            links=tuple(
                ScmLink(
                    source_var=item["source_var"],
                    lag=item["lag"],
                    target_var=item["target_var"],
                    mechanism=item.get("mechanism", MECH_LINEAR),
                    coefficient=item.get("coefficient", 1.0),
                )
                for item in doc["links"]
            ),
        )

    @classmethod
    def load(cls, path: "str | Path") -> "ScmSpec":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _stationarity_check(values: np.ndarray, names: tuple[str, ...]) -> None:
    """First/second-half means must agree within 5 sigma of the mean estimator.

    The estimator's sigma is inflated for serial correlation using the AR(1)
    effective-sample-size correction.
    """
    T = values.shape[0]
    if T < 20:
        return
    half = T // 2
    for j, name in enumerate(names):
        a, b = values[:half, j], values[half : 2 * half, j]
        ses = []
        for part in (a, b):
            var = float(np.var(part))
            if var == 0.0:
                ses.append(0.0)
                continue
            centered = part - part.mean()
            rho = float(centered[:-1] @ centered[1:] / (centered @ centered))
            rho = min(max(rho, -0.99), 0.99)
            n_eff = max(len(part) * (1 - rho) / (1 + rho), 2.0)
            ses.append(math.sqrt(var / n_eff))
        tol = 5.0 * math.hypot(*ses)
        if tol > 0 and abs(float(a.mean()) - float(b.mean())) > tol:
            raise ValueError(
                f"simulated series {name!r} fails the stationarity sanity check"
            )


def simulate(spec: ScmSpec, seed: int) -> TimeSeriesPanel:
    """Generate one panel from the model; bit-identical for equal seeds."""
    rng = np.random.default_rng(seed)
    total = spec.burn_in + spec.T
    noise = np.empty((total, spec.d))
    for j in range(spec.d):
        noise[:, j] = spec.noise[j].draw(rng, total)

    order = spec._topological_contemporaneous()
    lagged_by_target: dict[int, list[ScmLink]] = {j: [] for j in range(spec.d)}
    contemp_by_target: dict[int, list[ScmLink]] = {j: [] for j in range(spec.d)}
    for ln in spec.links:
        (contemp_by_target if ln.lag == 0 else lagged_by_target)[ln.target_var].append(ln)

    values = np.zeros((total, spec.d))
    for t in range(total):
        for j in order:
            acc = noise[t, j]
            for ln in lagged_by_target[j]:
                if t - ln.lag >= 0:
                    acc += ln.apply(values[t - ln.lag, ln.source_var])
            for ln in contemp_by_target[j]:
                acc += ln.apply(values[t, ln.source_var])
            values[t, j] = acc

    values = values[spec.burn_in :]
    if not np.all(np.isfinite(values)):
        raise ValueError("simulation diverged; check mechanism coefficients")
    _stationarity_check(values, spec.variable_names)

    return TimeSeriesPanel(
        subject_id=f"synth-{seed}",
        start_time=_START_TIME,
        resolution_seconds=spec.resolution_seconds,
        variable_names=spec.variable_names,
        values=values,
    )


def ground_truth_graph(spec: ScmSpec, tau_max: "int | None" = None) -> CausalGraph:
    """The spec's link set as a graph; statistic/p-value carry sentinels.

    ``tau_max`` widens the lag window (e.g. to match a discovery run) and
    defaults to the largest lag in the spec.
    """
    if tau_max is None:
        tau_max = max(spec.max_lag, 1)
    links = [
        Link(
            source=LaggedVariable(ln.source_var, ln.lag),
            target_var=ln.target_var,
            orientation=DIRECTED,
            statistic=TRUTH_STATISTIC,
            p_value=TRUTH_P_VALUE,
        )
        for ln in spec.links
    ]
    return CausalGraph(
        d=spec.d,
        tau_max=tau_max,
        links=links,
        variable_names=spec.variable_names,
        subject_id="ground-truth",
        resolution_seconds=spec.resolution_seconds,
    )


@dataclass(frozen=True)
class RecoveryScore:
    """Adjacency-level agreement between a discovered graph and the truth."""

    true_positive_adjacencies: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float


def _adjacency_keys(graph: CausalGraph) -> set[tuple[int, int, int]]:
    # Lag-0 adjacencies compare orientation-agnostically.
    keys = set()
    for ln in graph.links:
        i, tau, j = ln.key
        keys.add((min(i, j), 0, max(i, j)) if tau == 0 else (i, tau, j))
    return keys


def score(found: CausalGraph, truth: CausalGraph) -> RecoveryScore:
    """Adjacency precision/recall of ``found`` against ``truth``.

    Empty-set conventions: precision is 1 when nothing was found, recall is 1
    when the truth has no links.
    """
    if found.d != truth.d or found.tau_max != truth.tau_max:
        raise ValueError(
            f"graph shapes differ: d={found.d}/{truth.d}, "
            f"tau_max={found.tau_max}/{truth.tau_max}"
        )
    found_keys = _adjacency_keys(found)
    truth_keys = _adjacency_keys(truth)
    tp = len(found_keys & truth_keys)
    fp = len(found_keys - truth_keys)
    fn = len(truth_keys - found_keys)
    return RecoveryScore(
        true_positive_adjacencies=tp,
        false_positives=fp,
        false_negatives=fn,
        precision=1.0 if tp + fp == 0 else tp / (tp + fp),
        recall=1.0 if tp + fn == 0 else tp / (tp + fn),
    )
