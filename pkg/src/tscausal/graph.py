"""Time-lag causal graphs.

A graph over ``d`` variables holds directed links ``source_var @ lag -> target_var``
with ``lag`` in ``[0, tau_max]``.  Lag-0 links between distinct variables represent
effects faster than the sampling interval; when constraint-based discovery cannot
orient such a link it is kept with the ``unoriented-contemporaneous`` marker rather
than dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError

DIRECTED = "directed"
UNORIENTED = "unoriented-contemporaneous"

_ORIENTATIONS = (DIRECTED, UNORIENTED)


@dataclass(frozen=True, order=True)
class LaggedVariable:
    """A (variable, lag) node identity; lag 0 is contemporaneous."""

    var_index: int
    lag: int

    def __post_init__(self) -> None:
        if self.var_index < 0:
            raise ValueError(f"var_index must be >= 0, got {self.var_index}")
        if self.lag < 0:
            raise ValueError(f"lag must be >= 0, got {self.lag}")

    def shifted(self, offset: int) -> "LaggedVariable":
        """The same variable seen ``offset`` steps further back in time."""
        return LaggedVariable(self.var_index, self.lag + offset)


@dataclass(frozen=True)
class Link:
    """One edge of the time-lag graph, annotated with its test outcome."""

    source: LaggedVariable
    target_var: int
    orientation: str = DIRECTED
    statistic: float = 0.0
    p_value: float = 0.0

    def __post_init__(self) -> None:
        if self.orientation not in _ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value must be in [0, 1], got {self.p_value}")
        if self.source.lag > 0 and self.orientation != DIRECTED:
            # Time order forces the direction of any lagged link.
            raise ValueError("links with lag > 0 must be directed")
        if self.source.lag == 0 and self.source.var_index == self.target_var:
            raise ValueError("contemporaneous self-links are not allowed")

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.source.var_index, self.source.lag, self.target_var)


@dataclass(frozen=True)
class SummaryGraph:
    """Projection of a time-lag graph collapsing all lags of each variable."""

    d: int
    edges: frozenset[tuple[int, int]]


class CausalGraph:
    """Window representation of the full time-lag DAG.

    Immutable after construction; safe to share across threads.
    """

    def __init__(
        self,
        d: int,
        tau_max: int,
        links: "list[Link] | tuple[Link, ...]",
        variable_names: "list[str] | tuple[str, ...] | None" = None,
        subject_id: str = "",
        resolution_seconds: int = 0,
    ) -> None:
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        if tau_max < 0:
            raise ValueError(f"tau_max must be >= 0, got {tau_max}")
        if variable_names is None:
            variable_names = [f"x{i}" for i in range(d)]
        if len(variable_names) != d:
            raise ValueError("variable_names length must equal d")
        if len(set(variable_names)) != d:
            raise ValueError("variable_names must be unique")

        links = tuple(sorted(links, key=lambda ln: ln.key))
        seen: set[tuple[int, int, int]] = set()
        for ln in links:
            if not 0 <= ln.source.var_index < d or not 0 <= ln.target_var < d:
                raise ValueError(f"link {ln.key} references a variable outside [0, {d})")
            if ln.source.lag > tau_max:
                raise ValueError(f"link {ln.key} exceeds tau_max={tau_max}")
            if ln.key in seen:
                raise IntegrityError(f"duplicate link {ln.key}")
            seen.add(ln.key)

        self.d = d
        self.tau_max = tau_max
        self.variable_names = tuple(variable_names)
        self.links = links
        self.subject_id = subject_id
        self.resolution_seconds = resolution_seconds
        self._keys = seen
        self._check_contemporaneous_acyclic()

    def _check_contemporaneous_acyclic(self) -> None:
        children: dict[int, set[int]] = {i: set() for i in range(self.d)}
        for ln in self.links:
            if ln.source.lag == 0 and ln.orientation == DIRECTED:
                children[ln.source.var_index].add(ln.target_var)
        state = [0] * self.d  # 0 unvisited, 1 on stack, 2 done

        def visit(node: int) -> None:
            state[node] = 1
            for child in children[node]:
                if state[child] == 1:
                    raise IntegrityError("directed contemporaneous links form a cycle")
                if state[child] == 0:
                    visit(child)
            state[node] = 2

        for i in range(self.d):
            if state[i] == 0:
                visit(i)

    # -- queries ----------------------------------------------------------

    def variable_index(self, name: str) -> int:
        try:
            return self.variable_names.index(name)
        except ValueError:
            raise ValueError(f"unknown variable {name!r}") from None

    def parents_of(self, var: int, lag: int = 0) -> set[LaggedVariable]:
        """Direct causes of variable ``var`` observed ``lag`` steps back.

        With the default ``lag=0`` this is the parent set of the present-time
        node; ``lag=1`` returns the parents of the variable one step back in
        the window (each parent's lag shifted accordingly).  Unoriented
        contemporaneous adjacencies are not established causes and are excluded.
        """
        if not 0 <= var < self.d:
            raise ValueError(f"variable index {var} out of range [0, {self.d})")
        if lag < 0:
            raise ValueError("lag must be >= 0")
        return {
            ln.source.shifted(lag)
            for ln in self.links
            if ln.target_var == var and ln.orientation == DIRECTED
        }

    def to_summary(self) -> SummaryGraph:
        """Collapse lags: edge (i, j) iff some link i @ tau -> j exists."""
        return SummaryGraph(
            d=self.d,
            edges=frozenset((ln.source.var_index, ln.target_var) for ln in self.links),
        )

    def lag_link_indicator(self, source_var: int, target_var: int) -> np.ndarray:
        """Boolean vector over lags 0..tau_max marking source -> target links.

        Unoriented contemporaneous links match the query in either direction.
        """
        for v in (source_var, target_var):
            if not 0 <= v < self.d:
                raise ValueError(f"variable index {v} out of range [0, {self.d})")
        out = np.zeros(self.tau_max + 1, dtype=bool)
        for ln in self.links:
            if ln.source.lag == 0 and ln.orientation == UNORIENTED:
                pair = {ln.source.var_index, ln.target_var}
                if pair == {source_var, target_var}:
                    out[0] = True
            elif ln.source.var_index == source_var and ln.target_var == target_var:
                out[ln.source.lag] = True
        return out

    def has_link(self, source_var: int, lag: int, target_var: int) -> bool:
        return (source_var, lag, target_var) in self._keys

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "variable_names": list(self.variable_names),
            "tau_max": self.tau_max,
            "resolution_seconds": self.resolution_seconds,
            "links": [
                {
                    "source_var": ln.source.var_index,
                    "lag": ln.source.lag,
                    "target_var": ln.target_var,
                    "orientation": ln.orientation,
                    "statistic": ln.statistic,
                    "p_value": ln.p_value,
                }
                for ln in self.links
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CausalGraph":
        names = doc["variable_names"]
        links = [
            Link(
                source=LaggedVariable(item["source_var"], item["lag"]),
                target_var=item["target_var"],
                orientation=item["orientation"],
                statistic=float(item["statistic"]),
                p_value=float(item["p_value"]),
            )
            for item in doc["links"]
        ]
        return cls(
            d=len(names),
            tau_max=doc["tau_max"],
            links=links,
            variable_names=names,
            subject_id=doc.get("subject_id", ""),
            resolution_seconds=doc.get("resolution_seconds", 0),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CausalGraph":
        return cls.from_json_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return (
            self.d == other.d
            and self.tau_max == other.tau_max
            and self.variable_names == other.variable_names
            and self.links == other.links
            and self.subject_id == other.subject_id
            and self.resolution_seconds == other.resolution_seconds
        )

    def __repr__(self) -> str:
        return (
            f"CausalGraph(d={self.d}, tau_max={self.tau_max}, "
            f"links={len(self.links)}, subject_id={self.subject_id!r})"
        )
