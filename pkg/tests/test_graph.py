import pytest

from tscausal import (
    DIRECTED,
    UNORIENTED,
    CausalGraph,
    IntegrityError,
    LaggedVariable,
    Link,
)

# The four-variable window graph used throughout (1-based in the figure,
# 0-based here): x0 <- x0@1, x0 <- x1@1, x2 <- x1@2, x2 <- x2@1, x2 <- x3@3.
FIG_LINKS = [
    Link(LaggedVariable(0, 1), 0),
    Link(LaggedVariable(1, 1), 0),
    Link(LaggedVariable(1, 2), 2),
    Link(LaggedVariable(2, 1), 2),
    Link(LaggedVariable(3, 3), 2),
]


def fig_graph():
    return CausalGraph(d=4, tau_max=3, links=FIG_LINKS)


class TestParentsOf:
    def test_parents_of_x2(self):
        parents = fig_graph().parents_of(2)
        assert parents == {
            LaggedVariable(1, 2),
            LaggedVariable(2, 1),
            LaggedVariable(3, 3),
        }

    def test_empty_graph(self):
        g = CausalGraph(d=3, tau_max=2, links=[])
        assert g.parents_of(1) == set()

    def test_parents_at_window_head(self):
        # querying one step back shifts every parent's lag by one
        parents = fig_graph().parents_of(0, lag=1)
        assert parents == {LaggedVariable(0, 2), LaggedVariable(1, 2)}

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            fig_graph().parents_of(4)

    def test_unoriented_links_are_not_parents(self):
        g = CausalGraph(
            d=2, tau_max=1, links=[Link(LaggedVariable(0, 0), 1, UNORIENTED)]
        )
        assert g.parents_of(1) == set()


class TestToSummary:
    def test_collapses_lags(self):
        g = CausalGraph(
            d=3,
            tau_max=3,
            links=[Link(LaggedVariable(0, 1), 1), Link(LaggedVariable(0, 3), 1)],
        )
        assert g.to_summary().edges == frozenset({(0, 1)})

    def test_empty(self):
        g = CausalGraph(d=2, tau_max=1, links=[])
        assert g.to_summary().edges == frozenset()

    def test_fig_graph_enumeration(self):
        # oracle: walk the five drawn arrows, collapse lags
        assert fig_graph().to_summary().edges == frozenset(
            {(0, 0), (1, 0), (1, 2), (2, 2), (3, 2)}
        )

    def test_edge_count_at_most_link_count(self):
        g = fig_graph()
        assert len(g.to_summary().edges) <= len(g.links)


class TestLagLinkIndicator:
    def test_single_link(self):
        g = CausalGraph(d=2, tau_max=3, links=[Link(LaggedVariable(0, 2), 1)])
        assert g.lag_link_indicator(0, 1).tolist() == [False, False, True, False]

    def test_eight_hours_at_one_minute_has_481_entries(self):
        g = CausalGraph(d=2, tau_max=480, links=[])
        assert len(g.lag_link_indicator(0, 1)) == 481

    def test_no_links(self):
        g = fig_graph()
        assert not g.lag_link_indicator(0, 3).any()

    def test_unoriented_matches_both_directions(self):
        g = CausalGraph(
            d=2, tau_max=1, links=[Link(LaggedVariable(0, 0), 1, UNORIENTED)]
        )
        assert g.lag_link_indicator(0, 1)[0]
        assert g.lag_link_indicator(1, 0)[0]

    def test_directed_lag0_matches_one_direction(self):
        g = CausalGraph(d=2, tau_max=1, links=[Link(LaggedVariable(0, 0), 1, DIRECTED)])
        assert g.lag_link_indicator(0, 1)[0]
        assert not g.lag_link_indicator(1, 0)[0]


class TestSerialization:
    def test_round_trip_identity(self):
        g = CausalGraph(
            d=4,
            tau_max=3,
            links=FIG_LINKS + [Link(LaggedVariable(0, 0), 3, UNORIENTED, 0.4, 0.001)],
            variable_names=("pm2_5", "temperature", "humidity", "breathing_rate"),
            subject_id="subj-1",
            resolution_seconds=60,
        )
        assert CausalGraph.from_json(g.to_json()) == g

    def test_lag_requires_direction_after_deserialization(self):
        g = fig_graph()
        doc = g.to_json_dict()
        doc["links"][0]["orientation"] = UNORIENTED
        with pytest.raises(ValueError):
            CausalGraph.from_json_dict(doc)


class TestInvariants:
    def test_lagged_link_must_be_directed(self):
        with pytest.raises(ValueError):
            Link(LaggedVariable(0, 2), 1, UNORIENTED)

    def test_no_contemporaneous_self_link(self):
        with pytest.raises(ValueError):
            Link(LaggedVariable(1, 0), 1)

    def test_p_value_range(self):
        with pytest.raises(ValueError):
            Link(LaggedVariable(0, 1), 1, DIRECTED, 0.0, 1.5)

    def test_duplicate_links_rejected(self):
        with pytest.raises(IntegrityError):
            CausalGraph(
                d=2,
                tau_max=1,
                links=[Link(LaggedVariable(0, 1), 1), Link(LaggedVariable(0, 1), 1)],
            )

    def test_lag0_directed_cycle_rejected(self):
        with pytest.raises(IntegrityError):
            CausalGraph(
                d=2,
                tau_max=1,
                links=[
                    Link(LaggedVariable(0, 0), 1, DIRECTED),
                    Link(LaggedVariable(1, 0), 0, DIRECTED),
                ],
            )

    def test_lag_above_tau_max_rejected(self):
        with pytest.raises(ValueError):
            CausalGraph(d=2, tau_max=1, links=[Link(LaggedVariable(0, 2), 1)])

    def test_negative_lag_rejected(self):
        with pytest.raises(ValueError):
            LaggedVariable(0, -1)
