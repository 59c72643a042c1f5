import json
from pathlib import Path

import numpy as np
import pytest

from tscausal import CausalGraph, LaggedVariable, Link, LinkTestRecord
from tscausal.cli import main
from tscausal.discovery import records_to_json_dict
from tscausal.panel import load_panel

CHAIN_SCM = {
    "d": 2,
    "T": 1200,
    "burn_in": 200,
    "resolution_seconds": 60,
    "variable_names": ["pm2_5", "breathing_rate"],
    "links": [
        {"source_var": 0, "lag": 1, "target_var": 0, "mechanism": "linear", "coefficient": 0.5},
        {"source_var": 0, "lag": 4, "target_var": 1, "mechanism": "linear", "coefficient": 0.5},
    ],
}


def write_scm(tmp_path, doc=CHAIN_SCM, name="scm.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read_bytes_tree(directory):
    return {
        p.name: p.read_bytes() for p in sorted(Path(directory).iterdir()) if p.is_file()
    }


class TestSimulateCommand:
    def test_emits_panels_and_truth(self, tmp_path):
        scm = write_scm(tmp_path)
        out = tmp_path / "panels"
        assert main(["simulate", "--scm", str(scm), "--n-subjects", "5",
                     "--out", str(out), "--seed", "3"]) == 0
        csvs = sorted(out.glob("*.csv"))
        assert len(csvs) == 5
        assert (out / "truth.graph.json").exists()
        panel = load_panel(csvs[0])
        assert panel.variable_names == ("pm2_5", "breathing_rate")
        assert panel.n_samples == 1200

    def test_same_seed_identical_files(self, tmp_path):
        scm = write_scm(tmp_path)
        for name in ("a", "b"):
            assert main(["simulate", "--scm", str(scm), "--n-subjects", "2",
                         "--out", str(tmp_path / name), "--seed", "9"]) == 0
        assert read_bytes_tree(tmp_path / "a") == read_bytes_tree(tmp_path / "b")

    def test_truth_matches_window_graph_enumeration(self, tmp_path):
        doc = {
            "d": 4, "T": 50, "burn_in": 0, "variable_names": ["x0", "x1", "x2", "x3"],
            "links": [
                {"source_var": 0, "lag": 1, "target_var": 0, "coefficient": 0.5},
                {"source_var": 1, "lag": 1, "target_var": 0, "coefficient": 0.5},
                {"source_var": 1, "lag": 2, "target_var": 2, "coefficient": 0.5},
                {"source_var": 2, "lag": 1, "target_var": 2, "coefficient": 0.5},
                {"source_var": 3, "lag": 3, "target_var": 2, "coefficient": 0.5},
            ],
        }
        scm = write_scm(tmp_path, doc)
        out = tmp_path / "panels"
        assert main(["simulate", "--scm", str(scm), "--n-subjects", "1", "--out", str(out)]) == 0
        truth = CausalGraph.from_json((out / "truth.graph.json").read_text())
        assert truth.parents_of(2) == {
            LaggedVariable(1, 2), LaggedVariable(2, 1), LaggedVariable(3, 3),
        }

    def test_unstable_spec_exits_1(self, tmp_path):
        doc = dict(CHAIN_SCM)
        doc["links"] = [
            {"source_var": 0, "lag": 1, "target_var": 0, "coefficient": 1.2}
        ]
        scm = write_scm(tmp_path, doc)
        assert main(["simulate", "--scm", str(scm), "--out", str(tmp_path / "o")]) == 1


@pytest.fixture(scope="module")
def panels(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("panels")
    scm = write_scm(tmp)
    out = tmp / "data"
    assert main(["simulate", "--scm", str(scm), "--n-subjects", "2",
                 "--out", str(out), "--seed", "1"]) == 0
    (out / "truth.graph.json").unlink()
    return out


class TestDiscoverCommand:
    def test_emits_graph_and_diagnostics(self, panels, tmp_path, capsys):
        out = tmp_path / "graphs"
        assert main(["discover", "--input-dir", str(panels), "--out", str(out),
                     "--tau-max", "6", "--seed", "1"]) == 0
        assert len(list(out.glob("*.graph.json"))) == 2
        assert len(list(out.glob("*.diagnostics.json"))) == 2
        graph = CausalGraph.from_json(next(iter(sorted(out.glob("*.graph.json")))).read_text())
        assert graph.has_link(0, 4, 1)
        assert "links" in capsys.readouterr().out

    def test_reruns_byte_identical_any_threads(self, panels, tmp_path):
        outs = []
        for name, threads in (("g1", "1"), ("g2", "2")):
            out = tmp_path / name
            assert main(["discover", "--input-dir", str(panels), "--out", str(out),
                         "--tau-max", "6", "--seed", "1", "--threads", threads]) == 0
            outs.append(read_bytes_tree(out))
        assert outs[0] == outs[1]

    def test_tau_max_480_window(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = ["timestamp,pm2_5,breathing_rate"]
        from datetime import datetime, timedelta, timezone

        t0 = datetime(2021, 1, 1, tzinfo=timezone.utc)
        for i in range(2880):
            ts = (t0 + timedelta(minutes=i)).isoformat()
            rows.append(f"{ts},{rng.normal()},{rng.normal()}")
        src = tmp_path / "s1.csv"
        src.write_text("\n".join(rows) + "\n")
        out = tmp_path / "graphs"
        assert main(["discover", str(src), "--out", str(out), "--tau-max", "480",
                     "--resolution", "60", "--seed", "0"]) == 0
        graph = CausalGraph.from_json((out / "s1.graph.json").read_text())
        assert graph.tau_max == 480
        # the candidate window spans 481 lags including the contemporaneous one
        assert len(graph.lag_link_indicator(0, 1)) == 481

    def test_bad_subject_gets_error_log_and_exit_1(self, panels, tmp_path):
        bad_dir = tmp_path / "mixed"
        bad_dir.mkdir()
        for p in panels.glob("*.csv"):
            (bad_dir / p.name).write_bytes(p.read_bytes())
        (bad_dir / "broken.csv").write_text("timestamp,pm2_5\nnot-a-time,1.0\n")
        out = tmp_path / "graphs"
        assert main(["discover", "--input-dir", str(bad_dir), "--out", str(out),
                     "--tau-max", "6", "--seed", "1"]) == 1
        assert (out / "broken.error.txt").exists()
        assert len(list(out.glob("*.graph.json"))) == 2  # good subjects still processed

    def test_unknown_config_key_is_usage_error(self, panels, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"tau_max": 6, "bogus_key": 1}))
        assert main(["discover", "--input-dir", str(panels), "--config", str(cfg),
                     "--out", str(tmp_path / "g")]) == 2

    def test_config_supplies_defaults_flags_override(self, panels, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "tau_max": 6, "out": str(tmp_path / "from_config"),
            "input_dir": str(panels), "seed": 1,
        }))
        assert main(["discover", "--config", str(cfg)]) == 0
        assert (tmp_path / "from_config").exists()
        assert main(["discover", "--config", str(cfg), "--out", str(tmp_path / "flag_wins")]) == 0
        assert (tmp_path / "flag_wins").exists()

    def test_missing_inputs_usage_error(self, tmp_path):
        assert main(["discover", "--out", str(tmp_path / "g"), "--tau-max", "4"]) == 2


def fabricate_cohort_dir(tmp_path, n_subjects=3, lag=7, tau_max=8, resolution=900):
    gdir = tmp_path / "graphs"
    gdir.mkdir()
    names = ("pm2_5", "temperature", "breathing_rate")
    for i in range(n_subjects):
        sid = f"subj-{i}"
        links = [Link(LaggedVariable(0, lag), 2, "directed", 0.5, 0.001)]
        graph = CausalGraph(
            d=3, tau_max=tau_max, links=links, variable_names=names,
            subject_id=sid, resolution_seconds=resolution,
        )
        (gdir / f"{sid}.graph.json").write_text(graph.to_json())
        records = []
        for target, source_pool in ((2, (0, 1)),):
            for src in source_pool:
                for tau in range(tau_max + 1):
                    records.append(
                        LinkTestRecord(
                            source=LaggedVariable(src, tau), target_var=target,
                            statistic=0.5 if (src == 0 and tau == lag) else 0.05 * (1 + i),
                            p_value=0.001 if (src == 0 and tau == lag) else 0.5,
                            cond_dim=1, n=100,
                        )
                    )
        doc = records_to_json_dict(records, sid, tau_max, resolution)
        (gdir / f"{sid}.diagnostics.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    return gdir


class TestCohortCommand:
    def test_shared_link_probability_row(self, tmp_path):
        gdir = fabricate_cohort_dir(tmp_path)
        out = tmp_path / "cohort"
        assert main(["cohort", "--graphs", str(gdir), "--source", "pm2_5",
                     "--target", "breathing_rate", "--out", str(out)]) == 0
        import csv

        rows = list(csv.DictReader(open(out / "lag_probability.csv")))
        by_lag = {r["lag_minutes"]: r["probability"] for r in rows}
        assert by_lag["105.0"] == "1.0"  # lag 7 at 900 s resolution
        for path in ("histogram.csv", "trajectory.csv", "correlations.csv"):
            assert (out / path).exists()
        for fig in ("histogram.png", "lag_probability.png", "trajectory.png"):
            assert (out / fig).exists()

    def test_no_figures_flag(self, tmp_path):
        gdir = fabricate_cohort_dir(tmp_path)
        out = tmp_path / "cohort"
        assert main(["cohort", "--graphs", str(gdir), "--source", "pm2_5",
                     "--target", "breathing_rate", "--out", str(out), "--no-figures"]) == 0
        assert not list(out.glob("*.png"))
        assert (out / "histogram.csv").exists()

    def test_empty_graph_dir_exit_1(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        assert main(["cohort", "--graphs", str(empty), "--out", str(tmp_path / "o")]) == 1

    def test_shape_mismatch_lists_offender(self, tmp_path, capsys):
        gdir = fabricate_cohort_dir(tmp_path)
        odd = CausalGraph(
            d=3, tau_max=4, links=[], variable_names=("pm2_5", "temperature", "breathing_rate"),
            subject_id="odd", resolution_seconds=900,
        )
        (gdir / "odd.graph.json").write_text(odd.to_json())
        (gdir / "odd.diagnostics.json").write_text(
            json.dumps(records_to_json_dict([], "odd", 4, 900))
        )
        assert main(["cohort", "--graphs", str(gdir), "--source", "pm2_5",
                     "--target", "breathing_rate", "--out", str(tmp_path / "o")]) == 1
        assert "odd" in capsys.readouterr().err

    def test_unknown_variable_exit_1(self, tmp_path):
        gdir = fabricate_cohort_dir(tmp_path)
        assert main(["cohort", "--graphs", str(gdir), "--source", "ozone",
                     "--target", "breathing_rate", "--out", str(tmp_path / "o")]) == 1


class TestBenchmarkCommand:
    def test_zero_seeds_usage_error(self, tmp_path):
        battery = tmp_path / "battery.json"
        battery.write_text(json.dumps({
            "cells": [{"name": "x", "n_seeds": 0, "tau_max": 2,
                       "scm": {"d": 2, "T": 200, "links": []}}]
        }))
        assert main(["benchmark", "--battery", str(battery), "--out", str(tmp_path / "o")]) == 2

    def test_small_battery(self, tmp_path):
        battery = tmp_path / "battery.json"
        battery.write_text(json.dumps({
            "cells": [
                {"name": "null", "test": "parcorr", "alpha": 0.05, "n_seeds": 4,
                 "tau_max": 2,
                 "scm": {"d": 2, "T": 400, "burn_in": 100, "links": []}},
                {"name": "link", "test": "parcorr", "alpha": 0.02, "n_seeds": 4,
                 "tau_max": 2,
                 "scm": {"d": 2, "T": 1000, "burn_in": 100, "links": [
                     {"source_var": 0, "lag": 1, "target_var": 1, "coefficient": 0.6}]}},
            ]
        }))
        out = tmp_path / "bench"
        assert main(["benchmark", "--battery", str(battery), "--out", str(out)]) == 0
        text = (out / "benchmark.csv").read_text().splitlines()
        assert text[0] == "name,test,alpha,T,n_seeds,precision,recall,fpr"
        assert len(text) == 3
        link_row = text[2].split(",")
        assert float(link_row[6]) >= 0.75  # recall on the strong link
        assert (out / "benchmark.png").exists()

    def test_missing_battery_usage_error(self, tmp_path):
        assert main(["benchmark", "--out", str(tmp_path / "o")]) == 2
