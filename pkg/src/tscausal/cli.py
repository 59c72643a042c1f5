"""Command-line front end: discover / simulate / cohort / benchmark.

Every command takes an optional JSON config file plus flag overrides (flags
win); unknown config keys are rejected.  All randomness flows from --seed and
per-subject work is pure, so reruns with the same config produce byte-identical
outputs at any --threads value.

Exit codes: 0 success, 1 data or runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import cohort as cohort_mod
from . import plots
from .citest import CMI_KNN, PARCORR
from .discovery import (
    DiscoveryConfig,
    records_from_json_dict,
    records_to_json_dict,
    run_discovery,
)
from .errors import TscausalError
from .fileio import atomic_write_text
from .graph import CausalGraph
from .panel import (
    BIN_VARIABLES,
    load_panel,
    resample,
    standardize,
    with_bins_sum,
    write_panel_csv,
)
from .synth import ScmSpec, ground_truth_graph, score, simulate

GRAPH_SUFFIX = ".graph.json"
DIAGNOSTICS_SUFFIX = ".diagnostics.json"

_TEST_FLAGS = {"parcorr": PARCORR, "cmi-knn": CMI_KNN}
_DEFAULT_ALPHA = {PARCORR: 0.02, CMI_KNN: 0.05}


class UsageError(Exception):
    pass


def _load_config_file(path: "str | None", allowed: set[str]) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def _merge(args: argparse.Namespace, config: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1, np.uint64)[0])


# -- discover ----------------------------------------------------------------

_DISCOVER_KEYS = {
    "inputs",
    "input_dir",
    "out",
    "tau_max",
    "resolution",
    "test",
    "alpha",
    "pc_alpha",
    "seed",
    "threads",
    "knn_k",
    "n_shuffles",
    "max_condition_dim",
    "q_max",
    "contemporaneous",
    "bins_sum",
}


def _discover_subject(task: tuple) -> dict:
    path_str, out_dir_str, config, resolution, bins_sum = task
    path, out_dir = Path(path_str), Path(out_dir_str)
    subject_id = path.stem
    try:
        panel = load_panel(path)
        if resolution is not None:
            panel = resample(panel, resolution)
        if bins_sum and all(b in panel.variable_names for b in BIN_VARIABLES):
            panel = with_bins_sum(panel)
        panel = standardize(panel)
        result = run_discovery(panel, config)
        atomic_write_text(out_dir / f"{subject_id}{GRAPH_SUFFIX}", result.graph.to_json())
        diag = records_to_json_dict(
            result.records, subject_id, config.tau_max, panel.resolution_seconds
        )
        atomic_write_text(
            out_dir / f"{subject_id}{DIAGNOSTICS_SUFFIX}",
            json.dumps(diag, indent=2, sort_keys=True),
        )
        return {"subject": subject_id, "links": len(result.graph.links), "error": None}
    except Exception as exc:  # per-subject isolation: one bad file must not kill the run
        atomic_write_text(
            out_dir / f"{subject_id}.error.txt",
            f"{exc}\n\n{traceback.format_exc()}",
        )
        return {"subject": subject_id, "links": 0, "error": str(exc)}


def cmd_discover(args: argparse.Namespace) -> int:
    config_doc = _load_config_file(args.config, _DISCOVER_KEYS)
    inputs = list(args.inputs or []) or list(config_doc.get("inputs") or [])
    input_dir = _merge(args, config_doc, "input_dir")
    if input_dir:
        inputs.extend(str(p) for p in sorted(Path(input_dir).glob("*.csv")))
    if not inputs:
        raise UsageError("no input panels given (positional paths, --input-dir, or config)")
    out = _merge(args, config_doc, "out")
    if out is None:
        raise UsageError("--out is required")
    tau_max = _merge(args, config_doc, "tau_max")
    if tau_max is None:
        raise UsageError("--tau-max is required")

    test_flag = _merge(args, config_doc, "test", "parcorr")
    if test_flag not in _TEST_FLAGS:
        raise UsageError(f"unknown test {test_flag!r}")
    ci_test = _TEST_FLAGS[test_flag]
    alpha = _merge(args, config_doc, "alpha", _DEFAULT_ALPHA[ci_test])
    contemporaneous = not args.no_contemporaneous and config_doc.get("contemporaneous", True)
    bins_sum = not args.no_bins_sum and config_doc.get("bins_sum", True)

    try:
        discovery_config = DiscoveryConfig(
            tau_max=int(tau_max),
            alpha=float(alpha),
            ci_test=ci_test,
            pc_alpha=_merge(args, config_doc, "pc_alpha"),
            max_condition_dim=_merge(args, config_doc, "max_condition_dim"),
            q_max=_merge(args, config_doc, "q_max"),
            seed=int(_merge(args, config_doc, "seed", 0)),
            knn_k=int(_merge(args, config_doc, "knn_k", 10)),
            n_shuffles=int(_merge(args, config_doc, "n_shuffles", 200)),
            include_contemporaneous=contemporaneous,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolution = _merge(args, config_doc, "resolution")
    resolution = int(resolution) if resolution is not None else None
    threads = int(_merge(args, config_doc, "threads", 1))

    tasks = [
        (str(p), str(out_dir), discovery_config, resolution, bins_sum)
        for p in sorted(inputs)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_discover_subject, tasks))
    else:
        results = [_discover_subject(t) for t in tasks]

    failed = 0
    for res in results:
        if res["error"] is None:
            print(f"{res['subject']}: {res['links']} links")
        else:
            failed += 1
            print(f"{res['subject']}: FAILED ({res['error']})", file=sys.stderr)
    return 1 if failed else 0


# -- simulate ----------------------------------------------------------------

_SIMULATE_KEYS = {"scm", "n_subjects", "out", "seed", "prefix"}


def cmd_simulate(args: argparse.Namespace) -> int:
    config_doc = _load_config_file(args.config, _SIMULATE_KEYS)
    scm_path = _merge(args, config_doc, "scm")
    if scm_path is None:
        raise UsageError("--scm is required")
    out = _merge(args, config_doc, "out")
    if out is None:
        raise UsageError("--out is required")
    n_subjects = int(_merge(args, config_doc, "n_subjects", 1))
    if n_subjects < 1:
        raise UsageError("--n-subjects must be >= 1")
    seed = int(_merge(args, config_doc, "seed", 0))
    prefix = _merge(args, config_doc, "prefix", "subject")

    spec = ScmSpec.load(scm_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_subjects):
        panel = simulate(spec, seed=_derive_seed(seed, i))
        write_panel_csv(panel, out_dir / f"{prefix}-{i:03d}.csv")
    truth = ground_truth_graph(spec)
    atomic_write_text(out_dir / f"truth{GRAPH_SUFFIX}", truth.to_json())
    print(f"wrote {n_subjects} panels and the ground-truth graph to {out_dir}")
    return 0


# -- cohort ------------------------------------------------------------------

_COHORT_KEYS = {
    "graphs",
    "diagnostics_alt",
    "source",
    "target",
    "out",
    "panels",
    "figures",
}


def _load_cohort_dir(dir_path: Path) -> tuple[list[CausalGraph], list[tuple]]:
    graph_files = sorted(dir_path.glob(f"*{GRAPH_SUFFIX}"))
    graph_files = [p for p in graph_files if p.name != f"truth{GRAPH_SUFFIX}"]
    if not graph_files:
        raise TscausalError(f"no graph files matching *{GRAPH_SUFFIX} in {dir_path}")
    graphs, diagnostics = [], []
    for gpath in graph_files:
        graphs.append(CausalGraph.from_json(gpath.read_text()))
        dpath = gpath.with_name(gpath.name[: -len(GRAPH_SUFFIX)] + DIAGNOSTICS_SUFFIX)
        if not dpath.exists():
            raise TscausalError(f"missing diagnostics sidecar {dpath}")
        diagnostics.append(records_from_json_dict(json.loads(dpath.read_text())))
    return graphs, diagnostics


def _check_cohort_shapes(graphs: list[CausalGraph]) -> None:
    def shape(g: CausalGraph):
        return (g.d, g.tau_max, g.variable_names)

    shapes = [shape(g) for g in graphs]
    reference = max(set(shapes), key=shapes.count)
    offenders = [g.subject_id for g in graphs if shape(g) != reference]
    if offenders:
        raise TscausalError(f"graphs have mismatched shapes: {', '.join(offenders)}")


def _paired_record_series(diagnostics, var_a: int, var_b: int, target: int, tau_max: int, field: str):
    """Per-subject vectors of a record field for (var_a -> target) and (var_b -> target),

    paired at lags where both records exist and were not skipped.
    """
    series_a, series_b = [], []
    for records in diagnostics:
        look_a = cohort_mod._record_lookup(records, var_a, target)
        look_b = cohort_mod._record_lookup(records, var_b, target)
        lags = [tau for tau in range(tau_max + 1) if tau in look_a and tau in look_b]
        series_a.append([getattr(look_a[t], field) for t in lags])
        series_b.append([getattr(look_b[t], field) for t in lags])
    return series_a, series_b


def cmd_cohort(args: argparse.Namespace) -> int:
    config_doc = _load_config_file(args.config, _COHORT_KEYS)
    graphs_dir = _merge(args, config_doc, "graphs")
    out = _merge(args, config_doc, "out")
    source_name = _merge(args, config_doc, "source", "pm2_5")
    target_name = _merge(args, config_doc, "target", "breathing_rate")
    if graphs_dir is None or out is None:
        raise UsageError("--graphs and --out are required")
    figures = not args.no_figures and config_doc.get("figures", True)

    graphs, diagnostics = _load_cohort_dir(Path(graphs_dir))
    _check_cohort_shapes(graphs)
    names = graphs[0].variable_names
    for required in (source_name, target_name):
        if required not in names:
            raise TscausalError(
                f"variable {required!r} not in cohort graphs (have: {', '.join(names)})"
            )
    source = names.index(source_name)
    target = names.index(target_name)
    tau_max = graphs[0].tau_max
    resolution = graphs[0].resolution_seconds or 60

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    counts = cohort_mod.link_count_histogram(graphs, source, target)
    curve = cohort_mod.lag_probability_curve(graphs, source, target)
    trajectory = cohort_mod.statistic_trajectory(
        diagnostics, source, target, tau_max, normalize=True
    )
    lags_seconds = np.arange(tau_max + 1) * resolution

    alt_dir = _merge(args, config_doc, "diagnostics_alt")
    alt_lags = alt_trajectory = None
    if alt_dir is not None:
        alt_graphs, alt_diags = _load_cohort_dir(Path(alt_dir))
        _check_cohort_shapes(alt_graphs)
        alt_source = alt_graphs[0].variable_names.index(source_name)
        alt_target = alt_graphs[0].variable_names.index(target_name)
        alt_trajectory = cohort_mod.statistic_trajectory(
            alt_diags, alt_source, alt_target, alt_graphs[0].tau_max, normalize=True
        )
        alt_lags = np.arange(alt_graphs[0].tau_max + 1) * (
            alt_graphs[0].resolution_seconds or 60
        )

    subject_ids = [g.subject_id for g in graphs]
    cohort_mod.write_histogram_csv(out_dir / "histogram.csv", subject_ids, counts)
    cohort_mod.write_lag_probability_csv(out_dir / "lag_probability.csv", lags_seconds, curve)

    secondary_column = None
    if alt_trajectory is not None:
        aligned = {int(s): float(v) for s, v in zip(alt_lags, alt_trajectory)}
        secondary_column = [aligned.get(int(s)) for s in lags_seconds]
    cohort_mod.write_trajectory_csv(
        out_dir / "trajectory.csv", lags_seconds, trajectory, secondary_column
    )

    reports = []
    reference_vars = [
        (idx, name) for idx, name in enumerate(names) if idx not in (source, target)
    ]
    for kind, field in ((cohort_mod.KIND_P_VALUES, "p_value"), (cohort_mod.KIND_STATISTICS, "statistic")):
        for idx, name in reference_vars:
            series_src, series_var = _paired_record_series(
                diagnostics, source, idx, target, tau_max, field
            )
            try:
                reports.append(
                    cohort_mod.correlation_report(series_src, series_var, kind, variable=name)
                )
            except TscausalError as exc:
                print(f"skipping {kind} correlation for {name}: {exc}", file=sys.stderr)

    panels_dir = _merge(args, config_doc, "panels")
    if panels_dir is not None:
        panel_by_subject = {}
        for sid in subject_ids:
            ppath = Path(panels_dir) / f"{sid}.csv"
            if ppath.exists():
                panel_by_subject[sid] = load_panel(ppath)
        if panel_by_subject:
            for idx, name in reference_vars:
                series_src, series_var = [], []
                for sid in subject_ids:
                    panel = panel_by_subject.get(sid)
                    if panel is None or name not in panel.variable_names:
                        continue
                    series_src.append(panel.column(source_name))
                    series_var.append(panel.column(name))
                if not series_src:
                    continue
                try:
                    reports.append(
                        cohort_mod.correlation_report(
                            series_src, series_var, cohort_mod.KIND_RAW_SERIES, variable=name
                        )
                    )
                except TscausalError as exc:
                    print(f"skipping raw-series correlation for {name}: {exc}", file=sys.stderr)

    cohort_mod.write_correlations_csv(out_dir / "correlations.csv", reports)

    if figures:
        pair = f"{source_name} -> {target_name}"
        plots.save_link_count_histogram(counts, out_dir / "histogram.png", pair)
        plots.save_lag_probability_curve(lags_seconds, curve, out_dir / "lag_probability.png", pair)
        plots.save_trajectory_comparison(
            lags_seconds, trajectory, out_dir / "trajectory.png", alt_lags, alt_trajectory
        )
        if reports:
            plots.save_correlation_bars(reports, out_dir / "correlations.png")

    print(
        f"cohort of {len(graphs)} subjects: wrote histogram, lag-probability, "
        f"trajectory and correlation tables to {out_dir}"
    )
    return 0


# -- benchmark ----------------------------------------------------------------

_BENCHMARK_KEYS = {"battery", "out", "seed", "threads", "figures"}


def _benchmark_cell_rep(task: tuple) -> dict:
    cell, cell_idx, rep, base_seed = task
    spec = ScmSpec.from_json_dict(cell["scm"])
    tau_max = int(cell.get("tau_max", max(spec.max_lag, 1)))
    ci_test = _TEST_FLAGS[cell.get("test", "parcorr")]
    config = DiscoveryConfig(
        tau_max=tau_max,
        alpha=float(cell.get("alpha", _DEFAULT_ALPHA[ci_test])),
        ci_test=ci_test,
        seed=_derive_seed(base_seed, cell_idx, rep, 1),
        knn_k=int(cell.get("knn_k", 10)),
        n_shuffles=int(cell.get("n_shuffles", 100)),
    )
    panel = standardize(simulate(spec, seed=_derive_seed(base_seed, cell_idx, rep, 0)))
    result = run_discovery(panel, config)
    truth = ground_truth_graph(spec, tau_max=tau_max)
    cell_score = score(result.graph, truth)
    d = spec.d
    possible = d * d * tau_max + d * (d - 1) // 2
    n_truth = (
        cell_score.true_positive_adjacencies + cell_score.false_negatives
    )
    denom = possible - n_truth
    fpr = cell_score.false_positives / denom if denom > 0 else 0.0
    return {
        "cell": cell_idx,
        "precision": cell_score.precision,
        "recall": cell_score.recall,
        "fpr": fpr,
    }


def cmd_benchmark(args: argparse.Namespace) -> int:
    config_doc = _load_config_file(args.config, _BENCHMARK_KEYS)
    battery_path = _merge(args, config_doc, "battery")
    out = _merge(args, config_doc, "out")
    if battery_path is None or out is None:
        raise UsageError("--battery and --out are required")
    seed = int(_merge(args, config_doc, "seed", 0))
    threads = int(_merge(args, config_doc, "threads", 1))
    figures = not args.no_figures and config_doc.get("figures", True)

    try:
        battery = json.loads(Path(battery_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read battery {battery_path}: {exc}") from None
    cells = battery.get("cells", [])
    if not cells:
        raise UsageError("battery has no cells")
    for cell in cells:
        if int(cell.get("n_seeds", 0)) < 1:
            raise UsageError(f"cell {cell.get('name', '?')!r} requests zero seeds")
        if cell.get("test", "parcorr") not in _TEST_FLAGS:
            raise UsageError(f"cell {cell.get('name', '?')!r} names an unknown test")

    tasks = [
        (cell, cell_idx, rep, seed)
        for cell_idx, cell in enumerate(cells)
        for rep in range(int(cell["n_seeds"]))
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_benchmark_cell_rep, tasks))
    else:
        outcomes = [_benchmark_cell_rep(t) for t in tasks]

    rows = []
    for cell_idx, cell in enumerate(cells):
        mine = [o for o in outcomes if o["cell"] == cell_idx]
        spec = ScmSpec.from_json_dict(cell["scm"])
        ci_test = _TEST_FLAGS[cell.get("test", "parcorr")]
        rows.append(
            {
                "name": cell.get("name", f"cell{cell_idx}"),
                "test": cell.get("test", "parcorr"),
                "alpha": float(cell.get("alpha", _DEFAULT_ALPHA[ci_test])),
                "T": spec.T,
                "n_seeds": len(mine),
                "precision": float(np.mean([o["precision"] for o in mine])),
                "recall": float(np.mean([o["recall"] for o in mine])),
                "fpr": float(np.mean([o["fpr"] for o in mine])),
            }
        )

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["name,test,alpha,T,n_seeds,precision,recall,fpr"]
    for r in rows:
        lines.append(
            f"{r['name']},{r['test']},{r['alpha']!r},{r['T']},{r['n_seeds']},"
            f"{r['precision']!r},{r['recall']!r},{r['fpr']!r}"
        )
    atomic_write_text(out_dir / "benchmark.csv", "\n".join(lines) + "\n")
    if figures:
        plots.save_benchmark_bars(rows, out_dir / "benchmark.png")
    for r in rows:
        print(
            f"{r['name']}: precision={r['precision']:.3f} recall={r['recall']:.3f} "
            f"fpr={r['fpr']:.4f} over {r['n_seeds']} seeds"
        )
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tscausal",
        description="Constraint-based causal discovery for multivariate time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_disc = sub.add_parser("discover", help="run discovery on per-subject panel CSVs")
    p_disc.add_argument("inputs", nargs="*", help="panel CSV files")
    p_disc.add_argument("--config", help="JSON config file")
    p_disc.add_argument("--input-dir", dest="input_dir", help="directory of panel CSVs")
    p_disc.add_argument("--out", help="output directory")
    p_disc.add_argument("--tau-max", dest="tau_max", type=int, help="maximum lag in steps")
    p_disc.add_argument(
        "--resolution", type=int, help="resample panels to this resolution (seconds)"
    )
    p_disc.add_argument("--test", choices=sorted(_TEST_FLAGS), help="CI test (default parcorr)")
    p_disc.add_argument("--alpha", type=float, help="significance level (default 0.02 / 0.05)")
    p_disc.add_argument("--pc-alpha", dest="pc_alpha", type=float, help="stage-one level")
    p_disc.add_argument("--seed", type=int)
    p_disc.add_argument("--threads", type=int, help="subject-level workers (default 1)")
    p_disc.add_argument("--knn-k", dest="knn_k", type=int, help="kNN parameter (default 10)")
    p_disc.add_argument("--n-shuffles", dest="n_shuffles", type=int)
    p_disc.add_argument("--max-condition-dim", dest="max_condition_dim", type=int)
    p_disc.add_argument("--q-max", dest="q_max", type=int)
    p_disc.add_argument(
        "--no-contemporaneous",
        dest="no_contemporaneous",
        action="store_true",
        help="drop lag-0 candidate links",
    )
    p_disc.add_argument(
        "--no-bins-sum",
        dest="no_bins_sum",
        action="store_true",
        help="do not derive a bins_sum column when bin0..bin6 are present",
    )
    p_disc.set_defaults(func=cmd_discover)

    p_sim = sub.add_parser("simulate", help="generate synthetic panels from an SCM spec")
    p_sim.add_argument("--config", help="JSON config file")
    p_sim.add_argument("--scm", help="SCM spec JSON file")
    p_sim.add_argument("--n-subjects", dest="n_subjects", type=int)
    p_sim.add_argument("--out", help="output directory")
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--prefix", help="subject file prefix (default 'subject')")
    p_sim.set_defaults(func=cmd_simulate)

    p_coh = sub.add_parser("cohort", help="aggregate per-subject graphs into cohort tables")
    p_coh.add_argument("--config", help="JSON config file")
    p_coh.add_argument("--graphs", help="directory of *.graph.json (+ diagnostics)")
    p_coh.add_argument(
        "--diagnostics-alt",
        dest="diagnostics_alt",
        help="second graph/diagnostics directory for the trajectory comparison",
    )
    p_coh.add_argument("--source", help="source variable name (default pm2_5)")
    p_coh.add_argument("--target", help="target variable name (default breathing_rate)")
    p_coh.add_argument("--panels", help="panel CSV directory for raw-series correlations")
    p_coh.add_argument("--out", help="output directory")
    p_coh.add_argument("--no-figures", dest="no_figures", action="store_true")
    p_coh.set_defaults(func=cmd_cohort)

    p_bench = sub.add_parser("benchmark", help="run seeded SCM batteries and score recovery")
    p_bench.add_argument("--config", help="JSON config file")
    p_bench.add_argument("--battery", help="battery JSON file")
    p_bench.add_argument("--out", help="output directory")
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument("--threads", type=int)
    p_bench.add_argument("--no-figures", dest="no_figures", action="store_true")
    p_bench.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (TscausalError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
