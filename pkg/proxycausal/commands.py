"""
Command bodies for the proxycausal CLI.

Each command takes a validated RunConfig, writes its artifacts under
config.out and returns the JSON document it wrote last.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, PreconditionError, ProxyCausalError, UsageError
from .models.config import (
    BENCHMARK_TARGETS, RunConfig, config_from_dict, config_to_dict, format_target, oracle_proxies,
    resolved_bins, resolved_lambdas, validate_config,
)
from .models.curve import EffectCurve, as_grid, default_grid
from .models.dataset import Dataset, read_csv, write_csv
from .models.persistence import (
    bridge_from_dict, bridge_to_dict, curve_to_dict, dumps, graph_to_dict, load_json, proxies_to_dict,
    save_json, spec_to_dict,
)
from .models.scm import (
    ROBUSTNESS_NOISE, ScmSpec, builtin_scenario, ground_truth_curve, parse_scenario_id, sample,
)
from .utils.bridge import (
    OUTCOME_BRIDGE, TREATMENT_BRIDGE, BridgeModel, KernelConfig, fit_outcome_bridge, fit_treatment_bridge,
)
from .utils.discovery import (
    BipartiteGraph, ProxyAssignment, discover_graph, explicit_proxies, graph_metrics, select_proxies,
    truth_graph,
)
from .utils.estimator import cmae, effect_curve
from .utils.proxytest import test_edge
from .views.curve import write_curve_csv, write_curve_svg
from .views.graph import write_dot

logger = logging.getLogger(__name__)

CALIBRATION_BINS = (14, 10, 5)
CALIBRATION_N = 1000
BRIDGE_FILES = {OUTCOME_BRIDGE: "bridge_h.json", TREATMENT_BRIDGE: "bridge_q.json"}
DEFAULT_BIN_SWEEP = ((10, 6, 5), (15, 8, 5), (20, 10, 5))
# Second parameter of each calibration scenario when the id omits it.
CALIBRATION_DEFAULTS = {
    "proxy-strength": "linear",
    "confounding-strength": "linear",
    "noise-robustness": "normal",
}


# Inputs


def scenario_spec(config: RunConfig) -> ScmSpec:
    """The ScmSpec named by config.scenario."""
    name, _ = parse_scenario_id(config.scenario)
    if name == "synthetic-main":
        return builtin_scenario(config.scenario, random_links=config.random_links,
                                link_seed=config.link_seed)
    return builtin_scenario(config.scenario)


def load_dataset(config: RunConfig, seed: int = None) -> Tuple[Dataset, Optional[ScmSpec]]:
    """
    Observed dataset of a run and, for scenarios, the model that produced it.

    Args:
        config: Validated config
        seed: Overrides config.seed for scenario draws

    Returns:
        Tuple of (observed dataset, spec or None)
    """
    if config.csv_path:
        return read_csv(config.csv_path), None
    spec = scenario_spec(config)
    dataset = sample(spec, config.n, config.seed if seed is None else seed)
    return dataset.observed(), spec


def _check_columns(dataset: Dataset, names: Sequence[str]):
    missing = [name for name in names if name and not dataset.has(name)]
    if missing:
        raise ConfigError(f"no column named {', '.join(repr(name) for name in missing)}")


def resolve_grid(config: RunConfig, width: int) -> np.ndarray:
    """Dose grid for a target treating width variables; scalar grids repeat along the diagonal."""
    if config.grid is None:
        return default_grid(width, config.grid_points)
    grid = np.asarray(config.grid, dtype=float)
    if grid.ndim == 1 and width > 1:
        grid = np.repeat(grid[:, None], width, axis=1)
    return as_grid(grid, width)


def resolve_proxies(config: RunConfig, dataset: Dataset,
                    graph: Optional[BipartiteGraph] = None) -> Tuple[ProxyAssignment, Optional[BipartiteGraph]]:
    """
    Proxy roles for the configured target: explicit, oracle or from a discovered graph.

    Returns:
        Tuple of (assignment, graph used or None)
    """
    treated, outcome = config.treated, config.outcome
    if config.proxy_mode == "explicit":
        _check_columns(dataset, (config.z, config.w))
        try:
            return explicit_proxies(treated, outcome, config.z, config.w, dataset.names), graph
        except PreconditionError as e:
            raise ConfigError(str(e)) from e
    if config.oracle_proxies:
        pair = oracle_proxies(treated, outcome)
        if pair is None:
            raise ConfigError(f"no oracle proxies known for {format_target(treated, outcome)}")
        return ProxyAssignment(tuple(treated), outcome, pair[0], pair[1], "oracle"), graph
    if graph is None:
        graph = discover_graph(dataset, resolved_bins(config), config.alpha, config.proxy_rule,
                               config.strategy, config.jobs)
    return select_proxies(graph, treated, outcome), graph


def load_bridge(directory: str, kind: str, proxies: ProxyAssignment) -> BridgeModel:
    """A saved bridge of the given kind, checked against the target's proxies."""
    path = Path(directory) / BRIDGE_FILES[kind]
    model = bridge_from_dict(load_json(path))
    proxy = proxies.w if kind == OUTCOME_BRIDGE else proxies.z
    if model.kind != kind or model.treated != tuple(proxies.treated) or model.proxy != proxy:
        raise ConfigError(f"{path} holds a {model.kind} bridge for {','.join(model.treated)} "
                          f"via {model.proxy!r}, expected {kind} via {proxy!r}")
    return model


def fit_bridges(dataset: Dataset, proxies: ProxyAssignment,
                config: RunConfig) -> Tuple[BridgeModel, Optional[BridgeModel]]:
    """Outcome and treatment bridges, loaded from config.bridges when given."""
    if config.bridges:
        h = load_bridge(config.bridges, OUTCOME_BRIDGE, proxies)
        q = None if config.disable_q else load_bridge(config.bridges, TREATMENT_BRIDGE, proxies)
        logger.info("reusing bridges from %s", config.bridges)
        return h, q
    lambda_h, lambda_q = resolved_lambdas(config)
    kernel = KernelConfig(lambda_h=lambda_h, lambda_q=lambda_q)
    logger.debug("fitting bridges with lambda_h=%g lambda_q=%g, Z=%s W=%s",
                 lambda_h, lambda_q, proxies.z, proxies.w)
    h = fit_outcome_bridge(dataset, proxies, kernel)
    q = None if config.disable_q else fit_treatment_bridge(dataset, proxies, kernel)
    return h, q


def estimate_curve(dataset: Dataset, proxies: ProxyAssignment, config: RunConfig,
                   grid: np.ndarray) -> EffectCurve:
    """Fit both bridges and evaluate the kernel doubly-robust curve."""
    h, q = fit_bridges(dataset, proxies, config)
    return effect_curve(dataset, h, q, proxies, grid, jobs=config.jobs)


def truth_curve(spec: ScmSpec, config: RunConfig, grid: np.ndarray) -> EffectCurve:
    return ground_truth_curve(spec, config.outcome, config.treated, grid,
                              replicates=config.replicates, seed=config.seed, jobs=config.jobs)


# Commands


def cmd_simulate(config: RunConfig) -> Dict[str, Any]:
    """
    Draw a scenario dataset and write it with a JSON sidecar.

    Returns:
        The sidecar document
    """
    validate_config(config)
    if not config.scenario:
        raise UsageError("simulate needs a scenario, not a CSV source")
    out = Path(config.out)
    dataset, spec = load_dataset(config)
    csv_path = write_csv(dataset, out / "dataset.csv")
    sidecar = {
        "scenario": config.scenario,
        "n": config.n,
        "seed": config.seed,
        "columns": list(dataset.names),
        "spec": spec_to_dict(spec),
    }
    save_json(sidecar, out / "dataset.json")
    logger.info("wrote %d samples of %s to %s", dataset.n, config.scenario, csv_path)
    return sidecar


def run_discovery(config: RunConfig, dataset: Dataset, spec: Optional[ScmSpec]) -> Tuple[BipartiteGraph, Dict[str, Any]]:
    bins = resolved_bins(config)
    graph = discover_graph(dataset, bins, config.alpha, config.proxy_rule, config.strategy, config.jobs)
    document = {"graph": graph_to_dict(graph), "bins": list(bins), "seed": config.seed,
                "proxy_rule": config.proxy_rule}
    if spec is not None:
        precision, recall, f1 = graph_metrics(graph, truth_graph(spec))
        document["metrics"] = {"precision": precision, "recall": recall, "f1": f1}
    return graph, document


def cmd_discover(config: RunConfig) -> Dict[str, Any]:
    """
    Test every treatment -> outcome pair and write the graph as JSON and DOT.

    Returns:
        The graph document
    """
    validate_config(config)
    out = Path(config.out)
    dataset, spec = load_dataset(config)
    graph, document = run_discovery(config, dataset, spec)
    save_json(document, out / "graph.json")
    write_dot(graph, out / "graph.dot")
    logger.info("discovered %d edges among %d x %d pairs", len(graph.edges()), graph.I, graph.J)
    return document


def run_estimation(config: RunConfig, dataset: Dataset, spec: Optional[ScmSpec],
                   graph: Optional[BipartiteGraph] = None) -> Dict[str, Any]:
    out = Path(config.out)
    _check_columns(dataset, tuple(config.treated) + (config.outcome,))
    proxies, graph = resolve_proxies(config, dataset, graph)
    grid = resolve_grid(config, len(config.treated))
    h, q = fit_bridges(dataset, proxies, config)
    curve = effect_curve(dataset, h, q, proxies, grid, jobs=config.jobs)

    truth = truth_curve(spec, config, grid) if spec is not None else None
    write_curve_csv(curve, out / "curve.csv", truth)
    write_curve_svg(curve, out / "curve.svg", truth)
    for model in (h, q):
        if model is not None:
            save_json(bridge_to_dict(model), out / BRIDGE_FILES[model.kind])

    summary = {
        "target": format_target(config.treated, config.outcome),
        "proxies": proxies_to_dict(proxies),
        "lambda_h": h.config.lambda_h,
        "lambda_q": None if q is None else q.config.lambda_q,
        "n": dataset.n,
        "seed": config.seed,
        "curve": curve_to_dict(curve),
    }
    if truth is not None:
        summary["truth"] = curve_to_dict(truth)
        summary["cmae"] = cmae(curve, truth)
    return summary


def cmd_estimate(config: RunConfig) -> Dict[str, Any]:
    """
    Estimate the effect curve of the configured target.

    Writes curve.csv, curve.svg and summary.json.

    Returns:
        The summary document
    """
    validate_config(config, require_target=True)
    dataset, spec = load_dataset(config)
    summary = run_estimation(config, dataset, spec)
    save_json(summary, Path(config.out) / "summary.json")
    logger.info("estimated %s over %d grid points", summary["target"], len(summary["curve"]["estimates"]))
    return summary


def cmd_pipeline(config: RunConfig) -> Dict[str, Any]:
    """Discovery followed by estimation on the same dataset."""
    validate_config(config, require_target=True)
    out = Path(config.out)
    dataset, spec = load_dataset(config)
    graph, document = run_discovery(config, dataset, spec)
    save_json(document, out / "graph.json")
    write_dot(graph, out / "graph.dot")
    summary = run_estimation(config, dataset, spec, graph)
    summary["discovery"] = document
    save_json(summary, out / "summary.json")
    logger.info("pipeline for %s used Z=%s W=%s (%s)", summary["target"],
                summary["proxies"]["z"], summary["proxies"]["w"], summary["proxies"]["case"])
    return summary


# Benchmark


def replicate_seeds(seed: int, reps: int) -> List[int]:
    """Per-replicate seeds derived from the run seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(reps)]


def _map(function: Callable, tasks: Sequence, jobs: int) -> List:
    """Run tasks in order, on a process pool when jobs > 1."""
    if jobs <= 1 or len(tasks) <= 1:
        return [function(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(function, tasks))


def _summary(values: Sequence[float]) -> Dict[str, Any]:
    values = [v for v in values if v is not None]
    if not values:
        return {"mean": None, "std": None}
    return {"mean": float(np.mean(values)), "std": float(np.std(values))}


def _table_replicate(task) -> Dict[str, Any]:
    config_data, rep, seed, truth_data = task
    config = config_from_dict(config_data)
    dataset, _ = load_dataset(config, seed=seed)
    truth = EffectCurve(grid=np.asarray(truth_data[0]), estimates=np.asarray(truth_data[1]))
    try:
        config = config.update(jobs=1, bridges=None)
        proxies, _ = resolve_proxies(config, dataset)
        curve = estimate_curve(dataset, proxies, config, truth.grid)
    except ProxyCausalError as e:
        logger.warning("replicate %d (seed %d) failed: %s", rep, seed, e)
        return {"rep": rep, "seed": seed, "cmae": None, "error": f"{e.category}: {e}"}
    value = cmae(curve, truth)
    logger.info("replicate %d (seed %d): cMAE %.4f", rep, seed, value)
    return {"rep": rep, "seed": seed, "cmae": value, "z": proxies.z, "w": proxies.w}


def effect_study(config: RunConfig, seeds: Sequence[int]) -> Dict[str, Any]:
    """cMAE over replicates for the configured target, or for every benchmark target."""
    targets = [(config.treated, config.outcome)] if config.treated else list(BENCHMARK_TARGETS)
    if not config.treated and parse_scenario_id(config.scenario)[0] != "synthetic-main":
        raise ConfigError("give a target; the default benchmark targets belong to synthetic-main")
    spec = scenario_spec(config)
    results = {}
    for treated, outcome in targets:
        target_config = config.update(treated=treated, outcome=outcome)
        grid = resolve_grid(target_config, len(treated))
        truth = truth_curve(spec, target_config, grid)
        tasks = [(config_to_dict(target_config), rep, seed, (truth.grid.tolist(), truth.estimates.tolist()))
                 for rep, seed in enumerate(seeds)]
        replicates = sorted(_map(_table_replicate, tasks, config.jobs), key=lambda r: r["rep"])
        entry = _summary([r["cmae"] for r in replicates])
        entry.update({"replicates": replicates, "truth": curve_to_dict(truth),
                      "failures": sum(r["cmae"] is None for r in replicates)})
        results[format_target(treated, outcome)] = entry
    return results


def _discovery_replicate(task) -> Dict[str, Any]:
    config_data, rep, seed = task
    config = config_from_dict(config_data)
    dataset, spec = load_dataset(config, seed=seed)
    graph = discover_graph(dataset, resolved_bins(config), config.alpha, config.proxy_rule, config.strategy)
    precision, recall, f1 = graph_metrics(graph, truth_graph(spec))
    logger.info("replicate %d (seed %d): F1 %.3f", rep, seed, f1)
    return {"rep": rep, "seed": seed, "precision": precision, "recall": recall, "f1": f1,
            "edges": [list(edge) for edge in graph.edges()]}


def discovery_study(config: RunConfig, seeds: Sequence[int]) -> Dict[str, Any]:
    """Precision, recall and F1 of discovery against the scenario's true graph."""
    tasks = [(config_to_dict(config), rep, seed) for rep, seed in enumerate(seeds)]
    replicates = sorted(_map(_discovery_replicate, tasks, config.jobs), key=lambda r: r["rep"])
    return {
        "bins": list(resolved_bins(config)),
        "precision": _summary([r["precision"] for r in replicates]),
        "recall": _summary([r["recall"] for r in replicates]),
        "f1": _summary([r["f1"] for r in replicates]),
        "replicates": replicates,
    }


def bin_sweep_study(config: RunConfig, seeds: Sequence[int]) -> List[Dict[str, Any]]:
    """discovery_study repeated for each bin setting."""
    settings = config.bin_sweep or DEFAULT_BIN_SWEEP
    return [discovery_study(config.update(bins=tuple(bins)), seeds) for bins in settings]


def _calibration_replicate(task) -> Dict[str, Any]:
    scenario, n, rep, seed, bins, alpha = task
    dataset = sample(builtin_scenario(scenario), n, seed)
    try:
        result = test_edge(dataset, "A", "Y", "W", bins=bins, alpha=alpha)
    except ProxyCausalError as e:
        return {"rep": rep, "seed": seed, "p_value": None, "reject": True, "error": f"{e.category}: {e}"}
    return {"rep": rep, "seed": seed, "p_value": result.p_value, "reject": result.reject}


def calibration_study(scenario: str, seeds: Sequence[int], alpha: float = 0.05,
                      bins: Tuple[int, int, int] = CALIBRATION_BINS, n: int = CALIBRATION_N,
                      jobs: int = 1) -> Dict[str, Any]:
    """
    Empirical rejection rates of the edge test A -> Y with proxy W.

    Args:
        scenario: "proxy-strength(beta[,form])", "confounding-strength(beta[,form])"
            or "noise-robustness(beta[,noise])"; both the causal and the
            independent case are run
        seeds: One dataset seed per replicate
        alpha: Significance level
        bins: (M, N, L) bin counts
        n: Samples per replicate
        jobs: Worker processes

    Returns:
        Type-I error on the independent case, type-II error on the causal
        case, and the per-replicate p-values
    """
    name, params = parse_scenario_id(scenario)
    if name not in CALIBRATION_DEFAULTS or not params:
        raise ConfigError(f"calibration needs a {', '.join(CALIBRATION_DEFAULTS)} scenario with beta")
    form = params[1] if len(params) > 1 else CALIBRATION_DEFAULTS[name]
    document = {"scenario": f"{name}({params[0]},{form})", "bins": list(bins), "alpha": alpha, "n": n}
    for case in ("independent", "causal"):
        case_id = f"{name}({params[0]},{form},{case})"
        tasks = [(case_id, n, rep, seed, tuple(bins), alpha) for rep, seed in enumerate(seeds)]
        replicates = sorted(_map(_calibration_replicate, tasks, jobs), key=lambda r: r["rep"])
        rate = float(np.mean([r["reject"] for r in replicates]))
        document[case] = {"rejection_rate": rate, "replicates": replicates}
    document["type_I"] = document["independent"]["rejection_rate"]
    document["type_II"] = 1.0 - document["causal"]["rejection_rate"]
    logger.info("calibration %s: type I %.3f, type II %.3f", document["scenario"],
                document["type_I"], document["type_II"])
    return document


def noise_study(scenario: str, seeds: Sequence[int], alpha: float = 0.05,
                bins: Tuple[int, int, int] = CALIBRATION_BINS, n: int = CALIBRATION_N,
                jobs: int = 1) -> List[Dict[str, Any]]:
    """calibration_study of noise-robustness(beta) under each noise law."""
    name, params = parse_scenario_id(scenario)
    if name != "noise-robustness" or not params:
        raise ConfigError("the noise study needs a noise-robustness(beta) scenario")
    return [calibration_study(f"{name}({params[0]},{dist})", seeds, alpha, bins, n, jobs)
            for dist in ROBUSTNESS_NOISE]


def cmd_benchmark(config: RunConfig) -> Dict[str, Any]:
    """
    Repeated-sampling study selected by config.study.

    table: cMAE per target; discovery: graph metrics; bins: graph metrics
    per bin setting; calibration: test error rates; noise: calibration under
    each noise law. The report embeds the config and per-replicate seeds,
    so replaying it reproduces it exactly.

    Returns:
        The report document, also written to report.json
    """
    validate_config(config)
    if not config.scenario:
        raise UsageError("benchmark needs a built-in scenario")
    seeds = replicate_seeds(config.seed, config.reps)
    report = {"config": config_to_dict(config), "study": config.study, "seeds": seeds}

    if config.study == "table":
        report["targets"] = effect_study(config, seeds)
    elif config.study == "discovery":
        report["discovery"] = discovery_study(config, seeds)
    elif config.study == "bins":
        report["bin_sweep"] = bin_sweep_study(config, seeds)
    else:
        bins = tuple(config.bins) if config.bins is not None else CALIBRATION_BINS
        study = calibration_study if config.study == "calibration" else noise_study
        report[config.study] = study(config.scenario, seeds, config.alpha, bins, config.n, config.jobs)

    save_json(report, Path(config.out) / "report.json")
    logger.info("benchmark report written to %s", Path(config.out) / "report.json")
    return report


def replay_report(report: Dict[str, Any]) -> str:
    """Rerun a benchmark from its embedded config and return the canonical JSON text."""
    config = config_from_dict(report["config"])
    replayed = cmd_benchmark(config)
    if replayed["seeds"] != report["seeds"]:
        raise ProxyCausalError("replayed seeds differ from the report", "replay-mismatch")
    return dumps(replayed)
