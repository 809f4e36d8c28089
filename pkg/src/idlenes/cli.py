"""``idlenes`` command line.

Subcommands: ``generate``, ``deploy``, ``optimize``, ``compare``, ``impact``
and ``replay``. Numerical parameters come from flags, then from ``--config``
(JSON or YAML), then from built-in defaults. Every output directory receives a
``manifest.json`` recording the command, input digests, resolved parameters
and stage timings; ``idlenes replay --manifest`` re-runs it.

Exit codes: 0 success, 2 usage or configuration error, 3 infeasible coverage,
4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

from . import __version__
from ._accel import backend_name
from .deployment import CapacityParams, DeploymentInfeasible, RateInfeasible, solve_deployment
from .energy import PowerConfig, fit_linear_cost
from .impact import analyze
from .nes import (
    DEFAULT_EXACT_LIMIT,
    DEFAULT_NODE_LIMIT,
    DEFAULT_SSB_THRESHOLD_DB,
    ActivationPlan,
    InfeasibleCoverage,
    Strategy,
    baseline_plan,
    optimize,
    uncovered_points,
)
from .radio import compute_link_map
from .scenario import Scenario, validate
from .twin import ConfigError, load_config

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4

STRATEGIES = [Strategy.LOCAL_BEAM.value, Strategy.CELL.value, Strategy.JOINT.value]
TABLE_COLUMNS = [
    "Strategy",
    "Number of Active Cells",
    "Number of Active Beams",
    "Energy Consumption (relative unit)",
    "Energy Saving (%)",
]
STRATEGY_LABELS = {
    Strategy.BASELINE: "Baseline",
    Strategy.LOCAL_BEAM: "Local beam-level optimization",
    Strategy.CELL: "Global cell-level optimization",
    Strategy.JOINT: "Global joint beam- and cell-level optimization",
}

DEFAULTS = {
    "ssb_threshold_db": DEFAULT_SSB_THRESHOLD_DB,
    "alpha": 0.8,
    "activity_factor": 0.1,
    "target_rate_mbps": 50.0,
    "exact_limit": DEFAULT_EXACT_LIMIT,
    "node_limit": DEFAULT_NODE_LIMIT,
    "threads": 1,
    "seed": None,
    "power_model": None,
}
_INT_PARAMS = {"exact_limit", "node_limit", "threads", "seed"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_mapping(path, what):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc.strerror}") from None
    try:
        if str(path).endswith((".yaml", ".yml")):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:  # json and yaml raise different types
        raise UsageError(f"{what} {path} is malformed: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{what} {path}: top level must be a mapping")
    return data


def resolve_params(args):
    """flags > config file > defaults."""
    params = dict(DEFAULTS)
    if getattr(args, "config", None) and args.command != "generate":
        for key, value in _read_mapping(args.config, "config").items():
            k = key.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"config: unknown field '{key}'")
            params[k] = value
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            params[k] = v
    for k in _INT_PARAMS:
        if params[k] is not None:
            try:
                params[k] = int(params[k])
            except (TypeError, ValueError):
                raise UsageError(f"{k}: expected an integer, got {params[k]!r}") from None
    for k in ("ssb_threshold_db", "alpha", "activity_factor", "target_rate_mbps"):
        try:
            params[k] = float(params[k])
        except (TypeError, ValueError):
            raise UsageError(f"{k}: expected a number, got {params[k]!r}") from None
    if params["threads"] < 1:
        raise UsageError("threads: must be >= 1")
    return params


def load_scenario(path):
    try:
        scenario = Scenario.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read scenario {path}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"scenario {path} is malformed: {exc}") from None
    problems = validate(scenario)
    if problems:
        shown = "; ".join(str(v) for v in problems[:5])
        raise UsageError(f"scenario {path} fails validation ({len(problems)} problems): {shown}")
    return scenario


def power_config(scenario, params):
    if params["power_model"] is None:
        return scenario.power_model
    try:
        return PowerConfig.from_dict(_read_mapping(params["power_model"], "power model"))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"power model: {exc}") from None


def write_json(path, data):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


class Run:
    """Collects what a command read, wrote and how long each stage took."""

    def __init__(self, args, argv, params):
        self.args = args
        self.argv = list(argv)
        self.params = params
        self.out = Path(args.out)
        self.inputs = {}
        self.timings = {}
        self.out.mkdir(parents=True, exist_ok=True)

    def read(self, path):
        self.inputs[str(Path(path).resolve())] = sha256_file(path)

    def timed(self, stage, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[stage] = round(time.perf_counter() - t0, 6)

    def finish(self, extra=None):
        outputs = {}
        for p in sorted(self.out.rglob("*")):
            if p.is_file() and p.name != "manifest.json":
                outputs[str(p.relative_to(self.out))] = sha256_file(p)
        manifest = {
            "tool": "idlenes",
            "version": __version__,
            "backend": backend_name(),
            "command": self.args.command,
            "argv": self.argv,
            "cwd": str(Path.cwd()),
            "inputs": self.inputs,
            "outputs": outputs,
            "config": self.params,
            "seed": self.params.get("seed"),
            "timings_s": self.timings,
        }
        if extra:
            manifest.update(extra)
        write_json(self.out / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------


def table_rows(plans, baseline_energy, with_time=True):
    rows = []
    for plan in plans:
        if plan.strategy is Strategy.BASELINE:
            saving, seconds = "N/A", "N/A"
        else:
            saving = f"{100.0 * (1.0 - plan.objective_value / baseline_energy):.1f}" if baseline_energy else "0.0"
            seconds = f"{plan.solve_time:.3f}"
        row = [
            STRATEGY_LABELS[plan.strategy],
            plan.n_active_cells,
            plan.n_active_beams,
            f"{plan.objective_value:.3f}",
            saving,
        ]
        if with_time:
            row += [seconds, plan.status.value, f"{plan.gap:.3f}"]
        rows.append(row)
    return rows


def table_csv(rows, with_time=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = TABLE_COLUMNS + (["Computation time (seconds)", "Solver status", "Gap"] if with_time else [])
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def table_text(rows, with_time=True):
    header = TABLE_COLUMNS + (["Computation time (seconds)", "Solver status", "Gap"] if with_time else [])
    cells = [header] + [[str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(v.ljust(widths[i]) for i, v in enumerate(r)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_plan(path, plan, scenario):
    write_json(path, plan.to_dict(scenario))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args, argv):
    from .twin import generate

    params = {"seed": args.seed}
    if args.config is None:
        raise UsageError("generate needs --config")
    run = Run(args, argv, params)
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    run.read(args.config)
    if args.seed is not None:
        d = cfg.to_dict()
        d["seed"] = args.seed
        cfg = type(cfg).from_dict(d)
    run.params = {"seed": cfg.seed, "twin": cfg.to_dict()}
    scenario = run.timed("generate", generate, cfg)
    problems = validate(scenario)
    if problems:  # pragma: no cover - generator output always validates
        raise RuntimeError(f"generated scenario fails validation: {problems[0]}")
    scenario.save(run.out / "scenario.json")
    run.finish()
    print(f"scenario: {scenario.n_cells} cells on {len(scenario.site_ids())} poles, {scenario.n_tp} traffic points")
    print(f"wrote {run.out / 'scenario.json'}")
    return EXIT_OK


def _scenario_run(args, argv):
    params = resolve_params(args)
    if args.scenario is None:
        raise UsageError(f"{args.command} needs --scenario")
    run = Run(args, argv, params)
    scenario = load_scenario(args.scenario)
    run.read(args.scenario)
    if params["power_model"] is not None:
        run.read(params["power_model"])
    if getattr(args, "config", None):
        run.read(args.config)
    return run, scenario


def cmd_deploy(args, argv):
    run, scenario = _scenario_run(args, argv)
    p = run.params
    try:
        cap = CapacityParams(
            target_rate_mbps=p["target_rate_mbps"], activity_factor=p["activity_factor"], alpha=p["alpha"]
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    link_map = run.timed("link_map", compute_link_map, scenario)
    result = run.timed(
        "deployment",
        solve_deployment,
        scenario,
        cap,
        link_map=link_map,
        exact_limit=p["exact_limit"],
        node_limit=p["node_limit"],
        threads=p["threads"],
    )
    write_json(run.out / "deployment.json", result.to_dict())
    (run.out / "deployment.txt").write_text(result.to_text())
    scenario.with_sites(result.selected_sites).save(run.out / "scenario_deployed.json")
    run.finish()
    sys.stdout.write(result.to_text())
    return EXIT_OK


def _prepare(run, scenario):
    p = run.params
    power = power_config(scenario, p)
    fitted = fit_linear_cost(power)
    link_map = run.timed("link_map", compute_link_map, scenario)
    return fitted, link_map


def _check(plan, link_map):
    missing = uncovered_points(plan, link_map)
    if missing.size:  # pragma: no cover - strategies guarantee coverage
        raise RuntimeError(f"{plan.strategy.value} plan leaves points uncovered: {missing[:20].tolist()}")


def cmd_optimize(args, argv):
    run, scenario = _scenario_run(args, argv)
    p = run.params
    fitted, link_map = _prepare(run, scenario)
    th = p["ssb_threshold_db"]
    base = baseline_plan(scenario, fitted, th, link_map)
    plan = run.timed(
        args.strategy,
        optimize,
        args.strategy,
        scenario,
        fitted,
        th,
        link_map=link_map,
        exact_limit=p["exact_limit"],
        node_limit=p["node_limit"],
        threads=p["threads"],
    )
    _check(plan, link_map)
    write_plan(run.out / "plan.json", plan, scenario)
    rows = table_rows([base, plan], base.objective_value)
    (run.out / "summary.csv").write_text(table_csv(rows))
    (run.out / "summary.txt").write_text(table_text(rows))
    run.finish({"fitted_cost": vars(fitted)})
    sys.stdout.write(table_text(rows))
    return EXIT_OK


def cmd_compare(args, argv):
    run, scenario = _scenario_run(args, argv)
    p = run.params
    fitted, link_map = _prepare(run, scenario)
    th = p["ssb_threshold_db"]
    base = baseline_plan(scenario, fitted, th, link_map)
    plans = [base]
    for name in STRATEGIES:
        plan = run.timed(
            name,
            optimize,
            name,
            scenario,
            fitted,
            th,
            link_map=link_map,
            exact_limit=p["exact_limit"],
            node_limit=p["node_limit"],
            threads=p["threads"],
        )
        _check(plan, link_map)
        plans.append(plan)
    for plan in plans:
        write_plan(run.out / "plans" / f"{plan.strategy.value}.json", plan, scenario)
        if plan.strategy is not Strategy.BASELINE:
            analyze(plan, base, link_map).write(run.out / "impact" / plan.strategy.value)
    rows = table_rows(plans, base.objective_value)
    (run.out / "comparison.csv").write_text(table_csv(rows))
    (run.out / "comparison.txt").write_text(table_text(rows))
    run.finish({"fitted_cost": vars(fitted)})
    sys.stdout.write(table_text(rows))
    return EXIT_OK


def cmd_impact(args, argv):
    run, scenario = _scenario_run(args, argv)
    if args.plan is None:
        raise UsageError("impact needs --plan")
    run.read(args.plan)
    try:
        plan = ActivationPlan.from_dict(_read_mapping(args.plan, "plan"), scenario)
    except (KeyError, IndexError, ValueError) as exc:
        raise UsageError(f"plan {args.plan} does not match the scenario: {exc}") from None
    fitted, link_map = _prepare(run, scenario)
    base = baseline_plan(scenario, fitted, plan.threshold_db, link_map)
    missing = uncovered_points(plan, link_map)
    if missing.size:
        raise InfeasibleCoverage(missing, "plan leaves required points uncovered")
    report = run.timed("impact", analyze, plan, base, link_map)
    report.write(run.out)
    run.finish()
    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_replay(args, argv):
    if args.manifest is None:
        raise UsageError("replay needs --manifest")
    manifest = _read_mapping(args.manifest, "manifest")
    try:
        old = list(manifest["argv"])
        inputs = dict(manifest.get("inputs", {}))
    except (KeyError, TypeError):
        raise UsageError(f"manifest {args.manifest} has no argv") from None
    for path, digest in inputs.items():
        if not Path(path).exists():
            raise UsageError(f"replay input {path} is missing")
        if sha256_file(path) != digest:
            raise UsageError(f"replay input {path} changed since the recorded run")
    base = Path(manifest.get("cwd", "."))

    def anchored(value):
        return value if Path(value).is_absolute() else str(base / value)

    new, out = [], None
    it = iter(old)
    for tok in it:
        flag, eq, value = tok.partition("=")
        if flag in _PATH_FLAGS:
            value = value if eq else next(it, "")
            if flag == "--out":
                out = anchored(value)
            else:
                new += [flag, anchored(value)]
        else:
            new.append(tok)
    out = args.out if args.out is not None else out
    if out is None:
        raise UsageError("replay needs --out (the manifest records none)")
    return main(new + ["--out", out])


_PATH_FLAGS = {"--out", "--scenario", "--config", "--power-model", "--plan"}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="idlenes", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"idlenes {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--config", help="JSON/YAML file with parameter defaults")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--threads", type=int, help="worker cap for parallel stages")
        p.add_argument("--exact-limit", type=int, dest="exact_limit", help="largest program solved exactly (variables)")
        p.add_argument("--node-limit", type=int, dest="node_limit", help="branch-and-bound node budget")

    p = sub.add_parser("generate", help="build a synthetic scenario from a twin config")
    p.add_argument("--config", help="twin configuration (JSON or YAML)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("deploy", help="capacity-driven pole selection")
    common(p)
    p.add_argument("--alpha", type=float, help="fraction of traffic points to serve")
    p.add_argument("--activity-factor", type=float, dest="activity_factor")
    p.add_argument("--target-rate-mbps", type=float, dest="target_rate_mbps")

    for name, help_ in (("optimize", "run one energy-saving strategy"), ("compare", "run every strategy")):
        p = sub.add_parser(name, help=help_)
        common(p)
        if name == "optimize":
            p.add_argument("--strategy", required=True, choices=STRATEGIES)
        p.add_argument("--ssb-threshold-db", type=float, dest="ssb_threshold_db")
        p.add_argument("--power-model", dest="power_model", help="PowerConfig JSON/YAML overriding the scenario's")

    p = sub.add_parser("impact", help="UE-side impact of a plan file")
    common(p)
    p.add_argument("--plan", help="plan JSON written by optimize/compare")
    p.add_argument("--power-model", dest="power_model")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="output directory (default: the recorded one)")
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "deploy": cmd_deploy,
    "optimize": cmd_optimize,
    "compare": cmd_compare,
    "impact": cmd_impact,
    "replay": cmd_replay,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args, argv)
    except ConfigError as exc:
        print(f"idlenes: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, RateInfeasible) as exc:
        print(f"idlenes: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleCoverage as exc:
        print(f"idlenes: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DeploymentInfeasible as exc:
        print(f"idlenes: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error code
        print(f"idlenes: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
