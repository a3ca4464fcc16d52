"""Command-line entry point ``pbit-osc``.

Exit codes: 0 success, 1 usage error, 2 input-data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dynamics, harness, theory
from .graph import DegenerateGraphError, GraphError, build_couplings
from .observables import autocorrelation_c1, observe

log = logging.getLogger("pbit_osc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# Defaults applied after the config file, so that flags > config > defaults.
DEFAULTS = {
    "ticks": 40, "seeds": 5, "seed": 0, "R": 10.0, "T": 40, "gamma": 1.0, "modes": 8,
    "variant": "non-ipr", "jobs": 1, "c": 1.0, "c_grid": "1.0:5.0:0.05", "points": 50,
    "burn_in": 0, "r_values": "5,10,20", "toy_seed": 0, "c_max": 20.0,
}
CONFIG_TYPES = {
    "ticks": int, "seeds": int, "seed": int, "R": float, "T": int, "gamma": float, "modes": int,
    "jobs": int, "c": float, "points": int, "burn_in": int, "toy_seed": int, "i0": float,
    "c_max": float,
}


def read_config(path: str) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise GraphError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "i0_max":
            out["i0_max"] = value.lower() in ("1", "true", "yes")
            continue
        if key == "graph" or key == "toy" or key in DEFAULTS or key in CONFIG_TYPES or key == "out":
            try:
                out[key] = CONFIG_TYPES.get(key, str)(value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
        else:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
    return out


def _add_common(p: argparse.ArgumentParser, graphs_many: bool = False):
    src = p.add_argument_group("graph")
    if graphs_many:
        src.add_argument("--graph", action="append", help="G-set file (repeatable)")
        src.add_argument("--toy", action="append", help="toy instance toy1..toy7 (repeatable)")
    else:
        src.add_argument("--graph", help="G-set file")
        src.add_argument("--toy", help="toy instance toy1..toy7")
    src.add_argument("--toy-seed", type=int, help="seed for the ER toy instances")
    p.add_argument("--config", help="key = value config file; flags win")
    p.add_argument("--out", help="output path (default stdout)")


def _add_i0(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--i0", type=float, help="fixed inverse temperature")
    g.add_argument("--i0-max", action="store_true", help="use I0_max = 10/s_J (default)")


def _add_theory(p):
    p.add_argument("--R", type=float, help="observability threshold (default 10)")
    p.add_argument("--T", type=int, help="observation horizon in ticks (default 40)")
    p.add_argument("--gamma", type=float, help="IPR penalty exponent (default 1)")
    p.add_argument("--modes", type=int, help="low-lying modes inspected (default 8)")
    p.add_argument("--c-max", type=float, help="upper end of the c* search (default 20)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbit-osc", description="Tick-random p-bit oscillation simulator and theory.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="validate and summarize a graph")
    _add_common(p)

    p = sub.add_parser("simulate", help="single run with trajectory export")
    _add_common(p)
    _add_i0(p)
    p.add_argument("--c", type=float, help="parallelism parameter c = 1/p")
    p.add_argument("--ticks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--burn-in", type=int, help="burn-in for C(1)")
    p.add_argument("--dump", help="write run-length spin dump here")

    p = sub.add_parser("sweep", help="c-sweep with per-run observables")
    _add_common(p)
    _add_i0(p)
    p.add_argument("--c-grid", help="START:STOP:STEP (default 1.0:5.0:0.05)")
    p.add_argument("--ticks", type=int)
    p.add_argument("--seeds", type=int, help="replicates per c")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--burn-in", type=int, help="burn-in for C(1)")
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("predict", help="theoretical boundary c*(I0)")
    _add_common(p)
    _add_theory(p)
    p.add_argument("--i0", type=float, help="single I0 instead of a grid")
    p.add_argument("--points", type=int, help="grid points between I0_min and I0_max")
    p.add_argument("--variant", choices=["non-ipr", "ipr", "both"])
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("compare", help="theory vs simulation row per graph")
    _add_common(p, graphs_many=True)
    _add_theory(p)
    p.add_argument("--c-grid")
    p.add_argument("--ticks", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--no-sim", action="store_true", help="theory columns only")

    p = sub.add_parser("sensitivity", help="c* across observability thresholds R")
    _add_common(p)
    _add_i0(p)
    _add_theory(p)
    p.add_argument("--R-values", dest="r_values", help="comma-separated R list (default 5,10,20)")
    return parser


def _merge(args: argparse.Namespace) -> dict:
    opts = {}
    if getattr(args, "config", None):
        opts.update(read_config(args.config))
        if args.graph or args.toy:
            opts.pop("graph", None)
            opts.pop("toy", None)
    for k, v in vars(args).items():
        if v is not None and v is not False:
            opts[k] = v
    for k, v in DEFAULTS.items():
        opts.setdefault(k, v)
    return opts


def _source(opts) -> str:
    graph, toy = opts.get("graph"), opts.get("toy")
    if graph and toy:
        raise UsageError("give either --graph or --toy, not both")
    if not graph and not toy:
        raise UsageError("a graph is required (--graph PATH or --toy KIND)")
    return graph or toy


def _sources(opts) -> list[str]:
    out = []
    for key in ("graph", "toy"):
        v = opts.get(key)
        if v:
            out.extend(v if isinstance(v, list) else [v])
    if not out:
        raise UsageError("at least one --graph or --toy is required")
    return out


def _parse_grid(text: str) -> np.ndarray:
    try:
        a, b, s = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--c-grid expects START:STOP:STEP, got {text!r}") from None
    try:
        return harness.c_grid(a, b, s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _theory_params(opts) -> theory.TheoryParams:
    try:
        return theory.TheoryParams(horizon_T=opts["T"], threshold_R=opts["R"], gamma=opts["gamma"],
                                   n_modes_K=opts["modes"], c_max=opts["c_max"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write(rows, schema, opts):
    out = opts.get("out")
    if out:
        harness.emit_csv(rows, schema, out)
        log.info("wrote %d rows to %s", len(rows), out)
    else:
        harness.write_csv(rows, schema, sys.stdout)


def cmd_parse(opts):
    g = harness.load_graph(_source(opts), opts["toy_seed"])
    cm = build_couplings(g)
    print(f"name: {g.name}")
    print(f"nodes: {g.n_nodes}")
    print(f"edges: {g.n_edges}")
    print(f"weight_type: {g.weight_type.value}")
    print(f"s_J: {cm.s_J!r}")
    print(f"sigma_h_sq: {cm.sigma_h_sq!r}")
    if cm.s_J > 0:
        print(f"i0_min: {cm.i0_min!r}")
        print(f"i0_max: {cm.i0_max!r}")


def _i0(opts, cm) -> float:
    return float(opts["i0"]) if opts.get("i0") is not None else cm.i0_max


def cmd_simulate(opts):
    g = harness.load_graph(_source(opts), opts["toy_seed"])
    cm = build_couplings(g)
    params = dynamics.SimParams(i0=_i0(opts, cm), c=opts["c"], ticks=opts["ticks"], seed=opts["seed"])
    traj = dynamics.run(cm, params, graph_name=g.name)
    _write(dynamics.trajectory_rows(traj), dynamics.TRAJECTORY_COLUMNS, opts)
    if opts.get("dump"):
        dynamics.write_spin_dump(traj, opts["dump"])
    rep = observe(traj, g, burn_in_c1=opts["burn_in"])
    log.info("C(1)=%.4f oscillatory=%s final_energy=%g cut=%g", rep.c1, rep.oscillatory,
             rep.final_energy, rep.cut)
    print(f"C(1)={autocorrelation_c1(traj, opts['burn_in'])!r} oscillatory={rep.oscillatory}",
          file=sys.stderr)


def _sweep_config(opts, source) -> harness.SweepConfig:
    return harness.SweepConfig(
        graph_source=source, c_values=tuple(_parse_grid(opts["c_grid"])),
        i0=opts.get("i0"), ticks=opts["ticks"], seeds=opts["seeds"], master_seed=opts["seed"],
        burn_in_c1=opts["burn_in"], toy_seed=opts["toy_seed"])


def cmd_sweep(opts):
    cfg = _sweep_config(opts, _source(opts))
    rows = harness.run_sweep(cfg, jobs=opts["jobs"])
    _write(rows, harness.SWEEP_COLUMNS, opts)
    est = harness.sim_threshold(rows)
    print(f"c_star_sim={est.c_star if est.resolved else 'unresolved'}", file=sys.stderr)


def cmd_predict(opts):
    g = harness.load_graph(_source(opts), opts["toy_seed"])
    cm = build_couplings(g)
    tp = _theory_params(opts)
    if opts.get("i0") is not None:
        grid = [float(opts["i0"])]
    else:
        grid = np.geomspace(cm.i0_min, cm.i0_max, opts["points"])
    variants = {"non-ipr": [theory.Variant.NON_IPR], "ipr": [theory.Variant.IPR],
                "both": [theory.Variant.NON_IPR, theory.Variant.IPR]}[opts["variant"]]
    spec = theory.coupling_spectrum(cm, tp.n_modes_K, tp.gamma)
    rows = []
    for v in variants:
        curve = theory.boundary_curve(cm, grid, tp, v, jobs=opts["jobs"], spectrum=spec)
        rows.extend(theory.boundary_rows(curve))
    _write(rows, theory.BOUNDARY_COLUMNS, opts)


def cmd_compare(opts):
    tp = _theory_params(opts)
    rows = []
    for source in _sources(opts):
        cfg = _sweep_config(opts, source)
        rows.append(harness.compare(cfg, tp, jobs=opts["jobs"], simulate=not opts.get("no_sim")))
    _write(rows, harness.COMPARISON_COLUMNS, opts)


def cmd_sensitivity(opts):
    g = harness.load_graph(_source(opts), opts["toy_seed"])
    cm = build_couplings(g)
    try:
        r_values = [float(x) for x in str(opts["r_values"]).split(",")]
    except ValueError:
        raise UsageError(f"--R-values expects a comma-separated list, got {opts['r_values']!r}") from None
    try:
        report = harness.sensitivity_report(cm, _i0(opts, cm), r_values, _theory_params(opts))
    except ValueError as exc:
        if isinstance(exc, (GraphError, DegenerateGraphError)):
            raise
        raise UsageError(str(exc)) from None
    _write(report.as_dicts(), harness.SENSITIVITY_COLUMNS, opts)
    for v in report.violations:
        log.warning("monotonicity violation: %s", v)


COMMANDS = {"parse": cmd_parse, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "predict": cmd_predict, "compare": cmd_compare, "sensitivity": cmd_sensitivity}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        opts = _merge(args)
        COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"pbit-osc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphError, DegenerateGraphError, FileNotFoundError) as exc:
        print(f"pbit-osc: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (theory.EigenSolverError, theory.QuadratureError, np.linalg.LinAlgError,
            FloatingPointError, RuntimeError) as exc:
        print(f"pbit-osc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"pbit-osc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"pbit-osc: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
