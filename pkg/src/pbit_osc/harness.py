"""c-sweeps, theory-vs-simulation comparison rows, R sensitivity and CSV output."""

from __future__ import annotations

import csv
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import SimParams, run
from .graph import Graph, GraphError, ToyKind, build_couplings, generate_toy, load_gset
from .observables import ThresholdEstimate, detect_sim_threshold, observe
from .theory import TheoryParams, Variant, coupling_spectrum, critical_c

SWEEP_COLUMNS = ("graph", "c", "seed", "i0", "c1", "final_energy", "cut",
                 "cut_normalized", "second_diff", "oscillatory")
COMPARISON_COLUMNS = ("graph", "i0_max", "c_star_sim", "c_star_non_ipr", "c_star_ipr")
SENSITIVITY_COLUMNS = ("R", "c_star_non_ipr", "c_star_ipr")


def c_grid(start: float = 1.0, stop: float = 5.0, step: float = 0.05) -> np.ndarray:
    if start < 1 or step <= 0 or stop < start:
        raise ValueError(f"invalid c grid {start}:{stop}:{step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    # round to kill accumulation error so grid values print cleanly
    return np.round(start + step * np.arange(count), 12)


@dataclass(frozen=True)
class SweepConfig:
    graph_source: str                     # G-set path or toy name
    c_values: tuple[float, ...] = tuple(c_grid())
    i0: float | None = None               # None means I0_max of the graph
    ticks: int = 40
    seeds: int = 5
    master_seed: int = 0
    burn_in_c1: int = 0
    burn_in_energy: int | None = None     # None means ticks // 2
    toy_seed: int = 0

    def __post_init__(self):
        c = tuple(float(x) for x in self.c_values)
        if not c:
            raise ValueError("empty c grid")
        if c[0] < 1 or any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError("c grid must be strictly increasing and start at >= 1")
        object.__setattr__(self, "c_values", c)
        if self.seeds < 1:
            raise ValueError("need at least one seed per c")
        if self.ticks < 2:
            raise ValueError("need at least 2 ticks for C(1)")

    @property
    def energy_burn_in(self) -> int:
        return self.ticks // 2 if self.burn_in_energy is None else self.burn_in_energy


def load_graph(source: str, toy_seed: int = 0) -> Graph:
    try:
        kind = ToyKind.parse(source)
    except GraphError:
        return load_gset(source)
    return generate_toy(kind, seed=toy_seed)


def derive_seed(master_seed: int, graph_name: str, c_index: int, replicate: int) -> int:
    """Child seed from (master seed, graph, c index, replicate)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(zlib.crc32(graph_name.encode()), c_index, replicate))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class SweepRow:
    graph: str
    c: float
    seed: int
    i0: float
    c1: float
    final_energy: float
    cut: float
    second_diff: float
    oscillatory: bool
    cut_normalized: float = float("nan")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in SWEEP_COLUMNS}


def _one_run(task) -> SweepRow:
    g, J, c, seed, i0, ticks, burn_c1, burn_e = task
    traj = run(J, SimParams(i0=i0, c=c, ticks=ticks, seed=seed), graph_name=g.name)
    rep = observe(traj, g, burn_c1, burn_e)
    return SweepRow(g.name, c, seed, i0, rep.c1, rep.final_energy, rep.cut,
                    rep.second_diff_norm, rep.oscillatory)


def resolve_i0(cfg: SweepConfig, couplings) -> float:
    return couplings.i0_max if cfg.i0 is None else float(cfg.i0)


def run_sweep(cfg: SweepConfig, jobs: int = 1, graph: Graph | None = None) -> list[SweepRow]:
    """All (c, replicate) runs in deterministic (c, replicate) order."""
    g = graph if graph is not None else load_graph(cfg.graph_source, cfg.toy_seed)
    cm = build_couplings(g)
    i0 = resolve_i0(cfg, cm)
    tasks = [(g, cm.J, c, derive_seed(cfg.master_seed, g.name, ci, r), i0,
              cfg.ticks, cfg.burn_in_c1, cfg.energy_burn_in)
             for ci, c in enumerate(cfg.c_values) for r in range(cfg.seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one_run, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_one_run(t) for t in tasks]
    best = max(r.cut for r in rows)
    for r in rows:
        r.cut_normalized = r.cut / best if best > 0 else 0.0
    return rows


def sim_threshold(rows) -> ThresholdEstimate:
    return detect_sim_threshold((r.c, r.seed, r.c1) for r in rows)


@dataclass(frozen=True)
class ComparisonRow:
    graph: str
    i0_max_sim: float
    c_star_sim: float | None
    c_star_non_ipr: float
    c_star_ipr: float

    def as_dict(self) -> dict:
        return {"graph": self.graph, "i0_max": self.i0_max_sim,
                "c_star_sim": "unresolved" if self.c_star_sim is None else self.c_star_sim,
                "c_star_non_ipr": self.c_star_non_ipr, "c_star_ipr": self.c_star_ipr}


def theory_thresholds(couplings, params: TheoryParams) -> tuple[float, float]:
    spec = coupling_spectrum(couplings, params.n_modes_K, params.gamma)
    return (critical_c(couplings, params, Variant.NON_IPR, spec),
            critical_c(couplings, params, Variant.IPR, spec))


def compare(cfg: SweepConfig, theory: TheoryParams | None = None, jobs: int = 1,
            rows: list[SweepRow] | None = None, simulate: bool = True) -> ComparisonRow:
    """One theory-vs-simulation row, theory evaluated at the graph's I0_max.

    With ``simulate=False`` and no ``rows`` the simulation column is left
    unresolved.
    """
    g = load_graph(cfg.graph_source, cfg.toy_seed)
    cm = build_couplings(g)
    i0 = cm.i0_max                        # raises on s_J = 0
    theory = (theory or TheoryParams()).with_(i0=i0)
    non_ipr, with_ipr = theory_thresholds(cm, theory)
    if rows is None and simulate:
        rows = run_sweep(cfg, jobs, graph=g)
    c_sim = sim_threshold(rows).c_star if rows else None
    return ComparisonRow(g.name, i0, c_sim, non_ipr, with_ipr)


@dataclass
class SensitivityReport:
    rows: list[tuple[float, float, float]]
    violations: list[str] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return not self.violations

    def as_dicts(self) -> list[dict]:
        return [dict(zip(SENSITIVITY_COLUMNS, r)) for r in self.rows]


def sensitivity_report(couplings, i0: float, r_values, theory: TheoryParams | None = None) -> SensitivityReport:
    """c* for both variants across R, flagging any increase of c* with R."""
    r_values = sorted(float(r) for r in r_values)
    if any(r <= 1 for r in r_values):
        raise ValueError("every R must exceed 1")
    theory = (theory or TheoryParams()).with_(i0=i0)
    spec = coupling_spectrum(couplings, theory.n_modes_K, theory.gamma)
    rows = []
    for R in r_values:
        p = theory.with_(threshold_R=R)
        rows.append((R, critical_c(couplings, p, Variant.NON_IPR, spec),
                     critical_c(couplings, p, Variant.IPR, spec)))
    violations = []
    for (r0, a0, b0), (r1, a1, b1) in zip(rows, rows[1:]):
        if a1 > a0:
            violations.append(f"non_ipr c* rises from {a0} at R={r0} to {a1} at R={r1}")
        if b1 > b0:
            violations.append(f"ipr c* rises from {b0} at R={r0} to {b1} at R={r1}")
    return SensitivityReport(rows, violations)


# --- CSV ----------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(rows, schema, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(schema)
    for r in rows:
        d = r.as_dict() if hasattr(r, "as_dict") else r
        w.writerow([_fmt(d[k]) for k in schema])


def emit_csv(rows, schema, path) -> None:
    """Write ``rows`` (dicts or objects with ``as_dict``) under the header ``schema``."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            write_csv(rows, schema, fh)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
