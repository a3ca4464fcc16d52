"""Finite-time oscillation indicators and optimization metrics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, energy
from .graph import Graph

OSCILLATION_THRESHOLD = 0.5


class WindowError(ValueError):
    """Observation window too short for the requested statistic."""


def _states(traj) -> np.ndarray:
    return traj.states if isinstance(traj, Trajectory) else np.asarray(traj)


def autocorrelation_c1(traj, burn_in: int = 0) -> float:
    """Site- and time-averaged ``s_i(t) s_i(t+1)`` over ticks ``t >= burn_in``."""
    states = _states(traj)
    if len(states) < burn_in + 2:
        raise WindowError(f"need at least {burn_in + 2} states, got {len(states)}")
    window = states[burn_in:].astype(np.int64)
    return float(np.mean(window[:-1] * window[1:]))


def second_difference_amplitude(energies, burn_in: int = 0) -> float:
    """Mean ``|E[t+1] - 2E[t] + E[t-1]|`` divided by the energy range, after burn-in."""
    e = np.asarray(energies, dtype=float)[burn_in:]
    if len(e) < 3:
        raise WindowError(f"need at least 3 energies after burn-in {burn_in}, got {len(e)}")
    span = e.max() - e.min()
    if span == 0:
        return 0.0
    return float(np.mean(np.abs(e[2:] - 2 * e[1:-1] + e[:-2])) / span)


def cut_value(s, g: Graph) -> float:
    s = np.asarray(s)
    if s.shape != (g.n_nodes,):
        raise ValueError(f"spin vector has shape {s.shape}, expected ({g.n_nodes},)")
    i, j, w = g.edge_arrays()
    return float(np.sum(w * (1 - s[i] * s[j]) / 2))


def classify(c1: float) -> bool:
    """Oscillatory iff ``C(1) < 0.5`` (strict)."""
    return c1 < OSCILLATION_THRESHOLD


@dataclass(frozen=True)
class ObservableReport:
    c1: float
    second_diff_norm: float
    cut: float
    final_energy: float

    @property
    def oscillatory(self) -> bool:
        return classify(self.c1)


def observe(traj: Trajectory, g: Graph, burn_in_c1: int = 0,
            burn_in_energy: int | None = None) -> ObservableReport:
    if burn_in_energy is None:
        burn_in_energy = traj.ticks // 2
    final = traj.states[-1]
    return ObservableReport(
        c1=autocorrelation_c1(traj, burn_in_c1),
        second_diff_norm=second_difference_amplitude(traj.energies, burn_in_energy),
        cut=cut_value(final, g),
        final_energy=float(traj.energies[-1]),
    )


@dataclass(frozen=True)
class ThresholdEstimate:
    c_star: float | None        # None when no grid point qualifies
    n_seeds: int
    criterion: str = "autocorrelation"

    @property
    def resolved(self) -> bool:
        return self.c_star is not None


def mean_c1_by_c(rows) -> dict[float, float]:
    groups: dict[float, list[float]] = defaultdict(list)
    for c, _seed, c1 in rows:
        groups[float(c)].append(float(c1))
    return {c: float(np.mean(v)) for c, v in sorted(groups.items())}


def detect_sim_threshold(rows) -> ThresholdEstimate:
    """Smallest swept c whose seed-averaged ``C(1)`` reaches 0.5.

    ``rows`` holds ``(c, seed, c1)`` triples.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no sweep rows to analyse")
    means = mean_c1_by_c(rows)
    n_seeds = min(sum(1 for r in rows if float(r[0]) == c) for c in means)
    for c, m in means.items():
        if not classify(m):
            return ThresholdEstimate(c, n_seeds)
    return ThresholdEstimate(None, n_seeds)


def energy_cut_offset(s, g: Graph, J) -> float:
    """``H(s) + 2 cut(s)``; constant over s for a unit-weight graph."""
    return energy(s, J) + 2 * cut_value(s, g)
