"""Tick-random synchronous p-bit dynamics.

Each tick every spin is selected independently with probability ``p = 1/c``.
Selected spins resample from ``Pr(+1) = (1 + tanh(I0 * field)) / 2`` using the
pre-tick state for every field; the rest keep their value. Random numbers come
from a Philox stream consumed in a fixed order per tick: one mask draw per
spin, then one state draw per selected spin in index order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import CouplingMatrix

EXACT_CHAIN_MAX_SPINS = 12


@dataclass(frozen=True)
class SimParams:
    i0: float
    c: float
    ticks: int = 40
    seed: int = 0
    bias: np.ndarray | None = None

    def __post_init__(self):
        if not self.i0 > 0:
            raise ValueError(f"i0 must be positive, got {self.i0}")
        if not self.c >= 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if self.ticks < 0:
            raise ValueError(f"ticks must be non-negative, got {self.ticks}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.bias is not None:
            b = np.array(self.bias, dtype=float)
            b.setflags(write=False)
            object.__setattr__(self, "bias", b)

    @property
    def p(self) -> float:
        return 1.0 / self.c


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _matrix(J):
    return J.J if isinstance(J, CouplingMatrix) else J


def _bias(h, n: int) -> np.ndarray:
    if h is None:
        return np.zeros(n)
    h = np.asarray(h, dtype=float)
    if h.shape != (n,):
        raise ValueError(f"bias has shape {h.shape}, expected ({n},)")
    return h


def check_spins(s, n: int | None = None) -> np.ndarray:
    s = np.asarray(s)
    if n is not None and s.shape[-1] != n:
        raise ValueError(f"spin vector has length {s.shape[-1]}, expected {n}")
    if not np.all(np.abs(s) == 1):
        raise ValueError("spins must be +1 or -1")
    return s


def energy(s, J, h=None) -> float:
    """``H = -1/2 s.J.s - h.s``."""
    J = _matrix(J)
    n = J.shape[0]
    s = check_spins(s, n).astype(float)
    if s.ndim != 1:
        raise ValueError("energy expects a single spin vector")
    return float(-0.5 * s @ (J @ s) - _bias(h, n) @ s)


def local_fields(s, J, h=None) -> np.ndarray:
    """``h + J s`` for one state or a batch of states (rows)."""
    J = _matrix(J)
    s = np.asarray(s, dtype=float)
    h = _bias(h, J.shape[0])
    # J is symmetric, so s @ J gives J s row-wise for batches too.
    return np.asarray(s @ J) + h


def _tick(s, J, i0: float, p: float, h, rng) -> tuple[np.ndarray, np.ndarray]:
    fields = local_fields(s, J, h)
    mask = rng.random(s.shape) < p
    prob_up = 0.5 * (1.0 + np.tanh(i0 * fields[mask]))
    draws = rng.random(prob_up.shape)
    new = s.copy()
    new[mask] = np.where(draws < prob_up, 1, -1)
    return new, mask


def tick(s, J, params: SimParams, rng: np.random.Generator) -> np.ndarray:
    """Advance one tick. ``s`` may be a single state or a batch (one per row)."""
    J = _matrix(J)
    s = check_spins(s, J.shape[0]).astype(np.int8)
    new, _ = _tick(s, J, params.i0, params.p, params.bias, rng)
    return new


@dataclass
class Trajectory:
    states: np.ndarray          # (ticks + 1, n) int8
    energies: np.ndarray        # (ticks + 1,)
    active: np.ndarray          # (ticks,) number of spins selected each tick
    params: SimParams
    graph_name: str = ""

    @property
    def ticks(self) -> int:
        return len(self.states) - 1

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def flips(self) -> np.ndarray:
        return np.count_nonzero(np.diff(self.states, axis=0), axis=1)

    def activity_fraction(self) -> float:
        if self.ticks == 0:
            return float("nan")
        return float(self.active.sum() / (self.ticks * self.n))


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)


def run(J, params: SimParams, initial=None, graph_name: str = "") -> Trajectory:
    """Simulate ``params.ticks`` ticks; deterministic in (J, params, initial)."""
    if isinstance(J, CouplingMatrix):
        graph_name = graph_name or J.name
    J = _matrix(J)
    n = J.shape[0]
    h = _bias(params.bias, n)
    rng = make_rng(params.seed)
    if initial is None:
        s = random_state(n, rng)
    else:
        s = check_spins(initial, n).astype(np.int8).copy()
        if s.ndim != 1:
            raise ValueError("initial state must be a single spin vector")

    states = np.empty((params.ticks + 1, n), dtype=np.int8)
    energies = np.empty(params.ticks + 1)
    active = np.empty(params.ticks, dtype=np.int64)
    states[0] = s
    energies[0] = energy(s, J, h)
    for t in range(params.ticks):
        s, mask = _tick(s, J, params.i0, params.p, h, rng)
        states[t + 1] = s
        energies[t + 1] = energy(s, J, h)
        active[t] = mask.sum()
    return Trajectory(states, energies, active, params, graph_name)


# --- exact Markov chain for small systems ------------------------------------


def enumerate_states(n: int) -> np.ndarray:
    """All 2^n spin states; bit k of the row index set means spin k is +1."""
    idx = np.arange(2 ** n)[:, None]
    bits = (idx >> np.arange(n)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def state_index(s) -> np.ndarray | int:
    s = np.asarray(s)
    weights = 1 << np.arange(s.shape[-1])
    out = ((s > 0).astype(np.int64) * weights).sum(axis=-1)
    return int(out) if out.ndim == 0 else out


def exact_chain(J, params: SimParams) -> np.ndarray:
    """Exact one-tick transition matrix ``P[a, b] = Pr(state a -> state b)``."""
    J = _matrix(J)
    if hasattr(J, "toarray"):
        J = J.toarray()
    n = J.shape[0]
    if n > EXACT_CHAIN_MAX_SPINS:
        raise ValueError(f"exact chain limited to n <= {EXACT_CHAIN_MAX_SPINS}, got {n}")
    p = params.p
    states = enumerate_states(n).astype(float)
    fields = states @ J + _bias(params.bias, n)
    q_up = 0.5 * (1.0 + np.tanh(params.i0 * fields))          # (S, n)
    # per-site probability of landing on +1 / -1 from each source state
    stay_up = states > 0
    to_up = p * q_up + (1 - p) * stay_up
    to_down = p * (1 - q_up) + (1 - p) * (~stay_up)
    target_up = states > 0                                      # (S', n)
    P = np.ones((len(states), len(states)))
    for i in range(n):
        P *= np.where(target_up[None, :, i], to_up[:, None, i], to_down[:, None, i])
    return P


def exact_magnetization(J, params: SimParams, initial, ticks: int) -> np.ndarray:
    """Exact per-spin expectations ``E[s_i(t)]`` for t = 0..ticks."""
    P = exact_chain(J, params)
    n = np.asarray(initial).shape[0]
    states = enumerate_states(n).astype(float)
    dist = np.zeros(len(states))
    dist[state_index(initial)] = 1.0
    out = [dist @ states]
    for _ in range(ticks):
        dist = dist @ P
        out.append(dist @ states)
    return np.array(out)


# --- export -------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("tick", "energy", "flips_this_tick")


def trajectory_rows(traj: Trajectory) -> list[dict]:
    flips = np.concatenate([[0], traj.flips])
    return [{"tick": t, "energy": float(e), "flips_this_tick": int(f)}
            for t, (e, f) in enumerate(zip(traj.energies, flips))]


def spins_rle(s) -> str:
    """Run-length text for one state, e.g. ``+3-2+1``."""
    s = np.asarray(s)
    out = []
    start = 0
    for k in range(1, len(s) + 1):
        if k == len(s) or s[k] != s[start]:
            out.append(("+" if s[start] > 0 else "-") + str(k - start))
            start = k
    return "".join(out)


def parse_spins_rle(text: str) -> np.ndarray:
    out = []
    k = 0
    while k < len(text):
        sign = 1 if text[k] == "+" else -1
        if text[k] not in "+-":
            raise ValueError(f"bad run-length token at {k}: {text!r}")
        j = k + 1
        while j < len(text) and text[j].isdigit():
            j += 1
        out.extend([sign] * int(text[k + 1:j]))
        k = j
    return np.array(out, dtype=np.int8)


def write_spin_dump(traj: Trajectory, path: str | Path) -> None:
    lines = [f"{t} {spins_rle(s)}" for t, s in enumerate(traj.states)]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")
