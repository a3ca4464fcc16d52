import math

import numpy as np
import pytest

from pbit_osc.dynamics import (SimParams, enumerate_states, energy, exact_chain, make_rng,
                               parse_spins_rle, run, spins_rle, state_index, tick,
                               trajectory_rows, write_spin_dump)
from pbit_osc.graph import Graph, build_couplings, couplings_from_array, generate_toy

AF_EDGE = couplings_from_array([[0.0, -1.0], [-1.0, 0.0]])


def test_energy_examples():
    toy2 = build_couplings(generate_toy("toy2"))
    assert energy(np.ones(4), toy2) == -6
    toy1 = build_couplings(generate_toy("toy1"))
    assert energy([1, -1, 1, -1], toy1) == -4
    assert energy(np.ones(5), np.zeros((5, 5)), np.ones(5)) == -5


def test_energy_dimension_mismatch():
    with pytest.raises(ValueError):
        energy(np.ones(3), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        energy(np.ones(4), np.zeros((4, 4)), np.ones(3))


def test_params_validation():
    with pytest.raises(ValueError):
        SimParams(i0=1, c=0.5)
    with pytest.raises(ValueError):
        SimParams(i0=0, c=1)
    assert SimParams(i0=1, c=4).p == 0.25


def test_tick_nearly_inactive():
    J = build_couplings(generate_toy("toy5")).J
    s = np.where(np.arange(16) % 3 == 0, 1, -1)
    params = SimParams(i0=5.0, c=1e15)
    rng = make_rng(1)
    for _ in range(100):
        assert np.array_equal(tick(s, J, params, rng), s)


def test_af_edge_deterministic_period_two():
    params = SimParams(i0=50.0, c=1.0)
    rng = make_rng(0)
    s = np.array([1, 1])
    s1 = tick(s, AF_EDGE, params, rng)
    assert s1.tolist() == [-1, -1]
    assert tick(s1, AF_EDGE, params, rng).tolist() == [1, 1]


def test_unbiased_coin_magnetization():
    n, ticks = 4, 10_000
    traj = run(np.zeros((n, n)), SimParams(i0=1.0, c=1.0, ticks=ticks, seed=11))
    spins = traj.states[1:].astype(float)
    # each spin is an independent fair coin at every tick
    se = 1.0 / math.sqrt(spins.size)
    assert abs(spins.mean()) < 4 * se


def test_activity_fraction_matches_p():
    J = build_couplings(generate_toy("toy4")).J
    params = SimParams(i0=1.0, c=3.0, ticks=5000, seed=5)
    traj = run(J, params)
    n_draws = params.ticks * traj.n
    se = math.sqrt(params.p * (1 - params.p) / n_draws)
    assert abs(traj.activity_fraction() - params.p) < 4 * se


def test_run_zero_ticks():
    traj = run(AF_EDGE, SimParams(i0=1.0, c=1.0, ticks=0), initial=[1, -1])
    assert traj.states.tolist() == [[1, -1]]
    assert len(traj.energies) == 1


def test_run_deterministic():
    cm = build_couplings(generate_toy("toy7", seed=2))
    params = SimParams(i0=cm.i0_max, c=1.7, ticks=40, seed=99)
    a, b = run(cm, params), run(cm, params)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.energies, b.energies)
    c = run(cm, SimParams(i0=cm.i0_max, c=1.7, ticks=40, seed=100))
    assert not np.array_equal(a.states, c.states)


def test_ferromagnet_absorbing_when_saturated():
    cm = build_couplings(generate_toy("toy2"))
    traj = run(cm, SimParams(i0=cm.i0_max, c=1.0, ticks=40, seed=3), initial=np.ones(4))
    assert np.all(traj.energies == -6)
    # exact chain agrees: the all-up state maps to itself
    P = exact_chain(cm, SimParams(i0=cm.i0_max, c=1.0))
    up = state_index(np.ones(4))
    assert P[up, up] == pytest.approx(1.0, abs=1e-12)


def test_energy_bookkeeping():
    cm = build_couplings(generate_toy("toy6", seed=4))
    h = np.linspace(-0.5, 0.5, cm.n)
    traj = run(cm, SimParams(i0=1.3, c=1.5, ticks=30, seed=8, bias=h))
    for s, e in zip(traj.states, traj.energies):
        assert energy(s, cm, h) == e


def test_batch_tick_matches_shape():
    J = build_couplings(generate_toy("toy1")).J
    batch = np.ones((10, 4), dtype=np.int8)
    out = tick(batch, J, SimParams(i0=1.0, c=2.0), make_rng(0))
    assert out.shape == (10, 4)
    assert set(np.unique(out)) <= {-1, 1}


# --- exact chain ----------------------------------------------------------------


@pytest.mark.parametrize("c", [1.0, 2.0, 5.0])
def test_exact_chain_single_spin(c):
    P = exact_chain(np.zeros((1, 1)), SimParams(i0=1.0, c=c))
    p = 1 / c
    assert np.allclose(np.diag(P), (1 - p) + p / 2)


@pytest.mark.parametrize("kind", ["toy1", "toy2", "toy3", "toy4"])
@pytest.mark.parametrize("i0, c", [(0.3, 1.0), (2.0, 1.5), (9.0, 3.0)])
def test_exact_chain_rows_sum_to_one(kind, i0, c):
    P = exact_chain(build_couplings(generate_toy(kind)), SimParams(i0=i0, c=c))
    assert np.all(P >= 0)
    assert np.max(np.abs(P.sum(axis=1) - 1)) < 1e-12


def test_exact_chain_af_edge_flip():
    P = exact_chain(AF_EDGE, SimParams(i0=50.0, c=1.0))
    assert P[state_index([1, 1]), state_index([-1, -1])] >= 1 - 1e-6


def test_exact_chain_product_formula_brute_force():
    # one entry recomputed term by term from the per-site rule
    J = build_couplings(generate_toy("toy3")).J
    params = SimParams(i0=0.7, c=1.8, bias=np.linspace(-0.2, 0.3, 6))
    P = exact_chain(J, params)
    states = enumerate_states(6)
    a, b = 13, 42
    s, t = states[a], states[b]
    prob = 1.0
    for i in range(6):
        f = params.bias[i] + sum(J[i, j] * s[j] for j in range(6))
        q_up = 0.5 * (1 + math.tanh(params.i0 * f))
        q = q_up if t[i] == 1 else 1 - q_up
        prob *= params.p * q + (1 - params.p) * (t[i] == s[i])
    assert P[a, b] == pytest.approx(prob, rel=1e-12)


def test_exact_chain_size_guard():
    with pytest.raises(ValueError):
        exact_chain(np.zeros((13, 13)), SimParams(i0=1.0, c=1.0))


def test_state_index_round_trip():
    states = enumerate_states(5)
    assert np.array_equal(state_index(states), np.arange(32))


def test_threshold_form_equivalent_to_bernoulli():
    # sgn(tanh(x) - r), r ~ U[-1, 1], is +1 with probability (1 + tanh x) / 2
    rng = np.random.default_rng(3)
    for x in (-1.2, 0.0, 0.4, 2.5):
        r = rng.uniform(-1, 1, 200_000)
        freq = np.mean(np.where(np.tanh(x) - r >= 0, 1, -1) == 1)
        p = 0.5 * (1 + math.tanh(x))
        assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / r.size) + 1e-12


def test_empirical_transitions_match_exact_chain():
    cm = build_couplings(generate_toy("toy1"))
    params = SimParams(i0=1.0 / cm.s_J, c=2.0)
    P = exact_chain(cm, params)
    rng = make_rng(21)
    src = state_index([1, 1, -1, 1])
    batch = np.tile(enumerate_states(4)[src], (20_000, 1))
    counts = np.bincount(state_index(tick(batch, cm, params, rng)), minlength=16)
    freq = counts / counts.sum()
    se = np.sqrt(P[src] * (1 - P[src]) / counts.sum())
    assert np.all(np.abs(freq - P[src]) <= 4 * se + 1e-12)


# --- export ----------------------------------------------------------------------


def test_trajectory_rows_and_dump(tmp_path):
    traj = run(AF_EDGE, SimParams(i0=50.0, c=1.0, ticks=3), initial=[1, 1])
    rows = trajectory_rows(traj)
    assert [r["flips_this_tick"] for r in rows] == [0, 2, 2, 2]
    assert [r["tick"] for r in rows] == [0, 1, 2, 3]
    path = tmp_path / "spins.txt"
    write_spin_dump(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "0 +2" and lines[1] == "1 -2"


def test_rle_round_trip():
    s = np.array([1, 1, 1, -1, -1, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 1])
    assert spins_rle(s) == "+3-2+1-10+1"
    assert np.array_equal(parse_spins_rle(spins_rle(s)), s)


def test_graph_object_runs():
    g = Graph(3, ((0, 1, 1.0), (1, 2, 1.0)))
    traj = run(build_couplings(g), SimParams(i0=1.0, c=1.0, ticks=5, seed=1))
    assert traj.graph_name == "" and traj.states.shape == (6, 3)
