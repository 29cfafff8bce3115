import numpy as np
import pytest

from boundary_ot import auction
from boundary_ot.auction import Assignment, AuctionError, TransportProblem, solve, verify_eps_cs
from boundary_ot.oracle import DenseTransportInstance, brute_force_transport


def assignment_from(shares, n_sources=1):
    src = np.array([s for s, _, _ in shares])
    snk = np.array([t for _, t, _ in shares])
    amt = np.array([a for _, _, a in shares], dtype=float)
    return Assignment(src, snk, amt, np.zeros(3), 0.0, n_sources)


def test_zero_cost_matching():
    prob = TransportProblem([[0, 1], [1, 0]], [0.5, 0.5], [0.5, 0.5])
    sol = solve(prob)
    assert sol.total_cost(prob.cost) == pytest.approx(0.0, abs=1e-12)
    assert sol.label.tolist() == [0, 1]
    assert not sol.split.any()
    assert verify_eps_cs(prob, sol)[0]


def test_single_sink_takes_everything():
    rng = np.random.default_rng(1)
    mass = rng.random(7)
    prob = TransportProblem(rng.random((7, 1)), mass, [mass.sum()])
    sol = solve(prob)
    assert np.allclose(sol.dense(1)[:, 0], mass)


def test_three_by_two_matches_brute_force():
    C = np.array([[1, 2], [2, 1], [3, 3]], dtype=float)
    mass, cap = np.array([0.5, 0.3, 0.2]), np.array([0.6, 0.4])
    sol = solve(TransportProblem(C, mass, cap))
    best, _ = brute_force_transport(DenseTransportInstance(C, mass, cap))
    assert best == pytest.approx(1.4)
    assert sol.total_cost(C) == pytest.approx(best, abs=1e-8)


def test_destination_rule():
    a = assignment_from([(0, 0, 0.6), (0, 1, 0.4)])
    assert a.destination(0) == 0 and a.split[0]
    b = assignment_from([(0, 2, 1.0)])
    assert b.destination(0) == 2 and not b.split[0]
    c = assignment_from([(0, 0, 0.5), (0, 1, 0.5)])
    assert c.destination(0) == 0 and c.split[0]
    assert c.shares(0) == [(0, 0.5), (1, 0.5)]


def test_unbalanced_rejected():
    with pytest.raises(ValueError):
        TransportProblem([[0, 1]], [1.0], [0.5, 0.4])
    with pytest.raises(ValueError):
        TransportProblem([[0, np.inf]], [1.0], [0.5, 0.5])


def test_bid_budget_raises_with_best():
    rng = np.random.default_rng(2)
    prob = TransportProblem(rng.random((40, 4)), np.full(40, 0.025), np.full(4, 0.25))
    with pytest.raises(AuctionError) as info:
        solve(prob, max_bids=5)
    assert info.value.best is not None


def test_bad_schedule():
    prob = TransportProblem([[0, 1], [1, 0]], [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(ValueError):
        solve(prob, eps_schedule=(1e-3, 4, 1e-2))


@pytest.mark.parametrize("seed", range(25))
def test_random_instances_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    S, n = int(rng.integers(2, 65)), int(rng.integers(2, 9))
    C = rng.random((S, n))
    mass = rng.random(S) + 0.05
    cap = rng.random(n) + 0.05
    cap *= mass.sum() / cap.sum()
    prob = TransportProblem(C, mass, cap)
    sol = solve(prob)
    ok, info = verify_eps_cs(prob, sol)
    assert ok, info
    best, _ = brute_force_transport(DenseTransportInstance(C, mass, cap))
    eps_min = auction.default_schedule(C)[2]
    assert sol.total_cost(C) <= best + eps_min * S + 1e-12


def test_warm_start_and_determinism():
    rng = np.random.default_rng(3)
    C = rng.random((200, 6))
    prob = TransportProblem(C, np.full(200, 1 / 200), np.full(6, 1 / 6))
    a = solve(prob)
    b = solve(prob)
    assert np.array_equal(a.src, b.src) and np.array_equal(a.amount, b.amount)
    warm = solve(prob, warm_prices=a.prices)
    assert verify_eps_cs(prob, warm)[0]
    assert warm.total_cost(C) == pytest.approx(a.total_cost(C), abs=1e-6)


def test_verifier_detects_violation():
    prob = TransportProblem([[0, 1], [1, 0]], [0.5, 0.5], [0.5, 0.5])
    bad = Assignment(np.array([0, 1]), np.array([1, 0]), np.array([0.5, 0.5]), np.zeros(2), 1e-9, 2)
    ok, info = verify_eps_cs(prob, bad)
    assert not ok and info["max_cs_gap"] == pytest.approx(1.0)


def test_write_csv(tmp_path):
    prob = TransportProblem([[0, 1], [1, 0]], [0.5, 0.5], [0.5, 0.5])
    path = tmp_path / "plan.csv"
    solve(prob).write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "kind,id,sink,value"
    assert sum(line.startswith("share") for line in lines) == 2
