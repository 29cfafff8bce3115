"""Measured properties of the bundled five-point example (coordinates read from figures)."""

from functools import lru_cache

import numpy as np
import pytest

from boundary_ot import config, driver
from boundary_ot.driver import RunConfig, run
from boundary_ot.ground_cost import GroundCost
from boundary_ot.grid import initial_grid, refine
from boundary_ot.shifts import lemma_violations, reconstruct_partition


@lru_cache(maxsize=None)
def solved(m, p=2.0, q=1.0):
    base = config.load_runs("five_point")[0].config
    return run(RunConfig(GroundCost.lp(p, q), base.density, base.targets, base.weights, target_exp=m))


def test_partial_cost_first_levels():
    stats = solved(5, 2.0, 2.0).stats
    assert stats[0].partial == pytest.approx(0.01387, rel=0.10)
    assert stats[1].partial == pytest.approx(0.02898, rel=0.10)


def test_boundary_area_decays():
    stats = solved(9).stats
    area = np.array([s.boundary * s.width ** 2 for s in stats])
    ratios = area[1:] / area[:-1]
    assert np.all(ratios[1:] <= 0.75)


def test_cycle_residuals_shrink():
    coarse, fine = solved(8).shifts.residuals, solved(10).shifts.residuals
    common = set(coarse) & set(fine)
    assert common
    for edge in common:
        assert fine[edge] <= 1.2 * coarse[edge]


def test_no_forced_empty_region():
    res = solved(9)
    assert lemma_violations(res.shifts, res.config.cost, res.config.targets) == []


def test_pixel_fractions():
    res = solved(9)
    labels = reconstruct_partition(res.shifts, res.config.cost, res.config.targets, 512)
    frac = np.bincount(labels.ravel(), minlength=5) / labels.size
    assert np.all(np.abs(frac - 0.2) <= 0.02)


def test_warm_start_keeps_labels():
    cfg = config.load_runs("five_point")[0].config
    state = driver.BoundaryState(initial_grid(cfg.side, cfg.w1, cfg.density), 0.0, cfg.weights.copy(), 1,
                                 np.zeros(cfg.n), np.zeros(cfg.n))
    agreement = []
    for level in range(1, 5):
        act = state.active
        status, ref = act.neighbor_table(cfg.density)
        inherited = act.label.copy()
        sol, _, labels = driver._solve_level(cfg, state)
        if level >= 2:
            keep = ~sol.split
            agreement.append(np.mean(labels[keep] == inherited[keep]))
        act.label = labels
        gone = driver.discard_interiors(cfg, state, labels, sol.split, status, ref)
        rest = np.setdiff1d(np.arange(len(act)), gone)
        state.active = refine(act, rest, cfg.density, discarded_rows=gone)
        state.level += 1
    assert min(agreement) >= 0.9
