import numpy as np
import pytest

from lpkmeans.core import (
    PointSet,
    kmeans_cost,
    same_partition,
    squared_distances,
)
from lpkmeans.cutplane import SolveConfig, drop_slack_cuts, gap, solve_kmeans_lp
from lpkmeans.generators import GenSpec, generate
from lpkmeans.lp_model import CutPool, FacetInequality, all_cuts, build, violation
from lpkmeans.solver import solve

from conftest import random_points

F_KMEANS = 146.0 / 72.0
F_LP = 54.0 / 28.0
FIVE_POINT_GAP = (F_KMEANS - F_LP) / F_KMEANS  # 0.04892367...


def test_gap_values():
    assert gap(10.0, 9.0) == pytest.approx(0.1)
    assert gap(3.5, 3.5) == 0.0
    assert gap(F_KMEANS, F_LP) == pytest.approx(0.04892367906066538, abs=1e-12)
    assert gap(0.0, 0.0) == 0.0
    assert gap(0.0, -1e-13) == 0.0
    assert gap(0.0, -1.0) == np.inf


def test_drop_slack_cuts(five_point):
    _, planted, d = five_point
    pool = CutPool(all_cuts(5, 2))
    lp = build(d, 2, pool)
    sol = solve(lp, tol=1e-8)
    from lpkmeans.core import unpack_matrix

    x = unpack_matrix(sol.x, 5)
    kept = drop_slack_cuts(pool, x, 1e-6)
    expected = {(c.i, c.s) for c in pool if abs(violation(x, c)) <= 1e-6}
    assert {(c.i, c.s) for c in kept} == expected
    assert 0 < len(kept) < len(pool)
    # boundary behaviors
    assert len(drop_slack_cuts(pool, x, 1e9)) == len(pool)
    none_tight = drop_slack_cuts(pool, np.eye(5), 1e-9)
    assert all(abs(violation(np.eye(5), c)) <= 1e-9 for c in none_tight)


def test_five_point_run(five_point):
    points, _, _ = five_point
    p, trace, tight = solve_kmeans_lp(points, SolveConfig(k=2, seed=1))
    assert trace.status == "no_more_cuts"
    assert not tight
    assert trace.f_ub == pytest.approx(F_KMEANS, abs=1e-9)
    assert trace.f_lb == pytest.approx(F_LP, abs=1e-6)
    assert trace.r_g == pytest.approx(FIVE_POINT_GAP, abs=1e-4)
    assert kmeans_cost(points, p) == pytest.approx(F_KMEANS, abs=1e-9)
    # the loop proved optimality only up to the non-tightness gap
    assert trace.r_g > 1e-4
    assert any(r.exhaustive for r in trace.rounds)


def test_singletons_one_round_tight():
    pts = PointSet(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    p, trace, tight = solve_kmeans_lp(pts, SolveConfig(k=4, seed=1))
    assert trace.status == "converged"
    assert tight
    assert trace.f_ub == 0.0
    assert p.sizes.tolist() == [1, 1, 1, 1]


def test_monotone_traces_and_tightness(five_point):
    points, _, _ = five_point
    _, trace, _ = solve_kmeans_lp(points, SolveConfig(k=2, seed=3))
    lbs = [r.f_lb for r in trace.rounds]
    ubs = [r.f_ub for r in trace.rounds]
    assert all(a <= b + 1e-12 for a, b in zip(lbs, lbs[1:]))
    assert all(a >= b - 1e-12 for a, b in zip(ubs, ubs[1:]))


def test_ssm_tight_recovery():
    pts, planted = generate(GenSpec("ssm", n=60, m=2, delta=3.0, r1=1.0, seed=13))
    p, trace, tight = solve_kmeans_lp(pts, SolveConfig(k=2, seed=13))
    assert trace.status == "converged"
    assert tight
    assert same_partition(p.assign, planted.assign)
    d = squared_distances(pts)
    assert trace.f_lb <= kmeans_cost(pts, p) + 1e-6 * (1 + trace.f_ub)
    assert trace.r_g <= 1e-4


def test_cutting_plane_matches_direct_solve():
    rng = np.random.default_rng(14)
    for trial in range(3):
        n = int(rng.integers(10, 15))
        k = int(rng.integers(2, 4))
        pts = random_points(rng, n, 2)
        cfg = SolveConfig(k=k, eps_opt=1e-9, seed=trial, max_rounds=60)
        _, trace, _ = solve_kmeans_lp(pts, cfg)
        assert trace.status in ("converged", "no_more_cuts")
        d = squared_distances(pts)
        lp = build(d, k, CutPool(all_cuts(n, k)))
        ref = solve(lp, tol=1e-9)
        assert abs(trace.f_lb - ref.objective) <= 1e-5 * (1 + abs(ref.objective))


def test_keep_pools_snapshots(five_point):
    points, _, _ = five_point
    _, trace, _ = solve_kmeans_lp(points, SolveConfig(k=2, seed=1, keep_pools=True))
    assert all(r.pool_snapshot is not None for r in trace.rounds)
    assert all(len(r.pool_snapshot) == r.pool_size for r in trace.rounds)


def test_max_rounds_reported(five_point):
    points, _, _ = five_point
    _, trace, tight = solve_kmeans_lp(points, SolveConfig(k=2, seed=1, max_rounds=1))
    assert trace.status == "max_rounds"
    assert trace.n_rounds == 1
    assert not tight


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(k=2, eps_opt=0.0)
    with pytest.raises(ValueError):
        SolveConfig(k=3, t_start=4)
    with pytest.raises(ValueError):
        SolveConfig(k=2, max_rounds=0)


def test_k_out_of_range(five_point):
    points, _, _ = five_point
    with pytest.raises(ValueError):
        solve_kmeans_lp(points, SolveConfig(k=6))
