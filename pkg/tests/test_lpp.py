import itertools
import math

import numpy as np
import pytest
from scipy import stats

from lpplab.analytic import BoundaryParam
from lpplab.lpp import (LppError, Variant, dump_grid_csv, exit_points, geodesic_backtrack,
                        increment_profile, lpp_bruteforce, lpp_from, lpp_values, northeast_values,
                        weight_table)
from lpplab.randfield import SeedSpec, field_from_arrays, sample_field, stream_keys
from lpplab.sweep import Model, sweep

EXAMPLE = np.array([[1.0, 2.0], [3.0, 4.0]])  # [i-1, j-1]: w(1,1)=1, w(2,1)=3, w(1,2)=2, w(2,2)=4


def _paths(m, n):
    """Every up-right step sequence from (1,1) to (m,n)."""
    for ups in itertools.combinations(range(m + n - 2), n - 1):
        i, j, path = 1, 1, [(1, 1)]
        for s in range(m + n - 2):
            if s in ups:
                j += 1
            else:
                i += 1
            path.append((i, j))
        yield path


def test_two_by_two_example():
    f = field_from_arrays(EXAMPLE)
    g = lpp_values(f, "bulk")
    assert g[(2, 2)] == 8
    assert lpp_bruteforce(f, "bulk") == 8
    assert geodesic_backtrack(g, (2, 2)).vertices == ((1, 1), (2, 1), (2, 2))


def test_single_path_and_single_site():
    f = field_from_arrays([[0.5, 1.25, 2.0]])
    assert lpp_values(f, "bulk")[(1, 3)] == 3.75
    assert lpp_bruteforce(field_from_arrays([[0.7]]), "bulk") == 0.7


def test_three_by_three_has_six_paths():
    paths = list(_paths(3, 3))
    assert len(paths) == math.comb(4, 2) == 6
    f = sample_field(SeedSpec(1, "p33"), 3, 3)
    best = max(sum(f.bulk[i - 1, j - 1] for i, j in p) for p in paths)
    assert lpp_bruteforce(f, "bulk") == pytest.approx(best, abs=1e-12)


def test_tie_rule_prefers_vertical_predecessor():
    # convention here: on equal values the path arrives from below, i.e. from (i, j-1)
    g = lpp_values(field_from_arrays(np.ones((2, 2))), "bulk")
    assert g.ties == 1
    assert geodesic_backtrack(g, (2, 2)).vertices == ((1, 1), (2, 1), (2, 2))


def test_target_equals_start():
    g = lpp_values(field_from_arrays(EXAMPLE), "bulk")
    assert geodesic_backtrack(g, (1, 1)).vertices == ((1, 1),)


@pytest.mark.parametrize("variant,params", [
    ("bulk", None),
    ("one-sided-hor", BoundaryParam(w=0.4)),
    ("one-sided-ver", BoundaryParam(z=0.6)),
    ("two-sided", BoundaryParam(w=0.45, z=0.55)),
])
def test_dp_matches_bruteforce(variant, params):
    for r in range(20):
        f = sample_field(SeedSpec(2, variant).replica(r), 1 + r % 5, 1 + (r * 3) % 6)
        g = lpp_values(f, variant, params)
        assert g[(f.m, f.n)] == lpp_bruteforce(f, variant, params)


def test_rolling_matches_full():
    f = sample_field(SeedSpec(3, "roll"), 9, 7)
    p = BoundaryParam(w=0.5, z=0.5)
    full = lpp_values(f, "two-sided", p)
    roll = lpp_values(f, "two-sided", p, mode="rolling", probes=[(3, 4), (9, 0), (0, 7)])
    assert np.array_equal(roll.top_row, full.values[:, 7])
    for v, val in roll.probes.items():
        assert val == full[v]


def test_variant_param_validation():
    f = field_from_arrays(EXAMPLE)
    with pytest.raises(LppError):
        lpp_values(f, "one-sided-hor")
    with pytest.raises(LppError):
        lpp_values(f, "bulk", BoundaryParam(w=0.5))
    with pytest.raises(LppError):
        lpp_values(f, "bulk", mode="sideways")


def _two_sided(hor, ver):
    # rate 0.5 on both axes: -ln(u) / 0.5 = target weight
    return dict(hor_uniforms=np.exp(-0.5 * np.asarray(hor)), ver_uniforms=np.exp(-0.5 * np.asarray(ver)))


def test_exit_points_example():
    p = BoundaryParam.stationary(0.5)
    f = field_from_arrays([[1.0]], **_two_sided([5.0], [0.1]))
    g = lpp_values(f, "two-sided", p)
    assert g[(1, 1)] == pytest.approx(6.0)
    e = exit_points(geodesic_backtrack(g, (1, 1)))
    assert (e.z_hor, e.z_ver) == (1, 0)
    f = field_from_arrays([[1.0]], **_two_sided([0.1], [5.0]))
    e = exit_points(geodesic_backtrack(lpp_values(f, "two-sided", p), (1, 1)))
    assert (e.z_hor, e.z_ver) == (0, 1)


def test_exit_points_exactly_one_axis():
    p = BoundaryParam.stationary(0.4)
    for r in range(30):
        f = sample_field(SeedSpec(4, "exit").replica(r), 6, 6)
        e = exit_points(geodesic_backtrack(lpp_values(f, "two-sided", p), (6, 6)))
        assert (e.z_hor > 0) != (e.z_ver > 0)


def test_increments_along_axis_are_boundary_weights():
    p = BoundaryParam.stationary(0.5)
    f = sample_field(SeedSpec(5, "inc"), 8, 5)
    g = lpp_values(f, "two-sided", p)
    hor = weight_table(f, "two-sided", p)[1:, 0]
    assert np.allclose(increment_profile(g, (0, 0), "hor", 8), hor, rtol=0, atol=1e-12)
    with pytest.raises(LppError):
        increment_profile(g, (0, 0), "hor", 9)


def test_burke_increments_interior_row():
    keys = stream_keys([SeedSpec(6, "burke").replica(r) for r in range(10_000)])
    res = sweep(keys, 40, 40, [Model("two-sided", w=0.5, z=0.5)], probes=[(20, 20), (21, 20)])
    inc = res.probes[:, 0, 1] - res.probes[:, 0, 0]
    assert stats.kstest(inc, "expon", args=(0, 2)).pvalue > 0.01


def test_northeast_grid():
    f = sample_field(SeedSpec(7, "ne"), 5, 4)
    g = northeast_values(f, 0.35)
    assert g[(6, 5)] == 0
    for target in [(1, 1), (3, 2), (6, 1), (2, 5)]:
        assert g[target] == pytest.approx(lpp_bruteforce(f, "northeast", 0.35, target=target), abs=1e-12)
    path = geodesic_backtrack(g, (1, 1)).vertices
    assert path[0] == (1, 1) and path[-1] == (6, 5)


def test_lpp_from_arbitrary_weights():
    w = np.array([[0.0, -1.0], [2.0, 0.5]])
    g = lpp_from(w)
    assert g.values[1, 1] == 2.5


def test_dump_grid_csv(tmp_path):
    g = lpp_values(field_from_arrays(EXAMPLE), "bulk")
    dump_grid_csv(g, tmp_path / "g.csv")
    text = (tmp_path / "g.csv").read_text()
    assert "8" in text
