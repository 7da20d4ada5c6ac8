import numpy as np
import pytest

from lpplab.analytic import BoundaryParam, DomainError
from lpplab.lpp import exit_points, geodesic_backtrack, lpp_values
from lpplab.randfield import SeedSpec, sample_field
from lpplab.sweep import Model, sweep

MODELS = [Model.bulk(), Model.hor(0.4), Model.ver(0.6), Model.two_sided(0.45, 0.55),
          Model.stationary(0.5)]
PARAMS = [("bulk", None), ("one-sided-hor", BoundaryParam(w=0.4)),
          ("one-sided-ver", BoundaryParam(z=0.6)), ("two-sided", BoundaryParam(w=0.45, z=0.55)),
          ("two-sided", BoundaryParam(w=0.5, z=0.5))]


def test_sweep_matches_stored_field():
    fam = SeedSpec(12, "sweep")
    specs = [fam.replica(r) for r in range(6)]
    m, n = 9, 7
    res = sweep(specs, m, n, MODELS, probes=[(3, 2), (9, 7)])
    for r, spec in enumerate(specs):
        f = sample_field(spec, m, n)
        for k, (variant, params) in enumerate(PARAMS):
            g = lpp_values(f, variant, params)
            assert res.value[r, k] == g[(m, n)]
            assert res.probes[r, k, 0] == g[(3, 2)]
            if variant != "bulk":
                e = exit_points(geodesic_backtrack(g, (m, n)))
                assert (res.z_hor[r, k], res.z_ver[r, k]) == (e.z_hor, e.z_ver)


def test_exit_sum_is_boundary_mass_before_exit():
    spec = SeedSpec(13, "esum")
    res = sweep([spec], 8, 8, [Model.stationary(0.5)])
    f = sample_field(spec, 8, 8)
    g = lpp_values(f, "two-sided", BoundaryParam.stationary(0.5))
    path = geodesic_backtrack(g, (8, 8)).vertices
    on_axis = [g.values[i, j] for i, j in path if i == 0 or j == 0]
    assert res.exit_sum[0, 0] == pytest.approx(max(on_axis))


def test_chunking_does_not_matter():
    specs = [SeedSpec(14, "chunk").replica(r) for r in range(50)]
    a = sweep(specs, 12, 10, MODELS)
    b = sweep(specs, 12, 10, MODELS, chunk_cells=200)
    assert np.array_equal(a.value, b.value) and np.array_equal(a.z_hor, b.z_hor)


def test_tilted_model_uses_tilted_rate():
    # tilting every site to the original rate is a no-op
    specs = [SeedSpec(15, "t").replica(r) for r in range(20)]
    a = sweep(specs, 6, 6, [Model.hor(0.5), Model.hor(0.5, tilt_rate=0.5, tilt_sites=6)])
    assert np.array_equal(a.value[:, 0], a.value[:, 1])
    assert np.all(a.tilt_sum[:, 1] > 0)


def test_model_validation():
    with pytest.raises(DomainError):
        Model("diagonal")
    with pytest.raises(DomainError):
        Model.hor(0.0)
    with pytest.raises(DomainError):
        Model("bulk", tilt_rate=0.3, tilt_sites=2)
    with pytest.raises(DomainError):
        sweep([SeedSpec(0, "x")], 3, 3, [Model.bulk()], probes=[(4, 1)])
