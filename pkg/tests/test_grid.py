import io
import math

import numpy as np
import pytest

from odeblowup import grid as gr
from odeblowup.grid import (
    EmptyProfileError,
    NonMonotoneRadiiError,
    ProfileParseError,
    SampledProfile,
    build_grid,
    chebyshev_nodes,
    ingest_profile,
    interpolate,
    sample_profile,
    write_profile,
)


def test_nodes_n4():
    expected = [(1 - math.cos(math.pi * k / 4)) / 2 for k in range(5)]
    np.testing.assert_allclose(chebyshev_nodes(4), expected, atol=1e-15)
    np.testing.assert_allclose(chebyshev_nodes(4), [0, 0.1464466, 0.5, 0.8535534, 1], atol=1e-7)


@pytest.mark.parametrize("N", [8, 9, 16, 32, 64])
def test_grid_shape_and_endpoints(N):
    g = build_grid(N)
    assert g.nodes.shape == (N + 1,)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)


def test_small_grid_rejected():
    with pytest.raises(ValueError):
        build_grid(4)
    with pytest.raises(ValueError):
        build_grid(10.5)


@pytest.mark.parametrize("N", [8, 16, 32])
def test_diff_rho_squared(N):
    g = build_grid(N)
    x = g.nodes
    assert np.max(np.abs(g.diff1 @ x ** 2 - 2 * x)) <= 1e-12
    # second-derivative rounding grows like N^4 eps
    assert np.max(np.abs(g.diff2 @ x ** 2 - 2)) <= 1e-15 * N ** 4


def test_diff_annihilates_constants():
    g = build_grid(64)
    for M in (g.diff1, g.diff2):
        assert np.max(np.abs(M @ np.ones(65))) <= 1e-15 * np.max(np.abs(M))


def test_diff_exponential_against_exact():
    g = build_grid(32)
    e = np.exp(g.nodes)
    np.testing.assert_allclose(g.diff1 @ e, e, atol=1e-11)


@pytest.mark.parametrize("d", [5, 7, 9])
def test_quadrature_radial_weight(d):
    g = build_grid(32)
    assert g.integrate(g.nodes ** (d - 1)) == pytest.approx(1.0 / d, abs=1e-14)


def test_interpolation():
    g16 = build_grid(16)
    assert interpolate(g16, g16.nodes ** 3, 0.3) == pytest.approx(0.027, abs=1e-12)
    vals = np.sin(g16.nodes)
    assert interpolate(g16, vals, g16.nodes[5]) == vals[5]
    g32 = build_grid(32)
    assert interpolate(g32, np.exp(g32.nodes), 0.7) == pytest.approx(math.exp(0.7), abs=1e-10)
    with pytest.raises(ValueError):
        interpolate(g16, vals, 1.2)


def test_coefficient_roundtrip_and_calculus():
    g = build_grid(32)
    x = g.nodes
    c = gr.to_coeffs(x ** 4 - x)
    np.testing.assert_allclose(gr.to_values(c, g), x ** 4 - x, atol=1e-14)
    np.testing.assert_allclose(gr.evaluate(gr.derivative(c), x), 4 * x ** 3 - 1, atol=1e-12)
    assert gr.integral(c) == pytest.approx(0.2 - 0.5, abs=1e-14)
    np.testing.assert_allclose(gr.evaluate(gr.times_rho(c, 2), x), x ** 6 - x ** 3, atol=1e-13)


def test_ray_average_divides_by_rho():
    # int_0^1 f(rho t) dt for f = rho^3 is rho^3 / 4
    g = build_grid(16)
    c = gr.to_coeffs(g.nodes ** 3)
    np.testing.assert_allclose(gr.ray_average(c, g.nodes), g.nodes ** 3 / 4, atol=1e-14)


def test_ingest_profile_rows():
    prof = ingest_profile(io.StringIO("0,1,0\n1,0.5,0\n"))
    assert len(prof) == 2
    assert prof.values1.tolist() == [1.0, 0.5]


def test_ingest_profile_header_and_roundtrip(tmp_path):
    prof = sample_profile(np.cos, np.sin, 2.0, 16)
    path = tmp_path / "p.csv"
    write_profile(prof, path)
    back = ingest_profile(path)
    np.testing.assert_array_equal(back.radii, prof.radii)
    np.testing.assert_array_equal(back.values2, prof.values2)


@pytest.mark.parametrize(
    "text, err",
    [
        ("1,0,0\n0,1,0\n", NonMonotoneRadiiError),
        ("r,u,ut\n", EmptyProfileError),
        ("0,1\n", ProfileParseError),
        ("0,1,0\n1,x,3\n", ProfileParseError),
        ("0,nan,0\n", ProfileParseError),
    ],
)
def test_ingest_profile_errors(text, err):
    with pytest.raises(err):
        ingest_profile(io.StringIO(text))


def test_sampled_profile_validation():
    with pytest.raises(EmptyProfileError):
        SampledProfile(np.array([]), np.array([]), np.array([]))
    with pytest.raises(NonMonotoneRadiiError):
        SampledProfile(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2))


def test_refinement_leaves_norms_unchanged():
    from odeblowup import reduction as rd
    from odeblowup.model import StatePair, make_params

    params = make_params(5, 3)
    vals = []
    for N in (32, 64):
        x = build_grid(N).nodes
        s = StatePair(np.exp(-x * x), np.cos(x * x))
        vals.append(rd.norm_suite(params, build_grid(N), s))
    a, b = vals
    assert abs(a.d_norm - b.d_norm) <= 1e-8 * a.d_norm
    assert abs(a.sobolev_m - b.sobolev_m) <= 1e-8 * a.sobolev_m


def test_profile_interpolator_is_deterministic_and_accurate():
    prof = sample_profile(np.cos, np.sin, 1.5, 20)
    r = np.linspace(0, 1.5, 37)
    f1, f2 = prof.interpolator()
    g1, _ = prof.interpolator()
    np.testing.assert_array_equal(f1(r), g1(r))
    np.testing.assert_allclose(f1(r), np.cos(r), atol=1e-13)
    np.testing.assert_allclose(f2(r), np.sin(r), atol=1e-13)
