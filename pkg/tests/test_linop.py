import csv
import math

import numpy as np
import pytest

from odeblowup import grid as gr
from odeblowup import reduction as rd
from odeblowup.grid import build_grid
from odeblowup.linop import (
    EvolutionTrace,
    assemble_generator,
    default_dt,
    dissipativity_residual,
    dissipativity_terms,
    fit_decay_rate,
    linear_propagate,
    march,
    resolvent_at_mu,
    resolvent_residual,
    semigroup_prefactor,
    spectral_projection,
    stability_limit,
)
from odeblowup.model import StatePair, make_params, similarity_rhs, static_pair, symmetry_mode
from odeblowup.suites import even_corpus

P3 = make_params(5, 3)
P5 = make_params(7, 5)


def _state(grid, seed):
    c1, c2 = even_corpus(seed, 2)
    return StatePair(gr.to_values(c1, grid), gr.to_values(c2, grid))


@pytest.fixture(scope="module")
def setup53():
    gen = assemble_generator(P3, build_grid(32))
    return gen, spectral_projection(gen)


def test_zero_maps_to_zero(setup53):
    gen, _ = setup53
    out = gen.apply(StatePair.zeros(gen.size))
    assert not out.first.any() and not out.second.any()


@pytest.mark.parametrize("params", [P3, P5])
def test_symmetry_mode_is_eigenvector(params):
    g = build_grid(32)
    gen = assemble_generator(params, g)
    mode = symmetry_mode(params, g)
    out = gen.apply(mode)
    scale = np.abs(gen.operator).max() * 1e-14
    np.testing.assert_allclose(out.first, mode.first, atol=scale)
    np.testing.assert_allclose(out.second, mode.second, atol=scale)
    red = gen.restrict(mode)
    np.testing.assert_allclose(gen.reduced @ red, red, atol=scale)


@pytest.mark.parametrize("params", [P3, P5])
def test_generator_is_linearization_of_nonlinear_rhs(params):
    # central differences of the full right-hand side around the static pair
    g = build_grid(16)
    c1, c2 = static_pair(params)
    base = StatePair(np.full(17, c1), np.full(17, c2))
    gen = assemble_generator(params, g)
    pert = _state(g, 4)
    h = 1e-6
    plus = similarity_rhs(params, g, base + h * pert)
    minus = similarity_rhs(params, g, base - h * pert)
    fd = (plus - minus) * (1 / (2 * h))
    lin = gen.apply(pert)
    scale = max(np.abs(lin.first).max(), np.abs(lin.second).max())
    assert np.max(np.abs(fd.first - lin.first)) <= 1e-6 * scale
    assert np.max(np.abs(fd.second - lin.second)) <= 1e-6 * scale


def test_boundary_rows_enforce_regularity(setup53):
    gen, _ = setup53
    n = gen.size
    assert tuple(gen.boundary_rows) == (0, n)
    np.testing.assert_allclose(gen.matrix[0, :n], gen.grid.diff1[0])


def test_lift_restrict_roundtrip(setup53):
    gen, _ = setup53
    x = gen.grid.nodes
    s = StatePair(1 + x ** 2 - x ** 4, 2 * x ** 2)
    back = gen.lift(gen.restrict(s))
    np.testing.assert_allclose(back.first, s.first, atol=1e-12)
    np.testing.assert_allclose(back.second, s.second, atol=1e-12)


@pytest.mark.parametrize("params", [P3, P5])
def test_dissipativity_identity(params):
    g = build_grid(48)
    for seed in range(5):
        s = _state(g, seed)
        res = dissipativity_residual(params, g, s)
        terms = dissipativity_terms(params, g, s)
        scale = rd.d_norm_sq(params.d, *rd.state_series(s))
        assert res <= 1e-8 * scale
        assert abs(res - terms["total"]) <= 1e-9 * scale


def test_dissipativity_zero_state():
    assert dissipativity_residual(P3, build_grid(16), StatePair.zeros(17)) == 0.0


def test_resolvent_zero_and_random():
    g = build_grid(48)
    u = resolvent_at_mu(5, g, StatePair.zeros(49))
    assert not np.any(u.first) and not np.any(u.second)
    f = _state(g, 9)
    u = resolvent_at_mu(5, g, f)
    fn = math.hypot(g.l2_norm(f.first), g.l2_norm(f.second))
    assert resolvent_residual(P3, g, f, u) <= 1e-6 * fn


def test_projection_basics(setup53):
    gen, proj = setup53
    red = gen.restrict(symmetry_mode(P3, gen.grid))
    assert proj.coefficient(red) == pytest.approx(1.0, abs=1e-13)
    np.testing.assert_allclose(proj.apply(red), red, atol=1e-13)
    assert abs(proj.eigenvalue - 1.0) <= 1e-8


def test_projection_kills_stable_eigenvectors(setup53):
    gen, proj = setup53
    vals, vecs = np.linalg.eig(gen.reduced)
    order = np.argsort(-vals.real)
    for i in order[1:6]:
        v = vecs[:, i]
        assert abs(proj.left_mode @ v) <= 1e-8 * np.linalg.norm(v)


def test_projection_requires_eigenvalue_one(monkeypatch):
    import odeblowup.linop as lo

    gen = assemble_generator(P3, build_grid(16))
    shifted = lo.GeneratorMatrix(
        gen.matrix, gen.operator, gen.reduced - 0.5 * np.eye(gen.reduced.shape[0]), gen.lift_matrix,
        gen.grid, gen.params, gen.boundary_rows, gen.include_perturbation,
    )
    with pytest.raises(ArithmeticError):
        spectral_projection(shifted)


def test_linear_growth_of_symmetry_mode(setup53):
    gen, proj = setup53
    tr = linear_propagate(gen, proj, symmetry_mode(P3, gen.grid), 2.0, default_dt(gen.grid))
    k = np.argmin(np.abs(tr.taus - 2.0))
    assert tr.unstable_coeff[k] == pytest.approx(math.exp(2.0), rel=1e-6)


def test_linear_zero_state(setup53):
    gen, proj = setup53
    tr = linear_propagate(gen, proj, StatePair.zeros(gen.size), 1.0, default_dt(gen.grid))
    assert not tr.full_norm.any() and not tr.unstable_coeff.any()
    assert len(tr) == 5


def test_filtered_linear_decay(setup53):
    gen, proj = setup53
    tr = linear_propagate(gen, proj, _state(gen.grid, 2), 12.0, default_dt(gen.grid), filter_unstable=True)
    assert fit_decay_rate(tr, (4.0, 12.0)) >= P3.mu_p - 0.1


def test_dt_checked_against_stability(setup53):
    gen, proj = setup53
    with pytest.raises(ValueError):
        march(gen, proj, np.zeros(2 * (gen.size - 1)), 1.0, 2 * stability_limit(gen.grid))


def test_fit_exact_exponential():
    t = np.linspace(0, 10, 41)
    assert fit_decay_rate((t, np.exp(-0.7 * t))) == pytest.approx(0.7, abs=1e-10)


def test_fit_constant():
    t = np.linspace(0, 10, 41)
    assert abs(fit_decay_rate((t, np.full_like(t, 3.0)))) <= 1e-12


def test_fit_modulated_exponential():
    t = np.linspace(0, 20, 161)
    rate = fit_decay_rate((t, np.exp(-t) * (2 + np.sin(t))), window=(5, 15))
    assert rate == pytest.approx(1.0, abs=0.05)


def test_fit_rejects_short_or_bad_windows():
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        fit_decay_rate((t, np.exp(-t)))
    t = np.linspace(0, 1, 20)
    with pytest.raises(ValueError):
        fit_decay_rate((t, np.zeros(20)))
    with pytest.raises(ValueError):
        fit_decay_rate((t, np.exp(-t)), window=(0.5, 0.5))


def test_semigroup_prefactor():
    t = np.linspace(0, 4, 17)
    tr = EvolutionTrace(t, 3 * np.exp(-t) * (1 + 0.5 * np.sin(t) ** 2), t, t)
    # sup of e^{mu t} f(t)/f(0) with mu = 1 is attained where sin^2 is largest
    assert semigroup_prefactor(tr, 1.0) == pytest.approx(1 + 0.5 * np.max(np.sin(t) ** 2), rel=1e-12)
    assert semigroup_prefactor(tr, 0.0) == pytest.approx(1.0)


def test_trace_csv_columns(tmp_path):
    tr = EvolutionTrace([0.0, 0.25], [1.0, 0.5], [0.9, 0.4], [0.1, 0.05], {"N": 8}, {"hdot_0": [1.0, 2.0]})
    tr.write_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["tau", "full_norm", "stable_norm", "unstable_coeff"]
    assert [float(x) for x in rows[2]] == [0.25, 0.5, 0.4, 0.05]
    tr.write_extras_csv(tmp_path / "e.csv")
    assert list(csv.reader(open(tmp_path / "e.csv")))[0] == ["tau", "hdot_0"]
    with pytest.raises(ValueError):
        EvolutionTrace([0.0, 0.0], [1, 1], [1, 1], [1, 1])
