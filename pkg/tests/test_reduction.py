import math

import numpy as np
import pytest
import sympy as sp

from odeblowup import grid as gr
from odeblowup import reduction as rd
from odeblowup.grid import build_grid
from odeblowup.model import StatePair, make_params, symmetry_mode

r = sp.Symbol("r", positive=True)


def sym_D(d, u):
    out = r ** (d - 2) * u
    for _ in range((d - 3) // 2):
        out = sp.diff(out, r) / r
    return sp.expand(sp.simplify(out))


def sym_K(d, w):
    out = w
    for _ in range((d - 3) // 2):
        s = sp.Symbol("s", positive=True)
        out = sp.integrate((s * out.subs(r, s)), (s, 0, r))
    return sp.expand(sp.simplify(r ** (2 - d) * out))


def sym_lap(d, u):
    return sp.diff(u, r, 2) + (d - 1) / r * sp.diff(u, r)


def sym_grad(d, j, u):
    for _ in range(j // 2):
        u = sym_lap(d, u)
    return sp.diff(u, r) if j % 2 else u


def _poly(rng, deg=6):
    c = rng.integers(-3, 4, size=deg // 2 + 1)
    return sum(int(c[k]) * r ** (2 * k) for k in range(c.size))


def _exact_eval(expr, x):
    # closed forms like r^(2-d) times an integral cancel badly near 0 in doubles
    import mpmath

    f = sp.lambdify(r, expr, "mpmath")
    with mpmath.workdps(60):
        return np.array([float(f(mpmath.mpf(float(t)))) for t in x])


def _nodes_eval(expr, x):
    f = sp.lambdify(r, expr, ["scipy", "numpy"])
    return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)


@pytest.mark.parametrize("d, expected", [(5, (3, 1)), (7, (15, 9, 1))])
def test_d_coefficients_examples(d, expected):
    assert rd.d_coefficients(d).coeffs == expected


@pytest.mark.parametrize("d", [5, 7, 9, 11, 13])
def test_d_coefficients_against_symbolic_expansion(d):
    f = sp.Function("u")
    expr = sym_D(d, f(r))
    coeffs = rd.d_coefficients(d).coeffs
    rebuilt = sum(a * r ** (n + 1) * sp.diff(f(r), r, n) for n, a in enumerate(coeffs))
    assert sp.simplify(expr - rebuilt) == 0
    assert coeffs[-1] == 1 and all(a > 0 for a in coeffs)


@pytest.mark.parametrize("d", [4, 3, 6])
def test_d_coefficients_reject_bad_dimension(d):
    with pytest.raises(ValueError):
        rd.d_coefficients(d)


def test_apply_D_on_constant():
    g = build_grid(32)
    np.testing.assert_allclose(rd.apply_D(rd.d_coefficients(5), g, np.ones(33)), 3 * g.nodes, atol=1e-13)


@pytest.mark.parametrize("d", [5, 7, 9])
def test_apply_D_against_sympy(d):
    g = build_grid(32)
    rng = np.random.default_rng(d)
    # polynomials are exact up to rounding; the Gaussian pays for the
    # roundoff of up to (d-3)/2 spectral derivatives
    for u, tol in [(r ** 2, 1e-10), (_poly(rng, 8), 1e-10), (sp.exp(-r ** 2), 1e-6)]:
        want = _nodes_eval(sym_D(d, u), g.nodes)
        got = rd.apply_D(rd.d_coefficients(d), g, _nodes_eval(u, g.nodes))
        assert np.max(np.abs(got - want)) <= tol * max(1.0, np.max(np.abs(want)))


def test_apply_K_recovers_constant():
    g = build_grid(32)
    np.testing.assert_allclose(rd.apply_K(5, g, 3 * g.nodes), 1.0, atol=1e-13)


@pytest.mark.parametrize("d", [5, 7, 9])
def test_apply_K_against_sympy(d):
    g = build_grid(32)
    for w in [r, r ** 3 - 2 * r ** 5, r * sp.exp(-r ** 2)]:
        want = _exact_eval(sym_K(d, w), g.nodes[1:])
        got = rd.apply_K(d, g, _nodes_eval(w, g.nodes))
        assert np.max(np.abs(got[1:] - want)) <= 1e-11
    # the value at the origin is the limit of the formula
    lim = sp.limit(sym_K(d, r ** 3 + r), r, 0)
    assert rd.apply_K(d, g, _nodes_eval(r ** 3 + r, g.nodes))[0] == pytest.approx(float(lim), abs=1e-14)


@pytest.mark.parametrize("d", [5, 7, 9])
def test_identities_small_on_single_inputs(d):
    g = build_grid(64)
    rng = np.random.default_rng(1)
    res = rd.random_even_polynomial(rng, 16)
    from odeblowup.suites import identity_residuals

    vals = identity_residuals(d, g, res)
    assert max(vals.values()) <= 1e-10


def test_dilation_commutator_against_sympy():
    d = 7
    u = 1 + 2 * r ** 2 - r ** 6
    lam = lambda f: -r * sp.diff(f, r)
    assert sp.simplify(sym_D(d, lam(u)) - lam(sym_D(d, u)) - sym_D(d, u)) == 0


@pytest.mark.parametrize("d, j", [(5, 0), (5, 1), (5, 2), (5, 3), (7, 4), (9, 5)])
def test_hdot_against_sympy(d, j):
    g = build_grid(32)
    u = 1 + r ** 2 - 3 * r ** 4 + r ** 8
    want = sp.integrate(r ** (d - 1) * sym_grad(d, j, u) ** 2, (r, 0, 1))
    got = rd.hdot_sq(d, j, gr.to_coeffs(_nodes_eval(u, g.nodes)))
    assert got == pytest.approx(float(want), rel=1e-12, abs=1e-12)


def test_sigma_norms_against_sympy():
    d = 5
    g = build_grid(32)
    u = 2 - r ** 2 + r ** 6
    c = gr.to_coeffs(_nodes_eval(u, g.nodes))
    s1 = sp.integrate(u ** 2, (r, 0, 1)) + sum(
        sp.integrate((r ** (n - 1) * sp.diff(u, r, n)) ** 2, (r, 0, 1)) for n in range(1, 4)
    )
    s2 = sum(sp.integrate((r ** n * sp.diff(u, r, n)) ** 2, (r, 0, 1)) for n in range(3))
    assert rd.sigma1_sq(d, c) == pytest.approx(float(s1), rel=1e-12)
    assert rd.sigma2_sq(d, c) == pytest.approx(float(s2), rel=1e-12)


def test_norm_suite_zero_state():
    P = make_params(5, 3)
    g = build_grid(32)
    rep = rd.norm_suite(P, g, StatePair.zeros(33))
    assert rep.sobolev_m == rep.sigma == rep.d_norm == 0.0
    assert rep.ratios == (0.0, 0.0)


@pytest.mark.parametrize("d, p", [(5, 3), (7, 5)])
def test_d_norm_of_symmetry_mode_closed_form(d, p):
    P = make_params(d, p)
    g = build_grid(32)
    rep = rd.norm_suite(P, g, symmetry_mode(P, g))
    a0 = rd.d_coefficients(d).coeffs[0]
    # D g_j = a0 g_j rho: only the first-derivative and boundary terms survive
    closed = math.sqrt((a0 * P.beta) ** 2 + (a0 + a0 * P.beta) ** 2)
    assert rep.d_norm == pytest.approx(closed, rel=1e-10)


def test_norm_suite_size_mismatch():
    P = make_params(5, 3)
    with pytest.raises(ValueError):
        rd.norm_suite(P, build_grid(32), StatePair.zeros(10))


@pytest.mark.parametrize("alpha", [1, 2, 3, 4])
def test_hardy_monomial(alpha):
    g = build_grid(32)
    assert rd.hardy_residual(alpha, g, g.nodes ** alpha) == pytest.approx(1.0 / alpha, rel=1e-12)


def test_hardy_zero_and_bound():
    g = build_grid(32)
    assert rd.hardy_residual(2, g, np.zeros(33)) == 0.0
    with pytest.raises(ValueError):
        rd.hardy_residual(0, g, g.nodes)
    f = g.nodes ** 2 * (1 - g.nodes + 3 * g.nodes ** 3)
    assert rd.hardy_residual(2, g, f) <= rd.hardy_bound(2)


def test_hardy_against_quadrature():
    # ratio for f = rho^2 (1 - rho)^3, both integrals done symbolically
    g = build_grid(32)
    a = 2
    f = r ** 2 * (1 - r) ** 3
    num = sp.integrate((f / r ** a) ** 2, (r, 0, 1))
    den = sp.integrate((sp.diff(f, r) / r ** (a - 1)) ** 2, (r, 0, 1))
    want = math.sqrt(float(num / den))
    assert rd.hardy_residual(a, g, _nodes_eval(f, g.nodes)) == pytest.approx(want, rel=1e-12)


class TestExtension:
    def setup_method(self):
        self.g = build_grid(32)
        self.u = np.exp(-self.g.nodes ** 2) * (1 + self.g.nodes ** 2)

    def test_matches_inside_and_vanishes_outside(self):
        ext = rd.extend_profile(5, 3, self.g, self.u)
        assert ext(0.5) == pytest.approx(math.exp(-0.25) * 1.25, abs=1e-13)
        assert ext(1.6) == 0.0
        assert ext(2.5) == 0.0

    @pytest.mark.parametrize("m", [2, 3])
    def test_seam_continuity(self, m):
        ext = rd.extend_profile(5, m, self.g, self.u)
        left = ext.derivatives(np.array([1.0]), m)[:, 0]
        right = ext.derivatives(np.array([1.0 + 1e-12]), m)[:, 0]
        np.testing.assert_allclose(right, left, atol=1e-8)

    def test_one_sided_finite_differences(self):
        m = 3
        ext = rd.extend_profile(5, m, self.g, self.u)
        scale = np.max(np.abs(ext.derivatives(np.linspace(0.5, 1.4, 50), m + 1)))
        for h in (1e-2, 5e-3):
            fwd = sum((-1) ** (m - k) * math.comb(m, k) * ext(1.0 + k * h) for k in range(m + 1)) / h ** m
            bwd = sum((-1) ** k * math.comb(m, k) * ext(1.0 - k * h) for k in range(m + 1)) / h ** m
            # each one-sided difference is the m-th derivative at the seam plus O(h)
            assert abs(fwd - bwd) <= 2 * m * h * scale

    def test_rejects_wrong_order(self):
        with pytest.raises(ValueError):
            rd.extend_profile(5, 1, self.g, self.u)

    def test_constants_positive(self):
        lower, upper = rd.extension_constants(5, self.g, self.u)
        assert 0 < lower <= 1.0
        assert math.isfinite(upper) and upper > 0
