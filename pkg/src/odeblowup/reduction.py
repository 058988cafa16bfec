"""The D_d / K_d calculus, equivalent norms, Hardy ratios and the extension operator.

Internally functions are Chebyshev series on [0, 1] (see ``grid``); high
derivatives and weighted integrals are evaluated in coefficient space, and
every division by a power of rho is replaced by an averaging integral along
the ray [0, rho] so that rho = 0 needs no special casing.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import grid as gr
from .grid import Grid
from .model import ModelParams, StatePair


def _check_dimension(d):
    if int(d) != d or d < 5 or int(d) % 2 == 0:
        raise ValueError(f"dimension must be an odd integer >= 5, got {d!r}")
    return int(d)


class RadialExpr:
    """A linear differential expression  sum c * rho^power * u^(order)."""

    def __init__(self, terms=None):
        self.terms = defaultdict(float)
        for key, c in (terms or {}).items():
            if c:
                self.terms[key] += c

    @classmethod
    def identity(cls):
        return cls({(0, 0): 1.0})

    def derivative(self):
        out = defaultdict(float)
        for (a, n), c in self.terms.items():
            if a:
                out[(a - 1, n)] += a * c
            out[(a, n + 1)] += c
        return RadialExpr(out)

    def times_power(self, k):
        return RadialExpr({(a + k, n): c for (a, n), c in self.terms.items()})

    def __add__(self, other):
        out = defaultdict(float, self.terms)
        for key, c in other.terms.items():
            out[key] += c
        return RadialExpr(out)

    def __rmul__(self, s):
        return RadialExpr({key: s * c for key, c in self.terms.items()})

    def substitute_rho_squared(self):
        """Expression for u -> E[rho^2 u] via the Leibniz rule."""
        out = defaultdict(float)
        for (a, n), c in self.terms.items():
            out[(a + 2, n)] += c
            if n >= 1:
                out[(a + 1, n - 1)] += 2 * n * c
            if n >= 2:
                out[(a, n - 2)] += n * (n - 1) * c
        return RadialExpr(out)

    def laplacian(self, d):
        first = self.derivative()
        return first.derivative() + (d - 1) * first.times_power(-1)

    def cleaned(self):
        return {k: v for k, v in sorted(self.terms.items()) if abs(v) > 0}

    def series(self, coeffs, extra_power=0):
        """Chebyshev series of rho^extra * E[u]; all resulting powers must be >= 0."""
        total = np.zeros(1)
        for (a, n), c in self.cleaned().items():
            power = a + extra_power
            if power < 0:
                raise ValueError("negative power of rho; raise extra_power")
            total = gr.add(total, c * gr.times_rho(gr.derivative(coeffs, n), power))
        return total

    def pointwise(self, derivs, rho):
        """Evaluate from a table derivs[k] = u^(k)(rho) (rho > 0)."""
        out = np.zeros_like(np.asarray(rho, dtype=float))
        for (a, n), c in self.cleaned().items():
            out = out + c * rho ** a * derivs[n]
        return out


@dataclass(frozen=True)
class DCoefficients:
    d: int
    coeffs: tuple

    @property
    def leading(self):
        return self.coeffs[-1]


@lru_cache(maxsize=None)
def d_coefficients(d: int) -> DCoefficients:
    """Coefficients a_n with D_d u = sum a_n rho^(n+1) u^(n)."""
    d = _check_dimension(d)
    expr = RadialExpr({(1, 0): 1.0})  # D_3 u = rho u
    for _ in range((d - 3) // 2):
        expr = expr.substitute_rho_squared().derivative().times_power(-1)
    terms = expr.cleaned()
    coeffs = []
    for n in range((d - 3) // 2 + 1):
        coeffs.append(terms.pop((n + 1, n), 0.0))
    if terms:
        raise AssertionError(f"unexpected terms in D_{d}: {terms}")
    return DCoefficients(d, tuple(int(round(c)) if float(c).is_integer() else c for c in coeffs))


def _coeffs_of(dc):
    return dc if isinstance(dc, DCoefficients) else d_coefficients(dc)


def apply_D_series(dc, coeffs) -> np.ndarray:
    dc = _coeffs_of(dc)
    out = np.zeros(1)
    for n, a in enumerate(dc.coeffs):
        out = gr.add(out, a * gr.times_rho(gr.derivative(coeffs, n), n + 1))
    return out


def _check_values(grid, values):
    v = np.asarray(values, dtype=float)
    if v.shape != grid.nodes.shape:
        raise ValueError(f"expected {grid.size} samples, got {v.shape}")
    return v


def apply_D(coeffs: DCoefficients, grid: Grid, values) -> np.ndarray:
    v = _check_values(grid, values)
    return gr.to_values(apply_D_series(coeffs, gr.to_coeffs(v)), grid)


def k_values(d: int, coeffs, rho) -> np.ndarray:
    """K_d w at the points rho, from the Chebyshev series of w.

    With n = (d-3)/2, repeated integration by parts turns
    rho^(2-d) K^n w into  (2^n n!)^-1 int_0^1 (1 - s^2)^n w'(rho s) ds,
    which needs w(0) = 0 and contains no singular factor.
    """
    n = (d - 3) // 2
    scale = 1.0 / (2.0 ** n * math.factorial(n))
    kernel = (lambda s: (1.0 - s * s) ** n, 2 * n)
    return scale * gr.ray_average(gr.derivative(coeffs), rho, kernel)


def _resample(values, grid: Grid, degree: int) -> np.ndarray:
    # the exact result is a polynomial of known degree; drop the roundoff tail beyond it
    if degree > grid.N:
        raise ValueError(f"degree {degree} is not resolved on a grid with N = {grid.N}")
    return gr.to_coeffs(values)[: degree + 1]


def apply_K_series(d, coeffs, grid: Grid) -> np.ndarray:
    """Series of K_d w; K_d lowers the degree of a polynomial by one."""
    return _resample(k_values(d, coeffs, grid.nodes), grid, max(len(coeffs) - 2, 0))


def apply_K(d: int, grid: Grid, values) -> np.ndarray:
    d = _check_dimension(d)
    v = _check_values(grid, values)
    return k_values(d, gr.to_coeffs(v), grid.nodes)


def dilation_series(coeffs) -> np.ndarray:
    """Lambda u = -rho u'."""
    return -gr.times_rho(gr.derivative(coeffs))


def over_rho(coeffs, rho) -> np.ndarray:
    """(f(rho) - f(0)) / rho at the points rho, as an average of f'."""
    return gr.ray_average(gr.derivative(coeffs), rho)


def laplacian_series(d, coeffs, grid: Grid) -> np.ndarray:
    """Radial Laplacian u'' + (d-1) u'/rho for u with u'(0) = 0."""
    first = gr.derivative(coeffs)
    vals = gr.evaluate(gr.derivative(first), grid.nodes) + (d - 1) * over_rho(first, grid.nodes)
    return _resample(vals, grid, max(len(coeffs) - 3, 0))


# ---------------------------------------------------------------------------
# norms


@lru_cache(maxsize=None)
def radial_gradient_expr(d: int, m: int) -> RadialExpr:
    """nabla^m_rad as sum c_n rho^(n-m) u^(n): Laplacian powers, then one derivative if m is odd."""
    expr = RadialExpr.identity()
    for _ in range(m // 2):
        expr = expr.laplacian(d)
    if m % 2:
        expr = expr.derivative()
    return RadialExpr(expr.cleaned())


def hdot_sq(d: int, j: int, coeffs) -> float:
    """int_0^1 rho^(d-1) |nabla^j_rad u|^2."""
    return gr.sq_norm(radial_gradient_expr(d, j).series(coeffs, (d - 1) // 2))


def sobolev_sq(d: int, m: int, coeffs) -> float:
    return sum(hdot_sq(d, j, coeffs) for j in range(m + 1))


def sigma1_sq(d: int, coeffs) -> float:
    m = (d + 1) // 2
    total = gr.sq_norm(coeffs)
    for n in range(1, m + 1):
        total += gr.sq_norm(gr.times_rho(gr.derivative(coeffs, n), n - 1))
    return total


def sigma2_sq(d: int, coeffs) -> float:
    m = (d + 1) // 2
    return sum(gr.sq_norm(gr.times_rho(gr.derivative(coeffs, n), n)) for n in range(m))


def boundary_trace(w1, w2) -> float:
    """[D u1]'(1) + [D u2](1) from the reduced series."""
    return float(gr.evaluate(gr.derivative(w1), 1.0) + gr.evaluate(w2, 1.0))


def d_inner(d: int, u1, u2, v1, v2) -> float:
    """(u | v)_D for real states given as Chebyshev series."""
    D = d_coefficients(d)
    a1, a2, b1, b2 = (apply_D_series(D, c) for c in (u1, u2, v1, v2))
    return (
        gr.inner(gr.derivative(a1, 2), gr.derivative(b1, 2))
        + gr.inner(gr.derivative(a2), gr.derivative(b2))
        + boundary_trace(a1, a2) * boundary_trace(b1, b2)
    )


def d_norm_sq(d: int, u1, u2) -> float:
    D = d_coefficients(d)
    w1, w2 = apply_D_series(D, u1), apply_D_series(D, u2)
    return gr.sq_norm(gr.derivative(w1, 2)) + gr.sq_norm(gr.derivative(w2)) + boundary_trace(w1, w2) ** 2


def lower_d_norm_sq(d: int, u1, u2) -> float:
    D = d_coefficients(d)
    return gr.sq_norm(gr.derivative(apply_D_series(D, u1))) + gr.sq_norm(apply_D_series(D, u2))


@dataclass(frozen=True)
class NormReport:
    sobolev_m: float
    sigma: float
    d_norm: float
    ratios: tuple
    lower_d_norm: float = 0.0
    lower_sobolev: float = 0.0

    def __post_init__(self):
        vals = (self.sobolev_m, self.sigma, self.d_norm, self.lower_d_norm, self.lower_sobolev, *self.ratios)
        if not all(np.isfinite(vals)):
            raise FloatingPointError("non-finite norm")


def state_series(state: StatePair):
    return gr.to_coeffs(state.first), gr.to_coeffs(state.second)


def full_norm(d: int, c1, c2) -> float:
    """Radial H^{m_d} x H^{m_d - 1} norm from the component series."""
    m = (d + 1) // 2
    return math.sqrt(sobolev_sq(d, m, c1) + sobolev_sq(d, m - 1, c2))


def norm_suite(params: ModelParams, grid: Grid, state: StatePair) -> NormReport:
    if state.first.shape != grid.nodes.shape:
        raise ValueError("state does not live on this grid")
    d, m = params.d, params.m_d
    c1, c2 = state_series(state)
    sob = full_norm(d, c1, c2)
    sig = math.sqrt(sigma1_sq(d, c1) + sigma2_sq(d, c2))
    dn = math.sqrt(d_norm_sq(d, c1, c2))
    low = math.sqrt(lower_d_norm_sq(d, c1, c2))
    low_sob = math.sqrt(sobolev_sq(d, m - 1, c1) + sobolev_sq(d, m - 2, c2))
    ratios = (dn / sob, sig / sob) if sob > 0 else (0.0, 0.0)
    return NormReport(sob, sig, dn, ratios, low, low_sob)


# ---------------------------------------------------------------------------
# Hardy ratios


def hardy_residual(alpha: int, grid: Grid, f) -> float:
    """||rho^-alpha f|| / ||rho^(1-alpha) f'|| for f vanishing to order alpha at 0."""
    if int(alpha) != alpha or alpha < 1:
        raise ValueError("alpha must be a positive integer")
    alpha = int(alpha)
    c = gr.to_coeffs(_check_values(grid, f))
    # q = f / rho^alpha through Taylor's remainder: q(rho) = int (1-t)^(a-1)/(a-1)! f^(a)(rho t) dt
    kernel = (lambda t: (1.0 - t) ** (alpha - 1) / math.factorial(alpha - 1), alpha - 1)
    q = gr.to_coeffs(gr.ray_average(gr.derivative(c, alpha), grid.nodes, kernel))
    num = gr.sq_norm(q)
    den = gr.sq_norm(gr.add(alpha * q, gr.times_rho(gr.derivative(q))))
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ZeroDivisionError("derivative norm vanishes while the function norm does not")
    return math.sqrt(num / den)


def hardy_bound(alpha: int) -> float:
    """Sharp constant 2/(2 alpha - 1) of the one-dimensional weighted Hardy inequality."""
    return 2.0 / (2 * alpha - 1)


# ---------------------------------------------------------------------------
# extension operator


def _jet_mul(a, b):
    K = a.shape[0]
    out = np.zeros_like(a)
    for k in range(K):
        out[k] = sum(a[j] * b[k - j] for j in range(k + 1))
    return out


def _jet_exp(a):
    # e = exp(a): e' = a' e, so k e_k = sum_{j=1..k} j a_j e_{k-j}
    K = a.shape[0]
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for k in range(1, K):
        e[k] = sum(j * a[j] * e[k - j] for j in range(1, k + 1)) / k
    return e


def _jet_reciprocal(a):
    K = a.shape[0]
    r = np.zeros_like(a)
    r[0] = 1.0 / a[0]
    for k in range(1, K):
        r[k] = -sum(a[j] * r[k - j] for j in range(1, k + 1)) / a[0]
    return r


def _bump_jet(x, order):
    """Taylor coefficients of exp(-1/x) at points x > 0."""
    x = np.asarray(x, dtype=float)
    inv = np.array([(-1.0) ** k / x ** (k + 1) for k in range(order + 1)])
    return _jet_exp(-inv)


def cutoff_derivatives(rho, order: int) -> np.ndarray:
    """phi^(k)(rho), k = 0..order, for the smooth cutoff with phi = 1 on [0, 5/4], 0 on [3/2, inf)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.zeros((order + 1, rho.size))
    out[0] = (rho <= 1.25).astype(float)
    mid = (rho > 1.25) & (rho < 1.5)
    if mid.any():
        x = (1.5 - rho[mid]) / 0.25  # in (0, 1); dx/drho = -4
        a = _bump_jet(x, order)
        # b(x) = exp(-1/(1-x)); its jet in the variable x has alternating signs
        b = _bump_jet(1.0 - x, order) * ((-1.0) ** np.arange(order + 1))[:, None]
        s = _jet_mul(a, _jet_reciprocal(a + b))
        fact = np.array([math.factorial(k) * (-4.0) ** k for k in range(order + 1)])
        out[:, mid] = s * fact[:, None]
    return out


class ExtendedProfile:
    """E_m f: f on [0,1], cutoff times a reflected profile on (1, 3/2), zero beyond."""

    def __init__(self, d: int, m: int, coeffs):
        self.d, self.m = d, m
        self.coeffs = np.asarray(coeffs, dtype=float)
        self._edge = [float(gr.evaluate(gr.derivative(self.coeffs, k), 1.0)) for k in range(m + 1)]

    def _h_derivs(self, rho, order):
        m = self.m
        refl = 2.0 - rho
        out = []
        sign = -1.0 if m % 2 else 1.0
        start = 0 if m % 2 else 1
        for k in range(order + 1):
            val = sign * (-1.0) ** k * gr.evaluate(gr.derivative(self.coeffs, k), refl)
            for j in range(start, m + 1, 2):
                if j >= k:
                    val = val + 2.0 * (rho - 1.0) ** (j - k) / math.factorial(j - k) * self._edge[j]
            out.append(val)
        return out

    def derivatives(self, rho, order: int = 0) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.zeros((order + 1, rho.size))
        inside = rho <= 1.0
        for k in range(order + 1):
            out[k, inside] = gr.evaluate(gr.derivative(self.coeffs, k), rho[inside])
        band = (rho > 1.0) & (rho < 1.5)
        if band.any():
            r = rho[band]
            h = self._h_derivs(r, order)
            phi = cutoff_derivatives(r, order)
            for k in range(order + 1):
                out[k, band] = sum(math.comb(k, j) * phi[k - j] * h[j] for j in range(k + 1))
        return out

    def __call__(self, rho):
        vals = self.derivatives(rho, 0)[0]
        return vals if np.ndim(rho) else float(vals[0])

    def sobolev_sq(self, m: int | None = None, nodes: int = 160) -> float:
        """Radial H^m norm on all of R^d (the support ends at 3/2)."""
        m = self.m if m is None else m
        d = self.d
        total = sobolev_sq(d, m, self.coeffs)
        x, w = np.polynomial.legendre.leggauss(nodes)
        for a, b in ((1.0, 1.25), (1.25, 1.5)):
            r = a + (b - a) * (x + 1) / 2
            ww = w * (b - a) / 2
            table = self.derivatives(r, m)
            for j in range(m + 1):
                vals = radial_gradient_expr(d, j).pointwise(table, r)
                total += float(ww @ (r ** (d - 1) * vals * vals))
        return total


def extend_profile(d: int, m: int, grid: Grid, values) -> ExtendedProfile:
    d = _check_dimension(d)
    md = (d + 1) // 2
    if m not in (md - 1, md):
        raise ValueError(f"extension order must be {md - 1} or {md}, got {m}")
    return ExtendedProfile(d, m, gr.to_coeffs(_check_values(grid, values)))


def extension_constants(d: int, grid: Grid, values, m: int | None = None) -> tuple[float, float]:
    """Ratios (||u||_{H^m(B)} / ||E_m u||_{H^m(R^d)}, ||E_m u||_{H^m(R^d)} / ||u||_Sigma).

    m = m_d pairs with the Sigma_1 norm, m = m_d - 1 with Sigma_2.
    """
    md = (d + 1) // 2
    m = md if m is None else m
    ext = extend_profile(d, m, grid, values)
    inner_norm = math.sqrt(sobolev_sq(d, m, ext.coeffs))
    whole = math.sqrt(ext.sobolev_sq())
    sig = math.sqrt(sigma1_sq(d, ext.coeffs) if m == md else sigma2_sq(d, ext.coeffs))
    return inner_norm / whole, whole / sig


# ---------------------------------------------------------------------------
# test corpora


def random_even_polynomial(rng, degree: int) -> np.ndarray:
    """Chebyshev series on [0,1] of a random even polynomial in rho of the given degree.

    Built as sum c_k T_{2k}(rho) (Chebyshev on [-1,1], hence even) with
    decaying random weights, then re-expanded in the [0,1] basis.
    """
    k = np.arange(degree // 2 + 1)
    weights = rng.standard_normal(k.size) / (1.0 + k) ** 1.5
    sym = np.zeros(2 * k.size - 1)
    sym[::2] = weights
    n = max(2 * degree + 2, 16)
    nodes = gr.chebyshev_nodes(n)
    vals = np.polynomial.chebyshev.chebval(nodes, sym)
    return gr.to_coeffs(vals)


def random_gaussian(rng) -> np.ndarray:
    """exp(-a rho^2) scaled, with a drawn from [0.5, 4]."""
    a = rng.uniform(0.5, 4.0)
    amp = rng.standard_normal()
    nodes = gr.chebyshev_nodes(96)
    return gr.to_coeffs(amp * np.exp(-a * nodes ** 2))
