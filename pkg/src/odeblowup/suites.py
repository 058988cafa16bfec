"""Seeded verification suites shared by the command line and the acceptance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import grid as gr
from . import linop as lo
from . import reduction as rd
from .grid import build_grid
from .model import ModelParams, StatePair


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<40s} {self.value:12.4e}  (tol {self.tolerance:.1e})"

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed, **self.details}


def even_corpus(seed: int, count: int, degree: int = 16) -> list:
    """Chebyshev series of seeded smooth even functions; every fifth one a Gaussian."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        out.append(rd.random_gaussian(rng) if k % 5 == 4 else rd.random_even_polynomial(rng, degree))
    return out


def _rel(grid, lhs, rhs) -> float:
    a, b = gr.to_values(lhs, grid), gr.to_values(rhs, grid)
    scale = max(grid.l2_norm(a), grid.l2_norm(b), 1e-300)
    return grid.l2_norm(a - b) / scale


def identity_residuals(d: int, grid, coeffs) -> dict:
    """Relative discrete L2 defects of the commutation and inversion identities for one function u."""
    Dc = rd.d_coefficients(d)
    lam = rd.dilation_series
    Du = rd.apply_D_series(Dc, coeffs)
    w = Du  # odd and vanishing at 0, as K_d requires
    Kw = rd.apply_K_series(d, w, grid)
    return {
        "D_dilation": _rel(grid, rd.apply_D_series(Dc, lam(coeffs)), gr.add(lam(Du), Du)),
        "D_laplacian": _rel(grid, rd.apply_D_series(Dc, rd.laplacian_series(d, coeffs, grid)), gr.derivative(Du, 2)),
        "K_inverts_D": _rel(grid, rd.apply_K_series(d, Du, grid), coeffs),
        "K_dilation": _rel(grid, rd.apply_K_series(d, lam(w), grid), gr.add(lam(Kw), -Kw)),
        "K_second_derivative": _rel(grid, rd.apply_K_series(d, gr.derivative(w, 2), grid), rd.laplacian_series(d, Kw, grid)),
    }


def identity_suite(d: int, N: int = 64, seed: int = 0, count: int = 100, tol: float = 1e-8) -> CheckResult:
    grid = build_grid(N)
    worst = {}
    for c in even_corpus(seed, count):
        for k, v in identity_residuals(d, grid, c).items():
            worst[k] = max(worst.get(k, 0.0), v)
    top = max(worst.values())
    return CheckResult(f"identities d={d}", top, tol, top <= tol, {"per_identity": worst, "count": count, "N": N})


def norm_ratios(params: ModelParams, grid, coeffs_pairs) -> dict:
    """min/max over the corpus of ||u||_D / ||u||_H and ||u||_Sigma / ||u||_H."""
    d_r, s_r = [], []
    for c1, c2 in coeffs_pairs:
        s = StatePair(gr.to_values(c1, grid), gr.to_values(c2, grid))
        rep = rd.norm_suite(params, grid, s)
        d_r.append(rep.ratios[0])
        s_r.append(rep.ratios[1])
    return {"d_norm": (min(d_r), max(d_r)), "sigma": (min(s_r), max(s_r))}


def norm_equivalence_suite(params: ModelParams, seed: int = 0, count: int = 100, Ns=(64, 128), tol: float = 0.10) -> CheckResult:
    corpus = even_corpus(seed, 2 * count)
    pairs = list(zip(corpus[::2], corpus[1::2]))
    consts = {N: norm_ratios(params, build_grid(N), pairs) for N in Ns}
    a, b = consts[Ns[0]], consts[Ns[1]]
    change = 0.0
    finite = True
    for key in a:
        for x, y in zip(a[key], b[key]):
            finite &= math.isfinite(x) and math.isfinite(y) and x > 0
            change = max(change, abs(y - x) / abs(x))
    return CheckResult(
        f"norm equivalence d={params.d}",
        change,
        tol,
        finite and change <= tol,
        {"constants": {str(N): {k: list(v) for k, v in c.items()} for N, c in consts.items()}},
    )


def dissipativity_suite(params: ModelParams, N: int = 64, seed: int = 0, count: int = 1000, tol: float = 1e-8) -> CheckResult:
    grid = build_grid(N)
    corpus = even_corpus(seed, 2 * count)
    worst = -math.inf
    for c1, c2 in zip(corpus[::2], corpus[1::2]):
        s = StatePair(gr.to_values(c1, grid), gr.to_values(c2, grid))
        r = lo.dissipativity_residual(params, grid, s) / rd.d_norm_sq(params.d, c1, c2)
        worst = max(worst, r)
    return CheckResult(f"dissipativity d={params.d} p={params.p:g}", worst, tol, worst <= tol, {"count": count})


def resolvent_suite(params: ModelParams, N: int = 64, seed: int = 0, count: int = 20, tol: float = 1e-6) -> CheckResult:
    grid = build_grid(N)
    corpus = even_corpus(seed, 2 * count)
    worst = 0.0
    for c1, c2 in zip(corpus[::2], corpus[1::2]):
        f = StatePair(gr.to_values(c1, grid), gr.to_values(c2, grid))
        u = lo.resolvent_at_mu(params.d, grid, f)
        fn = math.hypot(grid.l2_norm(f.first), grid.l2_norm(f.second))
        worst = max(worst, lo.resolvent_residual(params, grid, f, u) / fn)
    return CheckResult(f"resolvent d={params.d} p={params.p:g}", worst, tol, worst <= tol, {"count": count})


def hardy_suite(seed: int = 0, count: int = 50, alphas=(1, 2, 3, 4), Ns=(64, 128), tol: float = 0.10) -> CheckResult:
    """Largest Hardy ratio per alpha on f = rho^alpha q, checked against 2/(2 alpha - 1) and across N."""
    rng = np.random.default_rng(seed)
    qs = [rng.standard_normal(6) / (1 + np.arange(6)) for _ in range(count)]
    table = {}
    ok = True
    change = 0.0
    for a in alphas:
        worst = {}
        for N in Ns:
            x = build_grid(N).nodes
            worst[N] = max(rd.hardy_residual(a, build_grid(N), x ** a * np.polynomial.polynomial.polyval(x, q)) for q in qs)
        bound = rd.hardy_bound(a)
        ok &= all(v <= bound for v in worst.values())
        change = max(change, abs(worst[Ns[1]] - worst[Ns[0]]) / worst[Ns[0]])
        table[str(a)] = {"bound": bound, **{str(N): v for N, v in worst.items()}}
    return CheckResult("hardy ratios", change, tol, ok and change <= tol, {"ratios": table})


def extension_suite(d: int, seed: int = 0, count: int = 20, Ns=(64, 128), tol: float = 0.10) -> CheckResult:
    """Two-sided extension bounds for E_{m_d} (Sigma_1) and E_{m_d - 1} (Sigma_2)."""
    corpus = even_corpus(seed, count)
    md = (d + 1) // 2
    consts = {}
    for N in Ns:
        grid = build_grid(N)
        for m in (md, md - 1):
            lower, upper = [], []
            for c in corpus:
                a, b = rd.extension_constants(d, grid, gr.to_values(c, grid), m)
                lower.append(a)
                upper.append(b)
            consts[(N, m)] = (max(lower), max(upper))
    change = 0.0
    ok = True
    for m in (md, md - 1):
        a, b = consts[(Ns[0], m)], consts[(Ns[1], m)]
        ok &= a[0] <= 1.0 + 1e-12 and all(math.isfinite(x) for x in a + b)
        change = max(change, abs(b[1] - a[1]) / a[1])
    return CheckResult(
        f"extension bounds d={d}",
        change,
        tol,
        ok and change <= tol,
        {"constants": {f"N={N},m={m}": list(v) for (N, m), v in consts.items()}},
    )
