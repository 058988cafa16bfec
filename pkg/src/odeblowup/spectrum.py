"""Analytic eigenvalues of the linearized generator and their check against the matrix spectrum."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid as gr
from .grid import Grid, build_grid
from .model import ModelParams
from .special import gamma, hyp2f1, nonpositive_integer, rgamma

PERSIST_TOL = 1e-4
MATCH_TOL = 1e-4
ROOT_TOL = 1e-8


@dataclass(frozen=True)
class HypergeometricParams:
    a: complex
    b: complex
    c: complex

    @classmethod
    def from_lambda(cls, lam, p: float) -> "HypergeometricParams":
        lam = complex(lam)
        return cls((lam - 2.0) / 2.0, (lam + (p + 3.0) / (p - 1.0)) / 2.0, complex(0.5))

    def consistency_defect(self, lam, p: float) -> float:
        """|a + b + 1 - c - (lambda + 2/(p-1))|."""
        return abs(self.a + self.b + 1.0 - self.c - (complex(lam) + 2.0 / (p - 1.0)))


def connection_coeff(lam, params: ModelParams) -> complex:
    """Gamma(a+b+1-c) Gamma(1-c) / (Gamma(a+1-c) Gamma(b+1-c)).

    When a+1-c or b+1-c is a nonpositive integer the hypergeometric solution
    is a polynomial, smooth at rho = 1, so the coefficient is exactly zero even
    if the numerator Gamma has a pole there.  A numerator pole on its own gives
    complex infinity.
    """
    lam = complex(lam)
    h = HypergeometricParams.from_lambda(lam, params.p)
    top = h.a + h.b + 1.0 - h.c  # lambda + alpha
    z1 = h.a + 1.0 - h.c  # (lambda - 1)/2
    z2 = h.b + 1.0 - h.c  # (lambda + 2 beta)/2
    if nonpositive_integer(z1) is not None or nonpositive_integer(z2) is not None:
        return complex(0.0)
    if nonpositive_integer(top) is not None:
        return complex(math.inf, 0.0)
    return gamma(top) * math.sqrt(math.pi) * rgamma(z1) * rgamma(z2)


def _derivatives(lam, params, h=1e-5):
    f0 = connection_coeff(lam, params)
    fp = connection_coeff(lam + h, params)
    fm = connection_coeff(lam - h, params)
    return f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def polish_root(lam0, params: ModelParams, tol: float = 1e-15, max_iter: int = 60) -> complex:
    """Newton iteration on c0 / c0', which has simple roots even where c0 has a double one."""
    lam = complex(lam0)
    for _ in range(max_iter):
        f, df, d2f = _derivatives(lam, params)
        if f == 0:
            return lam
        if not (np.isfinite(f) and np.isfinite(df)):
            raise ArithmeticError(f"Newton hit a pole near {lam}")
        denom = df * df - f * d2f
        step = f * df / denom if denom != 0 else f / df
        lam -= step
        if abs(step) <= tol * max(1.0, abs(lam)):
            break
    return lam


def stable_family_heads(params: ModelParams, count: int):
    """First ``count`` members of lambda = 1 - 2k and lambda = -2k - 2(p+1)/(p-1)."""
    first = [1.0 - 2 * k for k in range(count)]
    second = [-2.0 * k - 2.0 * params.beta for k in range(count)]
    return first, second


@dataclass
class SpectrumReport:
    threshold: float
    analytic_unstable: list = field(default_factory=list)
    analytic_stable_heads: list = field(default_factory=list)
    matrix_eigs: list = field(default_factory=list)
    persistent: list = field(default_factory=list)
    matched: list = field(default_factory=list)
    resolution: int | None = None
    levels: dict = field(default_factory=dict)

    @property
    def persistent_eigs(self):
        return [e for e, keep in zip(self.matrix_eigs, self.persistent) if keep]

    def rightmost(self) -> complex | None:
        pool = self.persistent_eigs or self.matrix_eigs
        return max(pool, key=lambda z: z.real) if pool else None

    def to_records(self) -> list:
        recs = []
        for lam in self.analytic_unstable + self.analytic_stable_heads:
            recs.append({"re": lam.real, "im": lam.imag, "source": "analytic", "persistent": True, "matched_to": None})
        match = {i: m for i, m, _ in self.matched}
        for i, (lam, keep) in enumerate(zip(self.matrix_eigs, self.persistent)):
            m = match.get(i)
            recs.append(
                {
                    "re": lam.real,
                    "im": lam.imag,
                    "source": "matrix",
                    "persistent": bool(keep),
                    "matched_to": None if m is None else {"re": m.real, "im": m.imag},
                }
            )
        return recs

    def to_json(self) -> str:
        right = self.rightmost()
        doc = {
            "threshold": self.threshold,
            "resolution": self.resolution,
            "rightmost": None if right is None else {"re": right.real, "im": right.imag},
            "eigenvalues": self.to_records(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def analytic_spectrum(params: ModelParams, count: int = 4) -> SpectrumReport:
    first, second = stable_family_heads(params, count)
    roots = sorted({complex(x) for x in first + second}, key=lambda z: -z.real)
    thr = params.spectral_threshold
    unstable = [z for z in roots if z.real > thr]
    stable = [z for z in roots if z.real <= thr]
    return SpectrumReport(threshold=thr, analytic_unstable=unstable, analytic_stable_heads=stable)


def eigenfunction_profile(lam, params: ModelParams, grid: Grid) -> np.ndarray:
    """w = D_d u1 for the eigenvalue lam: rho 2F1((lam-1)/2, (lam+2beta)/2; 3/2; rho^2)."""
    lam = complex(lam)
    c0 = connection_coeff(lam, params)
    if not abs(c0) <= ROOT_TOL:
        raise ValueError(f"lambda = {lam} is not a root of the connection coefficient (|c0| = {abs(c0):.3g})")
    h = HypergeometricParams.from_lambda(lam, params.p)
    a1, b1, c1 = h.a + 1 - h.c, h.b + 1 - h.c, 2 - h.c
    vals = np.array([r * hyp2f1(a1, b1, c1, r * r) for r in grid.nodes])
    return vals.real if lam.imag == 0 else vals


def eigen_ode_residual(lam, params: ModelParams, grid: Grid, w) -> np.ndarray:
    """-(1-rho^2) w'' + 2 rho (lam+alpha) w' + (lam+alpha-1)(lam+alpha) w - p c^(p-1) w."""
    rho = grid.nodes
    s = complex(lam) + params.alpha
    w = np.asarray(w)
    d1, d2 = grid.diff1 @ w, grid.diff2 @ w
    res = -(1 - rho ** 2) * d2 + 2 * rho * s * d1 + ((s - 1) * s - params.potential) * w
    return res.real if np.isrealobj(w) and s.imag == 0 else res


def _nearest(z, pool):
    if len(pool) == 0:
        return math.inf
    return float(np.min(np.abs(np.asarray(pool) - z)))


def matrix_spectrum(gen, refinements=None, tol: float = PERSIST_TOL, count: int = 6) -> SpectrumReport:
    """Dense eigenvalues of the reduced generator at several resolutions.

    An eigenvalue at one level counts as persistent when the next finer level
    (or, at the finest level, the next coarser one) has an eigenvalue within
    ``tol``.  Persistent eigenvalues right of threshold - 0.5 are matched to
    the analytic families.  The report describes the level of ``gen``.
    """
    from .linop import assemble_generator

    params = gen.params
    levels = sorted({gen.size - 1, *(refinements or [])})
    eigs = {}
    for N in levels:
        G = gen if N == gen.size - 1 else assemble_generator(params, build_grid(N), gen.include_perturbation)
        vals = np.linalg.eigvals(G.reduced)
        if not np.all(np.isfinite(vals)):
            raise np.linalg.LinAlgError(f"eigenvalue computation failed at N = {N}")
        eigs[N] = vals[np.argsort(-vals.real, kind="stable")]

    def flags(N):
        i = levels.index(N)
        if len(levels) == 1:
            return [True] * len(eigs[N])
        partner = levels[i + 1] if i + 1 < len(levels) else levels[i - 1]
        return [_nearest(z, eigs[partner]) <= tol for z in eigs[N]]

    report = analytic_spectrum(params, count)
    base = gen.size - 1
    report.resolution = base
    report.matrix_eigs = [complex(z) for z in eigs[base]]
    report.persistent = flags(base)
    report.levels = {N: {"eigs": [complex(z) for z in eigs[N]], "persistent": flags(N)} for N in levels}
    families = report.analytic_unstable + report.analytic_stable_heads
    for i, (z, keep) in enumerate(zip(report.matrix_eigs, report.persistent)):
        if keep and z.real > report.threshold - 0.5 and families:
            j = int(np.argmin([abs(z - f) for f in families]))
            report.matched.append((i, families[j], abs(z - families[j])))
    return report


def persistent_above(report: SpectrumReport, cut: float, level: int | None = None):
    """Persistent eigenvalues with real part above cut, at the report level or another computed level."""
    if level is None:
        eigs, keep = report.matrix_eigs, report.persistent
    else:
        eigs, keep = report.levels[level]["eigs"], report.levels[level]["persistent"]
    return [z for z, k in zip(eigs, keep) if k and z.real > cut]
