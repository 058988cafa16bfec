"""The linearized generator, its dissipativity and resolvent, the unstable projection, linear flow."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import _march
from . import grid as gr
from . import reduction as rd
from .grid import Grid
from .model import ModelParams, StatePair, symmetry_mode

EIGEN_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Collocated generator on the stacked nodal vector (u1 at all nodes, then u2).

    ``operator`` applies the differential expression at every node (rho = 0 by
    the l'Hopital limit of the Laplacian).  ``matrix`` is the same with rows
    ``boundary_rows`` replaced by the regularity constraints u_j'(0) = 0.
    ``reduced`` acts on the 2N interior-and-edge values left after eliminating
    the two rho = 0 unknowns through those constraints; it drives all
    time-stepping and eigen-computations.
    """

    matrix: np.ndarray
    operator: np.ndarray
    reduced: np.ndarray
    lift_matrix: np.ndarray
    grid: Grid
    params: ModelParams
    boundary_rows: tuple
    include_perturbation: bool

    @property
    def size(self) -> int:
        return self.grid.size

    def apply(self, state: StatePair) -> StatePair:
        return StatePair.from_stacked(self.operator @ state.stacked())

    def restrict(self, state: StatePair) -> np.ndarray:
        if len(state) != self.size:
            raise ValueError(f"state does not have {self.size} nodes")
        return np.concatenate([state.first[1:], state.second[1:]])

    def lift(self, vec) -> StatePair:
        return StatePair.from_stacked(self.lift_matrix @ np.asarray(vec, dtype=float))


def _laplacian_matrix(d: int, grid: Grid) -> np.ndarray:
    rho, D = grid.nodes, grid.diff1
    lap = grid.diff2.copy()
    lap[1:] += ((d - 1) / rho[1:])[:, None] * D[1:]
    lap[0] = d * grid.diff2[0]
    return lap


def assemble_generator(params: ModelParams, grid: Grid, include_perturbation: bool = True) -> GeneratorMatrix:
    n = grid.size
    N = n - 1
    D = grid.diff1
    I = np.eye(n)
    transport = -grid.nodes[:, None] * D
    lap = _laplacian_matrix(params.d, grid)
    if include_perturbation:
        lap = lap + params.potential * I
    op = np.block([[transport - params.alpha * I, I], [lap, transport - params.beta * I]])

    mat = op.copy()
    mat[0] = 0.0
    mat[0, :n] = D[0]
    mat[n] = 0.0
    mat[n, n:] = D[0]

    # u_j(0) = -D[0,1:] u_j[1:] / D[0,0]
    E = np.zeros((2 * n, 2 * N))
    for c in range(2):
        E[c * n + 1:(c + 1) * n, c * N:(c + 1) * N] = np.eye(N)
        E[c * n, c * N:(c + 1) * N] = -D[0, 1:] / D[0, 0]
    keep = [i for i in range(2 * n) if i % n]
    reduced = np.ascontiguousarray(op[keep] @ E)
    for a in (mat, op, reduced, E):
        a.setflags(write=False)
    return GeneratorMatrix(mat, op, reduced, E, grid, params, (0, n), include_perturbation)


# ---------------------------------------------------------------------------
# series-level generator, dissipativity


def apply_free_generator_series(params: ModelParams, grid: Grid, u1, u2):
    """L0 applied to Chebyshev series (u1, u2); returns the pair of series."""
    top = gr.add(gr.add(u2, rd.dilation_series(u1)), -params.alpha * np.asarray(u1))
    bottom = gr.add(gr.add(rd.laplacian_series(params.d, u1, grid), rd.dilation_series(u2)), -params.beta * np.asarray(u2))
    return top, bottom


def dissipativity_residual(params: ModelParams, grid: Grid, state: StatePair) -> float:
    """Re(L0 u | u)_D + (2/(p-1)) ||u||_D^2, which the estimate says is <= 0."""
    c1, c2 = rd.state_series(state)
    l1, l2 = apply_free_generator_series(params, grid, c1, c2)
    val = rd.d_inner(params.d, l1, l2, c1, c2) + params.alpha * rd.d_norm_sq(params.d, c1, c2)
    if not math.isfinite(val):
        raise FloatingPointError("non-finite dissipativity residual")
    return val


def dissipativity_terms(params: ModelParams, grid: Grid, state: StatePair) -> dict:
    """The explicit nonpositive terms left over after integrating by parts.

    With w = D_d u, the residual equals
    -(||w1''||^2 + ||w2'||^2)/2 - (w1''(1) - w2'(1))^2 / 2.
    """
    D = rd.d_coefficients(params.d)
    w1, w2 = (rd.apply_D_series(D, c) for c in rd.state_series(state))
    a, b = gr.derivative(w1, 2), gr.derivative(w2)
    interior = -0.5 * (gr.sq_norm(a) + gr.sq_norm(b))
    edge = -0.5 * float(gr.evaluate(a, 1.0) - gr.evaluate(b, 1.0)) ** 2
    return {"interior": interior, "edge": edge, "total": interior + edge}


# ---------------------------------------------------------------------------
# resolvent at mu = 1 - 2/(p-1)


def resolvent_at_mu(d: int, grid: Grid, f: StatePair) -> StatePair:
    """Solve (mu - L0) u = f with mu = 1 - 2/(p-1) by the explicit quadrature formulas.

    In the reduced variables the system does not depend on p.  The inner
    quotient q(s) = (1 - s^2)^-1 int_s^1 F is evaluated as
    (1 + s)^-1 int_0^1 F(s + t(1 - s)) dt, which is its own limit F(1)/2 at s = 1.
    """
    d = rd._check_dimension(d)
    Dc = rd.d_coefficients(d)
    f1, f2 = rd.state_series(f)
    g1, g2 = rd.apply_D_series(Dc, f1), rd.apply_D_series(Dc, f2)
    F = gr.add(gr.add(g2, g1), gr.times_rho(gr.derivative(g1)))
    rho = grid.nodes
    t, w = gr._legendre(max(F.size // 2 + 2, 4))
    pts = rho[:, None] + t[None, :] * (1.0 - rho[:, None])
    tail = gr.evaluate(F, pts) @ w
    q_vals = tail / (1.0 + rho)
    if not np.all(np.isfinite(q_vals)):
        raise FloatingPointError("quadrature failed near rho = 1")
    q = gr.to_coeffs(q_vals)
    w1 = gr.antiderivative(q)
    w2 = gr.add(gr.times_rho(q), -g1)
    return StatePair(rd.k_values(d, w1, rho), rd.k_values(d, w2, rho))


def resolvent_residual(params: ModelParams, grid: Grid, f: StatePair, u: StatePair) -> float:
    """Discrete L2 norm of (mu - L0) u - f using the collocated operator."""
    gen = assemble_generator(params, grid, include_perturbation=False)
    mu = 1.0 - params.alpha
    r = mu * u.stacked() - gen.operator @ u.stacked() - f.stacked()
    n = grid.size
    return math.hypot(grid.l2_norm(r[:n]), grid.l2_norm(r[n:]))


# ---------------------------------------------------------------------------
# rank-one projection


@dataclass(frozen=True, eq=False)
class ProjectionData:
    """P v = right_mode * <left_mode, v> on reduced vectors, with <left_mode, g> = 1."""

    right_mode: StatePair
    left_mode: np.ndarray
    normalization: float
    eigenvalue: complex
    right_reduced: np.ndarray

    def coefficient(self, vec) -> float:
        if isinstance(vec, StatePair):
            vec = np.concatenate([vec.first[1:], vec.second[1:]])
        return float(self.left_mode @ vec)

    def apply(self, vec) -> np.ndarray:
        return self.right_reduced * self.coefficient(vec)

    def complement(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        return vec - self.apply(vec)


def spectral_projection(gen: GeneratorMatrix) -> ProjectionData:
    A = gen.reduced
    vals, left = sla.eig(A.T)
    i = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[i] - 1.0) > EIGEN_TOL:
        raise ArithmeticError(f"no eigenvalue within {EIGEN_TOL} of 1 (nearest {vals[i]:.6g})")
    ell = np.real(left[:, i])
    g = symmetry_mode(gen.params, gen.grid)
    g_red = gen.restrict(g)
    norm = float(ell @ g_red)
    if norm == 0.0:
        raise ArithmeticError("left eigenvector is orthogonal to the symmetry mode")
    ell = ell / norm
    ell.setflags(write=False)
    g_red.setflags(write=False)
    return ProjectionData(g, ell, norm, complex(vals[i]), g_red)


# ---------------------------------------------------------------------------
# traces


@dataclass
class EvolutionTrace:
    taus: np.ndarray
    full_norm: np.ndarray
    stable_norm: np.ndarray
    unstable_coeff: np.ndarray
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        for name in ("full_norm", "stable_norm", "unstable_coeff"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.taus.shape:
                raise ValueError(f"{name} length differs from taus")
            setattr(self, name, arr)
        self.extras = {k: np.asarray(v, dtype=float) for k, v in self.extras.items()}
        if self.taus.size > 1 and np.any(np.diff(self.taus) <= 0):
            raise ValueError("taus must be strictly increasing")

    def __len__(self):
        return self.taus.size

    def series(self, name: str) -> np.ndarray:
        if name in ("full_norm", "stable_norm", "unstable_coeff"):
            return getattr(self, name)
        return self.extras[name]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "full_norm", "stable_norm", "unstable_coeff"])
            for row in zip(self.taus, self.full_norm, self.stable_norm, self.unstable_coeff):
                w.writerow([repr(float(x)) for x in row])

    def write_extras_csv(self, path) -> None:
        names = sorted(self.extras)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", *names])
            for k, tau in enumerate(self.taus):
                w.writerow([repr(float(tau))] + [repr(float(self.extras[n][k])) for n in names])

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "tau": self.taus.tolist(),
            "full_norm": self.full_norm.tolist(),
            "stable_norm": self.stable_norm.tolist(),
            "unstable_coeff": self.unstable_coeff.tolist(),
            "extras": {k: v.tolist() for k, v in sorted(self.extras.items())},
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def default_dt(grid: Grid, factor: float = 0.5) -> float:
    """factor times the smallest node spacing."""
    return factor * float(np.min(np.diff(grid.nodes)))


def stability_limit(grid: Grid) -> float:
    # RK4 is stable up to about 2.8 on the imaginary axis; measured spectral
    # radii of the reduced matrix stay below 1.45 / rho_1 for d <= 7
    return 1.5 * float(np.min(np.diff(grid.nodes)))


class Recorder:
    """Samples norms of a reduced state vector into trace series."""

    def __init__(self, gen: GeneratorMatrix, proj: ProjectionData, extras: bool = False):
        self.gen, self.proj, self.want_extras = gen, proj, extras
        self.rows = []
        self.extra_rows = []

    def norm_of(self, vec) -> float:
        s = self.gen.lift(vec)
        return rd.full_norm(self.gen.params.d, *rd.state_series(s))

    def record(self, tau: float, vec) -> float:
        full = self.norm_of(vec)
        stable = self.norm_of(self.proj.complement(vec))
        coeff = self.proj.coefficient(vec)
        self.rows.append((tau, full, stable, coeff))
        if self.want_extras:
            d = self.gen.params.d
            c1, c2 = rd.state_series(self.gen.lift(vec))
            row = {f"hdot_{j}": math.sqrt(rd.hdot_sq(d, j, c1)) for j in range((d + 1) // 2 + 1)}
            row["lower_norm"] = math.sqrt(rd.lower_d_norm_sq(d, c1, c2))
            row["d_norm"] = math.sqrt(rd.d_norm_sq(d, c1, c2))
            self.extra_rows.append(row)
        return full

    def trace(self, metadata) -> EvolutionTrace:
        arr = np.array(self.rows, dtype=float).reshape(-1, 4)
        extras = {}
        if self.extra_rows:
            extras = {k: [r[k] for r in self.extra_rows] for k in self.extra_rows[0]}
        return EvolutionTrace(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], metadata, extras)


def march(
    gen: GeneratorMatrix,
    proj: ProjectionData,
    vec0,
    tau_end: float,
    dt: float,
    sample_every: float = 0.25,
    nonlinear: bool = False,
    filter_unstable: bool = False,
    guard: float = 1e6,
    extras: bool = False,
    metadata: dict | None = None,
) -> EvolutionTrace:
    """RK4 march of the reduced system, sampling norms every ``sample_every``.

    The run stops early once the full norm exceeds ``guard`` times
    max(initial norm, 1) or turns non-finite; metadata["aborted"] records it.
    """
    if not dt > 0 or dt > stability_limit(gen.grid) * (1 + 1e-12):
        raise ValueError(f"dt = {dt} violates the stability bound {stability_limit(gen.grid):.3e}")
    params = gen.params
    N = gen.size - 1
    u = np.array(vec0, dtype=float)
    if u.shape != (2 * N,):
        raise ValueError("initial vector has the wrong size")
    # shrink dt so that samples land exactly on multiples of sample_every
    per_sample = max(1, int(math.ceil(sample_every / dt - 1e-9)))
    dt = sample_every / per_sample
    nsamples = int(math.ceil(tau_end / sample_every - 1e-9))
    if nonlinear:
        kind = _march.CUBIC if params.p == 3.0 else _march.POWER
    else:
        kind = _march.LINEAR
    left = right = None
    if filter_unstable:
        left, right = np.ascontiguousarray(proj.left_mode), np.ascontiguousarray(proj.right_reduced)
        u -= right * (left @ u)
    rec = Recorder(gen, proj, extras)
    limit = guard * max(rec.record(0.0, u), 1.0)
    aborted = False
    for k in range(1, nsamples + 1):
        _march.rk4_march(gen.reduced, u, dt, per_sample, N, params.p, params.c_p, kind, left, right)
        if not np.all(np.isfinite(u)):
            aborted = True
            break
        if rec.record(k * sample_every, u) > limit:
            aborted = True
            break
    meta = {
        "d": params.d,
        "p": params.p,
        "N": N,
        "dt": dt,
        "tau_end": tau_end,
        "nonlinear": nonlinear,
        "filtered": filter_unstable,
        "aborted": aborted,
        "backend": _march.BACKEND,
    }
    meta.update(metadata or {})
    return rec.trace(meta)


def linear_propagate(
    gen: GeneratorMatrix,
    proj: ProjectionData,
    state0: StatePair,
    tau_end: float,
    dt: float,
    sample_every: float = 0.25,
    filter_unstable: bool = False,
) -> EvolutionTrace:
    """Linear flow d/dtau Phi = L Phi from a nodal state.

    With ``filter_unstable`` the projection is reapplied after every step,
    which keeps roundoff from re-seeding the growing mode.
    """
    return march(gen, proj, gen.restrict(state0), tau_end, dt, sample_every, filter_unstable=filter_unstable)


def fit_decay_rate(trace, window=None, series: str = "full_norm") -> float:
    """Minus the least-squares slope of log(series) against tau inside window."""
    if isinstance(trace, EvolutionTrace):
        taus, vals = trace.taus, trace.series(series)
    else:
        taus, vals = (np.asarray(a, dtype=float) for a in trace)
    lo, hi = window if window is not None else (taus[0], taus[-1])
    if not lo < hi:
        raise ValueError("degenerate window")
    sel = (taus >= lo - 1e-12) & (taus <= hi + 1e-12)
    if sel.sum() < 10:
        raise ValueError(f"window [{lo}, {hi}] holds {int(sel.sum())} samples, need at least 10")
    v = np.abs(vals[sel]) if series == "unstable_coeff" else vals[sel]
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("norms must be positive and finite in the window")
    slope = np.polyfit(taus[sel], np.log(v), 1)[0]
    return float(-slope)


def semigroup_prefactor(trace, mu: float, series: str = "full_norm") -> float:
    """Smallest M with norm(tau) <= M e^(-mu tau) norm(0) along the trace."""
    taus, vals = trace.taus, np.abs(trace.series(series))
    if not vals[0] > 0:
        raise ValueError("initial norm must be positive")
    return float(np.max(np.exp(mu * taus) * vals / vals[0]))
