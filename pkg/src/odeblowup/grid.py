"""Chebyshev-Lobatto collocation on the unit interval.

Nodes are rho_k = (1 - cos(pi k / N)) / 2, increasing from 0 to 1.  Besides the
nodal differentiation matrices used by the generator, the module offers a small
coefficient-space toolkit (transforms, derivatives, exact products and
integrals) used wherever high derivatives or weighted integrals are needed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import numpy.polynomial.chebyshev as cheb
from scipy.fft import dct

MIN_SIZE = 8
CHOP_TOL = 1e-13


class ProfileError(ValueError):
    """Base class for problems with ingested radial profiles."""


class EmptyProfileError(ProfileError):
    pass


class ProfileParseError(ProfileError):
    pass


class NonMonotoneRadiiError(ProfileError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray
    diff1: np.ndarray
    diff2: np.ndarray
    quad_weights: np.ndarray
    bary_weights: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    def integrate(self, values) -> float:
        return float(self.quad_weights @ np.asarray(values, dtype=float))

    def l2_norm(self, values) -> float:
        v = np.asarray(values, dtype=float)
        return math.sqrt(max(self.quad_weights @ (v * v), 0.0))

    def interpolation_matrix(self, x) -> np.ndarray:
        return barycentric_matrix(self.nodes, self.bary_weights, np.atleast_1d(x))


def _clenshaw_curtis(N: int) -> np.ndarray:
    # weights on [-1, 1] for x_k = cos(pi k / N), halved to [0, 1]
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    inner = slice(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    # symmetric rule, so reversing the node order to increasing rho is harmless
    return 0.5 * w


def barycentric_matrix(nodes, weights, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    terms = weights[None, :] / diff
    mat = terms / terms.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        mat[rows] = exact[rows].astype(float)
    return mat


def chebyshev_nodes(N: int) -> np.ndarray:
    """Lobatto nodes (1 - cos(pi k/N))/2, k = 0..N, for any N >= 1."""
    k = np.arange(N + 1)
    nodes = (1.0 - np.cos(np.pi * k / N)) / 2.0
    nodes[0], nodes[-1] = 0.0, 1.0
    if N % 2 == 0:
        nodes[N // 2] = 0.5
    return nodes


def _negative_sum_diagonal(M):
    # rows annihilate constants exactly
    np.fill_diagonal(M, 0.0)
    M[np.diag_indices(M.shape[0])] = -M.sum(axis=1)


@lru_cache(maxsize=32)
def build_grid(N: int) -> Grid:
    if int(N) != N or N < MIN_SIZE:
        raise ValueError(f"grid size N must be an integer >= {MIN_SIZE}, got {N!r}")
    N = int(N)
    k = np.arange(N + 1)
    nodes = chebyshev_nodes(N)
    bw = (-1.0) ** k
    bw[0] *= 0.5
    bw[-1] *= 0.5
    # rho_i - rho_j through the product formula avoids cancellation
    i, j = np.meshgrid(k, k, indexing="ij")
    gaps = np.sin(np.pi * (i + j) / (2 * N)) * np.sin(np.pi * (i - j) / (2 * N))
    np.fill_diagonal(gaps, 1.0)
    D = (bw[None, :] / bw[:, None]) / gaps
    # centro-antisymmetry: copy the lower half from the upper half
    half = N // 2 + 1
    D[half:] = -D[N - half::-1, ::-1]
    _negative_sum_diagonal(D)
    D2 = D @ D
    _negative_sum_diagonal(D2)
    return Grid(
        nodes=_frozen(nodes),
        diff1=_frozen(D),
        diff2=_frozen(D2),
        quad_weights=_frozen(_clenshaw_curtis(N)),
        bary_weights=_frozen(bw),
    )


def interpolate(grid: Grid, values, x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"interpolation point {x} outside [0, 1]")
    values = np.asarray(values, dtype=float)
    if values.shape != grid.nodes.shape:
        raise ValueError("values do not match the grid")
    hit = np.flatnonzero(grid.nodes == x)
    if hit.size:
        return float(values[hit[0]])
    t = grid.bary_weights / (x - grid.nodes)
    return float(t @ values / t.sum())


# ---------------------------------------------------------------------------
# coefficient space (Chebyshev series in x = 2 rho - 1)


def chop(coeffs, tol: float = CHOP_TOL) -> np.ndarray:
    """Drop the trailing coefficients that sit below tol relative to the largest."""
    c = np.asarray(coeffs, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return np.zeros(1)
    keep = np.flatnonzero(np.abs(c) > tol * scale)
    return c[: keep[-1] + 1].copy()


def to_coeffs(values, tol: float | None = CHOP_TOL) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    N = v.size - 1
    c = dct(v[::-1], type=1) / N
    c[0] *= 0.5
    c[-1] *= 0.5
    return chop(c, tol) if tol else c


def to_values(coeffs, grid: Grid) -> np.ndarray:
    return evaluate(coeffs, grid.nodes)


def evaluate(coeffs, rho) -> np.ndarray:
    return cheb.chebval(2.0 * np.asarray(rho, dtype=float) - 1.0, coeffs)


def derivative(coeffs, order: int = 1) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if order == 0:
        return c
    if c.size <= order:
        return np.zeros(1)
    return cheb.chebder(c, m=order, scl=2.0)


def times_rho(coeffs, power: int = 1) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    for _ in range(power):
        c = cheb.chebmul(c, [0.5, 0.5])
    return c


def antiderivative(coeffs) -> np.ndarray:
    """Series of rho -> int_0^rho f."""
    return cheb.chebint(np.asarray(coeffs, dtype=float), lbnd=-1.0, scl=0.5)


def integral(coeffs) -> float:
    """Exact integral over [0, 1] of a Chebyshev series."""
    c = np.asarray(coeffs, dtype=float)
    k = np.arange(0, c.size, 2)
    return float(np.sum(c[::2] / (1.0 - k * k)))


def product(a, b) -> np.ndarray:
    return cheb.chebmul(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def inner(a, b) -> float:
    return integral(product(a, b))


def sq_norm(a) -> float:
    return max(inner(a, a), 0.0)


def add(a, b) -> np.ndarray:
    return cheb.chebadd(a, b)


@lru_cache(maxsize=64)
def _legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def ray_average(coeffs, rho, kernel=None) -> np.ndarray:
    """Evaluate rho -> int_0^1 kernel(t) f(rho t) dt at the points rho.

    Gauss-Legendre with enough points to be exact for polynomial kernels of
    modest degree; used to divide by rho without dividing.
    """
    c = np.asarray(coeffs, dtype=float)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    kdeg = 0 if kernel is None else kernel[1]
    t, w = _legendre(max((c.size + kdeg) // 2 + 2, 4))
    if kernel is not None:
        w = w * kernel[0](t)
    pts = rho[:, None] * t[None, :]
    return evaluate(c, pts) @ w


# ---------------------------------------------------------------------------
# sampled radial profiles


@dataclass(frozen=True, eq=False)
class SampledProfile:
    radii: np.ndarray
    values1: np.ndarray
    values2: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.size == 0:
            raise EmptyProfileError("profile has no samples")
        if not (np.asarray(self.values1).shape == np.asarray(self.values2).shape == r.shape):
            raise ProfileError("radii and value columns must have equal lengths")
        if np.any(r < 0):
            raise ProfileError("radii must be nonnegative")
        if np.any(np.diff(r) <= 0):
            raise NonMonotoneRadiiError("radii must be strictly increasing")
        for name in ("radii", "values1", "values2"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def max_radius(self) -> float:
        return float(self.radii[-1])

    def __len__(self):
        return self.radii.size

    def interpolator(self):
        from scipy.interpolate import BarycentricInterpolator

        # explicit weights: scipy otherwise shuffles the nodes at random while
        # computing them, which makes results differ in the last bits
        w = _barycentric_weights(self.radii)
        return (
            BarycentricInterpolator(self.radii, self.values1, wi=w),
            BarycentricInterpolator(self.radii, self.values2, wi=w),
        )


def _barycentric_weights(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        return np.ones(1)
    scale = 4.0 / (x[-1] - x[0])  # keeps the products away from over/underflow
    diff = scale * (x[:, None] - x[None, :])
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def sample_profile(first, second, radius: float, N: int) -> SampledProfile:
    """Sample two radial functions on Chebyshev-Lobatto points of [0, radius]."""
    r = radius * build_grid(N).nodes
    return SampledProfile(r, np.broadcast_to(first(r), r.shape), np.broadcast_to(second(r), r.shape))


def _is_header(row) -> bool:
    try:
        [float(x) for x in row]
    except ValueError:
        return True
    return False


def ingest_profile(source) -> SampledProfile:
    """Read an r,u,ut CSV (header optional) from a path or a text stream."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(f.strip() for f in r)]
    if rows and _is_header(rows[0]):
        rows = rows[1:]
    if not rows:
        raise EmptyProfileError("profile file contains no data rows")
    data = []
    for lineno, row in enumerate(rows, 1):
        if len(row) != 3:
            raise ProfileParseError(f"row {lineno}: expected 3 columns, got {len(row)}")
        try:
            data.append([float(x) for x in row])
        except ValueError as exc:
            raise ProfileParseError(f"row {lineno}: {exc}") from None
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        raise ProfileParseError("non-finite value in profile")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise NonMonotoneRadiiError("radii must be strictly increasing")
    return SampledProfile(arr[:, 0], arr[:, 1], arr[:, 2])


def write_profile(profile: SampledProfile, target) -> None:
    lines = ["r,u,ut"]
    for r, u, ut in zip(profile.radii, profile.values1, profile.values2):
        lines.append(f"{float(r)!r},{float(u)!r},{float(ut)!r}")
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8", newline="\n")
    else:
        target.write(text)
