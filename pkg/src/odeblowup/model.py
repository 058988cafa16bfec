"""Parameters, the ODE blowup profile, and the initial-data operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, SampledProfile, build_grid

DEFAULT_EPSILON = 0.05


@dataclass(frozen=True)
class ModelParams:
    d: int
    p: float
    epsilon: float
    c_p: float
    s_p: float
    m_d: int
    mu_p: float
    diss_bound: float
    spectral_threshold: float
    superconformal: bool

    @property
    def alpha(self) -> float:
        """Self-similar weight 2/(p-1) of the first component."""
        return 2.0 / (self.p - 1.0)

    @property
    def beta(self) -> float:
        """Weight (p+1)/(p-1) of the second component."""
        return (self.p + 1.0) / (self.p - 1.0)

    @property
    def potential(self) -> float:
        """p c_p^{p-1}, the coefficient of the compact perturbation."""
        return self.p * self.c_p ** (self.p - 1.0)


def superconformal_threshold(d: int) -> float:
    return (d + 3.0) / (d - 1.0)


def make_params(d: int, p: float, epsilon: float = DEFAULT_EPSILON, allow_subconformal: bool = False) -> ModelParams:
    if int(d) != d or d < 5 or int(d) % 2 == 0:
        raise ValueError(f"dimension must be an odd integer >= 5, got {d!r}")
    d = int(d)
    p = float(p)
    if not p > 1.0:
        raise ValueError(f"exponent must exceed 1, got {p}")
    cap = min(2.0 / (p - 1.0), 1.0)
    if not 0.0 < epsilon < cap:
        raise ValueError(f"epsilon must lie in (0, {cap}), got {epsilon}")
    superconformal = p > superconformal_threshold(d)
    if not superconformal and not allow_subconformal:
        raise ValueError(
            f"p = {p} is not above (d+3)/(d-1) = {superconformal_threshold(d):.6g}; "
            "pass allow_subconformal=True to override"
        )
    c_p = (2.0 * (p + 1.0) / (p - 1.0) ** 2) ** (1.0 / (p - 1.0))
    return ModelParams(
        d=d,
        p=p,
        epsilon=float(epsilon),
        c_p=c_p,
        s_p=d / 2.0 - 2.0 / (p - 1.0),
        m_d=(d + 1) // 2,
        mu_p=cap - epsilon,
        diss_bound=-2.0 / (p - 1.0),
        spectral_threshold=max(-2.0 / (p - 1.0), -1.0),
        superconformal=superconformal,
    )


def ode_profile(params: ModelParams, T: float, t: float) -> float:
    if not t < T:
        raise ValueError(f"profile defined only for t < T (t={t}, T={T})")
    return params.c_p * (T - t) ** (-params.alpha)


def ode_profile_rate(params: ModelParams, T: float, t: float) -> float:
    """Time derivative of the ODE profile."""
    if not t < T:
        raise ValueError(f"profile defined only for t < T (t={t}, T={T})")
    return params.alpha * params.c_p * (T - t) ** (-params.alpha - 1.0)


def static_pair(params: ModelParams) -> tuple[float, float]:
    """The ODE profile in similarity variables: a constant pair."""
    return params.c_p, params.alpha * params.c_p


@dataclass(frozen=True, eq=False)
class StatePair:
    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        a = np.array(self.first, dtype=float)
        b = np.array(self.second, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("state components must be 1-d arrays on one grid")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("state contains non-finite values")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)

    @classmethod
    def zeros(cls, n: int) -> "StatePair":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_stacked(cls, vec) -> "StatePair":
        vec = np.asarray(vec, dtype=float)
        half = vec.size // 2
        return cls(vec[:half], vec[half:])

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.first, self.second])

    def __len__(self):
        return self.first.size

    def __add__(self, other):
        return StatePair(self.first + other.first, self.second + other.second)

    def __sub__(self, other):
        return StatePair(self.first - other.first, self.second - other.second)

    def __mul__(self, scalar):
        return StatePair(scalar * self.first, scalar * self.second)

    __rmul__ = __mul__


def symmetry_mode(params: ModelParams, grid: Grid) -> StatePair:
    n = grid.size
    return StatePair(np.ones(n), np.full(n, params.beta))


def similarity_rhs(params: ModelParams, grid: Grid, psi: StatePair) -> StatePair:
    """Right-hand side of the nonlinear first-order system in similarity variables."""
    rho = grid.nodes
    d1 = grid.diff1 @ psi.first
    lap = grid.diff2 @ psi.first
    lap[1:] += (params.d - 1) * d1[1:] / rho[1:]
    lap[0] = params.d * (grid.diff2[0] @ psi.first)
    power = np.abs(psi.first) ** (params.p - 1.0) * psi.first
    return StatePair(
        psi.second - rho * d1 - params.alpha * psi.first,
        lap - rho * (grid.diff1 @ psi.second) - params.beta * psi.second + power,
    )


def kappa(params: ModelParams, T: float, T0: float) -> tuple[float, float]:
    r = T / T0
    return r ** params.alpha * params.c_p, r ** params.beta * params.alpha * params.c_p


def kappa_rate(params: ModelParams, T0: float) -> tuple[float, float]:
    """d kappa / dT at T = T0; equals (2 c_p / ((p-1) T0)) times the symmetry mode."""
    a = params.alpha * params.c_p / T0
    return a, a * params.beta


def rescale_data(v: SampledProfile, T: float, params: ModelParams, grid: Grid) -> StatePair:
    """V(v, T): the data rescaled to similarity coordinates on the grid."""
    if T <= 0:
        raise ValueError("T must be positive")
    if v.radii[0] > 0.0 or v.max_radius < T * (1.0 - 1e-14):
        raise ValueError(f"profile covers [{v.radii[0]}, {v.max_radius}], need [0, {T}]")
    r = np.minimum(T * grid.nodes, v.max_radius)
    f1, f2 = v.interpolator()
    return StatePair(T ** params.alpha * f1(r), T ** params.beta * f2(r))


def initial_data_U(v: SampledProfile, T: float, T0: float, params: ModelParams, grid: Grid | None = None) -> StatePair:
    """U(v, T) = V(v, T) + kappa(T) - kappa(T0), sampled on the grid."""
    grid = grid or build_grid(64)
    scaled = rescale_data(v, T, params, grid)
    k = kappa(params, T, T0)
    k0 = kappa(params, T0, T0)
    return StatePair(scaled.first + (k[0] - k0[0]), scaled.second + (k[1] - k0[1]))


def blowup_family_data(params: ModelParams, T_star: float, T0: float, radius: float, N: int = 16) -> SampledProfile:
    """v = u_{T*}[0] - u_{T0}[0]: constant data moving the blowup time to T*."""
    from .grid import sample_profile

    dv1 = ode_profile(params, T_star, 0.0) - ode_profile(params, T0, 0.0)
    dv2 = ode_profile_rate(params, T_star, 0.0) - ode_profile_rate(params, T0, 0.0)
    return sample_profile(lambda r: np.full_like(r, dv1), lambda r: np.full_like(r, dv2), radius, N)


def check_fixed_point(params: ModelParams) -> float:
    """Residual of the ODE balance |c|^{p-1} c = (2/(p-1)) ((p+1)/(p-1)) c."""
    c = params.c_p
    return abs(abs(c) ** (params.p - 1.0) * c - params.alpha * params.beta * c) / c


__all__ = [
    "ModelParams",
    "StatePair",
    "make_params",
    "ode_profile",
    "ode_profile_rate",
    "static_pair",
    "symmetry_mode",
    "similarity_rhs",
    "kappa",
    "kappa_rate",
    "rescale_data",
    "initial_data_U",
    "blowup_family_data",
    "check_fixed_point",
    "superconformal_threshold",
]
