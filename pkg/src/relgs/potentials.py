"""Radial two-body potentials, their Fourier symbols and weak-L^q norms."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma

from .spectral import Grid, irfftn, rfftn


class LowerBoundWarning(UserWarning):
    """A weak norm was only bounded from below (non-monotone potential)."""


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2) / gamma(N / 2)


def ball_volume(N: int, R: float) -> float:
    return sphere_area(N) * R**N / N


def riesz_constant(N: int, alpha: float) -> float:
    """Fourier constant c with F[|y|^-alpha](k) = c |k|^(alpha - N), 0 < alpha < N."""
    return (
        math.pi ** (N / 2)
        * 2.0 ** (N - alpha)
        * gamma((N - alpha) / 2)
        / gamma(alpha / 2)
    )


@dataclass(frozen=True)
class PowerLaw:
    """``W(r) = r^-alpha``; lies in weak L^q exactly for ``q = N / alpha``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"power-law exponent must be positive, got {self.alpha}")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return r ** (-self.alpha)

    def weak_exponent(self, N: int) -> float:
        return N / self.alpha

    @property
    def nonincreasing(self) -> bool:
        return True


@dataclass(frozen=True)
class Yukawa:
    """Screened Coulomb kernel ``W(r) = exp(-mu r) / r``."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"Yukawa decay must be positive, got {self.mu}")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp(-self.mu * r) / r

    def weak_exponent(self, N: int) -> float:
        return float(N)

    @property
    def nonincreasing(self) -> bool:
        return True


@dataclass(frozen=True)
class TabulatedRadial:
    """Piecewise-linear radial kernel; zero beyond the last radius.

    Below the first radius the first value is held constant.  ``q`` is the
    weak exponent assigned to the kernel (bounded compactly supported kernels
    lie in every weak L^q, hence the default ``inf``).
    """

    radii: tuple
    values: tuple
    q: float = math.inf
    tail_tol: float = 1e-6

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValueError("radii and values must be 1-D sequences of equal length >= 2")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ValueError("radii must be nonnegative and strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("tabulated potential values must be finite and nonnegative")
        vmax = v.max()
        if vmax > 0 and v[-1] > self.tail_tol * vmax:
            raise ValueError(
                f"tabulated potential does not decay: last value {v[-1]:.3g} "
                f"exceeds tail tolerance {self.tail_tol:g} * max"
            )
        object.__setattr__(self, "radii", tuple(float(x) for x in r))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.interp(r, self.radii, self.values, left=self.values[0], right=0.0)

    def weak_exponent(self, N: int) -> float:
        return self.q

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) <= 0))


PotentialSpec = Union[PowerLaw, Yukawa, TabulatedRadial]


def load_tabulated(path, **kwargs) -> TabulatedRadial:
    """Read a two-column ``radius,value`` CSV (a non-numeric header row is skipped)."""
    radii, values = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                r, v = float(row[0]), float(row[1])
            except ValueError:
                if radii:
                    raise
                continue
            radii.append(r)
            values.append(v)
    return TabulatedRadial(tuple(radii), tuple(values), **kwargs)


@dataclass(frozen=True, eq=False)
class PotentialSymbol:
    """Fourier symbol of W on a grid, in half-spectrum (rfftn) layout."""

    grid: Grid
    values_r: np.ndarray = field(repr=False)
    zero_mode: float

    def full(self) -> np.ndarray:
        """Symbol in the full FFT layout (recomputed from |k| symmetry)."""
        g = self.grid
        spec = np.fft.irfftn(self.values_r, s=g.shape, axes=tuple(range(g.N)))  # even real kernel
        return np.real(np.fft.fftn(spec))

    def convolve(self, rho: np.ndarray) -> np.ndarray:
        """``W * rho`` on the periodic grid (one forward, one inverse transform)."""
        return irfftn(rfftn(rho) * self.values_r, self.grid.shape)


def symbol_on_grid(W: PotentialSpec, g: Grid) -> PotentialSymbol:
    """Evaluate the Fourier symbol of ``W`` on the frequencies of ``g``.

    The power-law zero mode is the integral of the kernel over the ball of
    radius ``L`` (the box treated as an isolated system).
    """
    N = g.N
    k = g.kabs_r
    if isinstance(W, PowerLaw):
        a = W.alpha
        if a >= N:
            raise ValueError(f"power-law exponent alpha={a} must be below N={N}")
        c = riesz_constant(N, a)
        with np.errstate(divide="ignore"):
            vals = c * k ** (a - N)
        zero = sphere_area(N) * g.L ** (N - a) / (N - a)
        vals.flat[0] = zero
    elif isinstance(W, Yukawa):
        mu = W.mu
        if N == 3:
            vals = 4.0 * np.pi / (k**2 + mu**2)
        elif N == 2:
            vals = 2.0 * np.pi / np.sqrt(k**2 + mu**2)
        else:
            raise ValueError(f"Yukawa symbol is implemented for N = 2, 3 only, got N={N}")
        zero = float(vals.flat[0])
    elif isinstance(W, TabulatedRadial):
        return _sampled_symbol(W, g)
    else:
        raise TypeError(f"unsupported potential {W!r}")
    return PotentialSymbol(g, vals, float(zero))


def _sampled_symbol(W, g: Grid) -> PotentialSymbol:
    r = g.radius
    kern = np.where(r <= g.L, W(r), 0.0)
    kern = np.fft.ifftshift(kern)  # origin to index 0
    vals = np.real(rfftn(kern)) * g.cell_volume
    return PotentialSymbol(g, vals, float(vals.flat[0]))


# -- weak L^q norm ----------------------------------------------------------

def ball_integral(W: Callable, N: int, R: float) -> float:
    """``int_{|y| < R} W(|y|) dy`` by radial quadrature."""
    if isinstance(W, PowerLaw):
        a = W.alpha
        if a >= N:
            return math.inf
        val, _ = integrate.quad(
            lambda r: 1.0, 0.0, R, weight="alg", wvar=(N - 1 - a, 0.0)
        )
    elif isinstance(W, Yukawa):
        val, _ = integrate.quad(
            lambda r: math.exp(-W.mu * r), 0.0, R, weight="alg", wvar=(N - 2, 0.0)
        )
    elif isinstance(W, TabulatedRadial):
        edges = [0.0] + [x for x in W.radii if 0.0 < x < R] + [R]
        val = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            part, _ = integrate.quad(lambda r: float(W(r)) * r ** (N - 1), lo, hi)
            val += part
    else:
        val, _ = integrate.quad(lambda r: float(W(r)) * r ** (N - 1), 0.0, R, limit=200)
    return sphere_area(N) * val


def ball_functional(W: Callable, q: float, N: int, R: float) -> float:
    """``|B_R|^(-1/r) int_{B_R} W`` with ``1/q + 1/r = 1``."""
    rexp = q / (q - 1.0)
    return ball_volume(N, R) ** (-1.0 / rexp) * ball_integral(W, N, R)


def _radius_range(W) -> tuple[float, float]:
    if isinstance(W, TabulatedRadial):
        rr = [x for x in W.radii if x > 0]
        return (rr[0] * 1e-3 if rr else 1e-6), W.radii[-1] * 2.0
    if isinstance(W, Yukawa):
        return 1e-9 / W.mu, 50.0 / W.mu
    return 1e-3, 1e3


def weak_lq_norm(W: Callable, q: float, N: int, radii=None) -> float:
    """Weak L^q norm of a radial nonincreasing kernel.

    For such kernels the supremum over finite-measure sets is attained on
    centred balls, so it reduces to a one-dimensional maximisation of
    :func:`ball_functional` over the radius.  A non-monotone kernel gets the
    ball-only supremum, which is only a lower bound (a warning is issued).
    """
    if not q > 1:
        raise ValueError(f"weak norm needs q > 1, got {q}")
    if isinstance(W, PowerLaw):
        if abs(N / q - W.alpha) > 1e-12:
            return math.inf
    if not getattr(W, "nonincreasing", True):
        warnings.warn(
            "potential is not radially nonincreasing; returning the supremum "
            "over centred balls, a lower bound on the weak norm",
            LowerBoundWarning,
            stacklevel=2,
        )
    if isinstance(W, TabulatedRadial) and max(W.values) == 0.0:
        return 0.0
    lo, hi = _radius_range(W) if radii is None else radii
    grid = np.geomspace(lo, hi, 81)
    vals = np.array([ball_functional(W, q, N, R) for R in grid])
    i = int(np.argmax(vals))
    best = vals[i]
    a = math.log(grid[max(i - 1, 0)])
    b = math.log(grid[min(i + 1, len(grid) - 1)])
    if b > a:
        res = optimize.minimize_scalar(
            lambda t: -ball_functional(W, q, N, math.exp(t)),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-10},
        )
        best = max(best, -res.fun)
    return float(best)


# -- scaling hypothesis W(y / lambda) >= lambda^alpha W(y) ------------------

@dataclass
class ScalingReport:
    alpha: float
    n_samples: int
    worst_margin: float
    worst_sample: tuple
    violations: list

    @property
    def holds(self) -> bool:
        return not self.violations


def check_scaling_hypothesis(
    W: Callable,
    alpha: float,
    lambdas: Sequence[float],
    radii: Sequence[float],
    tol: float = 1e-12,
) -> ScalingReport:
    """Test ``W(r / lam) >= lam^alpha W(r)`` on every sampled pair.

    Margins are relative to ``lam^alpha W(r)`` (absolute where that vanishes);
    a sample counts as a violation when its margin is below ``-tol``.
    """
    lambdas = list(lambdas)
    radii = list(radii)
    if not lambdas or not radii:
        raise ValueError("need at least one lambda and one radius sample")
    if any(not 0 < lam < 1 for lam in lambdas):
        raise ValueError("lambda samples must lie in (0, 1)")
    worst, worst_at, bad = math.inf, None, []
    for lam in lambdas:
        for r in radii:
            lhs = float(W(r / lam))
            rhs = lam**alpha * float(W(r))
            margin = (lhs - rhs) / rhs if rhs > 0 else lhs - rhs
            if margin < worst:
                worst, worst_at = margin, (lam, r)
            if margin < -tol:
                bad.append((lam, r, margin))
    return ScalingReport(alpha, len(lambdas) * len(radii), worst, worst_at, bad)
