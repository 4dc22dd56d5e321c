"""Energy functional of the pseudo-relativistic Hartree problem.

For a real field w on the grid,

    E[w] = K/2 + (eta/p) P - (sigma/4) D
    K = <w, (sqrt(-Lap + m^2) - m) w>,  P = int |w|^p,  D = int (W * w^2) w^2

together with its L2 gradient and the Lagrange multiplier of the mass
constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .potentials import PotentialSpec, PotentialSymbol, symbol_on_grid
from .spectral import Field, Grid, irfftn, mass, rfftn, spectral_quadratic


class ProblemError(ValueError):
    """Raised when parameters violate the hypotheses of the existence theorem."""


@dataclass(frozen=True)
class Problem:
    """Parameters ``(N, m, eta, sigma, p, W, M)``; ``q`` defaults to W's weak exponent."""

    N: int
    m: float
    eta: float
    sigma: float
    p: float
    W: PotentialSpec
    M: float
    q: float = None

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, "q", float(self.W.weak_exponent(self.N)))
        N, q, p = self.N, self.q, self.p
        if int(N) != N or N < 2:
            raise ProblemError(f"need N >= 2 (q >= N >= 2), got N={N}")
        if not q >= N:
            raise ProblemError(f"need W in weak L^q with q >= N; got q={q} < N={N}")
        if not self.m >= 0:
            raise ProblemError(f"particle mass m must be >= 0, got {self.m}")
        if not self.eta >= 0:
            raise ProblemError(f"need eta >= 0, got eta={self.eta}")
        if not self.sigma > 0:
            raise ProblemError(f"need sigma > 0, got sigma={self.sigma}")
        if not self.M > 0:
            raise ProblemError(f"prescribed mass M must be positive, got {self.M}")
        lo = 2.0 + 2.0 / q
        hi = 2.0 * N / (N - 1)
        if not (lo < p <= hi):
            raise ProblemError(
                f"exponent p={p} outside the admissible range "
                f"2 + 2/q < p <= 2N/(N-1), i.e. ({lo:.6g}, {hi:.6g}] for q={q:g}, N={N}"
            )

    @property
    def mass_critical(self) -> bool:
        """``eta = 0`` and ``q = N``: minimizers exist only below a critical mass."""
        return self.eta == 0 and self.q == self.N

    @property
    def critical_exponent(self) -> float:
        return 2.0 * self.N / (self.N - 1)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    power: float
    hartree: float
    eta: float
    sigma: float
    p: float

    @property
    def total(self) -> float:
        return 0.5 * self.kinetic + self.eta / self.p * self.power - 0.25 * self.sigma * self.hartree

    def as_dict(self) -> dict:
        return {"K": self.kinetic, "P": self.power, "D": self.hartree, "E": self.total}


def kinetic_symbol(m: float, k) -> np.ndarray:
    """``sqrt(|k|^2 + m^2) - m`` in the cancellation-free form.

    ``k`` is a frequency magnitude (scalar) or an array whose last axis holds
    the components of a frequency vector.
    """
    k = np.asarray(k, dtype=float)
    ksq = k * k if k.ndim == 0 else np.sum(k * k, axis=-1)
    return kinetic_symbol_sq(m, ksq)


def kinetic_symbol_sq(m: float, ksq) -> np.ndarray:
    ksq = np.asarray(ksq, dtype=float)
    den = np.sqrt(ksq + m * m) + m
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, ksq / np.where(den > 0, den, 1.0), 0.0)
    return out


@dataclass(frozen=True, eq=False)
class Operators:
    """Multipliers for one (problem, grid) pair."""

    grid: Grid
    kinetic_r: np.ndarray = field(repr=False)
    potential: PotentialSymbol = field(repr=False)
    dealias_mask: np.ndarray = field(repr=False, default=None)

    def convolve(self, rho: np.ndarray) -> np.ndarray:
        spec = rfftn(rho) * self.potential.values_r
        if self.dealias_mask is not None:
            spec = spec * self.dealias_mask
        return irfftn(spec, self.grid.shape)


def _dealias_mask(g: Grid) -> np.ndarray:
    kmax = np.pi * g.n / (2.0 * g.L)
    cut = 2.0 / 3.0 * kmax
    k = 2.0 * np.pi * np.fft.fftfreq(g.n, d=g.h)
    kr = 2.0 * np.pi * np.fft.rfftfreq(g.n, d=g.h)
    mask = np.ones(g.ksq_r.shape, dtype=bool)
    for ax in range(g.N):
        kk = kr if ax == g.N - 1 else k
        sh = [1] * g.N
        sh[ax] = len(kk)
        mask = mask & (np.abs(kk) <= cut).reshape(sh)
    return mask.astype(float)


def operators(pb: Problem, g: Grid, dealias: bool = False) -> Operators:
    if g.N != pb.N:
        raise ValueError(f"grid dimension {g.N} does not match problem dimension {pb.N}")
    return _operators(pb.m, pb.W, g, dealias)


@lru_cache(maxsize=16)
def _operators(m, W, g: Grid, dealias: bool) -> Operators:
    return Operators(
        g,
        kinetic_symbol_sq(m, g.ksq_r),
        symbol_on_grid(W, g),
        _dealias_mask(g) if dealias else None,
    )


def _check(pb: Problem, w: Field) -> None:
    if w.grid.N != pb.N:
        raise ValueError(f"field dimension {w.grid.N} does not match problem dimension {pb.N}")


def apply_T_minus_m(pb: Problem, w: Field) -> Field:
    """Apply ``sqrt(-Lap + m^2) - m`` spectrally."""
    _check(pb, w)
    ops = operators(pb, w.grid)
    return Field(w.grid, irfftn(w.rspec * ops.kinetic_r, w.grid.shape))


def power_term(w: Field, p: float) -> np.ndarray:
    """``|w|^(p-2) w`` with value 0 at w = 0."""
    a = np.abs(w.values)
    return np.sign(w.values) * a ** (p - 1.0)


def energy(pb: Problem, w: Field, dealias: bool = False) -> EnergyBreakdown:
    _check(pb, w)
    if not np.any(w.values):
        raise ValueError("energy is evaluated on fields of positive mass only")
    g = w.grid
    ops = operators(pb, g, dealias)
    K = spectral_quadratic(w, ops.kinetic_r)
    a = np.abs(w.values)
    P = float(np.sum(a**pb.p)) * g.cell_volume
    rho = w.values * w.values
    D = float(np.sum(ops.convolve(rho) * rho)) * g.cell_volume
    return EnergyBreakdown(K, P, D, pb.eta, pb.sigma, pb.p)


def energy_and_gradient(pb: Problem, w: Field, dealias: bool = False):
    """Energy breakdown and L2 gradient sharing one convolution."""
    _check(pb, w)
    if not np.any(w.values):
        raise ValueError("energy is evaluated on fields of positive mass only")
    g = w.grid
    ops = operators(pb, g, dealias)
    v = w.values
    tw = irfftn(w.rspec * ops.kinetic_r, g.shape)
    a = np.abs(v)
    ap = a ** (pb.p - 1.0)
    rho = v * v
    conv = ops.convolve(rho)
    dv = g.cell_volume
    K = spectral_quadratic(w, ops.kinetic_r)
    P = float(np.sum(ap * a)) * dv
    D = float(np.sum(conv * rho)) * dv
    grad = tw + pb.eta * np.sign(v) * ap - pb.sigma * conv * v
    return EnergyBreakdown(K, P, D, pb.eta, pb.sigma, pb.p), Field(g, grad)


def gradient(pb: Problem, w: Field, dealias: bool = False) -> Field:
    """L2 gradient ``(T - m) w + eta |w|^(p-2) w - sigma (W * w^2) w``."""
    return energy_and_gradient(pb, w, dealias)[1]


def lagrange_multiplier_pair(pb: Problem, w: Field, breakdown: EnergyBreakdown = None):
    """Both expressions for the multiplier ``mu`` of the mass constraint.

    ``mu M = sigma D - K - eta P`` (testing the Euler-Lagrange equation
    against w) and ``mu M = -2E - eta (1 - 2/p) P + (sigma/2) D``.
    """
    b = breakdown if breakdown is not None else energy(pb, w)
    M = mass(w)
    mu1 = (pb.sigma * b.hartree - b.kinetic - pb.eta * b.power) / M
    mu2 = (
        -2.0 * b.total - pb.eta * (1.0 - 2.0 / pb.p) * b.power + 0.5 * pb.sigma * b.hartree
    ) / M
    return mu1, mu2


def lagrange_multiplier(pb: Problem, w: Field, breakdown: EnergyBreakdown = None) -> float:
    return lagrange_multiplier_pair(pb, w, breakdown)[0]


def rel_diff(a: float, b: float) -> float:
    s = max(abs(a), abs(b))
    return 0.0 if s == 0 else abs(a - b) / s


def stationarity_residual(pb: Problem, w: Field) -> float:
    """L2 norm of ``gradient + mu w`` with mu from :func:`lagrange_multiplier`."""
    b, gr = energy_and_gradient(pb, w)
    mu = lagrange_multiplier(pb, w, b)
    r = gr.values + mu * w.values
    return math.sqrt(float(np.sum(r * r)) * w.grid.cell_volume)
