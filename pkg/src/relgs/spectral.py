"""Periodic spectral grids and real fields on them.

The whole space is truncated to the box ``[-L, L)^N`` sampled with ``n``
points per axis.  The Fourier transform convention is

    F[f](k) = h^N  sum_y f(y) exp(-i k.y)
    f(y)    = (2L)^-N sum_k F[f](k) exp(i k.y)

with ``y = -L + j h`` and ``k = pi j / L`` for ``j = -n/2 .. n/2-1``.
Arrays are stored row-major (C order) with the *spatial* index ordering, so
the origin sits at index ``n // 2`` on every axis.  Spectra are stored in
numpy's FFT ordering (zero frequency first).
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

#: default cap on n**N, overridable through make_grid(..., budget=...)
DEFAULT_BUDGET = 2**27

SNAPSHOT_MAGIC = b"RGS1"

_strict = False


def set_strict_deterministic(flag: bool) -> None:
    """Force single-threaded transforms regardless of ``RELGS_THREADS``."""
    global _strict
    _strict = bool(flag)


def fft_workers() -> int:
    if _strict:
        return 1
    try:
        return max(1, int(os.environ.get("RELGS_THREADS", "1")))
    except ValueError:
        return 1


def rfftn(a: np.ndarray) -> np.ndarray:
    return sfft.rfftn(a, workers=fft_workers())


def irfftn(a: np.ndarray, shape) -> np.ndarray:
    return sfft.irfftn(a, s=shape, workers=fft_workers())


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^N``."""

    N: int
    L: float
    n: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.N

    @property
    def size(self) -> int:
        return self.n**self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.N

    @property
    def box_volume(self) -> float:
        return (2.0 * self.L) ** self.N

    @cached_property
    def axis(self) -> np.ndarray:
        """Sample coordinates along one axis, ``-L + j h``."""
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Sorted frequency set along one axis, ``pi j / L``, j = -n/2..n/2-1."""
        return np.pi / self.L * np.arange(-self.n // 2, self.n // 2)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.N), indexing="ij"))

    @cached_property
    def index_r2(self) -> np.ndarray:
        """Exact integer |j - n/2|^2 per cell, so that |y|^2 = h^2 * index_r2."""
        off = np.arange(self.n, dtype=np.int64) - self.n // 2
        r2 = np.zeros(self.shape, dtype=np.int64)
        for ax in range(self.N):
            sh = [1] * self.N
            sh[ax] = self.n
            r2 = r2 + (off**2).reshape(sh)
        return r2

    @cached_property
    def radius(self) -> np.ndarray:
        return self.h * np.sqrt(self.index_r2.astype(float))

    def _k_axes(self, real: bool) -> list[np.ndarray]:
        k = 2.0 * np.pi * sfft.fftfreq(self.n, d=self.h)
        axes = [k] * self.N
        if real:
            axes[-1] = 2.0 * np.pi * sfft.rfftfreq(self.n, d=self.h)
        return axes

    def _ksq(self, real: bool) -> np.ndarray:
        axes = self._k_axes(real)
        out = np.zeros([len(a) for a in axes])
        for ax, k in enumerate(axes):
            sh = [1] * self.N
            sh[ax] = len(k)
            out = out + (k**2).reshape(sh)
        return out

    @cached_property
    def ksq(self) -> np.ndarray:
        """|k|^2 in full FFT layout."""
        return self._ksq(real=False)

    @cached_property
    def ksq_r(self) -> np.ndarray:
        """|k|^2 in the half-spectrum (rfftn) layout."""
        return self._ksq(real=True)

    @cached_property
    def kabs_r(self) -> np.ndarray:
        return np.sqrt(self.ksq_r)

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum entry in the full spectrum."""
        nr = self.n // 2 + 1
        wt = np.full(nr, 2.0)
        wt[0] = 1.0
        wt[-1] = 1.0  # Nyquist column (n even)
        sh = [1] * (self.N - 1) + [nr]
        return np.broadcast_to(wt.reshape(sh), self.ksq_r.shape)

    def spectral_sum(self, values_r: np.ndarray) -> float:
        """Sum of a conjugate-even real quantity given on the half spectrum."""
        return float(np.sum(self.rfft_weights * values_r))


def make_grid(N: int, L: float, n: int, budget: int = DEFAULT_BUDGET) -> Grid:
    """Build a :class:`Grid`, validating dimension, parity and memory budget."""
    if int(N) != N or N < 2:
        raise ValueError(f"dimension N must be an integer >= 2, got {N}")
    if not (L > 0 and np.isfinite(L)):
        raise ValueError(f"box half-length L must be positive, got {L}")
    if int(n) != n or n < 8:
        raise ValueError(f"points per axis n must be an integer >= 8, got {n}")
    if n % 2:
        raise ValueError(f"points per axis n must be even, got odd n={n}")
    if int(n) ** int(N) > budget:
        raise MemoryError(
            f"n^N = {n}^{N} = {int(n) ** int(N)} samples exceeds the budget {budget}"
        )
    return Grid(int(N), float(L), int(n))


def forward(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Forward transform under the module convention (full FFT layout)."""
    spec = sfft.fftn(values, workers=fft_workers()) * grid.cell_volume
    # exp(+i k L) phase from the shifted origin: (-1)^j per axis
    sign = np.where(np.arange(grid.n) % 2 == 0, 1.0, -1.0)
    for ax in range(grid.N):
        sh = [1] * grid.N
        sh[ax] = grid.n
        spec = spec * sign.reshape(sh)
    return spec


def inverse(grid: Grid, spectrum: np.ndarray) -> np.ndarray:
    """Inverse of :func:`forward`; returns the real part."""
    sign = np.where(np.arange(grid.n) % 2 == 0, 1.0, -1.0)
    spec = spectrum
    for ax in range(grid.N):
        sh = [1] * grid.N
        sh[ax] = grid.n
        spec = spec * sign.reshape(sh)
    return np.real(sfft.ifftn(spec, workers=fft_workers())) / grid.cell_volume


class Field:
    """Real samples of a function on a :class:`Grid`.

    Values are copied and frozen on construction; the spectrum is computed
    lazily under the module convention.
    """

    __slots__ = ("grid", "values", "_spectrum", "_rspec")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float, copy=True)
        if arr.size != grid.size:
            raise ValueError(f"expected {grid.size} samples, got {arr.size}")
        arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr
        self._spectrum = None
        self._rspec = None

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            s = forward(self.grid, self.values)
            s.flags.writeable = False
            self._spectrum = s
        return self._spectrum

    @property
    def rspec(self) -> np.ndarray:
        """Raw half-spectrum ``rfftn(values)`` (no convention factors)."""
        if self._rspec is None:
            s = rfftn(self.values)
            s.flags.writeable = False
            self._rspec = s
        return self._rspec

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def __repr__(self) -> str:
        g = self.grid
        return f"Field(N={g.N}, L={g.L}, n={g.n}, mass={mass(self):.6g})"


def _same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product ``h^N sum f g``."""
    _same_grid(f, g)
    return float(np.sum(f.values * g.values)) * f.grid.cell_volume


def lp_norm(f: Field, p: float) -> float:
    """Discrete Lebesgue norm ``(h^N sum |f|^p)^(1/p)``; ``p = inf`` gives max|f|."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    scale = a.max()
    if scale == 0.0:
        return 0.0
    # scaled against overflow; fsum makes the result independent of cell order
    s = math.fsum(((a / scale) ** p).ravel()) * f.grid.cell_volume
    return float(scale * s ** (1.0 / p))


def mass(f: Field) -> float:
    """Squared L2 norm ``h^N sum f^2`` (exactly rounded, order independent)."""
    return math.fsum((f.values * f.values).ravel()) * f.grid.cell_volume


def fast_mass(values: np.ndarray, grid: Grid) -> float:
    return float(np.sum(values * values)) * grid.cell_volume


def rescale_mass(f: Field, M: float) -> Field:
    """Project ``f`` onto the sphere ``mass = M`` by scalar scaling."""
    if not M > 0:
        raise ValueError(f"target mass must be positive, got {M}")
    m0 = mass(f)
    if m0 == 0.0:
        raise ValueError("cannot rescale the zero field")
    return Field(f.grid, f.values * np.sqrt(M / m0))


def apply_multiplier(f: Field, symbol_r: np.ndarray) -> np.ndarray:
    """Apply a real even Fourier multiplier given on the half spectrum."""
    return irfftn(f.rspec * symbol_r, f.grid.shape)


def spectral_quadratic(f: Field, symbol_r: np.ndarray) -> float:
    """``(2L)^-N sum_k s(k) |F[f](k)|^2`` evaluated from the half spectrum."""
    g = f.grid
    power = np.abs(f.rspec) ** 2
    return g.spectral_sum(symbol_r * power) * g.cell_volume / g.size


def gaussian(grid: Grid, width: float, center=None) -> Field:
    """Unnormalised Gaussian ``exp(-|y - c|^2 / (2 width^2))``."""
    c = np.zeros(grid.N) if center is None else np.asarray(center, dtype=float)
    r2 = sum((x - ci) ** 2 for x, ci in zip(grid.coords, c))
    return Field(grid, np.exp(-r2 / (2.0 * width**2)))


# -- snapshot files ---------------------------------------------------------

def write_snapshot(path, f: Field) -> None:
    """Write the bit-exact ``RGS1`` snapshot of a field."""
    g = f.grid
    header = SNAPSHOT_MAGIC + struct.pack("<IId", g.N, g.n, g.L)
    body = np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(header + body)


def read_snapshot(path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not an RGS1 snapshot")
    N, n, L = struct.unpack("<IId", raw[4:20])
    grid = make_grid(int(N), float(L), int(n))
    expected = 20 + 8 * grid.size
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=20).reshape(grid.shape)
    return Field(grid, values)
