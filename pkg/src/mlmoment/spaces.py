"""Grid signals on the periodic domain [0, 1) and the nested trigonometric
polynomial subspaces X_N = span{exp(2 pi i n t) : |n| <= N}.

A grid signal of length L holds the values x(l / L), l = 0..L-1. The inner
product is normalized by 1/L,

    <x, y> = (1/L) sum_l x_l conj(y_l),

so the monomials exp(2 pi i n t), |n| < L/2, are orthonormal and the
Fourier coefficients of x are ``fft(x) / L``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LevelTooLargeError, SizeMismatchError

__all__ = [
    "DEFAULT_GRID_SIZE",
    "GridSignal",
    "Spectrum",
    "dirichlet_kernel",
    "eval_at",
    "grid_points",
    "max_level",
    "project",
    "spectrum",
    "synthesize",
    "tail_energy",
]

DEFAULT_GRID_SIZE = 1024


def _frozen(values, dtype=complex):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridSignal:
    """Complex samples of a 1-periodic function on a uniform L-point grid."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("grid signal needs a non-empty 1-d array of values")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid signal values must be finite")
        object.__setattr__(self, "values", _frozen(arr))

    @classmethod
    def zeros(cls, L: int) -> "GridSignal":
        return cls(np.zeros(L, dtype=complex))

    @classmethod
    def from_function(cls, func, L: int = DEFAULT_GRID_SIZE) -> "GridSignal":
        return cls(func(grid_points(L)))

    @property
    def L(self) -> int:
        return self.values.size

    def inner(self, other: "GridSignal") -> complex:
        self._check(other)
        return complex(np.vdot(other.values, self.values)) / self.L

    def norm(self) -> float:
        return float(np.linalg.norm(self.values)) / np.sqrt(self.L)

    def _check(self, other):
        if other.L != self.L:
            raise SizeMismatchError(f"grid sizes differ: {self.L} vs {other.L}")

    def __add__(self, other: "GridSignal") -> "GridSignal":
        self._check(other)
        return GridSignal(self.values + other.values)

    def __sub__(self, other: "GridSignal") -> "GridSignal":
        self._check(other)
        return GridSignal(self.values - other.values)

    def __mul__(self, scalar) -> "GridSignal":
        return GridSignal(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "GridSignal":
        return GridSignal(-self.values)

    def __len__(self) -> int:
        return self.L

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSignal):
            return NotImplemented
        return self.L == other.L and bool(np.array_equal(self.values, other.values))

    def allclose(self, other: "GridSignal", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Coefficients a_n, n = -N..N, of a trigonometric polynomial of degree N.

    ``coefficients[N + n]`` holds a_n.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coefficients)
        if arr.ndim != 1 or arr.size % 2 != 1:
            raise ValueError("a degree-N spectrum has exactly 2N+1 coefficients")
        object.__setattr__(self, "coefficients", _frozen(arr))

    @property
    def N(self) -> int:
        return (self.coefficients.size - 1) // 2

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.N:
            return 0j
        return complex(self.coefficients[self.N + n])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def is_conjugate_symmetric(self, atol: float = 1e-12) -> bool:
        c = self.coefficients
        return bool(np.allclose(c, np.conj(c[::-1]), rtol=0.0, atol=atol))


def grid_points(L: int) -> np.ndarray:
    return np.arange(L) / L


def max_level(L: int) -> int:
    """Largest N with 2N+1 <= L."""
    return (L - 1) // 2


def _check_level(N: int, L: int):
    if N < 0:
        raise ValueError(f"level must be non-negative, got {N}")
    if 2 * N + 1 > L:
        raise LevelTooLargeError(f"level {N} needs 2N+1 = {2 * N + 1} > L = {L} grid points")


def dirichlet_kernel(N: int, t):
    """D_N(t) = sin((2N+1) pi t) / sin(pi t), with value 2N+1 at integer t.

    Accepts scalars or arrays; the argument is reduced to [-1/2, 1/2) first
    so the removable singularity is only hit at t = 0.
    """
    t = np.asarray(t, dtype=float)
    u = t - np.floor(t + 0.5)
    den = np.sin(np.pi * u)
    small = np.abs(u) < 1e-12
    safe = np.where(small, 1.0, den)
    val = np.where(small, float(2 * N + 1), np.sin((2 * N + 1) * np.pi * u) / safe)
    return val[()] if val.ndim == 0 else val


def _band_indices(N: int, L: int) -> np.ndarray:
    # FFT bin positions of frequencies -N..N
    return np.arange(-N, N + 1) % L


def spectrum(x: GridSignal, N: int) -> Spectrum:
    """Fourier coefficients of x for |n| <= N (coefficients of P_N x)."""
    _check_level(N, x.L)
    xhat = np.fft.fft(x.values) / x.L
    return Spectrum(xhat[_band_indices(N, x.L)])


def synthesize(s: Spectrum, L: int = DEFAULT_GRID_SIZE) -> GridSignal:
    """Grid values p(l/L) of p(t) = sum_n a_n exp(2 pi i n t)."""
    _check_level(s.N, L)
    full = np.zeros(L, dtype=complex)
    full[_band_indices(s.N, L)] = s.coefficients
    return GridSignal(np.fft.ifft(full) * L)


def project(x: GridSignal, N: int) -> GridSignal:
    """Orthogonal projection onto X_N by spectral truncation."""
    return synthesize(spectrum(x, N), x.L)


def eval_at(x: GridSignal, N: int, t):
    """(P_N x)(t) for arbitrary real t (scalar or array)."""
    s = spectrum(x, N)
    t = np.asarray(t, dtype=float)
    phases = np.exp(2j * np.pi * np.multiply.outer(t, s.frequencies))
    val = phases @ s.coefficients
    return complex(val) if val.ndim == 0 else val


def tail_energy(x: GridSignal, N: int) -> float:
    """||x - P_N x||^2, summed over the out-of-band Fourier coefficients."""
    _check_level(N, x.L)
    xhat = np.fft.fft(x.values) / x.L
    out = np.ones(x.L, dtype=bool)
    out[_band_indices(N, x.L)] = False
    return float(np.sum(np.abs(xhat[out]) ** 2))
