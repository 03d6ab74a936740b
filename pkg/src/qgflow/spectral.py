"""Sine-basis spectral fields on a rectangle with homogeneous Dirichlet data.

A scalar field is stored as the real coefficient matrix of the expansion

    f(x, y) = sum_{k=1..nx} sum_{l=1..ny} c[k-1, l-1]
              * sin(k*pi*x/lx) * sin(l*pi*y/ly)

on D = (0, lx) x (0, ly), so the represented function vanishes on the
boundary by construction.  Collocation values live on the interior points
x_i = i*lx/(nx+1), y_j = j*ly/(ny+1) and the transform pair is the type-I
discrete sine transform, which is exact (up to roundoff) in both
directions.

The Dirichlet Laplacian is diagonal in this basis with eigenvalues
-mu_kl, mu_kl = (k*pi/lx)^2 + (l*pi/ly)^2, which makes fractional Sobolev
norms exact coefficient sums.  Nonlinear products (the Jacobian) are
formed pseudo-spectrally with 2/3-rule dealiasing.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sp_fft


class GridMismatchError(ValueError):
    """Raised when an operation mixes fields that live on different grids."""


@dataclass(frozen=True)
class Grid:
    """Interior mode/point counts and side lengths of the rectangle."""

    nx: int
    ny: int
    lx: float = np.pi
    ly: float = np.pi

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("nx, ny must be at least 4")
        if self.nx % 2 or self.ny % 2:
            raise ValueError("nx, ny must be even (dealiasing needs an even split)")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("lx, ly must be positive")

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @cached_property
    def kx(self) -> np.ndarray:
        """x wavenumbers k*pi/lx, shape (nx,)."""
        return np.arange(1, self.nx + 1) * np.pi / self.lx

    @cached_property
    def ky(self) -> np.ndarray:
        return np.arange(1, self.ny + 1) * np.pi / self.ly

    @cached_property
    def mu(self) -> np.ndarray:
        """Dirichlet-Laplacian eigenvalues mu_kl > 0, shape (nx, ny)."""
        return self.kx[:, None] ** 2 + self.ky[None, :] ** 2

    @property
    def mu_min(self) -> float:
        """Smallest Laplacian eigenvalue (sharp Poincare constant is 1/sqrt(mu_min))."""
        return float(self.mu[0, 0])

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(1, self.nx + 1) * self.lx / (self.nx + 1)

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(1, self.ny + 1) * self.ly / (self.ny + 1)

    @property
    def max_dealiased_mode(self) -> int:
        """Largest mode index kept by the 2/3 rule (per axis minimum)."""
        return min(2 * self.nx // 3, 2 * self.ny // 3)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kcut = 2 * self.nx // 3
        lcut = 2 * self.ny // 3
        mask = np.zeros((self.nx, self.ny))
        mask[:kcut, :lcut] = 1.0
        return mask

    @cached_property
    def mode_integrals_x(self) -> np.ndarray:
        """integral_0^lx sin(k pi x / lx) dx = lx (1 - (-1)^k) / (k pi)."""
        k = np.arange(1, self.nx + 1)
        return self.lx * (1.0 - (-1.0) ** k) / (k * np.pi)

    @cached_property
    def mode_integrals_y(self) -> np.ndarray:
        l = np.arange(1, self.ny + 1)
        return self.ly * (1.0 - (-1.0) ** l) / (l * np.pi)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpectralField:
    """Immutable sine-coefficient representation of a Dirichlet field."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (self.grid.nx, self.grid.ny):
            raise GridMismatchError(
                f"coefficient shape {c.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.ny})"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite spectral coefficients")
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass(frozen=True)
class PhysicalField:
    """Collocation-point values on the interior grid (for nonlinear products)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.nx, self.grid.ny):
            raise GridMismatchError(
                f"value shape {v.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.ny})"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite collocation values")
        object.__setattr__(self, "values", v)


def _require_same_grid(f, g) -> Grid:
    if f.grid != g.grid:
        raise GridMismatchError(f"grids differ: {f.grid} vs {g.grid}")
    return f.grid


def zero_field(grid: Grid) -> SpectralField:
    return SpectralField(grid, np.zeros((grid.nx, grid.ny)))


def basis_mode(grid: Grid, k: int, l: int, amplitude: float = 1.0) -> SpectralField:
    """Single sine mode sin(k pi x/lx) sin(l pi y/ly) scaled by amplitude."""
    if not (1 <= k <= grid.nx and 1 <= l <= grid.ny):
        raise ValueError(f"mode ({k}, {l}) outside 1..{grid.nx} x 1..{grid.ny}")
    c = np.zeros((grid.nx, grid.ny))
    c[k - 1, l - 1] = amplitude
    return SpectralField(grid, c)


def random_field(
    grid: Grid,
    seed: int,
    decay: float = 1.0,
    norm_s: float | None = None,
    norm_value: float = 1.0,
) -> SpectralField:
    """Seeded Gaussian coefficients damped by mu^(-decay).

    If norm_s is given the field is rescaled so that its Sobolev norm of
    order norm_s equals norm_value.
    """
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((grid.nx, grid.ny)) * grid.mu ** (-decay)
    if norm_s is not None:
        cur = coeff_norm(grid, c, norm_s)
        if cur == 0.0:
            raise ValueError("cannot normalize a zero field")
        c *= norm_value / cur
    return SpectralField(grid, c)


# ---------------------------------------------------------------------------
# transforms

def physical_values(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate the sine series at the collocation points (raw arrays)."""
    return sp_fft.dstn(coeffs, type=1) / 4.0


def spectral_coeffs(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Sine coefficients of collocation values (raw arrays)."""
    return sp_fft.dstn(values, type=1) / ((grid.nx + 1) * (grid.ny + 1))


def to_physical(f: SpectralField) -> PhysicalField:
    return PhysicalField(f.grid, physical_values(f.grid, f.coeffs))


def to_spectral(p: PhysicalField) -> SpectralField:
    return SpectralField(p.grid, spectral_coeffs(p.grid, p.values))


def _cosine_eval_axis0(arr: np.ndarray) -> np.ndarray:
    """Evaluate sum_k a_k cos(pi k i/(n+1)) at interior i via a padded DCT-I."""
    n = arr.shape[0]
    padded = np.zeros((n + 2,) + arr.shape[1:])
    padded[1:-1] = arr
    return sp_fft.dct(padded, type=1, axis=0)[1:-1] / 2.0


def _sine_eval_axis1(arr: np.ndarray) -> np.ndarray:
    return sp_fft.dst(arr, type=1, axis=1) / 2.0


def ddx_values(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """x-derivative of the truncated series at collocation points."""
    scaled = coeffs * grid.kx[:, None]
    return _sine_eval_axis1(_cosine_eval_axis0(scaled))


def _sine_eval_axis0(arr: np.ndarray) -> np.ndarray:
    return sp_fft.dst(arr, type=1, axis=0) / 2.0


def _cosine_eval_axis1(arr: np.ndarray) -> np.ndarray:
    n = arr.shape[1]
    padded = np.zeros(arr.shape[:1] + (n + 2,))
    padded[:, 1:-1] = arr
    return sp_fft.dct(padded, type=1, axis=1)[:, 1:-1] / 2.0


def ddy_values(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    scaled = coeffs * grid.ky[None, :]
    return _sine_eval_axis0(_cosine_eval_axis1(scaled))


def ddx(f: SpectralField) -> PhysicalField:
    """Exact x-derivative of the truncated sine series, in physical space."""
    return PhysicalField(f.grid, ddx_values(f.grid, f.coeffs))


def ddy(f: SpectralField) -> PhysicalField:
    return PhysicalField(f.grid, ddy_values(f.grid, f.coeffs))


# ---------------------------------------------------------------------------
# differential operators

def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.mu * f.coeffs)


def inverse_laplacian(f: SpectralField) -> SpectralField:
    """Solve laplacian(u) = f with u = 0 on the boundary (diagonal division)."""
    return SpectralField(f.grid, -f.coeffs / f.grid.mu)


def jacobian_coeffs(grid: Grid, fc: np.ndarray, gc: np.ndarray) -> np.ndarray:
    """Dealiased pseudo-spectral J(f, g) = f_x g_y - f_y g_x on raw arrays."""
    mask = grid.dealias_mask
    fc = fc * mask
    gc = gc * mask
    fx = ddx_values(grid, fc)
    fy = ddy_values(grid, fc)
    gx = ddx_values(grid, gc)
    gy = ddy_values(grid, gc)
    return spectral_coeffs(grid, fx * gy - fy * gx) * mask


def jacobian(f: SpectralField, g: SpectralField) -> SpectralField:
    """Advection Jacobian with 2/3-rule dealiasing; antisymmetric in (f, g)."""
    grid = _require_same_grid(f, g)
    return SpectralField(grid, jacobian_coeffs(grid, f.coeffs, g.coeffs))


# ---------------------------------------------------------------------------
# norms and integrals

def coeff_norm(grid: Grid, coeffs: np.ndarray, s: float) -> float:
    """Fractional Sobolev norm of raw coefficients (order s in [-1, 1])."""
    if not -1.0 <= s <= 1.0:
        raise ValueError(f"Sobolev order s={s} outside supported [-1, 1]")
    if s == 0.0:
        total = np.sum(coeffs * coeffs)
    else:
        total = np.sum(grid.mu ** (2.0 * s) * coeffs * coeffs)
    return float(np.sqrt(total * grid.area / 4.0))


def sobolev_norm(f: SpectralField, s: float) -> float:
    """|| Lambda^s f || with Lambda the positive Dirichlet Laplacian.

    s = 0 is the L2 norm, s = 1/2 the gradient (H1) norm and s = 1 the
    Laplacian norm used as the domain-of-A proxy.
    """
    return coeff_norm(f.grid, f.coeffs, s)


def inner_product(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product, exact in coefficient space."""
    grid = _require_same_grid(f, g)
    return float(np.sum(f.coeffs * g.coeffs) * grid.area / 4.0)


def domain_integral(f: SpectralField) -> float:
    """integral_D f dx dy, exact for the sine series."""
    g = f.grid
    return float(np.sum(f.coeffs * np.outer(g.mode_integrals_x, g.mode_integrals_y)))
