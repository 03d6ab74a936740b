"""Barotropic quasi-geostrophic vorticity dynamics and stiff time stepping.

The evolved equation, in fast time tau and with a scale factor eps in
(0, 1], is

    d(omega)/dtau = eps * ( -A omega - J(inv_lap(omega), omega) + f(tau) )

with the linear operator

    A w = nu * Lambda w + r * w + beta * d/dx inv_lap(w),

Lambda = -laplacian.  The diagonal part nu*Lambda + r*I is handled
implicitly (Crank-Nicolson) or exactly (exponential phi functions); the
bounded beta term and the Jacobian are explicit.  Both schemes are second
order and preserve equilibria of the semi-discrete system exactly, which
matters for the bounded-solution tracking experiments.
"""

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    Grid,
    GridMismatchError,
    SpectralField,
    coeff_norm,
    ddx_values,
    inner_product,
    inverse_laplacian,
    jacobian_coeffs,
    sobolev_norm,
    spectral_coeffs,
)

SCHEMES = ("imex-cn-ab2", "etd-rk2")


class BlowUpError(RuntimeError):
    """Non-finite state encountered; carries the last valid time."""

    def __init__(self, last_valid_time: float):
        super().__init__(f"solution blew up after tau = {last_valid_time!r}")
        self.last_valid_time = last_valid_time


class StepResolutionError(ValueError):
    """Time step too large to resolve the fastest forcing oscillation."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants nu (viscosity), r (Ekman), beta (Coriolis gradient)."""

    nu: float
    r: float
    beta: float
    grid: Grid

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def dissipative(self) -> bool:
        """Recomputed dissipativity flag 4*nu*r > beta^2 |D|^2 / pi^2."""
        return spectral_gap_condition(self)[0]


def spectral_gap_condition(params: ModelParams) -> tuple[bool, float]:
    """Check 4*nu*r > beta^2 |D|^2/pi^2 and return the damping margin.

    The margin lambda1 = nu - beta^2 |D|^2 / (4 r pi^2) bounds
    <A w, w> >= lambda1 * ||grad w||^2 from below when the condition holds.
    """
    area = params.grid.area
    lam1 = params.nu - params.beta**2 * area**2 / (4.0 * params.r * np.pi**2)
    ok = 4.0 * params.nu * params.r > params.beta**2 * area**2 / np.pi**2
    return ok, float(lam1)


def decay_rate_bound(params: ModelParams) -> float:
    """Lower bound lambda1 * mu_min on the decay rate of exp(-A t) in L2."""
    ok, lam1 = spectral_gap_condition(params)
    if not ok:
        raise ValueError(
            "spectral gap condition 4*nu*r > beta^2*|D|^2/pi^2 fails; "
            "no decay-rate bound available"
        )
    return lam1 * params.grid.mu_min


def beta_term_coeffs(params: ModelParams, coeffs: np.ndarray) -> np.ndarray:
    """Sine-basis projection of d/dx inv_lap(w) (collocation projection)."""
    grid = params.grid
    psi = -coeffs / grid.mu
    return spectral_coeffs(grid, ddx_values(grid, psi))


def linear_coeffs(params: ModelParams, coeffs: np.ndarray) -> np.ndarray:
    grid = params.grid
    return (
        params.nu * grid.mu * coeffs
        + params.r * coeffs
        + params.beta * beta_term_coeffs(params, coeffs)
    )


def apply_linear(params: ModelParams, w: SpectralField) -> SpectralField:
    """The operator A w = nu*Lambda w + r w + beta d/dx inv_lap(w)."""
    if w.grid != params.grid:
        raise GridMismatchError("field grid does not match model grid")
    return SpectralField(params.grid, linear_coeffs(params, w.coeffs))


def tendency(params: ModelParams, w: SpectralField, f: SpectralField) -> SpectralField:
    """Right-hand side -A w - J(inv_lap(w), w) + f."""
    if w.grid != params.grid or f.grid != params.grid:
        raise GridMismatchError("field grid does not match model grid")
    grid = params.grid
    jac = jacobian_coeffs(grid, -w.coeffs / grid.mu, w.coeffs)
    return SpectralField(grid, -linear_coeffs(params, w.coeffs) - jac + f.coeffs)


@dataclass(frozen=True)
class StepperConfig:
    """Time step (in tau units), scheme name, and oscillation resolution."""

    dt: float
    scheme: str = "imex-cn-ab2"
    osc_resolution: int = 32

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.osc_resolution < 8:
            raise ValueError("osc_resolution must be at least 8")


@dataclass
class Trajectory:
    """Sampled states omega(tau) of one integration."""

    times: np.ndarray
    states: list[SpectralField]
    params: ModelParams

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states length mismatch")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        grid = self.params.grid
        for s in self.states:
            if s.grid != grid:
                raise GridMismatchError("trajectory states on mixed grids")
        # SpectralField construction already rejects non-finite states.

    def __len__(self) -> int:
        return len(self.states)

    def norm_table(self) -> list[tuple[float, float, float, float, float]]:
        """Rows (time, l2, h1, d_a, energy) with energy = 0.5*||grad psi||^2."""
        rows = []
        for t, s in zip(self.times, self.states):
            psi = inverse_laplacian(s)
            rows.append(
                (
                    float(t),
                    sobolev_norm(s, 0.0),
                    sobolev_norm(s, 0.5),
                    sobolev_norm(s, 1.0),
                    0.5 * sobolev_norm(psi, 0.5) ** 2,
                )
            )
        return rows


def _phi1(z: np.ndarray) -> np.ndarray:
    """(1 - exp(-z))/z, stable for small z >= 0."""
    out = np.empty_like(z)
    small = z < 1e-8
    zs = z[small]
    out[small] = 1.0 - zs / 2.0 + zs * zs / 6.0
    zb = z[~small]
    out[~small] = -np.expm1(-zb) / zb
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    """(exp(-z) - 1 + z)/z^2, stable for small z >= 0."""
    out = np.empty_like(z)
    small = z < 1e-4
    zs = z[small]
    out[small] = 0.5 - zs / 6.0 + zs * zs / 24.0
    zb = z[~small]
    out[~small] = (np.expm1(-zb) + zb) / (zb * zb)
    return out


class Stepper:
    """Single-trajectory stepper for dw/dtau = -diag*w + N(w, tau).

    diag is the eps-scaled dissipative part eps*(nu*mu + r); N is any
    callable on raw coefficient arrays.  State is advanced in place; the
    caller owns sampling and wrapping into SpectralField.
    """

    def __init__(self, params: ModelParams, cfg: StepperConfig, eps: float,
                 nonlinear, t0: float, w0_coeffs: np.ndarray, dt: float):
        self.params = params
        self.scheme = cfg.scheme
        self.nonlinear = nonlinear
        self.tau = float(t0)
        self.dt = float(dt)
        self.c = np.array(w0_coeffs, dtype=float)
        z = eps * (params.nu * params.grid.mu + params.r) * self.dt
        if cfg.scheme == "imex-cn-ab2":
            self._cn_num = 1.0 - z / 2.0
            self._cn_den_inv = 1.0 / (1.0 + z / 2.0)
            self._n_prev = None
        else:
            self._exp = np.exp(-z)
            self._p1 = _phi1(z)
            self._p2 = _phi2(z)

    def step(self) -> None:
        # Overflow on the way to blow-up is expected; the finiteness check
        # below converts it into a clean error.
        with np.errstate(over="ignore", invalid="ignore"):
            self._step_inner()

    def _step_inner(self) -> None:
        c, dt, tau = self.c, self.dt, self.tau
        if self.scheme == "imex-cn-ab2":
            n_cur = self.nonlinear(c, tau)
            if self._n_prev is None:
                # Trapezoidal predictor-corrector startup, consistent with CN.
                pred = self._cn_den_inv * (self._cn_num * c + dt * n_cur)
                n_pred = self.nonlinear(pred, tau + dt)
                new = self._cn_den_inv * (
                    self._cn_num * c + 0.5 * dt * (n_cur + n_pred)
                )
            else:
                new = self._cn_den_inv * (
                    self._cn_num * c + dt * (1.5 * n_cur - 0.5 * self._n_prev)
                )
            self._n_prev = n_cur
        else:
            n0 = self.nonlinear(c, tau)
            a = self._exp * c + dt * self._p1 * n0
            n1 = self.nonlinear(a, tau + dt)
            new = a + dt * self._p2 * (n1 - n0)
        if not np.all(np.isfinite(new)):
            raise BlowUpError(last_valid_time=tau)
        self.c = new
        self.tau = tau + dt


def make_nonlinear(params: ModelParams, forcing, eps: float):
    """Explicit part eps*(-beta-term - Jacobian + f(tau)) on raw arrays.

    forcing is a callable tau -> SpectralField (or raw coefficient array).
    """
    grid = params.grid
    mu = grid.mu
    beta = params.beta

    def nonlinear(c: np.ndarray, tau: float) -> np.ndarray:
        f = forcing(tau)
        fc = getattr(f, "coeffs", f)
        out = -jacobian_coeffs(grid, -c / mu, c) + fc
        if beta:
            out -= beta * beta_term_coeffs(params, c)
        return eps * out

    return nonlinear


def plan_steps(t0: float, t1: float, dt: float) -> tuple[int, float]:
    """Number of steps and adjusted dt landing exactly on t1."""
    span = t1 - t0
    if span <= 0:
        raise ValueError("t1 must exceed t0")
    n = max(1, math.ceil(span / dt - 1e-9))
    return n, span / n


def check_resolution(dt: float, fastest_period: float | None, osc_resolution: int):
    if fastest_period is None:
        return
    limit = fastest_period / osc_resolution
    if dt > limit * (1.0 + 1e-12):
        raise StepResolutionError(
            f"dt = {dt:g} exceeds fastest forcing period / osc_resolution "
            f"= {limit:g}; under-resolved oscillations would fake averaging"
        )


def integrate(
    params: ModelParams,
    w0: SpectralField,
    forcing,
    t0: float,
    t1: float,
    cfg: StepperConfig,
    sample_every: int = 1,
    eps: float = 1.0,
    fastest_period: float | None = None,
) -> Trajectory:
    """Integrate the vorticity equation over [t0, t1] in fast time.

    eps scales the whole right-hand side (the standard slow-fast form);
    eps = 1 recovers the unscaled equation in original time.  The
    requested cfg.dt is shrunk to divide the interval exactly.  Samples
    are taken every sample_every steps, always including both endpoints.
    """
    if w0.grid != params.grid:
        raise GridMismatchError("initial state grid does not match model grid")
    if sample_every < 1:
        raise ValueError("sample_every must be a positive integer")
    n, dt = plan_steps(t0, t1, cfg.dt)
    check_resolution(dt, fastest_period, cfg.osc_resolution)
    stepper = Stepper(params, cfg, eps, make_nonlinear(params, forcing, eps),
                      t0, w0.coeffs, dt)
    times = [t0]
    states = [w0]
    for i in range(1, n + 1):
        stepper.step()
        if i % sample_every == 0 or i == n:
            times.append(t0 + i * dt)
            states.append(SpectralField(params.grid, stepper.c))
    return Trajectory(np.array(times), states, params)


def energy_production(params: ModelParams, w: SpectralField, f: SpectralField) -> float:
    """d/dtau of 0.5*||w||^2 along the flow: <tendency, w> (Jacobian is neutral)."""
    return inner_product(tendency(params, w, f), w)


def dissipation_bound(params: ModelParams, w0: SpectralField, f0_norm: float) -> float:
    """A priori sup bound max(||w0||, ||f0|| / (lambda1*mu_min)) on ||omega(t)||."""
    rate = decay_rate_bound(params)
    return max(coeff_norm(params.grid, w0.coeffs, 0.0), f0_norm / rate)
