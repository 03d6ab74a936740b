"""Stationary averaged states, linearization spectrum, and the long-time
experiments built on them.

The stationary averaged state solves A w + J(inv_lap(w), w) = f0 by an
inexact Newton iteration with matrix-free GMRES linear solves.  The
linearization

    L e = A e + J(inv_lap(e), w0) + J(inv_lap(w0), e)

is the exact derivative of the residual map (verified against finite
differences in the tests); its dense restriction to a low-mode block
yields the discrete spectrum.  The convention here is that the dynamics
of a disturbance h obey dh/dtau = -eps * L h + ..., so stability means
every eigenvalue of L has positive real part and n_unstable counts
eigenvalues with negative real part.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.spatial.distance import cdist

from . import forcing as forcing_mod
from .averaging import _map_ordered
from .model import (
    ModelParams,
    Stepper,
    StepperConfig,
    Trajectory,
    check_resolution,
    decay_rate_bound,
    linear_coeffs,
    make_nonlinear,
    plan_steps,
    spectral_gap_condition,
    tendency,
)
from .spectral import (
    SpectralField,
    coeff_norm,
    inner_product,
    jacobian_coeffs,
    random_field,
    sobolev_norm,
)

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    """Stationary solve did not converge (iteration cap or linear stagnation)."""


class UnstableStateError(RuntimeError):
    """Operation requires an asymptotically stable state (n_unstable = 0)."""


class NonDecayError(RuntimeError):
    """Perturbation distance grew instead of decaying."""


# ---------------------------------------------------------------------------
# stationary states

@dataclass(frozen=True)
class StationaryState:
    omega0: SpectralField
    residual_norm: float
    newton_iters: int


def _residual_coeffs(params: ModelParams, c: np.ndarray, f0c: np.ndarray) -> np.ndarray:
    grid = params.grid
    return linear_coeffs(params, c) + jacobian_coeffs(grid, -c / grid.mu, c) - f0c


def linearization_matvec(params: ModelParams, w0_coeffs: np.ndarray):
    """Matrix-free application of L at the state w0 (raw arrays)."""
    grid = params.grid
    psi0 = -w0_coeffs / grid.mu

    def matvec(e: np.ndarray) -> np.ndarray:
        return (
            linear_coeffs(params, e)
            + jacobian_coeffs(grid, -e / grid.mu, w0_coeffs)
            + jacobian_coeffs(grid, psi0, e)
        )

    return matvec


def solve_stationary(
    params: ModelParams,
    f0: SpectralField,
    tol: float = 1e-11,
    max_iters: int = 20,
    initial: SpectralField | None = None,
) -> StationaryState:
    """Newton iteration for the stationary averaged state.

    Linear solves are matrix-free restarted GMRES at relative tolerance
    1e-3 (inexact Newton), preconditioned by the diagonal dissipation.
    The reported residual is recomputed through the tendency path,
    independently of the Newton loop's internal residual.
    """
    ok, _ = spectral_gap_condition(params)
    if not ok:
        raise ValueError(
            "spectral gap condition 4*nu*r > beta^2*|D|^2/pi^2 fails; "
            "stationary solve not attempted"
        )
    grid = params.grid
    f0c = f0.coeffs
    c = np.zeros((grid.nx, grid.ny)) if initial is None else np.array(initial.coeffs)
    shape = c.shape
    size = c.size
    diag = (params.nu * grid.mu + params.r).ravel()
    precond = LinearOperator((size, size), matvec=lambda v: v / diag)
    iters = 0
    for iters in range(max_iters + 1):
        res_c = _residual_coeffs(params, c, f0c)
        res = coeff_norm(grid, res_c, 0.0)
        log.debug("newton iter %d: residual %.3e", iters, res)
        if res < tol:
            break
        if iters == max_iters:
            raise NewtonError(
                f"no convergence in {max_iters} iterations (residual {res:.3e})"
            )
        mv = linearization_matvec(params, c)
        op = LinearOperator(
            (size, size), matvec=lambda v: mv(v.reshape(shape)).ravel()
        )
        delta, info = gmres(op, -res_c.ravel(), rtol=1e-3, atol=0.0,
                            restart=30, maxiter=200, M=precond)
        if info != 0:
            raise NewtonError(f"linear solve stagnated (gmres info {info})")
        c = c + delta.reshape(shape)
    omega0 = SpectralField(grid, c)
    # Independent residual via the evolution right-hand side.
    check = sobolev_norm(tendency(params, omega0, f0), 0.0)
    return StationaryState(omega0, check, iters)


# ---------------------------------------------------------------------------
# spectrum of the linearization

@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple[complex, ...]
    gap_a: float
    n_unstable: int
    truncation: int


def linearization_matrix(
    params: ModelParams, omega0: SpectralField, truncation: int
) -> np.ndarray:
    """Dense restriction of L to the sine modes k, l = 1..truncation.

    Column order is k outer, l inner; each column is L applied to a unit
    basis mode, restricted to the same block.
    """
    grid = params.grid
    if truncation < 1:
        raise ValueError("truncation must be positive")
    if truncation > grid.max_dealiased_mode:
        raise ValueError(
            f"truncation {truncation} exceeds the dealiased band "
            f"(max {grid.max_dealiased_mode} for this grid)"
        )
    mv = linearization_matvec(params, omega0.coeffs)
    t = truncation
    mat = np.empty((t * t, t * t))
    e = np.zeros((grid.nx, grid.ny))
    for k in range(t):
        for l in range(t):
            e[k, l] = 1.0
            mat[:, k * t + l] = mv(e)[:t, :t].ravel()
            e[k, l] = 0.0
    return mat


def spectrum(matrix: np.ndarray) -> SpectrumReport:
    """Full nonsymmetric eigendecomposition with dichotomy gap and mode count."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("spectrum needs a square matrix")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    eig = np.linalg.eigvals(matrix)
    order = np.lexsort((eig.imag, eig.real))
    eig = eig[order]
    re = eig.real
    n_unstable = int(np.sum(re < 0.0))
    if np.any(re == 0.0):
        gap = 0.0
    else:
        neg = re[re < 0.0]
        pos = re[re > 0.0]
        gap = min(
            float(pos.min()) if pos.size else math.inf,
            float(-neg.max()) if neg.size else math.inf,
        )
    return SpectrumReport(
        tuple(complex(v) for v in eig),
        float(gap),
        n_unstable,
        int(round(math.sqrt(matrix.shape[0]))),
    )


def coercivity_shift(params: ModelParams, f0: SpectralField) -> float:
    """Shift lambda0 beyond which the shifted linearization is coercive.

    Equals pi * ||f0||^2 / (2 * lambda1^3 * |D|), growing quadratically
    with the forcing and vanishing for zero mean forcing.
    """
    ok, lam1 = spectral_gap_condition(params)
    if not ok or lam1 <= 0:
        raise ValueError("coercivity shift needs a positive damping margin")
    norm0 = sobolev_norm(f0, 0.0)
    return float(np.pi * norm0**2 / (2.0 * lam1**3 * params.grid.area))


def forcing_smallness(params: ModelParams, f0: SpectralField) -> bool:
    """Smallness test guaranteeing exponential decay to the bounded solution:
    the damping condition plus ||f0|| < sqrt(2|D|/pi) * lambda1^2."""
    ok, lam1 = spectral_gap_condition(params)
    if not ok:
        return False
    threshold = math.sqrt(2.0 * params.grid.area / np.pi) * lam1**2
    return sobolev_norm(f0, 0.0) < threshold


# ---------------------------------------------------------------------------
# bounded-solution tracking and decay experiments

def _default_cfg(spec) -> StepperConfig:
    period = forcing_mod.fastest_period(spec)
    dt = 0.02 if period is None else min(0.02, period / 64.0)
    return StepperConfig(dt=dt)


def _advance(params, cfg, eps, nonlinear, t0, c, t1) -> np.ndarray:
    n, dt = plan_steps(t0, t1, cfg.dt)
    stepper = Stepper(params, cfg, eps, nonlinear, t0, c, dt)
    for _ in range(n):
        stepper.step()
    return stepper.c


@dataclass(frozen=True)
class BoundedTrackResult:
    trajectory: Trajectory
    sup_half_distance: float
    stationary: StationaryState
    spectrum: SpectrumReport


def _stable_state(params, spec, truncation, newton_tol):
    st = solve_stationary(params, forcing_mod.average(spec), tol=newton_tol)
    mat = linearization_matrix(params, st.omega0, truncation)
    rep = spectrum(mat)
    if rep.n_unstable > 0:
        raise UnstableStateError(
            f"{rep.n_unstable} unstable modes at the stationary state; "
            "tracking the bounded solution would need the stable-manifold "
            "construction, which is out of scope"
        )
    if rep.gap_a <= 0.0:
        raise UnstableStateError("spectral dichotomy gap is zero")
    return st, rep


def track_bounded_solution(
    params: ModelParams,
    spec: forcing_mod.ForcingSpec,
    eps: float,
    horizon: float,
    cfg: StepperConfig | None = None,
    truncation: int = 16,
    newton_tol: float = 1e-12,
    efolds: float = 10.0,
    sample_every: int = 1,
) -> BoundedTrackResult:
    """Forward-attracting approximation of the bounded response orbit.

    Requires an asymptotically stable stationary state.  The full system
    is spun up from the stationary state for efolds/(eps*gap) time units
    before tau = 0, so the recorded trajectory over [0, horizon] sits on
    the attracting bounded solution up to exponentially small error.
    """
    st, rep = _stable_state(params, spec, truncation, newton_tol)
    cfg = cfg or _default_cfg(spec)
    check_resolution(cfg.dt, forcing_mod.fastest_period(spec), cfg.osc_resolution)
    nonlinear = make_nonlinear(params, forcing_mod.coefficient_function(spec), eps)
    spin = efolds / (eps * rep.gap_a)
    c = _advance(params, cfg, eps, nonlinear, -spin, st.omega0.coeffs, 0.0)

    grid = params.grid
    n, dt = plan_steps(0.0, horizon, cfg.dt)
    stepper = Stepper(params, cfg, eps, nonlinear, 0.0, c, dt)
    times = [0.0]
    states = [SpectralField(grid, c)]
    sup = coeff_norm(grid, c - st.omega0.coeffs, 0.5)
    for i in range(1, n + 1):
        stepper.step()
        sup = max(sup, coeff_norm(grid, stepper.c - st.omega0.coeffs, 0.5))
        if i % sample_every == 0 or i == n:
            times.append(i * dt)
            states.append(SpectralField(grid, stepper.c))
    traj = Trajectory(np.array(times), states, params)
    return BoundedTrackResult(traj, float(sup), st, rep)


@dataclass(frozen=True)
class DecayReport:
    times: tuple[float, ...]
    distances: tuple[float, ...]
    log_distance: tuple[float, ...]
    fitted_rate: float
    reference_rate: float


def decay_experiment(
    params: ModelParams,
    spec: forcing_mod.ForcingSpec,
    eps: float,
    perturbation: SpectralField,
    cfg: StepperConfig | None = None,
    truncation: int = 16,
    horizon: float | None = None,
    newton_tol: float = 1e-12,
    efolds: float = 10.0,
    sample_every: int = 1,
    floor: float = 1e-13,
) -> DecayReport:
    """Exponential-decay fit of || omega - omega* ||_{1/2} after a kick.

    The perturbed and reference trajectories are co-integrated with
    identical steps; the log-distance is fitted by least squares over the
    samples above the floor (skipping the first fast forcing period, where
    the oscillating terms may transiently exchange energy).
    """
    st, rep = _stable_state(params, spec, truncation, newton_tol)
    pert_half = sobolev_norm(perturbation, 0.5)
    limit = 0.1 * sobolev_norm(st.omega0, 0.5) + 1e-3
    if pert_half > limit:
        raise ValueError(
            f"perturbation size {pert_half:g} exceeds the small-kick limit {limit:g}"
        )
    cfg = cfg or _default_cfg(spec)
    check_resolution(cfg.dt, forcing_mod.fastest_period(spec), cfg.osc_resolution)
    nonlinear = make_nonlinear(params, forcing_mod.coefficient_function(spec), eps)
    spin = efolds / (eps * rep.gap_a)
    star0 = _advance(params, cfg, eps, nonlinear, -spin, st.omega0.coeffs, 0.0)
    if horizon is None:
        horizon = 8.0 / (eps * rep.gap_a)

    grid = params.grid
    n, dt = plan_steps(0.0, horizon, cfg.dt)
    ref = Stepper(params, cfg, eps, nonlinear, 0.0, star0, dt)
    kicked = Stepper(params, cfg, eps, nonlinear, 0.0,
                     star0 + perturbation.coeffs, dt)
    d0 = coeff_norm(grid, kicked.c - ref.c, 0.5)
    times = [0.0]
    dists = [d0]
    for i in range(1, n + 1):
        ref.step()
        kicked.step()
        if i % sample_every == 0 or i == n:
            times.append(i * dt)
            dists.append(coeff_norm(grid, kicked.c - ref.c, 0.5))
    dists_arr = np.array(dists)
    if d0 > 0 and float(dists_arr.max()) > 10.0 * d0:
        raise NonDecayError(
            f"distance grew from {d0:g} to {dists_arr.max():g}; unstable "
            "state or too-large perturbation"
        )

    times_arr = np.array(times)
    skip = forcing_mod.fastest_period(spec) or 0.0
    fit_mask = (dists_arr > floor) & (times_arr >= skip)
    if fit_mask.sum() >= 2:
        t_fit = times_arr[fit_mask]
        logd = np.log(dists_arr[fit_mask])
        slope = np.polyfit(t_fit, logd, 1)[0]
        fitted = float(-slope)
    else:
        fitted = 0.0
    with np.errstate(divide="ignore"):
        logs = np.where(dists_arr > 0, np.log(np.maximum(dists_arr, 1e-300)), -np.inf)
    return DecayReport(
        tuple(float(t) for t in times),
        tuple(float(d) for d in dists),
        tuple(float(v) for v in logs),
        fitted,
        float(eps * rep.gap_a),
    )


# ---------------------------------------------------------------------------
# harmonic response content

def response_frequencies(
    trajectory: Trajectory,
    probe: SpectralField,
    freqs,
    min_periods: float = 50.0,
) -> list[tuple[float, float]]:
    """Harmonic magnitudes |(2/T) integral s(t) exp(-i lambda t) dt|.

    s(t) is the projection of the trajectory on the probe field; the
    quadrature is trapezoidal on the trajectory samples.  The trajectory
    must span at least min_periods periods of the slowest positive
    frequency probed.
    """
    freqs = [float(f) for f in freqs]
    t = np.asarray(trajectory.times, dtype=float)
    span = t[-1] - t[0]
    positive = [f for f in freqs if f > 0]
    if positive:
        needed = min_periods * 2.0 * np.pi / min(positive)
        if span < needed * (1.0 - 1e-9):
            raise ValueError(
                f"trajectory too short: span {span:g} < {needed:g} "
                f"({min_periods:g} periods of the slowest probed frequency)"
            )
    s = np.array([inner_product(state, probe) for state in trajectory.states])
    dt_w = np.diff(t)
    out = []
    for lam in freqs:
        integrand = s * np.exp(-1j * lam * t)
        integral = np.sum(0.5 * (integrand[1:] + integrand[:-1]) * dt_w)
        out.append((lam, float(np.abs(2.0 * integral / span))))
    return out


# ---------------------------------------------------------------------------
# attractor semi-distance

@dataclass(frozen=True)
class AttractorRecord:
    eta: float
    dist: float
    n_samples: int


def _half_norm_weights(grid) -> np.ndarray:
    return (np.sqrt(grid.mu) * np.sqrt(grid.area) / 2.0).ravel()


def attractor_distance(
    params: ModelParams,
    spec: forcing_mod.ForcingSpec,
    eta_list,
    n_initial: int,
    sample_window: tuple[float, int],
    seed: int = 1234,
    cfg: StepperConfig | None = None,
    efolds: float = 10.0,
    jobs: int = 1,
) -> list[AttractorRecord]:
    """One-sided Hausdorff distance from the full to the averaged samples.

    For each eta the full system runs from n_initial seeded random states
    (coefficient decay mu^-2, gradient norm 0.5), past a transient of
    efolds dissipation e-foldings; the averaged system runs identically
    (same states, same steps).  The distance is measured in the gradient
    norm between the two post-transient sample clouds.
    """
    ok, _ = spectral_gap_condition(params)
    if not ok:
        raise ValueError(
            "spectral gap condition 4*nu*r > beta^2*|D|^2/pi^2 fails for the "
            "attractor experiment"
        )
    eta_list = [float(e) for e in eta_list]
    if any(e < 1 for e in eta_list):
        raise ValueError("eta values must be at least 1")
    span, n_samples = sample_window
    if span <= 0 or n_samples < 1:
        raise ValueError("sample_window must be (positive span, count >= 1)")
    cfg = cfg or _default_cfg(spec)
    check_resolution(cfg.dt, forcing_mod.fastest_period(spec), cfg.osc_resolution)
    grid = params.grid
    rate = decay_rate_bound(params)
    initials = [
        random_field(grid, seed + m, decay=2.0, norm_s=0.5, norm_value=0.5).coeffs
        for m in range(n_initial)
    ]
    weights = _half_norm_weights(grid)
    f_full = forcing_mod.coefficient_function(spec)
    f0 = forcing_mod.average(spec).coeffs

    def member_samples(forcing_fn, eps, c0) -> list[np.ndarray]:
        nonlinear = make_nonlinear(params, forcing_fn, eps)
        transient = efolds / (eps * rate)
        c = _advance(params, cfg, eps, nonlinear, 0.0, c0, transient)
        samples = []
        tau = transient
        for target in np.linspace(transient, transient + span, n_samples):
            if target > tau:
                c = _advance(params, cfg, eps, nonlinear, tau, c, float(target))
                tau = float(target)
            samples.append(c * 1.0)
        return samples

    records = []
    for eta in eta_list:
        eps = 1.0 / eta

        def one_member(c0):
            return (
                member_samples(f_full, eps, c0),
                member_samples(lambda tau: f0, eps, c0),
            )

        results = _map_ordered(one_member, initials, jobs)
        full_cloud = np.array(
            [s.ravel() * weights for pair in results for s in pair[0]]
        )
        avg_cloud = np.array(
            [s.ravel() * weights for pair in results for s in pair[1]]
        )
        pairwise = cdist(full_cloud, avg_cloud)
        dist = float(pairwise.min(axis=1).max())
        log.info("attractor eta=%g: dist=%.3e", eta, dist)
        records.append(AttractorRecord(eta, dist, len(full_cloud)))
    return records
