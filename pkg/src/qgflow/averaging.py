"""Finite-interval comparison of full vs averaged flows and the bounded
oscillation corrector.

The comparison integrates, for each eps in a decreasing list, the
oscillating and the averaged system from the same initial state over
tau in [0, T/eps] with identical steps, and records sup norms of the
difference.  The corrector v solves the linear equation

    dv/dtau = -eps * A v + f0 - f(tau)

whose unique bounded-on-the-line solution is approximated by integrating
from v = 0 after a spin-up long enough to forget the initial condition.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import forcing as forcing_mod
from .model import (
    ModelParams,
    Stepper,
    StepperConfig,
    beta_term_coeffs,
    check_resolution,
    decay_rate_bound,
    dissipation_bound,
    integrate,
    make_nonlinear,
    plan_steps,
    spectral_gap_condition,
)
from .spectral import SpectralField, coeff_norm

log = logging.getLogger(__name__)


class BoundednessError(RuntimeError):
    """Averaged pre-roll left the a priori dissipation ball."""


@dataclass(frozen=True)
class ComparisonConfig:
    params: ModelParams
    spec: forcing_mod.ForcingSpec
    T: float
    epsilons: tuple[float, ...]
    w0: SpectralField
    stepper: StepperConfig

    def __post_init__(self):
        object.__setattr__(self, "epsilons", tuple(self.epsilons))
        if self.T <= 0:
            raise ValueError("T must be positive")
        eps = self.epsilons
        if not eps or any(e <= 0 or e > 1 for e in eps):
            raise ValueError("epsilons must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if self.w0.grid != self.params.grid or self.spec.grid != self.params.grid:
            raise ValueError("comparison fields on mixed grids")


@dataclass(frozen=True)
class ComparisonRecord:
    epsilon: float
    sup_half: float
    sup_da: float
    end_half: float


@dataclass(frozen=True)
class ComparisonReport:
    records: tuple[ComparisonRecord, ...]

    def sup_half_values(self) -> list[float]:
        return [r.sup_half for r in self.records]

    def rows(self):
        return [(r.epsilon, r.sup_half, r.sup_da, r.end_half) for r in self.records]


def _preroll_averaged(cfg: ComparisonConfig) -> None:
    """Integrate the averaged system once and check the dissipation bound."""
    params, spec = cfg.params, cfg.spec
    f0 = forcing_mod.average(spec)
    eps = cfg.epsilons[0]
    bound = dissipation_bound(params, cfg.w0, coeff_norm(params.grid, f0.coeffs, 0.0))
    traj = integrate(params, cfg.w0, lambda tau: f0, 0.0, cfg.T / eps,
                     cfg.stepper, sample_every=10, eps=eps)
    worst = max(coeff_norm(params.grid, s.coeffs, 0.0) for s in traj.states)
    if worst > 1.05 * bound + 1e-9:
        raise BoundednessError(
            f"averaged pre-roll reached ||omega|| = {worst:g}, beyond the "
            f"dissipation bound {bound:g}; initial state outside the "
            "checked ball"
        )


def _compare_single(cfg: ComparisonConfig, eps: float) -> ComparisonRecord:
    params = cfg.params
    grid = params.grid
    n, dt = plan_steps(0.0, cfg.T / eps, cfg.stepper.dt)
    check_resolution(dt, forcing_mod.fastest_period(cfg.spec),
                     cfg.stepper.osc_resolution)
    f_full = forcing_mod.coefficient_function(cfg.spec)
    f0 = forcing_mod.average(cfg.spec).coeffs
    full = Stepper(params, cfg.stepper, eps,
                   make_nonlinear(params, f_full, eps), 0.0, cfg.w0.coeffs, dt)
    avg = Stepper(params, cfg.stepper, eps,
                  make_nonlinear(params, lambda tau: f0, eps), 0.0, cfg.w0.coeffs, dt)
    sup_half = 0.0
    sup_da = 0.0
    end_half = 0.0
    for _ in range(n):
        full.step()
        avg.step()
        d = full.c - avg.c
        end_half = coeff_norm(grid, d, 0.5)
        sup_half = max(sup_half, end_half)
        sup_da = max(sup_da, coeff_norm(grid, d, 1.0))
    log.debug("compare eps=%g: sup_half=%.3e sup_da=%.3e", eps, sup_half, sup_da)
    return ComparisonRecord(eps, sup_half, sup_da, end_half)


def compare_finite_interval(cfg: ComparisonConfig, jobs: int = 1) -> ComparisonReport:
    """Sup-norm distance between full and averaged flows on [0, T/eps].

    Both runs share the initial state, the grid and the step size (chosen
    by the oscillating run's resolution requirement), so the recorded
    difference is free of differing-discretization bias.  Sup norms are
    evaluated at every step, a lower bound on the continuous sup.
    """
    ok, _ = spectral_gap_condition(cfg.params)
    if not ok:
        raise ValueError(
            "spectral gap condition 4*nu*r > beta^2*|D|^2/pi^2 fails for the "
            "comparison experiment"
        )
    _preroll_averaged(cfg)
    records = _map_ordered(lambda e: _compare_single(cfg, e), cfg.epsilons, jobs)
    return ComparisonReport(tuple(records))


def _map_ordered(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# bounded oscillation corrector

def _default_corrector_cfg(spec) -> StepperConfig:
    period = forcing_mod.fastest_period(spec)
    dt = 0.01 if period is None else period / 64.0
    return StepperConfig(dt=dt)


def bounded_corrector(
    params: ModelParams,
    spec: forcing_mod.ForcingSpec,
    eps: float,
    tau_grid,
    cfg: StepperConfig | None = None,
    efolds: float = 10.0,
) -> list[SpectralField]:
    """Approximate the bounded solution of dv/dtau = -eps*A*v + f0 - f.

    Integrates from v = 0 starting efolds e-foldings of exp(-eps*A*tau)
    before the first requested time, so the arbitrary initial condition is
    exponentially forgotten.  Returns v at each point of tau_grid.
    """
    tau_grid = [float(t) for t in tau_grid]
    if any(b <= a for a, b in zip(tau_grid, tau_grid[1:])):
        raise ValueError("tau_grid must be strictly increasing")
    ok, _ = spectral_gap_condition(params)
    if not ok:
        raise ValueError(
            "spectral gap condition fails: exp(-eps*A*tau) does not decay "
            "and the spin-up horizon is non-finite"
        )
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    cfg = cfg or _default_corrector_cfg(spec)
    rate = eps * decay_rate_bound(params)
    start = tau_grid[0] - efolds / rate
    drive = forcing_mod.oscillation_function(spec)

    def nonlinear(c, tau):
        out = drive(tau)
        if params.beta:
            out = out - eps * params.beta * beta_term_coeffs(params, c)
        return out

    grid = params.grid
    c = np.zeros((grid.nx, grid.ny))
    out: list[SpectralField] = []
    tau = start
    for target in tau_grid:
        if target > tau:
            n, dt = plan_steps(tau, target, cfg.dt)
            check_resolution(dt, forcing_mod.fastest_period(spec),
                             cfg.osc_resolution)
            stepper = Stepper(params, cfg, eps, nonlinear, tau, c, dt)
            for _ in range(n):
                stepper.step()
            c = stepper.c
            tau = target
        out.append(SpectralField(grid, c))
    return out


@dataclass(frozen=True)
class CorrectorRecord:
    epsilon: float
    alpha: float
    sup_eps_v: float


@dataclass(frozen=True)
class CorrectorDecayReport:
    records: tuple[CorrectorRecord, ...]

    def sup_values(self) -> list[float]:
        return [r.sup_eps_v for r in self.records]

    def rows(self):
        return [(r.epsilon, r.alpha, r.sup_eps_v) for r in self.records]


def corrector_decay(
    params: ModelParams,
    spec: forcing_mod.ForcingSpec,
    epsilons,
    alpha: float = 0.5,
    cfg: StepperConfig | None = None,
    efolds: float = 10.0,
    probe_points: int = 9,
    jobs: int = 1,
) -> CorrectorDecayReport:
    """sup_tau || eps * v(tau, eps) ||_alpha for each eps in a decreasing list."""
    if not -1.0 <= alpha <= 1.0:
        raise ValueError("alpha outside supported [-1, 1]")
    epsilons = tuple(float(e) for e in epsilons)
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    period = forcing_mod.slowest_period(spec) or 1.0
    taus = np.linspace(0.0, period, probe_points)

    def one(eps: float) -> CorrectorRecord:
        fields = bounded_corrector(params, spec, eps, taus, cfg=cfg, efolds=efolds)
        sup = max(eps * coeff_norm(params.grid, v.coeffs, alpha) for v in fields)
        log.debug("corrector eps=%g: sup ||eps v||_%g = %.3e", eps, alpha, sup)
        return CorrectorRecord(eps, alpha, sup)

    return CorrectorDecayReport(tuple(_map_ordered(one, epsilons, jobs)))
