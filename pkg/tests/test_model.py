import numpy as np
import pytest

from qgflow import (
    BlowUpError,
    Grid,
    GridMismatchError,
    ModelParams,
    SpectralField,
    StepResolutionError,
    StepperConfig,
    apply_linear,
    basis_mode,
    inner_product,
    integrate,
    inverse_laplacian,
    jacobian,
    random_field,
    sobolev_norm,
    spectral_gap_condition,
    tendency,
    zero_field,
)
from qgflow.forcing import coefficient_function, fastest_period
from qgflow.model import dissipation_bound, energy_production


def manufactured_forcing(params, grid, decay_rate=1.0):
    """Forcing that makes w(t) = exp(-t) * mode(1,1) an exact solution of
    the semi-discrete system: f = w_t + A w + J(inv_lap(w), w)."""
    mode = basis_mode(grid, 1, 1)

    def f(tau):
        w = SpectralField(grid, np.exp(-decay_rate * tau) * mode.coeffs)
        drift = tendency(params, w, zero_field(grid))  # -(A w + J)
        return SpectralField(grid, -decay_rate * w.coeffs - drift.coeffs)

    return f


class TestLinearOperator:
    def test_diagonal_case(self, grid32):
        params = ModelParams(2.0, 0.5, 0.0, grid32)
        out = apply_linear(params, basis_mode(grid32, 1, 1))
        assert out.coeffs[0, 0] == pytest.approx(2.0 * 2.0 + 0.5)
        assert np.abs(out.coeffs).sum() == pytest.approx(abs(out.coeffs[0, 0]))

    def test_zero(self, demo_params, grid32):
        assert np.all(apply_linear(demo_params, zero_field(grid32)).coeffs == 0.0)

    def test_linearity(self, demo_params, grid32):
        w1 = random_field(grid32, seed=1)
        w2 = random_field(grid32, seed=2)
        lhs = apply_linear(demo_params, 2.0 * w1 - 3.0 * w2).coeffs
        rhs = 2.0 * apply_linear(demo_params, w1).coeffs - 3.0 * apply_linear(
            demo_params, w2
        ).coeffs
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_coercivity(self, demo_params, grid32):
        ok, lam1 = spectral_gap_condition(demo_params)
        assert ok
        for seed in range(100):
            w = random_field(grid32, seed=seed)
            quad = inner_product(apply_linear(demo_params, w), w)
            grad_sq = sobolev_norm(w, 0.5) ** 2
            assert quad >= lam1 * grad_sq * (1.0 - 1e-9)

    def test_grid_mismatch(self, demo_params):
        with pytest.raises(GridMismatchError):
            apply_linear(demo_params, basis_mode(Grid(16, 16), 1, 1))


class TestSpectralGap:
    def test_demo_values(self, grid32):
        ok, lam1 = spectral_gap_condition(ModelParams(1.0, 1.0, 0.1, grid32))
        assert ok
        assert lam1 == pytest.approx(1.0 - 0.01 * np.pi**2 / 4.0)
        assert lam1 == pytest.approx(0.97533, abs=1e-5)

    def test_violated(self, grid32):
        ok, _ = spectral_gap_condition(ModelParams(1.0, 1.0, 1.0, grid32))
        assert not ok  # 4 < pi^2

    def test_beta_zero(self, grid32):
        ok, lam1 = spectral_gap_condition(ModelParams(0.7, 0.01, 0.0, grid32))
        assert ok
        assert lam1 == pytest.approx(0.7)

    def test_param_validation(self, grid32):
        with pytest.raises(ValueError):
            ModelParams(-1.0, 1.0, 0.0, grid32)
        with pytest.raises(ValueError):
            ModelParams(1.0, 0.0, 0.0, grid32)
        with pytest.raises(ValueError):
            ModelParams(1.0, 1.0, -0.1, grid32)


class TestTendency:
    def test_zero_state_returns_forcing(self, demo_params, grid32):
        f = random_field(grid32, seed=9)
        out = tendency(demo_params, zero_field(grid32), f)
        assert np.abs(out.coeffs - f.coeffs).max() < 1e-14

    def test_manufactured_equilibrium(self, demo_params, grid32):
        w0 = basis_mode(grid32, 1, 1, 0.05) + basis_mode(grid32, 2, 2, 0.02)
        f = -1.0 * tendency(demo_params, w0, zero_field(grid32))  # A w0 + J
        out = tendency(demo_params, w0, f)
        assert np.abs(out.coeffs).max() < 1e-15

    def test_nonlinear_energy_neutrality(self, demo_params, grid32):
        for seed in range(10):
            w = random_field(grid32, seed=seed)
            val = inner_product(jacobian(inverse_laplacian(w), w), w)
            assert abs(val) < 1e-10 * max(1.0, sobolev_norm(w, 0.5) ** 2)

    def test_energy_law_vs_finite_differences(self, demo_params, grid32):
        # d/dt 0.5||w||^2 along a trajectory equals <tendency, w>; check by
        # central differences of the sampled energy.
        w0 = basis_mode(grid32, 1, 1, 0.2) + basis_mode(grid32, 2, 2, 0.1)
        f0 = basis_mode(grid32, 1, 1, 0.1)
        dt = 1e-3
        traj = integrate(demo_params, w0, lambda tau: f0, 0.0, 0.2,
                         StepperConfig(dt=dt), sample_every=1)
        energies = 0.5 * np.array([sobolev_norm(s, 0.0) ** 2 for s in traj.states])
        i = 100
        fd = (energies[i + 1] - energies[i - 1]) / (2 * dt)
        analytic = energy_production(demo_params, traj.states[i], f0)
        assert abs(fd - analytic) < 1e-4 * abs(analytic)


class TestIntegrate:
    def test_pure_dissipation_decays(self, demo_params, grid32):
        w0 = random_field(grid32, seed=77, norm_s=0.0, norm_value=1.0)
        traj = integrate(demo_params, w0, lambda tau: zero_field(grid32),
                         0.0, 2.0, StepperConfig(dt=0.01), sample_every=20)
        norms = [sobolev_norm(s, 0.0) for s in traj.states]
        assert all(b < a for a, b in zip(norms, norms[1:]))

    @pytest.mark.parametrize("scheme,dt,tol", [
        ("imex-cn-ab2", 5e-4, 1e-6),
        ("etd-rk2", 1e-3, 1e-12),
    ])
    def test_exact_linear_decay(self, grid32, scheme, dt, tol):
        # Single mode, beta = 0, no forcing: exact solution exp(-(nu*mu+r)t).
        params = ModelParams(1.0, 1.0, 0.0, grid32)
        w0 = basis_mode(grid32, 1, 1)
        traj = integrate(params, w0, lambda tau: zero_field(grid32),
                         0.0, 1.0, StepperConfig(dt=dt, scheme=scheme),
                         sample_every=10**6)
        got = traj.states[-1].coeffs[0, 0]
        want = np.exp(-3.0)
        assert abs(got - want) / want < tol

    @pytest.mark.parametrize("scheme", ["imex-cn-ab2", "etd-rk2"])
    def test_manufactured_solution(self, demo_params, grid32, scheme):
        f = manufactured_forcing(demo_params, grid32)
        w0 = basis_mode(grid32, 1, 1)
        traj = integrate(demo_params, w0, f, 0.0, 1.0,
                         StepperConfig(dt=1e-3, scheme=scheme), sample_every=10**6)
        err = np.abs(traj.states[-1].coeffs - np.exp(-1.0) * w0.coeffs).max()
        assert err / np.exp(-1.0) < 1e-5

    @pytest.mark.parametrize("scheme", ["imex-cn-ab2", "etd-rk2"])
    def test_second_order_convergence(self, demo_params, grid32, scheme):
        f = manufactured_forcing(demo_params, grid32)
        w0 = basis_mode(grid32, 1, 1)
        errs = []
        for dt in (2e-3, 1e-3):
            traj = integrate(demo_params, w0, f, 0.0, 1.0,
                             StepperConfig(dt=dt, scheme=scheme),
                             sample_every=10**6)
            errs.append(np.abs(traj.states[-1].coeffs
                               - np.exp(-1.0) * w0.coeffs).max())
        assert errs[0] / errs[1] >= 3.0

    def test_sampling_includes_endpoints(self, demo_params, grid32):
        traj = integrate(demo_params, basis_mode(grid32, 1, 1),
                         lambda tau: zero_field(grid32), 0.0, 1.0,
                         StepperConfig(dt=0.3), sample_every=2)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(1.0)

    def test_determinism(self, demo_params, grid32, demo_spec):
        f = coefficient_function(demo_spec)
        runs = []
        for _ in range(2):
            traj = integrate(demo_params, basis_mode(grid32, 1, 1, 0.1), f,
                             0.0, 2.0, StepperConfig(dt=0.05), sample_every=5,
                             eps=0.125)
            runs.append(traj.states[-1].coeffs)
        assert np.array_equal(runs[0], runs[1])

    def test_resolution_rule_enforced(self, demo_params, grid32, demo_spec):
        period = fastest_period(demo_spec)
        bad_dt = period / 8.0  # osc_resolution default 32 demands period/32
        with pytest.raises(StepResolutionError):
            integrate(demo_params, zero_field(grid32),
                      coefficient_function(demo_spec), 0.0, 1.0,
                      StepperConfig(dt=bad_dt), fastest_period=period)

    def test_blow_up_detection(self, grid32):
        params = ModelParams(1e-3, 1e-3, 0.0, grid32)
        f_big = basis_mode(grid32, 1, 1, 50.0)
        w0 = random_field(grid32, seed=5, decay=0.5, norm_s=0.0, norm_value=5.0)
        with pytest.raises(BlowUpError) as info:
            integrate(params, w0, lambda tau: f_big, 0.0, 50.0,
                      StepperConfig(dt=0.9))
        assert 0.0 <= info.value.last_valid_time < 50.0

    def test_dissipativity_long_run(self, demo_params, grid32, demo_mean):
        # Bounded forcing plus the gap condition keep the norm inside the
        # a priori absorbing bound.
        w0 = random_field(grid32, seed=123, norm_s=0.0, norm_value=0.8)
        bound = dissipation_bound(demo_params, w0, sobolev_norm(demo_mean, 0.0))
        traj = integrate(demo_params, w0, lambda tau: demo_mean, 0.0, 40.0,
                         StepperConfig(dt=0.02), sample_every=50)
        norms = [sobolev_norm(s, 0.0) for s in traj.states]
        assert max(norms) <= bound * 1.05
        assert norms[-1] <= sobolev_norm(demo_mean, 0.0) / 2.0  # settled well inside
