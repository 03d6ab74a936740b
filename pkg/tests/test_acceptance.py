"""Acceptance suite.

Each test implements one numbered acceptance criterion at its stated
tolerance and runtime budget and prints a single PASS/FAIL line; run with
`pytest tests/test_acceptance.py -v -s` to see the lines as they land.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from qgflow import (
    ForcingSpec,
    ForcingTerm,
    Grid,
    ModelParams,
    SpectralField,
    StepperConfig,
    Trajectory,
    apply_linear,
    attractor_distance,
    basis_mode,
    bounded_corrector,
    corrector_decay,
    domain_integral,
    inner_product,
    integrate,
    inverse_laplacian,
    jacobian,
    linearization_matrix,
    random_field,
    response_frequencies,
    sobolev_norm,
    solve_stationary,
    spectral_gap_condition,
    spectrum,
    to_physical,
    to_spectral,
    track_bounded_solution,
    zero_field,
)
from qgflow.configfile import parse_config
from qgflow.forcing import probe_frequencies
from qgflow.harness import run
from qgflow.spectral import coeff_norm
from qgflow.stationary import linearization_matvec
from qgflow.model import linear_coeffs
from qgflow.spectral import jacobian_coeffs

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(number: int, ok: bool, detail: str, seconds: float, budget: float):
    status = "PASS" if ok and seconds < budget else "FAIL"
    print(f"criterion {number:2d}: {status} ({seconds:6.1f}s / {budget:g}s) {detail}")
    assert ok, f"criterion {number}: {detail}"
    assert seconds < budget, f"criterion {number}: runtime {seconds:.1f}s over budget"


@pytest.fixture(scope="module")
def compare_runs(tmp_path_factory):
    """The comparison demo, run twice through the harness (criteria 4, 10)."""
    cfg = parse_config(CONFIGS / "compare_demo.cfg")
    dirs = []
    for tag in ("a", "b"):
        out = tmp_path_factory.mktemp(f"compare_{tag}")
        run(cfg, out=out)
        dirs.append(out)
    return dirs


@pytest.fixture(scope="module")
def decay_runs(tmp_path_factory):
    """The decay demo, run twice through the harness (criteria 7, 10)."""
    cfg = parse_config(CONFIGS / "decay_demo.cfg")
    dirs = []
    for tag in ("a", "b"):
        out = tmp_path_factory.mktemp(f"decay_{tag}")
        run(cfg, out=out)
        dirs.append(out)
    return dirs


def test_criterion_1_spectral_identities(grid32):
    started = time.monotonic()
    ok = True
    worst_rt = worst_pair = worst_self = worst_bound = 0.0
    for seed in range(100):
        f = random_field(grid32, seed=seed)
        g = random_field(grid32, seed=seed + 1000)
        h = random_field(grid32, seed=seed + 2000)
        rt = np.abs(to_spectral(to_physical(f)).coeffs - f.coeffs).max()
        worst_rt = max(worst_rt, rt)
        jfg = jacobian(f, g)
        pair = abs(inner_product(jfg, h) + inner_product(jacobian(f, h), g))
        pair_scale = sobolev_norm(f, 0.5) * (
            sobolev_norm(g, 0.5) * sobolev_norm(h, 0.0)
            + sobolev_norm(h, 0.5) * sobolev_norm(g, 0.0)
        )
        worst_pair = max(worst_pair, pair / pair_scale)
        self_ = abs(inner_product(jfg, g))
        self_scale = sobolev_norm(f, 0.5) * sobolev_norm(g, 0.5) * sobolev_norm(g, 0.0)
        worst_self = max(worst_self, self_ / self_scale)
        bound_excess = abs(domain_integral(jfg)) / (
            sobolev_norm(f, 0.5) * sobolev_norm(g, 0.5)
        )
        worst_bound = max(worst_bound, bound_excess)
    ok = (worst_rt < 1e-12 and worst_pair < 1e-9 and worst_self < 1e-9
          and worst_bound <= 1.0 + 1e-9)
    report(1, ok,
           f"round-trip {worst_rt:.1e}, identities {worst_pair:.1e}/"
           f"{worst_self:.1e}, integral bound ratio {worst_bound:.3f}",
           time.monotonic() - started, 10.0)


def test_criterion_2_coercivity(grid32):
    started = time.monotonic()
    params = ModelParams(1.0, 1.0, 0.1, grid32)
    ok_gap, lam1 = spectral_gap_condition(params)
    assert ok_gap and lam1 == pytest.approx(1.0 - 0.01 * np.pi**2 / 4.0)
    violations = 0
    margin = np.inf
    for seed in range(100):
        w = random_field(grid32, seed=seed + 5000)
        quad = inner_product(apply_linear(params, w), w)
        grad_sq = sobolev_norm(w, 0.5) ** 2
        margin = min(margin, quad / grad_sq - lam1)
        if quad < lam1 * grad_sq:
            violations += 1
    report(2, violations == 0,
           f"0 violations required, got {violations}; min margin {margin:.3e}",
           time.monotonic() - started, 5.0)


def test_criterion_3_integrator_order(demo_params, grid32):
    started = time.monotonic()
    mode = basis_mode(grid32, 1, 1)

    def forcing(tau):
        w = np.exp(-tau) * mode.coeffs
        jc = jacobian_coeffs(grid32, -w / grid32.mu, w)
        return SpectralField(grid32, -w + linear_coeffs(demo_params, w) + jc)

    errs = []
    for dt in (2e-3, 1e-3):
        traj = integrate(demo_params, mode, forcing, 0.0, 1.0,
                         StepperConfig(dt=dt), sample_every=10**6)
        errs.append(np.abs(traj.states[-1].coeffs
                           - np.exp(-1.0) * mode.coeffs).max() / np.exp(-1.0))
    factor = errs[0] / errs[1]
    report(3, factor >= 3.0 and errs[1] < 1e-5,
           f"halving dt cut the error by {factor:.2f} "
           f"(errors {errs[0]:.2e} -> {errs[1]:.2e})",
           time.monotonic() - started, 30.0)


def test_criterion_4_comparison_demo(compare_runs, tmp_path):
    started = time.monotonic()
    rows = (compare_runs[0] / "comparison.csv").read_text().splitlines()[1:]
    sups = [float(line.split(",")[1]) for line in rows]
    strictly_decreasing = all(b < a for a, b in zip(sups, sups[1:]))
    factor3 = sups[-1] < sups[0] / 3.0

    control_cfg = parse_config(CONFIGS / "compare_control.cfg")
    manifest = run(control_cfg, out=tmp_path / "control")
    control_sup = max(manifest.summary["sup_half"])
    ok = strictly_decreasing and factor3 and control_sup <= 1e-10
    report(4, ok,
           f"sup_half {['%.3e' % s for s in sups]}, drop x{sups[0]/sups[-1]:.2f}, "
           f"steady control {control_sup:.1e}",
           time.monotonic() - started, 300.0)


def test_criterion_5_corrector_decay(demo_params, demo_spec):
    started = time.monotonic()
    rep = corrector_decay(demo_params, demo_spec,
                          (0.25, 0.125, 0.0625, 0.03125, 0.015625),
                          alpha=0.5, cfg=StepperConfig(dt=0.05))
    sups = rep.sup_values()
    strictly_decreasing = all(b < a for a, b in zip(sups, sups[1:]))

    # Scalar-mode closed form at full acceptance tolerance.
    g8 = Grid(8, 8)
    p8 = ModelParams(1.0, 1.0, 0.0, g8)
    amp, om, ph, eps, efolds = 0.2, 1.0, 0.3, 0.25, 10.0
    spec8 = ForcingSpec(zero_field(g8),
                        (ForcingTerm(basis_mode(g8, 1, 1, amp), om, ph),), eta=4.0)
    taus = [0.0, 1.0, 2.0]
    fields = bounded_corrector(p8, spec8, eps, taus,
                               cfg=StepperConfig(dt=2.5e-4), efolds=efolds)
    a = eps * (p8.nu * g8.mu_min + p8.r)
    start = taus[0] - efolds / (eps * g8.mu_min)

    def particular(tau):
        return -amp * (a * np.cos(om * tau + ph) + om * np.sin(om * tau + ph)) \
            / (a * a + om * om)

    rel = max(
        abs(v.coeffs[0, 0] - (particular(t) - np.exp(-a * (t - start))
                              * particular(start)))
        / abs(particular(t) - np.exp(-a * (t - start)) * particular(start))
        for t, v in zip(taus, fields)
    )
    report(5, strictly_decreasing and rel < 1e-6,
           f"sup ||eps v|| {['%.3e' % s for s in sups]}, closed form rel {rel:.1e}",
           time.monotonic() - started, 120.0)


def test_criterion_6_stationary_and_linearization(demo_params, demo_mean, grid32):
    started = time.monotonic()
    w_true = basis_mode(grid32, 1, 1, 0.05)
    f_man = apply_linear(demo_params, w_true) + jacobian(
        inverse_laplacian(w_true), w_true
    )
    st_man = solve_stationary(demo_params, f_man, tol=1e-11)
    recovery = np.abs(st_man.omega0.coeffs - w_true.coeffs).max()

    st = solve_stationary(demo_params, demo_mean, tol=1e-11)
    mv = linearization_matvec(demo_params, st.omega0.coeffs)
    e = random_field(grid32, seed=11, decay=1.0)

    def F(c):
        return (linear_coeffs(demo_params, c)
                + jacobian_coeffs(grid32, -c / grid32.mu, c) - demo_mean.coeffs)

    errs = []
    for h in (1e-4, 1e-5):
        fd = (F(st.omega0.coeffs + h * e.coeffs) - F(st.omega0.coeffs)) / h
        errs.append(coeff_norm(grid32, fd - mv(e.coeffs), 0.0))
    ratio = errs[0] / errs[1]
    ok = recovery < 1e-10 and 5.0 <= ratio <= 20.0
    report(6, ok,
           f"manufactured recovery {recovery:.1e}, FD error ratio {ratio:.2f}",
           time.monotonic() - started, 120.0)


def test_criterion_7_stability_suite(demo_params, steady_spec, decay_runs):
    started = time.monotonic()
    # Mode count stable across truncations 16 and 24 (grid large enough for
    # the dealiased band to contain both).
    g48 = Grid(48, 48)
    p48 = ModelParams(1.0, 1.0, 0.1, g48)
    st48 = solve_stationary(p48, basis_mode(g48, 1, 1, 0.1), tol=1e-11)
    n_counts = {
        t: spectrum(linearization_matrix(p48, st48.omega0, t)).n_unstable
        for t in (16, 24)
    }

    manifest = json.loads((decay_runs[0] / "manifest.json").read_text())
    fitted = manifest["summary"]["fitted_rate"]
    reference = manifest["summary"]["reference_rate"]

    res = track_bounded_solution(demo_params, steady_spec, 0.125, 5.0,
                                 cfg=StepperConfig(dt=0.05))
    ok = (n_counts[16] == 0 and n_counts[24] == 0
          and fitted >= 0.5 * reference
          and res.sup_half_distance < 1e-9)
    report(7, ok,
           f"N(16)={n_counts[16]}, N(24)={n_counts[24]}, decay rate "
           f"{fitted:.3f} vs 0.5*{reference:.3f}, steady tracking "
           f"{res.sup_half_distance:.1e}",
           time.monotonic() - started, 300.0)


def test_criterion_8_response_frequencies(demo_params, demo_spec, grid32):
    started = time.monotonic()
    candidates, controls = probe_frequencies(demo_spec)
    eps = 0.125
    slowest = min(f for f in candidates if f > 0)
    horizon_t = 50 * 2 * np.pi / slowest
    res = track_bounded_solution(demo_params, demo_spec, eps, horizon_t / eps,
                                 cfg=StepperConfig(dt=0.05))
    traj_t = Trajectory(res.trajectory.times * eps, res.trajectory.states,
                        demo_params)
    mags = response_frequencies(traj_t, basis_mode(grid32, 2, 1),
                                candidates + controls)
    cand_max = max(m for _, m in mags[:len(candidates)])
    ctrl_max = max(m for _, m in mags[len(candidates):])
    report(8, ctrl_max < 0.05 * cand_max,
           f"control max {ctrl_max:.2e} vs 5% of candidate max "
           f"{0.05 * cand_max:.2e} on a 50-period run",
           time.monotonic() - started, 180.0)


def test_criterion_9_attractor(demo_params, demo_spec, steady_spec):
    started = time.monotonic()
    window = (8 * np.pi, 16)
    recs = attractor_distance(demo_params, demo_spec, [4.0, 16.0, 64.0], 8,
                              window, seed=1234, cfg=StepperConfig(dt=0.05))
    dists = [r.dist for r in recs]
    self_recs = attractor_distance(demo_params, steady_spec, [4.0], 4,
                                   (4.0, 8), seed=1234,
                                   cfg=StepperConfig(dt=0.05))
    ok = dists[-1] < dists[0] and self_recs[0].dist < 1e-6
    report(9, ok,
           f"dist {['%.3e' % d for d in dists]}, averaged self-comparison "
           f"{self_recs[0].dist:.1e}",
           time.monotonic() - started, 900.0)


def test_criterion_10_determinism(compare_runs, decay_runs):
    started = time.monotonic()
    same_compare = (compare_runs[0] / "comparison.csv").read_bytes() == \
        (compare_runs[1] / "comparison.csv").read_bytes()
    same_decay = (decay_runs[0] / "decay.csv").read_bytes() == \
        (decay_runs[1] / "decay.csv").read_bytes()
    report(10, same_compare and same_decay,
           f"comparison CSV identical: {same_compare}, decay CSV identical: "
           f"{same_decay}",
           time.monotonic() - started, 60.0)
