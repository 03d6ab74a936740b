"""Experiment orchestration: dispatch, artifact output, run manifest.

Every run writes its CSV/figure/snapshot artifacts into the output
directory and finishes by writing manifest.json; a directory without a
manifest is an incomplete run.  Contract checks (the theorem-shaped
monotonicity and smallness assertions) are evaluated after the artifacts
are on disk and reported through ContractViolation, which the CLI maps to
exit code 2.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import forcing as forcing_mod
from . import reports
from .averaging import ComparisonConfig, compare_finite_interval, corrector_decay
from .configfile import RunConfig
from .model import Trajectory, integrate
from .snapshots import save_field
from .spectral import SpectralField, coeff_norm, sobolev_norm
from .stationary import (
    attractor_distance,
    decay_experiment,
    linearization_matrix,
    response_frequencies,
    solve_stationary,
    spectrum,
    track_bounded_solution,
)

log = logging.getLogger(__name__)


class ContractViolation(RuntimeError):
    """An experiment ran to completion but violated its scientific contract."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass
class RunManifest:
    experiment: str
    status: str
    version: str
    wall_clock_seconds: float
    summary: dict
    artifacts: list[str]
    violations: list[str]
    config: dict = field(default_factory=dict)


def _mode_field(grid, modes) -> SpectralField:
    c = np.zeros((grid.nx, grid.ny))
    for k, l, amp in modes:
        c[k - 1, l - 1] += amp
    return SpectralField(grid, c)


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    payload = json.dumps(asdict(manifest), indent=2, sort_keys=True)
    reports._atomic_write(out / "manifest.json", payload + "\n")


def run(config: RunConfig, jobs: int = 1, out=None) -> RunManifest:
    """Execute one experiment; returns the manifest, raising
    ContractViolation (after writing everything) if a contract failed."""
    out = Path(out) if out is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    driver = _DRIVERS[config.experiment]
    log.info("running %s into %s (jobs=%d)", config.experiment, out, jobs)
    summary, artifacts, violations = driver(config, out, jobs)
    manifest = RunManifest(
        experiment=config.experiment,
        status="ok" if not violations else "contract-violated",
        version=__version__,
        wall_clock_seconds=time.monotonic() - started,
        summary=summary,
        artifacts=sorted(artifacts),
        violations=violations,
        config=config.echo,
    )
    _write_manifest(out, manifest)
    if violations:
        raise ContractViolation(violations)
    return manifest


def _nonincreasing_violations(values, ripple: float, label: str) -> list[str]:
    out = []
    for a, b in zip(values, values[1:]):
        if b > a * (1.0 + ripple) + 1e-300:
            out.append(
                f"{label} not nonincreasing within {ripple:.0%}: "
                f"{a:.6g} -> {b:.6g}"
            )
    return out


def _run_simulate(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    w0 = _mode_field(params.grid, o["w0"])
    traj = integrate(
        params,
        w0,
        forcing_mod.coefficient_function(spec),
        0.0,
        o["horizon"],
        config.stepper,
        sample_every=o["sample_every"],
        eps=o["eps"],
        fastest_period=forcing_mod.fastest_period(spec),
    )
    rows = traj.norm_table()
    artifacts = ["trajectory.csv", "trajectory.png"]
    reports.write_csv(out / "trajectory.csv",
                      ("time", "l2_norm", "h1_norm", "d_a_norm", "energy"), rows)
    reports.render_trajectory(rows, out / "trajectory.png")
    if o["snapshots"]:
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
        for i, state in enumerate(traj.states):
            name = f"snapshots/{i:05d}.qgf"
            save_field(out / name, state)
            artifacts.append(name)
    summary = {
        "samples": len(traj),
        "final_l2": rows[-1][1],
        "final_h1": rows[-1][2],
    }
    return summary, artifacts, []


def _run_compare(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    cfg = ComparisonConfig(
        params=params,
        spec=spec,
        T=o["T"],
        epsilons=tuple(o["epsilons"]),
        w0=_mode_field(params.grid, o["w0"]),
        stepper=config.stepper,
    )
    report = compare_finite_interval(cfg, jobs=jobs)
    rows = report.rows()
    reports.write_csv(out / "comparison.csv",
                      ("epsilon", "sup_half", "sup_da", "end_half"), rows)
    reports.render_comparison(rows, out / "comparison.png")
    violations = _nonincreasing_violations(
        report.sup_half_values(), o["ripple"], "sup_half"
    )
    summary = {
        "epsilons": list(cfg.epsilons),
        "sup_half": report.sup_half_values(),
        "sup_da": [r.sup_da for r in report.records],
    }
    return summary, ["comparison.csv", "comparison.png"], violations


def _run_aux_v(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    report = corrector_decay(
        params,
        spec,
        tuple(o["epsilons"]),
        alpha=o["alpha"],
        cfg=config.stepper,
        efolds=o["efolds"],
        probe_points=o["probe_points"],
        jobs=jobs,
    )
    rows = report.rows()
    reports.write_csv(out / "corrector.csv",
                      ("epsilon", "alpha", "sup_eps_v"), rows)
    reports.render_corrector(rows, out / "corrector.png")
    sups = report.sup_values()
    violations = []
    if spec.terms:
        for a, b in zip(sups, sups[1:]):
            if b >= a:
                violations.append(
                    f"sup ||eps v|| not strictly decreasing: {a:.6g} -> {b:.6g}"
                )
    summary = {"epsilons": list(o["epsilons"]), "sup_eps_v": sups}
    return summary, ["corrector.csv", "corrector.png"], violations


def _run_stationary(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    st = solve_stationary(params, forcing_mod.average(spec),
                          tol=o["tol"], max_iters=o["max_iters"])
    save_field(out / "stationary.qgf", st.omega0)
    reports.render_field(st.omega0, out / "stationary.png",
                         title="stationary averaged state")
    summary = {
        "residual": st.residual_norm,
        "newton_iters": st.newton_iters,
        "l2_norm": sobolev_norm(st.omega0, 0.0),
        "h1_norm": sobolev_norm(st.omega0, 0.5),
    }
    return summary, ["stationary.qgf", "stationary.png"], []


def _run_spectrum(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    st = solve_stationary(params, forcing_mod.average(spec), tol=o["tol"])
    mat = linearization_matrix(params, st.omega0, o["truncation"])
    rep = spectrum(mat)
    comment = (
        f"truncation={rep.truncation} gap_a={reports.fmt(rep.gap_a)} "
        f"n_unstable={rep.n_unstable}"
    )
    rows = [(ev.real, ev.imag) for ev in rep.eigenvalues]
    reports.write_csv(out / "spectrum.csv", ("re", "im"), rows, comment=comment)
    reports.render_spectrum(rep, out / "spectrum.png")
    summary = {
        "gap_a": rep.gap_a,
        "n_unstable": rep.n_unstable,
        "truncation": rep.truncation,
        "newton_residual": st.residual_norm,
    }
    return summary, ["spectrum.csv", "spectrum.png"], []


def _run_decay(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    report = decay_experiment(
        params,
        spec,
        o["eps"],
        _mode_field(params.grid, o["perturbation"]),
        cfg=config.stepper,
        truncation=o["truncation"],
        horizon=o["horizon"],
        efolds=o["efolds"],
        sample_every=o["sample_every"],
    )
    rows = list(zip(report.times, report.distances, report.log_distance))
    reports.write_csv(out / "decay.csv", ("t", "distance", "log_distance"), rows)
    reports.render_decay(report, out / "decay.png")
    violations = []
    if report.fitted_rate < 0.5 * report.reference_rate:
        violations.append(
            f"fitted decay rate {report.fitted_rate:.6g} below half the "
            f"dichotomy prediction {report.reference_rate:.6g}"
        )
    summary = {
        "fitted_rate": report.fitted_rate,
        "reference_rate": report.reference_rate,
    }
    return summary, ["decay.csv", "decay.png"], violations


def _run_bounded(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    res = track_bounded_solution(
        params,
        spec,
        o["eps"],
        o["horizon"],
        cfg=config.stepper,
        truncation=o["truncation"],
        efolds=o["efolds"],
        sample_every=o["sample_every"],
    )
    w0c = res.stationary.omega0.coeffs
    grid = params.grid
    rows = [
        (float(t), coeff_norm(grid, s.coeffs - w0c, 0.5))
        for t, s in zip(res.trajectory.times, res.trajectory.states)
    ]
    reports.write_csv(out / "bounded.csv", ("time", "distance_half"), rows)
    reports.render_series(
        [r[0] for r in rows], [r[1] for r in rows], out / "bounded.png",
        xlabel="tau", ylabel="||omega* - omega0||_{1/2}",
        title="bounded response orbit",
    )
    summary = {
        "sup_half_distance": res.sup_half_distance,
        "gap_a": res.spectrum.gap_a,
        "n_unstable": res.spectrum.n_unstable,
    }
    return summary, ["bounded.csv", "bounded.png"], []


def _run_frequencies(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    candidates, controls = forcing_mod.probe_frequencies(spec, order=o["order"])
    positive = [f for f in candidates if f > 0]
    slowest = min(positive)
    eps = o["eps"]
    horizon_t = o["periods"] * 2.0 * np.pi / slowest
    res = track_bounded_solution(
        params,
        spec,
        eps,
        horizon_t / eps,
        cfg=config.stepper,
        truncation=o["truncation"],
        efolds=o["efolds"],
        sample_every=o["sample_every"],
    )
    # Analyze in original time t = eps * tau, matching the basis units.
    traj_t = Trajectory(res.trajectory.times * eps, res.trajectory.states, params)
    probe = _mode_field(params.grid, o["probe"])
    mags = response_frequencies(traj_t, probe, candidates + controls,
                                min_periods=o["periods"])
    kinds = ["candidate"] * len(candidates) + ["control"] * len(controls)
    rows = [(f, m, kind) for (f, m), kind in zip(mags, kinds)]
    reports.write_csv(out / "frequencies.csv",
                      ("freq", "magnitude", "kind"), rows)
    reports.render_frequencies(rows, out / "frequencies.png")
    cand_max = max(m for (_, m, kind) in rows if kind == "candidate")
    ctrl_max = max((m for (_, m, kind) in rows if kind == "control"), default=0.0)
    violations = []
    if ctrl_max >= 0.05 * cand_max:
        violations.append(
            f"control-frequency magnitude {ctrl_max:.6g} is not below 5% of "
            f"the candidate maximum {cand_max:.6g}"
        )
    summary = {"candidate_max": cand_max, "control_max": ctrl_max}
    return summary, ["frequencies.csv", "frequencies.png"], violations


def _run_attractor(config: RunConfig, out: Path, jobs: int):
    params, spec, o = config.params, config.spec, config.options
    window = o["window"]
    if window is None:
        window = 4.0 * (forcing_mod.slowest_period(spec) or 1.0)
    records = attractor_distance(
        params,
        spec,
        o["eta_list"],
        o["n_initial"],
        (window, o["window_samples"]),
        seed=o["seed"],
        cfg=config.stepper,
        efolds=o["efolds"],
        jobs=jobs,
    )
    rows = [(r.eta, r.dist, r.n_samples) for r in records]
    reports.write_csv(out / "attractor.csv", ("eta", "dist", "n_samples"), rows)
    reports.render_attractor(rows, out / "attractor.png")
    violations = _nonincreasing_violations(
        [r.dist for r in records], o["ripple"], "attractor distance"
    )
    summary = {"eta": [r.eta for r in records], "dist": [r.dist for r in records]}
    return summary, ["attractor.csv", "attractor.png"], violations


_DRIVERS = {
    "simulate": _run_simulate,
    "compare": _run_compare,
    "aux-v": _run_aux_v,
    "stationary": _run_stationary,
    "spectrum": _run_spectrum,
    "decay": _run_decay,
    "bounded": _run_bounded,
    "frequencies": _run_frequencies,
    "attractor": _run_attractor,
}
