"""Line-oriented run configuration files.

The format is INI-style: `key = value` lines grouped under `[section]`
headers, comments starting with `#` or `;`, no nesting.  Duplicate
sections are allowed (the forcing files use repeated [term] blocks).
Validation is collect-all: every problem in a file is reported at once,
each one naming the offending key.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import forcing as forcing_mod
from .model import SCHEMES, ModelParams, StepperConfig, spectral_gap_condition
from .spectral import Grid

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "simulate",
    "compare",
    "aux-v",
    "stationary",
    "spectrum",
    "decay",
    "bounded",
    "frequencies",
    "attractor",
)

# Experiments whose preconditions require the dissipativity condition.
_NEEDS_GAP = tuple(e for e in EXPERIMENTS if e != "simulate")


class ConfigError(ValueError):
    """Carries the complete list of validation errors for a config file."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def parse_sections(text: str) -> list[tuple[str, list[tuple[str, str]]]]:
    """Split config text into ("", top keys) followed by (name, keys) blocks."""
    sections: list[tuple[str, list[tuple[str, str]]]] = [("", [])]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            sections.append((line[1:-1].strip(), []))
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        value = value.split(" #")[0].split(" ;")[0]
        sections[-1][1].append((key.strip(), value.strip()))
    return sections


@dataclass
class RunConfig:
    experiment: str
    params: ModelParams
    stepper: StepperConfig
    spec: forcing_mod.ForcingSpec
    forcing_path: str
    options: dict
    output_dir: Path
    echo: dict = field(default_factory=dict)


class _Collector:
    """Typed key extraction that records, rather than raises, every error."""

    def __init__(self):
        self.errors: list[str] = []

    def fail(self, message: str) -> None:
        self.errors.append(message)

    def get(self, section: dict, name: str, conv, default=None, required=False,
            where: str = ""):
        if name not in section:
            if required:
                self.fail(f"missing key '{name}'{where}")
            return default
        raw = section[name]
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.fail(f"key '{name}'{where}: {exc}")
            return default


def _as_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.replace(",", " ").split()]


def parse_config(path) -> RunConfig:
    """Read and fully validate a run configuration.

    Raises ConfigError listing every violated constraint; nothing is
    computed from a config that fails any module precondition checkable
    statically.
    """
    path = Path(path)
    col = _Collector()
    if not path.is_file():
        raise ConfigError([f"config file {path} does not exist"])
    sections = parse_sections(path.read_text(encoding="utf-8"))
    by_name: dict[str, dict] = {}
    echo: dict = {}
    for name, kv in sections:
        if not name and not kv:
            continue
        if name in by_name:
            col.fail(f"duplicate section [{name}]")
        by_name[name] = dict(kv)
        echo[name or "(top)"] = dict(kv)

    model_sec = by_name.get("model")
    if model_sec is None:
        raise ConfigError(["missing [model] section"])
    exp_sec = by_name.get("experiment")
    if exp_sec is None:
        raise ConfigError(["missing [experiment] section"])
    stepper_sec = by_name.get("stepper", {})
    forcing_sec = by_name.get("forcing", {})

    nu = col.get(model_sec, "nu", float, required=True, where=" in [model]")
    r = col.get(model_sec, "r", float, required=True, where=" in [model]")
    beta = col.get(model_sec, "beta", float, default=0.0, where=" in [model]")
    nx = col.get(model_sec, "nx", int, required=True, where=" in [model]")
    ny = col.get(model_sec, "ny", int, required=True, where=" in [model]")
    lx = col.get(model_sec, "lx", float, default=math.pi, where=" in [model]")
    ly = col.get(model_sec, "ly", float, default=math.pi, where=" in [model]")

    # Scalar preconditions are reported independently of grid construction
    # so one bad section does not mask the others.
    if nu is not None and nu <= 0:
        col.fail("key 'nu' in [model]: must be positive")
    if r is not None and r <= 0:
        col.fail("key 'r' in [model]: must be positive")
    if beta is not None and beta < 0:
        col.fail("key 'beta' in [model]: must be nonnegative")

    grid = None
    if None not in (nx, ny, lx, ly):
        try:
            grid = Grid(nx, ny, lx, ly)
        except ValueError as exc:
            col.fail(f"[model]: {exc}")
    params = None
    if grid is not None and None not in (nu, r, beta) and nu > 0 and r > 0 \
            and beta >= 0:
        params = ModelParams(nu, r, beta, grid)

    spec = None
    forcing_path = col.get(forcing_sec, "file", str, required=True,
                           where=" in [forcing]")
    if forcing_path is not None:
        resolved = (path.parent / forcing_path).resolve()
        if not resolved.is_file():
            col.fail(f"forcing file {resolved} does not exist")
        elif grid is not None:
            try:
                spec = forcing_mod.load_forcing(resolved, grid)
            except (ValueError, KeyError) as exc:
                col.fail(f"forcing file {resolved}: {exc}")

    experiment = col.get(exp_sec, "type", str, required=True,
                         where=" in [experiment]")
    if experiment is not None and experiment not in EXPERIMENTS:
        col.fail(f"unknown experiment type {experiment!r}; "
                 f"choose from {', '.join(EXPERIMENTS)}")
        experiment = None

    # Stepper defaults: dt from the oscillation resolution rule.
    osc = col.get(stepper_sec, "osc_resolution", int, default=32,
                  where=" in [stepper]")
    scheme = col.get(stepper_sec, "scheme", str, default="imex-cn-ab2",
                     where=" in [stepper]")
    dt = col.get(stepper_sec, "dt", float, default=None, where=" in [stepper]")
    stepper = None
    if scheme is not None and scheme not in SCHEMES:
        col.fail(f"key 'scheme' in [stepper]: unknown scheme {scheme!r}")
    elif osc is not None:
        if dt is None:
            period = forcing_mod.fastest_period(spec) if spec else None
            dt = 0.01 if period is None else period / osc
        try:
            stepper = StepperConfig(dt=dt, scheme=scheme, osc_resolution=osc)
        except ValueError as exc:
            col.fail(f"[stepper]: {exc}")
        if stepper is not None and spec is not None:
            period = forcing_mod.fastest_period(spec)
            if period is not None and dt > period / osc * (1 + 1e-12):
                col.fail(
                    f"key 'dt' in [stepper]: dt = {dt:g} violates the "
                    f"oscillation resolution rule dt <= fastest period / "
                    f"osc_resolution = {period / osc:g}"
                )

    if params is not None and experiment in _NEEDS_GAP:
        ok, _ = spectral_gap_condition(params)
        if not ok:
            col.fail(
                f"[model]: spectral gap condition 4*nu*r > beta^2*|D|^2/pi^2 "
                f"fails (required by experiment '{experiment}')"
            )

    options: dict = {}
    if experiment is not None:
        options = _experiment_options(col, experiment, exp_sec, grid, spec)

    out_raw = col.get(exp_sec, "output_dir", str, default=None)
    if out_raw is None:
        output_dir = Path("runs") / (experiment or "run")
    else:
        output_dir = Path(out_raw)
        if not output_dir.is_absolute():
            output_dir = path.parent / output_dir

    if col.errors:
        log.debug("config %s invalid: %d errors", path, len(col.errors))
        raise ConfigError(col.errors)
    return RunConfig(experiment, params, stepper, spec, str(forcing_path),
                     options, output_dir, echo)


def _modes(raw: str):
    return forcing_mod.parse_mode_list(raw)


def _experiment_options(col: _Collector, experiment: str, sec: dict,
                        grid, spec) -> dict:
    where = " in [experiment]"
    o: dict = {}
    get = col.get
    default_eps = 1.0 / spec.eta if spec is not None else 1.0

    if experiment == "simulate":
        o["horizon"] = get(sec, "horizon", float, required=True, where=where)
        o["eps"] = get(sec, "eps", float, default=default_eps, where=where)
        o["sample_every"] = get(sec, "sample_every", int, default=1, where=where)
        o["snapshots"] = get(sec, "snapshots", _as_bool, default=False, where=where)
        o["w0"] = get(sec, "w0", _modes, default=(), where=where)
    elif experiment == "compare":
        o["T"] = get(sec, "T", float, required=True, where=where)
        o["epsilons"] = get(sec, "epsilons", _float_list, required=True, where=where)
        o["ripple"] = get(sec, "ripple", float, default=0.10, where=where)
        o["w0"] = get(sec, "w0", _modes, default=(), where=where)
    elif experiment == "aux-v":
        o["epsilons"] = get(sec, "epsilons", _float_list, required=True, where=where)
        o["alpha"] = get(sec, "alpha", float, default=0.5, where=where)
        o["efolds"] = get(sec, "efolds", float, default=10.0, where=where)
        o["probe_points"] = get(sec, "probe_points", int, default=9, where=where)
    elif experiment == "stationary":
        o["tol"] = get(sec, "tol", float, default=1e-11, where=where)
        o["max_iters"] = get(sec, "max_iters", int, default=20, where=where)
    elif experiment == "spectrum":
        o["truncation"] = get(sec, "truncation", int, default=16, where=where)
        o["tol"] = get(sec, "tol", float, default=1e-11, where=where)
    elif experiment == "decay":
        o["eps"] = get(sec, "eps", float, default=default_eps, where=where)
        o["perturbation"] = get(sec, "perturbation", _modes, required=True,
                                where=where)
        o["truncation"] = get(sec, "truncation", int, default=16, where=where)
        o["horizon"] = get(sec, "horizon", float, default=None, where=where)
        o["efolds"] = get(sec, "efolds", float, default=10.0, where=where)
        o["sample_every"] = get(sec, "sample_every", int, default=1, where=where)
    elif experiment == "bounded":
        o["eps"] = get(sec, "eps", float, default=default_eps, where=where)
        o["horizon"] = get(sec, "horizon", float, required=True, where=where)
        o["truncation"] = get(sec, "truncation", int, default=16, where=where)
        o["efolds"] = get(sec, "efolds", float, default=10.0, where=where)
        o["sample_every"] = get(sec, "sample_every", int, default=1, where=where)
    elif experiment == "frequencies":
        o["eps"] = get(sec, "eps", float, default=default_eps, where=where)
        o["periods"] = get(sec, "periods", float, default=50.0, where=where)
        o["order"] = get(sec, "order", int, default=3, where=where)
        o["probe"] = get(sec, "probe", _modes, default=((1, 1, 1.0),), where=where)
        o["truncation"] = get(sec, "truncation", int, default=16, where=where)
        o["efolds"] = get(sec, "efolds", float, default=10.0, where=where)
        o["sample_every"] = get(sec, "sample_every", int, default=1, where=where)
    elif experiment == "attractor":
        o["eta_list"] = get(sec, "eta_list", _float_list, required=True, where=where)
        o["n_initial"] = get(sec, "n_initial", int, default=8, where=where)
        o["window"] = get(sec, "window", float, default=None, where=where)
        o["window_samples"] = get(sec, "window_samples", int, default=16, where=where)
        o["seed"] = get(sec, "seed", int, default=1234, where=where)
        o["efolds"] = get(sec, "efolds", float, default=10.0, where=where)
        o["ripple"] = get(sec, "ripple", float, default=0.15, where=where)

    _validate_options(col, experiment, o, grid, spec)
    return o


def _validate_options(col, experiment: str, o: dict, grid, spec):
    def check_modes(name):
        if grid is None:
            return
        for k, l, _ in o.get(name) or ():
            if not (1 <= k <= grid.nx and 1 <= l <= grid.ny):
                col.fail(f"key '{name}': mode ({k}, {l}) outside the "
                         f"{grid.nx}x{grid.ny} grid")

    def check_eps_list(values):
        if values is None:
            return
        if any(e <= 0 or e > 1 for e in values):
            col.fail("key 'epsilons': values must lie in (0, 1]")
        if any(b >= a for a, b in zip(values, values[1:])):
            col.fail("epsilons must be strictly decreasing")

    def check_positive(name):
        v = o.get(name)
        if v is not None and v <= 0:
            col.fail(f"key '{name}' must be positive")

    def check_truncation():
        t = o.get("truncation")
        if grid is not None and t is not None \
                and not 1 <= t <= grid.max_dealiased_mode:
            col.fail(
                f"key 'truncation': {t} outside 1..{grid.max_dealiased_mode} "
                "(must stay inside the dealiased band)"
            )

    if experiment == "simulate":
        check_positive("horizon")
        check_positive("eps")
        check_modes("w0")
        if (o.get("sample_every") or 1) < 1:
            col.fail("key 'sample_every' must be a positive integer")
    elif experiment == "compare":
        check_positive("T")
        check_eps_list(o.get("epsilons"))
        check_modes("w0")
    elif experiment == "aux-v":
        check_eps_list(o.get("epsilons"))
        a = o.get("alpha")
        if a is not None and not -1.0 <= a <= 1.0:
            col.fail("key 'alpha' outside supported [-1, 1]")
    elif experiment in ("stationary", "spectrum"):
        check_positive("tol")
        if experiment == "spectrum":
            check_truncation()
    elif experiment == "decay":
        check_positive("eps")
        check_modes("perturbation")
        check_truncation()
    elif experiment == "bounded":
        check_positive("eps")
        check_positive("horizon")
        check_truncation()
    elif experiment == "frequencies":
        check_positive("eps")
        check_positive("periods")
        check_modes("probe")
        check_truncation()
        if spec is not None and not spec.terms:
            col.fail("frequencies experiment needs an oscillating forcing spec")
    elif experiment == "attractor":
        etas = o.get("eta_list")
        if etas is not None:
            if any(e < 1 for e in etas):
                col.fail("key 'eta_list': values must be at least 1")
            if any(b <= a for a, b in zip(etas, etas[1:])):
                col.fail("key 'eta_list' must be strictly increasing")
        if (o.get("n_initial") or 1) < 1:
            col.fail("key 'n_initial' must be a positive integer")
