"""Rapidly oscillating forcing families with closed-form time averages.

A spec describes f as a mean field plus finitely many cosine terms,

    f(tau) = mean + sum_j amplitude_j * cos(omega_j * tau + phase_j),

written in the fast time variable tau = eta * t.  The base rates omega_j
are O(1) in tau regardless of eta: the oscillation parameter eta enters
the dynamics only through the scale eps = 1/eta of the slow-fast form and
through the original-time frequencies omega_j * eta reported by
frequency_basis.  Every spec in this family has the exact average `mean`,
and the windowed-average error decays like O(1/T).
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spectral import Grid, SpectralField, coeff_norm

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class ForcingTerm:
    amplitude: SpectralField
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("term frequency omega must be positive")


@dataclass(frozen=True)
class ForcingSpec:
    mean: SpectralField
    terms: tuple[ForcingTerm, ...] = ()
    eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.amplitude.grid != self.mean.grid:
                raise ValueError("forcing term amplitude on a different grid")
        if self.eta < 1:
            raise ValueError("eta must be at least 1")

    @property
    def grid(self) -> Grid:
        return self.mean.grid

    @property
    def eps(self) -> float:
        return 1.0 / self.eta


def evaluate(spec: ForcingSpec, tau: float) -> SpectralField:
    """Exact trigonometric evaluation of f at fast time tau."""
    c = spec.mean.coeffs.copy()
    for t in spec.terms:
        c += t.amplitude.coeffs * np.cos(t.omega * tau + t.phase)
    return SpectralField(spec.grid, c)


def coefficient_function(spec: ForcingSpec):
    """Closure tau -> raw coefficient array (stepper hot path)."""
    mean = spec.mean.coeffs
    parts = [(t.amplitude.coeffs, t.omega, t.phase) for t in spec.terms]
    if not parts:
        return lambda tau: mean

    def f(tau: float) -> np.ndarray:
        c = mean.copy()
        for amp, om, ph in parts:
            c += amp * np.cos(om * tau + ph)
        return c

    return f


def oscillation_function(spec: ForcingSpec):
    """Closure tau -> coefficients of f0 - f(tau) (the zero-mean drive)."""
    parts = [(t.amplitude.coeffs, t.omega, t.phase) for t in spec.terms]
    shape = spec.mean.coeffs.shape

    def drive(tau: float) -> np.ndarray:
        c = np.zeros(shape)
        for amp, om, ph in parts:
            c -= amp * np.cos(om * tau + ph)
        return c

    return drive


def average(spec: ForcingSpec) -> SpectralField:
    """Infinite-time average; exactly the mean for this family."""
    return spec.mean


def fastest_period(spec: ForcingSpec) -> float | None:
    """Shortest oscillation period in tau units, None for steady forcing."""
    if not spec.terms:
        return None
    return 2.0 * np.pi / max(t.omega for t in spec.terms)


def slowest_period(spec: ForcingSpec) -> float | None:
    if not spec.terms:
        return None
    return 2.0 * np.pi / min(t.omega for t in spec.terms)


@dataclass(frozen=True)
class AverageReport:
    """Measured windowed-average errors sigma(T) in the order-gamma norm."""

    windows: tuple[float, ...]
    sigma: tuple[float, ...]
    gamma: float
    m_gamma: float

    def __post_init__(self):
        if any(s < 0 for s in self.sigma):
            raise ValueError("sigma entries must be nonnegative")
        if any(b <= a for a, b in zip(self.windows, self.windows[1:])):
            raise ValueError("windows must be increasing")


def time_average_error(
    spec: ForcingSpec, gamma: float, windows: list[float], base_points: int = 8
) -> AverageReport:
    """sup_t || (1/T) integral_t^{t+T} f - f0 ||_gamma over a probe set of t.

    The window integral of each cosine term is exact, so the report is
    quadrature-free.  Base points are spread over one slowest period.
    """
    if not -1.0 <= gamma <= 1.0:
        raise ValueError("gamma outside supported [-1, 1]")
    if any(T <= 0 for T in windows):
        raise ValueError("windows must be positive")
    grid = spec.grid
    period = slowest_period(spec)
    if period is None:
        starts = np.array([0.0])
    else:
        starts = np.linspace(0.0, period, base_points, endpoint=False)
    sigmas = []
    for T in windows:
        worst = 0.0
        for t in starts:
            diff = np.zeros_like(spec.mean.coeffs)
            for term in spec.terms:
                om, ph = term.omega, term.phase
                avg = (np.sin(om * (t + T) + ph) - np.sin(om * t + ph)) / (om * T)
                diff += term.amplitude.coeffs * avg
            worst = max(worst, coeff_norm(grid, diff, gamma))
        sigmas.append(worst)
    return AverageReport(tuple(float(T) for T in windows), tuple(sigmas),
                         gamma, max(sigmas) if sigmas else 0.0)


def _rational_ratio(x: float, max_denominator: int, tol: float) -> Fraction | None:
    frac = Fraction(x).limit_denominator(max_denominator)
    if frac.numerator == 0:
        return None
    if abs(x - float(frac)) <= tol * max(1.0, abs(x)):
        return frac
    return None


def frequency_basis(
    spec: ForcingSpec, tol: float = 1e-9, max_denominator: int = 64
) -> list[float]:
    """Rationally independent generators of the original-time frequencies.

    Works on {omega_j * eta}; each pair related by a ratio p/q with
    q <= max_denominator (within tol) is folded onto their common divisor,
    so every term frequency is an integer multiple of one returned value.
    """
    freqs = sorted({t.omega * spec.eta for t in spec.terms})
    basis: list[float] = []
    for w in freqs:
        placed = False
        for i, b in enumerate(basis):
            frac = _rational_ratio(w / b, max_denominator, tol)
            if frac is not None:
                basis[i] = b / frac.denominator
                placed = True
                break
        if not placed:
            basis.append(w)
    # Folding can create new rational relations between basis entries.
    changed = True
    while changed and len(basis) > 1:
        changed = False
        basis.sort()
        for i in range(len(basis)):
            for j in range(i + 1, len(basis)):
                frac = _rational_ratio(basis[j] / basis[i], max_denominator, tol)
                if frac is not None:
                    basis[i] = basis[i] / frac.denominator
                    del basis[j]
                    changed = True
                    break
            if changed:
                break
    return sorted(basis)


def probe_frequencies(
    spec: ForcingSpec, order: int = 3
) -> tuple[list[float], list[float]]:
    """Candidate response frequencies and off-basis controls (original time).

    Candidates are 0 plus the positive integer combinations of the
    frequency basis with coefficients up to `order` in absolute value;
    controls sit at golden-ratio multiples of each basis element, which no
    small integer combination can approach.
    """
    basis = frequency_basis(spec)
    candidates = {0.0}
    combos = [0.0]
    for b in basis:
        combos = [c + n * b for c in combos for n in range(-order, order + 1)]
    for c in combos:
        if c > 1e-12:
            candidates.add(round(c, 12))
    controls = [GOLDEN_RATIO * b for b in basis]
    controls = [
        c for c in controls
        if all(abs(c - cand) > 1e-6 * max(1.0, c) for cand in candidates)
    ]
    return sorted(candidates), controls


# ---------------------------------------------------------------------------
# forcing spec files

@dataclass(frozen=True)
class ForcingFileData:
    """Grid-free description parsed from a forcing spec file."""

    eta: float
    mean_modes: tuple[tuple[int, int, float], ...]
    terms: tuple[tuple[tuple[tuple[int, int, float], ...], float, float], ...]

    def realize(self, grid: Grid) -> ForcingSpec:
        mean = _mode_field(grid, self.mean_modes)
        terms = tuple(
            ForcingTerm(_mode_field(grid, modes), omega, phase)
            for modes, omega, phase in self.terms
        )
        return ForcingSpec(mean, terms, self.eta)


def _mode_field(grid: Grid, modes) -> SpectralField:
    c = np.zeros((grid.nx, grid.ny))
    for k, l, amp in modes:
        if not (1 <= k <= grid.nx and 1 <= l <= grid.ny):
            raise ValueError(f"mode ({k}, {l}) outside grid {grid.nx}x{grid.ny}")
        c[k - 1, l - 1] += amp
    return SpectralField(grid, c)


def parse_mode_list(text: str) -> tuple[tuple[int, int, float], ...]:
    """Parse 'k l amp, k l amp, ...' triples."""
    modes = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 3:
            raise ValueError(f"mode entry {chunk!r} is not 'k l amplitude'")
        k, l = int(parts[0]), int(parts[1])
        modes.append((k, l, float(parts[2])))
    return tuple(modes)


def parse_forcing_text(text: str) -> ForcingFileData:
    """Parse the line-oriented forcing file shared by the CLI and library.

    Top-level keys: eta, mean (inline mode list).  Each [term] section
    carries keys modes, omega and optional phase.
    """
    from .configfile import parse_sections  # local import, no cycle at module load

    sections = parse_sections(text)
    top = dict(sections[0][1])
    eta = float(top.pop("eta", "1"))
    mean = parse_mode_list(top.pop("mean", ""))
    if top:
        raise ValueError(f"unknown forcing keys: {sorted(top)}")
    terms = []
    for name, kv in sections[1:]:
        if name != "term":
            raise ValueError(f"unknown forcing section [{name}]")
        kv = dict(kv)
        modes = parse_mode_list(kv.pop("modes", ""))
        if not modes:
            raise ValueError("forcing [term] without modes")
        omega = float(kv.pop("omega"))
        phase = float(kv.pop("phase", "0"))
        if kv:
            raise ValueError(f"unknown [term] keys: {sorted(kv)}")
        terms.append((modes, omega, phase))
    return ForcingFileData(eta, mean, tuple(terms))


def load_forcing(path, grid: Grid) -> ForcingSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_forcing_text(fh.read()).realize(grid)
