"""CSV artifacts and the figures rendered alongside them.

Every CSV has one header row and floats printed with 17 significant
digits; files are written to a temporary name and renamed, so a run
directory never contains partial artifacts.  Each report also renders a
matplotlib figure next to the delimited output.
"""

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spectral import SpectralField, physical_values


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.append("# " + comment)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def _save(fig, path) -> None:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_trajectory(rows, path, title="trajectory norms") -> None:
    t = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for idx, label in ((1, "L2"), (2, "H1"), (3, "D(A)")):
        ax.plot(t, [r[idx] for r in rows], label=label)
    ax.set_xlabel("tau")
    ax.set_ylabel("norm")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def _floored(values):
    # Exact zeros (steady controls) would break the log axes.
    return [max(v, 1e-18) for v in values]


def render_comparison(rows, path) -> None:
    eps = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, _floored(r[1] for r in rows), "o-", label="sup ||z||_{1/2}")
    ax.loglog(eps, _floored(r[2] for r in rows), "s--", label="sup ||z||_{D(A)}")
    ax.set_xlabel("eps")
    ax.set_ylabel("sup norm of difference")
    ax.set_title("full vs averaged flow distance")
    ax.legend()
    _save(fig, path)


def render_corrector(rows, path) -> None:
    eps = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, _floored(r[2] for r in rows), "o-")
    ax.set_xlabel("eps")
    ax.set_ylabel("sup ||eps * v||_alpha")
    ax.set_title("bounded corrector decay")
    _save(fig, path)


def render_spectrum(report, path) -> None:
    re = [ev.real for ev in report.eigenvalues]
    im = [ev.imag for ev in report.eigenvalues]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(re, im, s=10)
    ax.axvline(0.0, color="k", lw=0.8)
    if report.gap_a > 0:
        ax.axvline(report.gap_a, color="tab:red", lw=0.8, ls="--",
                   label=f"gap a = {report.gap_a:.3g}")
        ax.legend()
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title(
        f"linearization spectrum (truncation {report.truncation}, "
        f"N = {report.n_unstable})"
    )
    _save(fig, path)


def render_decay(report, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    t = np.array(report.times)
    d = np.array(report.distances)
    ax.semilogy(t, np.maximum(d, 1e-300), label="distance")
    if report.fitted_rate:
        ax.semilogy(t, d[0] * np.exp(-report.fitted_rate * t), "--",
                    label=f"fit rate {report.fitted_rate:.3g}")
    ax.set_xlabel("tau")
    ax.set_ylabel("||omega - omega*||_{1/2}")
    ax.set_title("perturbation decay")
    ax.legend()
    _save(fig, path)


def render_frequencies(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for kind, color in (("candidate", "tab:blue"), ("control", "tab:red")):
        pts = [(r[0], r[1]) for r in rows if r[2] == kind]
        if pts:
            ax.vlines([p[0] for p in pts], 0, [p[1] for p in pts],
                      color=color, label=kind)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o", color=color)
    ax.set_xlabel("frequency (original time)")
    ax.set_ylabel("magnitude")
    ax.set_yscale("log")
    ax.set_title("response harmonic content")
    ax.legend()
    _save(fig, path)


def render_attractor(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog([r[0] for r in rows], _floored(r[1] for r in rows), "o-")
    ax.set_xlabel("eta")
    ax.set_ylabel("semi-distance (H1)")
    ax.set_title("attractor distance, full to averaged")
    _save(fig, path)


def render_series(x, y, path, xlabel="", ylabel="", title="", semilogy=False) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    (ax.semilogy if semilogy else ax.plot)(x, y)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)


def render_field(f: SpectralField, path, title="field") -> None:
    grid = f.grid
    vals = physical_values(grid, f.coeffs)
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(grid.x, grid.y, vals.T, shading="nearest", cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    _save(fig, path)
