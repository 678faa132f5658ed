"""Convergence experiments with coupled (nested) truncations.

Each Monte Carlo sample makes one draw at the reference band kappa_ref and
measures err(kappa) = || T^{kappa_ref} - T^kappa || for every kappa in the
config, where T^kappa is the literal partial sum of the same draw. Errors
are aggregated as RMS over samples (so the L2 variant estimates
E||.||^2 exactly, whose value is an analytic spectral tail), a log-log
line is fitted by OLS, and the table is emitted as CSV plus a
self-contained SVG plot.

Experiment kinds: grf_ms / grf_path for the plain field truncation,
heat_ms / heat_path for the heat-equation solution at the final time with
X0 = 0 (path kinds use a single sample).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .grids import SphereGrid, make_grid
from .heat import ModeState, QWienerSpec, TimeGrid, evolve, synthesize_state_nested
from .rng import RngStream
from .sampler import draw_coefficients, grid_norms, synthesize_nested
from .spectrum import PowerLaw

KINDS = ("grf_ms", "grf_path", "heat_ms", "heat_path")


class DegenerateFitError(ValueError):
    """Rate fit needs at least two rows with positive errors."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    alpha: float
    c: float = 1.0
    kappas: tuple[int, ...] = (2, 4, 8, 16, 32, 64)
    kappa_ref: int = 128
    n_samples: int = 1000
    grid_kind: str = "equiangular"
    n_theta: int = 64
    n_phi: int = 128
    t_final: float = 1.0
    n_steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.alpha <= 0 or self.c <= 0:
            raise ValueError("alpha and c must be positive")
        ks = tuple(int(k) for k in self.kappas)
        if not ks or list(ks) != sorted(set(ks)) or ks[0] < 0:
            raise ValueError("kappas must be a nonempty increasing sequence")
        if ks[-1] >= self.kappa_ref:
            raise ValueError("max(kappas) must be below kappa_ref")
        object.__setattr__(self, "kappas", ks)
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.kind.endswith("_path") and self.n_samples != 1:
            raise ValueError("path experiments use exactly one sample")
        if self.kind.startswith("heat") and (self.t_final <= 0 or self.n_steps < 1):
            raise ValueError("heat experiments need t_final > 0 and n_steps >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["kappas"] = tuple(d["kappas"])
        return cls(**d)

    @property
    def theoretical_slope(self) -> float:
        if self.kind.startswith("grf"):
            return -(self.alpha - 2.0) / 2.0
        return -self.alpha / 2.0


@dataclass(frozen=True)
class ErrorRow:
    kappa: int
    err_sup: float
    err_l2: float
    stderr_l2: float  # delta-method stderr of the RMS; 0 for single samples


@dataclass(frozen=True)
class ErrorTable:
    rows: tuple[ErrorRow, ...]
    fitted_slope_sup: float
    fitted_slope_l2: float
    theoretical_slope: float
    config: dict = field(default_factory=dict)

    def to_csv_text(self) -> str:
        lines = ["kappa,err_sup,err_l2,stderr_l2"]
        for r in self.rows:
            lines.append(f"{r.kappa},{r.err_sup!r},{r.err_l2!r},{r.stderr_l2!r}")
        return "\n".join(lines) + "\n"


class RateFit(NamedTuple):
    slope: float
    intercept: float
    residual: float


def fit_rate(kappas, errors) -> RateFit:
    """OLS of log err against log kappa; residual is the RMS misfit."""
    kappas = np.asarray(kappas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if kappas.size < 2 or np.any(errors <= 0) or np.any(kappas <= 0):
        raise DegenerateFitError("need >= 2 rows with positive kappa and error")
    x = np.log(kappas)
    y = np.log(errors)
    design = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([slope, intercept])
    return RateFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def _fit_or_nan(kappas, errors) -> float:
    try:
        return fit_rate(kappas, errors).slope
    except DegenerateFitError:
        return math.nan


def _sample_errors_grf(config: ExperimentConfig, spectrum, grid: SphereGrid,
                       rng: RngStream, bands, s: int) -> tuple[np.ndarray, np.ndarray]:
    draw = draw_coefficients(spectrum, config.kappa_ref, rng, s)
    fields = synthesize_nested(draw, spectrum, grid, list(bands) + [config.kappa_ref])
    ref = fields[-1]
    norms = [grid_norms(ref, f) for f in fields[:-1]]
    return (np.array([n.l2 for n in norms]), np.array([n.sup for n in norms]))


def _sample_errors_heat(config: ExperimentConfig, qspec: QWienerSpec, grid: SphereGrid,
                        rng: RngStream, bands, s: int) -> tuple[np.ndarray, np.ndarray]:
    tg = TimeGrid.uniform(config.t_final, config.n_steps)
    state = evolve(ModeState.zero(config.kappa_ref), tg, qspec, rng, s)
    fields = synthesize_state_nested(state, grid, list(bands) + [config.kappa_ref])
    ref = fields[-1]
    norms = [grid_norms(ref, f) for f in fields[:-1]]
    return (np.array([n.l2 for n in norms]), np.array([n.sup for n in norms]))


def run_experiment(config: ExperimentConfig, n_workers: int = 1) -> ErrorTable:
    """Run the configured experiment; deterministic for any worker count.

    Per-sample work is keyed by the sample index alone and results are
    reduced in index order, so the output bytes do not depend on n_workers.
    """
    grid = make_grid(config.grid_kind, config.n_theta, config.n_phi)
    rng = RngStream(config.seed)
    spectrum = PowerLaw(alpha=config.alpha, C=config.c)
    bands = list(config.kappas)

    if config.kind.startswith("grf"):
        def work(s):
            return _sample_errors_grf(config, spectrum, grid, rng, bands, s)
    else:
        qspec = QWienerSpec(spectrum)

        def work(s):
            return _sample_errors_heat(config, qspec, grid, rng, bands, s)

    # warm the per-grid basis caches once so threads only read them
    grid.legendre_blocks(config.kappa_ref)
    grid.azimuth_tables(config.kappa_ref)

    indices = range(config.n_samples)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(work, indices))
    else:
        results = [work(s) for s in indices]

    l2 = np.stack([r[0] for r in results])  # (n_samples, n_bands)
    sup = np.stack([r[1] for r in results])
    n = config.n_samples
    mean_l2sq = np.mean(l2**2, axis=0)
    err_l2 = np.sqrt(mean_l2sq)
    err_sup = np.sqrt(np.mean(sup**2, axis=0))
    if n > 1:
        se_meansq = np.std(l2**2, axis=0, ddof=1) / math.sqrt(n)
    else:
        se_meansq = np.zeros_like(mean_l2sq)
    stderr = np.where(err_l2 > 0, se_meansq / np.where(err_l2 > 0, 2 * err_l2, 1.0), 0.0)

    rows = tuple(
        ErrorRow(int(k), float(err_sup[i]), float(err_l2[i]), float(stderr[i]))
        for i, k in enumerate(bands)
    )
    return ErrorTable(
        rows=rows,
        fitted_slope_sup=_fit_or_nan(bands, err_sup),
        fitted_slope_l2=_fit_or_nan(bands, err_l2),
        theoretical_slope=config.theoretical_slope,
        config=config.to_dict(),
    )


def run_grf_ms(config: ExperimentConfig, n_workers: int = 1) -> ErrorTable:
    if config.kind != "grf_ms":
        raise ValueError("config kind must be grf_ms")
    return run_experiment(config, n_workers)


def run_grf_path(config: ExperimentConfig, n_workers: int = 1) -> ErrorTable:
    if config.kind != "grf_path":
        raise ValueError("config kind must be grf_path")
    return run_experiment(config, n_workers)


def run_heat_ms(config: ExperimentConfig, n_workers: int = 1) -> ErrorTable:
    if config.kind != "heat_ms":
        raise ValueError("config kind must be heat_ms")
    return run_experiment(config, n_workers)


def run_heat_path(config: ExperimentConfig, n_workers: int = 1) -> ErrorTable:
    if config.kind != "heat_path":
        raise ValueError("config kind must be heat_path")
    return run_experiment(config, n_workers)


# -- report emission ----------------------------------------------------------

_SVG_W, _SVG_H = 800, 600
_MARGIN = (70.0, 20.0, 45.0, 55.0)  # left, right, top, bottom


def _log_ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def emit_report(table: ErrorTable, path_prefix) -> tuple[Path, Path]:
    """Write `<prefix>.csv` and a log-log `<prefix>.svg`; no partial files.

    The SVG holds one circle per row (L2 errors), one fitted line, and one
    theoretical reference line anchored at the first data point.
    """
    if not table.rows:
        raise ValueError("cannot emit a report for an empty table")
    if any(r.err_l2 <= 0 for r in table.rows) or math.isnan(table.fitted_slope_l2):
        raise ValueError("report needs positive errors and a valid fit")
    prefix = Path(path_prefix)
    csv_path = prefix.with_suffix(".csv")
    svg_path = prefix.with_suffix(".svg")

    kappas = np.array([r.kappa for r in table.rows], dtype=float)
    errs = np.array([r.err_l2 for r in table.rows])
    xs = np.log10(kappas)
    ys = np.log10(errs)
    fit = fit_rate(kappas, errs)
    th = table.theoretical_slope
    y_th = ys[0] + th * (xs - xs[0])  # reference line through the first point
    y_fit = (fit.intercept + fit.slope * np.log(kappas)) / math.log(10.0)

    ml, mr, mt, mb = _MARGIN
    x_lo, x_hi = xs.min() - 0.15, xs.max() + 0.15
    all_y = np.concatenate([ys, y_th, y_fit])
    y_lo, y_hi = all_y.min() - 0.25, all_y.max() + 0.25

    def px(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * (_SVG_W - ml - mr)

    def py(y):
        return _SVG_H - mb - (y - y_lo) / (y_hi - y_lo) * (_SVG_H - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect x="{ml}" y="{mt}" width="{_SVG_W - ml - mr}" '
        f'height="{_SVG_H - mt - mb}" fill="white" stroke="black"/>',
    ]
    kind = table.config.get("kind", "experiment")
    subtitle = (
        f"{kind}: alpha={table.config.get('alpha')} n={table.config.get('n_samples')} "
        f"grid={table.config.get('grid_kind')} {table.config.get('n_theta')}x"
        f"{table.config.get('n_phi')} seed={table.config.get('seed')} | "
        f"fit {fit.slope:.4f}, reference {th:.4f} (L2 errors, RMS over samples)"
    )
    parts.append(f'<text x="{ml}" y="20" font-size="13">{subtitle}</text>')
    # tick marks and labels drawn as paths/text so lines stay data-only
    tick_path = []
    for t in _log_ticks(x_lo, x_hi):
        if x_lo <= t <= x_hi:
            tick_path.append(f"M {px(t):.2f} {_SVG_H - mb:.2f} v 6")
            parts.append(
                f'<text x="{px(t):.2f}" y="{_SVG_H - mb + 20:.2f}" font-size="12" '
                f'text-anchor="middle">1e{t}</text>'
            )
    for t in _log_ticks(y_lo, y_hi):
        if y_lo <= t <= y_hi:
            tick_path.append(f"M {ml:.2f} {py(t):.2f} h -6")
            parts.append(
                f'<text x="{ml - 10:.2f}" y="{py(t) + 4:.2f}" font-size="12" '
                f'text-anchor="end">1e{t}</text>'
            )
    if tick_path:
        parts.append(f'<path d="{" ".join(tick_path)}" stroke="black" fill="none"/>')
    parts.append(
        f'<text x="{(ml + _SVG_W - mr) / 2:.2f}" y="{_SVG_H - 12}" font-size="13" '
        f'text-anchor="middle">truncation band</text>'
    )
    parts.append(
        f'<text x="18" y="{(mt + _SVG_H - mb) / 2:.2f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 18 {(mt + _SVG_H - mb) / 2:.2f})">'
        f"error</text>"
    )
    parts.append(
        f'<line x1="{px(xs[0]):.2f}" y1="{py(y_fit[0]):.2f}" '
        f'x2="{px(xs[-1]):.2f}" y2="{py(y_fit[-1]):.2f}" stroke="blue"/>'
    )
    parts.append(
        f'<line x1="{px(xs[0]):.2f}" y1="{py(y_th[0]):.2f}" '
        f'x2="{px(xs[-1]):.2f}" y2="{py(y_th[-1]):.2f}" '
        f'stroke="red" stroke-dasharray="6 4"/>'
    )
    for x, y in zip(xs, ys):
        parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="black"/>')
    parts.append("</svg>")

    csv_path.write_text(table.to_csv_text())
    svg_path.write_text("\n".join(parts) + "\n")
    return csv_path, svg_path
