"""Parameter sweeps, transmission normalization and dark-resonance linewidths."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import partial
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .cavity import CavityParams, DetuningFamily, effective_decay_rate_cavity
from .errors import AmbiguousPeak, CptsimError, NormalizationUndefined, PeakError, UnresolvedPeak
from .lambda_system import LambdaParams, lambda_model, with_effective_decay
from .steady import solve_model
from .suscept import DEFAULT_OMEGA_SAMPLES, extract_orders, two_level_p3

FREE_COLUMNS = ("re_sigma13", "im_sigma13", "p1", "p2", "p3")
CAVITY_COLUMNS = FREE_COLUMNS + ("n_mean", "n_norm", "top_fock_pop")


def format_value(x: float) -> str:
    """17 significant digits in scientific notation; round-trips through ``float``."""
    return format(float(x), ".16e")


@dataclass(frozen=True)
class SweepSpec:
    """A model template swept along one parameter.

    ``effective_gamma_32`` adds the effective 1 -> 2 pumping channel computed for a
    reference emitter with that 3 -> 2 decay: pointwise ``P3 * G32`` from the
    two-level formula in free space, ``|eps / 2g|^2 * G32`` in the cavity.
    """

    template: LambdaParams | CavityParams
    axis: str = "delta_p"
    grid: tuple[float, ...] = ()
    effective_gamma_32: float | None = None
    n_max: int | None = None

    def __post_init__(self):
        names = {f.name for f in fields(self.template)}
        if self.axis not in names or self.axis == "n_max":
            raise ValueError(f"cannot sweep {self.axis!r}; choose one of {sorted(names - {'n_max'})}")
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 3:
            raise ValueError("sweep grid needs at least 3 points")
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("sweep grid must be strictly monotonic")
        object.__setattr__(self, "grid", tuple(float(v) for v in grid))

    @property
    def is_cavity(self) -> bool:
        return isinstance(self.template, CavityParams)

    @property
    def columns(self) -> tuple[str, ...]:
        return CAVITY_COLUMNS if self.is_cavity else FREE_COLUMNS


@dataclass
class SweepResult:
    axis: str
    values: np.ndarray
    columns: dict[str, np.ndarray]
    failed: np.ndarray
    errors: list[str | None] = field(default_factory=list)
    residuals: np.ndarray | None = None
    n_max: np.ndarray | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        if name == self.axis:
            return self.values
        return self.columns[name]

    def __len__(self) -> int:
        return self.values.size

    @property
    def header(self) -> tuple[str, ...]:
        return (self.axis,) + tuple(self.columns)

    def with_column(self, name: str, data) -> "SweepResult":
        cols = dict(self.columns)
        cols[name] = np.asarray(data, dtype=float)
        return replace(self, columns=cols)

    def to_csv(self, stream=None) -> str | None:
        """Write comma-separated rows with LF endings; returns the text if no stream given."""
        out = io.StringIO() if stream is None else stream
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.header)
        for i, v in enumerate(self.values):
            writer.writerow([format_value(v)] + [format_value(self.columns[c][i]) for c in self.columns])
        return out.getvalue() if stream is None else None


def read_csv(text: str) -> tuple[tuple[str, ...], np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    return tuple(rows[0]), np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)


def ordered_map(chunk_func, items: Sequence, workers: int = 1) -> list:
    """Apply ``chunk_func`` (list -> list) to contiguous chunks and concatenate in order."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return list(chunk_func(items))
    bounds = np.array_split(np.arange(len(items)), min(workers, len(items)))
    chunks = [[items[i] for i in b] for b in bounds]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        return [r for part in pool.map(chunk_func, chunks) for r in part]


def _point_row(spec: SweepSpec, value: float, family: DetuningFamily | None = None) -> dict:
    params = spec.template.replace(**{spec.axis: value})
    row = {"residual": float("nan"), "n_max": 0}
    if spec.is_cavity:
        rate = 0.0
        if spec.effective_gamma_32:
            rate = effective_decay_rate_cavity(params.epsilon, params.g, spec.effective_gamma_32)
        if family is None:
            family = DetuningFamily(params, rate)
        state, obs, n = family.solve(params.delta_p, spec.n_max)
        row.update(n_mean=obs.n_mean, top_fock_pop=obs.top_fock_pop, n_max=n)
    else:
        if spec.effective_gamma_32:
            rate = two_level_p3(params.omega_p, params.delta_p, params.gamma_3_total) * spec.effective_gamma_32
            model = with_effective_decay(params, float(rate))
        else:
            model = lambda_model(params)
        state, obs = solve_model(model)
    row.update(
        re_sigma13=obs.sigma13.real,
        im_sigma13=obs.sigma13.imag,
        p1=obs.p1,
        p2=obs.p2,
        p3=obs.p3,
        residual=state.residual,
    )
    return row


def _chunk_rows(spec: SweepSpec, values: Sequence[float]) -> list[dict | str]:
    family = None
    if spec.is_cavity and spec.axis == "delta_p":
        rate = 0.0
        if spec.effective_gamma_32:
            t = spec.template
            rate = effective_decay_rate_cavity(t.epsilon, t.g, spec.effective_gamma_32)
        family = DetuningFamily(spec.template, rate)
    out = []
    for v in values:
        try:
            out.append(_point_row(spec, v, family))
        except (CptsimError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(f"{type(exc).__name__}: {exc}")
    return out


def sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Solve every grid point; failures are recorded per row and the sweep continues.

    Points are split into contiguous chunks, one per worker, and reassembled in grid
    order, so the result does not depend on the worker count.
    """
    grid = list(spec.grid)
    rows = ordered_map(partial(_chunk_rows, spec), grid, workers)

    names = [c for c in spec.columns if c != "n_norm"]
    cols = {c: np.full(len(grid), np.nan) for c in names}
    failed = np.zeros(len(grid), dtype=bool)
    errors: list[str | None] = []
    residuals = np.full(len(grid), np.nan)
    n_used = np.zeros(len(grid), dtype=int)
    for i, row in enumerate(rows):
        if isinstance(row, str):
            failed[i] = True
            errors.append(row)
            continue
        errors.append(None)
        for c in names:
            cols[c][i] = row[c]
        residuals[i] = row["residual"]
        n_used[i] = row["n_max"]
    result = SweepResult(spec.axis, np.asarray(grid), cols, failed, errors, residuals, n_used)
    if spec.is_cavity:
        try:
            result = normalize_transmission(result)
        except NormalizationUndefined:
            result = result.with_column("n_norm", np.full(len(grid), np.nan))
        # keep the schema column order
        result.columns = {c: result.columns[c] for c in spec.columns}
    return result


def normalize_transmission(result: SweepResult) -> SweepResult:
    """Add ``n_norm = n_mean / max(n_mean)`` over the finite rows."""
    n = np.asarray(result["n_mean"], dtype=float)
    finite = np.isfinite(n)
    if not finite.any() or np.max(n[finite]) <= 0:
        raise NormalizationUndefined("no positive finite n_mean in sweep")
    top = np.max(n[finite])
    norm = n / top
    norm[finite & (n == top)] = 1.0
    return result.with_column("n_norm", norm)


@dataclass(frozen=True)
class PeakStats:
    center: float
    height: float
    fwhm: float
    left_half: float
    right_half: float
    resolved: bool


def _parabola_vertex(x, y):
    (x0, x1, x2), (y0, y1, y2) = x, y
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom
    if a >= 0:
        return x1, y1
    xv = -b / (2 * a)
    return xv, c - b**2 / (4 * a)


def peak_stats(x, y, window: tuple[float, float] | None = None, prominence: float = 1e-6) -> PeakStats:
    """Width of the single peak in ``y(x)`` at half of its height above zero.

    The apex is refined with a parabola through the highest sample and its two
    neighbours; half-height crossings are linearly interpolated between the
    bracketing samples. Local maxima lower than half the peak height, or with
    relative prominence below ``prominence``, are ignored when checking uniqueness.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(y)
    if window is not None:
        keep &= (x >= window[0]) & (x <= window[1])
    x, y = x[keep], y[keep]
    if x.size < 3:
        raise PeakError("need at least 3 finite samples in the window")
    order = np.argsort(x)
    x, y = x[order], y[order]

    i = int(np.argmax(y))
    if i == 0 or i == x.size - 1:
        raise UnresolvedPeak(f"maximum at window edge x={x[i]:.6g}")
    top = y[i]
    idx, _ = find_peaks(y, height=0.5 * top, prominence=prominence * abs(top))
    if idx.size > 1:
        raise AmbiguousPeak(f"{idx.size} maxima above half height at x={np.round(x[idx], 6).tolist()}")

    center, height = _parabola_vertex(x[i - 1 : i + 2], y[i - 1 : i + 2])
    half = 0.5 * height

    def crossing(step):
        j = i
        while 0 <= j + step < x.size:
            k = j + step
            if y[k] < half:
                return x[j] + (half - y[j]) * (x[k] - x[j]) / (y[k] - y[j])
            j = k
        return float("nan")

    left, right = crossing(-1), crossing(+1)
    resolved = bool(np.isfinite(left) and np.isfinite(right))
    width = right - left if resolved else float("nan")
    return PeakStats(float(center), float(height), float(width), float(left), float(right), resolved)


def fwhm(result: SweepResult, column: str = "n_norm", window: tuple[float, float] | None = None) -> PeakStats:
    ok = ~result.failed
    return peak_stats(result.values[ok], result[column][ok], window)


def adaptive_fwhm(
    p: CavityParams,
    gamma_12_eff: float = 0.0,
    samples: int = 41,
    min_inside: int = 20,
    max_rounds: int = 12,
    n_max: int | None = None,
) -> tuple[PeakStats, int]:
    """Linewidth of the transmission peak at the two-photon resonance.

    Starts from a detuning window of half-width ``g/2`` (``2 kappa`` without
    coupling) and rescales it around the peak until at least ``min_inside`` samples
    fall between the half-height crossings. Returns the stats and the number of
    steady-state solves used.
    """
    if samples % 2 == 0:
        samples += 1
    fam = DetuningFamily(p, gamma_12_eff)
    half_width = 0.5 * p.g if p.g > 0 else 2 * p.kappa
    widest = 0.9 * p.g if p.g > 0 else 10 * p.kappa
    center = 0.0
    solves = 0
    last = None
    for _ in range(max_rounds):
        grid = center + np.linspace(-half_width, half_width, samples)
        n = np.array([fam.solve(d, n_max)[1].n_mean for d in grid])
        solves += grid.size
        try:
            stats = peak_stats(grid, n)
        except UnresolvedPeak:
            stats = None
        last = stats
        if stats is None or not stats.resolved:
            if half_width >= widest:
                break
            half_width = min(2 * half_width, widest)
            continue
        inside = int(np.sum((grid >= stats.left_half) & (grid <= stats.right_half)))
        if inside >= min_inside:
            return stats, solves
        center = stats.center
        half_width = 0.8 * stats.fwhm
    if last is None or not last.resolved:
        raise UnresolvedPeak(f"half-height crossings not found within +-{half_width:.3g}")
    raise UnresolvedPeak(f"fewer than {min_inside} samples inside the FWHM after {max_rounds} rounds")


@dataclass
class FwhmCurve:
    thetas: np.ndarray
    fwhm: np.ndarray
    resolved: np.ndarray
    errors: list[str | None]

    @property
    def minimum(self) -> tuple[float, float]:
        """``(theta, fwhm)`` at the smallest width among resolved rows."""
        if not self.resolved.any():
            return float("nan"), float("nan")
        w = np.where(self.resolved, self.fwhm, np.inf)
        i = int(np.argmin(w))
        return float(self.thetas[i]), float(self.fwhm[i])


def _fwhm_rows(base: CavityParams, gamma_12_eff: float, thetas: Sequence[float]) -> list:
    out = []
    for t in thetas:
        try:
            stats, _ = adaptive_fwhm(base.replace(theta=float(t)), gamma_12_eff)
            out.append(stats.fwhm)
        except (PeakError, CptsimError, ValueError) as exc:
            out.append(f"{type(exc).__name__}: {exc}")
    return out


def theta_grid(lo: float = 1e-3, hi: float = 2.0, points: int = 40) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), points)


def fwhm_vs_theta(
    base: CavityParams,
    thetas: Sequence[float] | None = None,
    epsilon: float | None = None,
    gamma_12_eff: float = 0.0,
    workers: int = 1,
) -> FwhmCurve:
    """Dark-resonance FWHM for each control strength; unresolved rows are flagged."""
    if epsilon is not None:
        base = base.replace(epsilon=epsilon)
    thetas = theta_grid() if thetas is None else np.asarray(thetas, dtype=float)
    rows = ordered_map(partial(_fwhm_rows, base, gamma_12_eff), thetas.tolist(), workers)
    widths = np.array([r if not isinstance(r, str) else np.nan for r in rows], dtype=float)
    errors = [r if isinstance(r, str) else None for r in rows]
    return FwhmCurve(np.asarray(thetas), widths, np.isfinite(widths), errors)


ORDER_COLUMNS = ("re_c1", "im_c1", "re_c3", "im_c3", "re_c5", "im_c5", "fit_residual")


def _order_rows(template: LambdaParams, omegas: tuple[float, ...], deltas: Sequence[float]) -> list:
    out = []
    for d in deltas:
        p = template.replace(delta_p=float(d))
        try:
            out.append(extract_orders(lambda w: lambda_model(p.replace(omega_p=w)), float(d), omegas))
        except (CptsimError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(f"{type(exc).__name__}: {exc}")
    return out


def orders_sweep(
    template: LambdaParams,
    grid: Sequence[float],
    omega_samples: Sequence[float] = DEFAULT_OMEGA_SAMPLES,
    workers: int = 1,
) -> SweepResult:
    """Odd-order probe coefficients c1, c3, c5 of <s13> at each detuning in ``grid``."""
    grid = np.asarray(grid, dtype=float)
    rows = ordered_map(partial(_order_rows, template, tuple(omega_samples)), grid.tolist(), workers)
    cols = {c: np.full(grid.size, np.nan) for c in ORDER_COLUMNS}
    failed = np.zeros(grid.size, dtype=bool)
    errors: list[str | None] = []
    for i, r in enumerate(rows):
        if isinstance(r, str):
            failed[i] = True
            errors.append(r)
            continue
        errors.append(None)
        for name, z in (("c1", r.c1), ("c3", r.c3), ("c5", r.c5)):
            cols[f"re_{name}"][i] = z.real
            cols[f"im_{name}"][i] = z.imag
        cols["fit_residual"][i] = r.fit_residual
    return SweepResult("delta_p", grid, cols, failed, errors)
