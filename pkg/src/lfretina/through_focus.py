"""Through-focus sweeps and accommodation prediction.

A sweep evaluates a metric at nominal accommodations spaced ``step_D``
around the rendered depth.  The predicted accommodation is the sampled
accommodation with the highest metric value.  Accommodations beyond
infinity (negative absolute vergence) are never evaluated.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .display import DisplayConfig
from .eye_model import EyeInstance
from .metrics import NcsfParams, RadialMTF, cutoff_frequency, ncsf_grid, radial_mtf
from .optics import RetinalGrid, RetinaSimulator, SimulationOptions
from .zernike import ZernikeCoefficients

log = logging.getLogger(__name__)

METRICS = ("VSOTF", "Strehl")
DEFAULT_SPECTRUM = tuple(float(x) for x in range(400, 701, 10))

__all__ = [
    "METRICS",
    "ThroughFocusCurve",
    "PredictionRecord",
    "FocusEvaluator",
    "ExperimentResult",
    "relative_grid",
    "sweep",
    "predict_accommodation",
    "experiment_matrix",
]


def relative_grid(range_relD: tuple[float, float], step_D: float) -> np.ndarray:
    lo, hi = range_relD
    if step_D <= 0 or lo > hi:
        raise ValueError("invalid through-focus range")
    i0, i1 = int(round(lo / step_D)), int(round(hi / step_D))
    return np.round(np.arange(i0, i1 + 1) * step_D, 10)


@dataclass
class ThroughFocusCurve:
    relative_accommodation_D: np.ndarray
    metric: str
    values: np.ndarray
    rendered_abs_D: float
    peak_relD: float
    clamped: bool = False
    boundary_peak: bool = False
    eye_id: str = ""
    density: int = 1
    rendered_relD: float = 0.0

    @property
    def absolute_accommodation_D(self) -> np.ndarray:
        return self.rendered_abs_D + self.relative_accommodation_D


@dataclass(frozen=True)
class PredictionRecord:
    eye_id: str
    metric: str
    density: int
    rendered_rel_depth_D: float
    rendered_abs_D: float
    predicted_accommodation_D: float
    clamped: bool = False
    boundary_peak: bool = False

    @property
    def accommodation_error_D(self) -> float:
        return round(self.predicted_accommodation_D - self.rendered_abs_D, 10)


def _peak(values: np.ndarray, rel: np.ndarray, refine: bool) -> tuple[float, bool]:
    # np.argmax keeps the first maximum, i.e. the farthest accommodation
    i = int(np.argmax(values))
    boundary = i == 0 or i == len(values) - 1
    peak = float(rel[i])
    if refine and not boundary:
        y0, y1, y2 = values[i - 1], values[i], values[i + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            peak += 0.5 * (y0 - y2) / den * float(rel[i + 1] - rel[i])
    return peak, boundary


def make_curve(
    rel: np.ndarray,
    values: np.ndarray,
    metric: str,
    rendered_abs_D: float,
    clamped: bool = False,
    refine: bool = False,
    **ids,
) -> ThroughFocusCurve:
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise ValueError("through-focus curve is empty")
    peak, boundary = _peak(values, rel, refine)
    return ThroughFocusCurve(
        np.asarray(rel, dtype=float), metric, values, rendered_abs_D, peak, clamped, boundary, **ids
    )


class FocusEvaluator:
    """Metric evaluation for one eye against the diffraction-limited reference."""

    def __init__(
        self,
        eye: EyeInstance,
        z_cdp_D: float,
        pupil_diameter_mm: float,
        spectrum_nm: Sequence[float] = DEFAULT_SPECTRUM,
        grid: RetinalGrid = RetinalGrid(),
        options: SimulationOptions = SimulationOptions(),
        ncsf_params: NcsfParams = NcsfParams(),
    ):
        z_cdp_m = 1.0 / z_cdp_D
        self.sim = RetinaSimulator(eye, z_cdp_m, pupil_diameter_mm, spectrum_nm, grid, options)
        dl_eye = EyeInstance(
            ZernikeCoefficients.zero(pupil_diameter_mm), eye.sce_rho, eye.z_eye_m, eye_id="dl"
        )
        dl = RetinaSimulator(dl_eye, z_cdp_m, pupil_diameter_mm, spectrum_nm, grid, options)
        dl_otf = dl.retinal_otf(1, z_cdp_D, z_cdp_D)
        dl_psf = dl.psf_from_otf(dl_otf)
        self.dl_otf = dl.centre_otf(dl_otf, dl_psf)
        self.dl_peak = float(dl_psf.max())
        self.weights = ncsf_grid(grid.size, self.sim.freq_pitch_cpd, ncsf_params)
        self._dl_integral = float(np.sum(self.weights * self.dl_otf.real))

    def evaluate(self, density: int, rendered_D: float, acc_D: float, want_mtf: bool = False):
        """Return ({metric: value}, radial MTF or None) at one accommodation."""
        otf = self.sim.retinal_otf(density, rendered_D, acc_D)
        psf = self.sim.psf_from_otf(otf)
        centred = self.sim.centre_otf(otf, psf)
        vals = {
            "VSOTF": float(np.sum(self.weights * centred.real)) / self._dl_integral,
            "Strehl": float(psf.max()) / self.dl_peak,
        }
        mtf = radial_mtf(self.sim.otf_field(otf)) if want_mtf else None
        return vals, mtf


def sweep(
    eye: EyeInstance,
    display: DisplayConfig,
    z_r_m: float,
    metric: str = "VSOTF",
    range_relD: tuple[float, float] = (-2.4, 2.4),
    step_D: float = 0.2,
    *,
    spectrum_nm: Sequence[float] = DEFAULT_SPECTRUM,
    grid: RetinalGrid = RetinalGrid(),
    options: SimulationOptions = SimulationOptions(),
    ncsf_params: NcsfParams = NcsfParams(),
    evaluator: FocusEvaluator | None = None,
    refine: bool = False,
) -> ThroughFocusCurve:
    """Through-focus curve of ``metric`` for a point rendered at ``z_r_m``."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    if evaluator is None:
        evaluator = FocusEvaluator(
            eye, display.z_cdp_D, display.pupil_diameter_mm, spectrum_nm, grid, options, ncsf_params
        )
    rendered_D = 0.0 if math.isinf(z_r_m) else 1.0 / z_r_m
    rel_all = relative_grid(range_relD, step_D)
    keep = rendered_D + rel_all >= -1e-9
    rel = rel_all[keep]
    if rel.size == 0:
        raise ValueError("no accommodation left after excluding states beyond infinity")
    values = [
        evaluator.evaluate(display.density, rendered_D, max(rendered_D + r, 0.0))[0][metric]
        for r in rel
    ]
    return make_curve(
        rel,
        values,
        metric,
        rendered_D,
        clamped=bool((~keep).any()),
        refine=refine,
        eye_id=eye.eye_id,
        density=display.density,
        rendered_relD=round(rendered_D - display.z_cdp_D, 10),
    )


def predict_accommodation(curve: ThroughFocusCurve, z_r_m: float | None = None) -> PredictionRecord:
    """Accommodation (absolute dioptres) at the curve's peak."""
    rendered = curve.rendered_abs_D if z_r_m is None else (0.0 if math.isinf(z_r_m) else 1.0 / z_r_m)
    return PredictionRecord(
        eye_id=curve.eye_id,
        metric=curve.metric,
        density=curve.density,
        rendered_rel_depth_D=curve.rendered_relD,
        rendered_abs_D=rendered,
        predicted_accommodation_D=round(rendered + curve.peak_relD, 10),
        clamped=curve.clamped,
        boundary_peak=curve.boundary_peak,
    )


@dataclass
class ExperimentResult:
    records: list[PredictionRecord] = field(default_factory=list)
    curves: list[ThroughFocusCurve] = field(default_factory=list)
    #: radial MTF at the predicted focus, keyed by (eye_id, metric, density, rendered_relD)
    radial: dict = field(default_factory=dict)

    def mean_errors(self, metric: str = "VSOTF", include_boundary: bool = True) -> dict:
        """Mean and SD of accommodation error over sampled eyes per (density, depth).

        The eye named ``average`` is reported separately under ``average``.
        """
        groups: dict = {}
        for r in self.records:
            if r.metric != metric:
                continue
            g = groups.setdefault((r.density, r.rendered_rel_depth_D), {"errors": [], "average": None})
            if r.eye_id == "average":
                g["average"] = r.accommodation_error_D
            elif include_boundary or not r.boundary_peak:
                g["errors"].append(r.accommodation_error_D)
        out = {}
        for key, g in sorted(groups.items()):
            e = np.asarray(g["errors"], dtype=float)
            out[key] = {
                "mean": float(e.mean()) if e.size else float("nan"),
                "sd": float(e.std(ddof=1)) if e.size > 1 else 0.0,
                "n": int(e.size),
                "average": g["average"],
            }
        return out

    def cutoffs(self, threshold: float = 0.05, metric: str = "VSOTF") -> dict:
        return {
            key: cutoff_frequency(mtf, threshold)
            for key, mtf in sorted(self.radial.items())
            if key[1] == metric
        }


@dataclass(frozen=True)
class _Task:
    eye: EyeInstance
    density: int
    depths_relD: tuple[float, ...]
    z_cdp_D: float
    pupil_diameter_mm: float
    spectrum_nm: tuple[float, ...]
    grid: RetinalGrid
    options: SimulationOptions
    ncsf_params: NcsfParams
    metrics: tuple[str, ...]
    range_relD: tuple[float, float]
    step_D: float
    refine: bool


def _run_task(task: _Task) -> ExperimentResult:
    ev = FocusEvaluator(
        task.eye,
        task.z_cdp_D,
        task.pupil_diameter_mm,
        task.spectrum_nm,
        task.grid,
        task.options,
        task.ncsf_params,
    )
    rel = relative_grid(task.range_relD, task.step_D)
    plan: dict[float, list[tuple[float, float]]] = {}
    per_depth = {}
    for depth in task.depths_relD:
        rendered = task.z_cdp_D + depth
        keep = rendered + rel >= -1e-9
        per_depth[depth] = (rendered, rel[keep], bool((~keep).any()))
        for r in rel[keep]:
            acc = round(max(rendered + r, 0.0), 9)
            plan.setdefault(acc, []).append((depth, float(r)))
    values = {(d, m): {} for d in task.depths_relD for m in task.metrics}
    mtfs = {d: {} for d in task.depths_relD}
    for acc in sorted(plan):
        for depth, r in plan[acc]:
            vals, mtf = ev.evaluate(task.density, task.z_cdp_D + depth, acc, want_mtf=True)
            for m in task.metrics:
                values[(depth, m)][r] = vals[m]
            mtfs[depth][r] = mtf
    out = ExperimentResult()
    for depth in task.depths_relD:
        rendered, rels, clamped = per_depth[depth]
        for m in task.metrics:
            curve = make_curve(
                rels,
                [values[(depth, m)][float(r)] for r in rels],
                m,
                rendered,
                clamped,
                task.refine,
                eye_id=task.eye.eye_id,
                density=task.density,
                rendered_relD=depth,
            )
            out.curves.append(curve)
            rec = predict_accommodation(curve)
            out.records.append(rec)
            # MTF at the nearest sampled accommodation to the predicted one
            nearest = float(rels[int(np.argmin(np.abs(rels - curve.peak_relD)))])
            out.radial[(task.eye.eye_id, m, task.density, depth)] = mtfs[depth][nearest]
    log.info("eye %s density %d done", task.eye.eye_id, task.density)
    return out


def experiment_matrix(
    eyes: Sequence[EyeInstance],
    display: DisplayConfig,
    metrics: Iterable[str] = ("VSOTF",),
    densities: Sequence[int] | None = None,
    *,
    spectrum_nm: Sequence[float] = DEFAULT_SPECTRUM,
    grid: RetinalGrid = RetinalGrid(),
    options: SimulationOptions = SimulationOptions(),
    ncsf_params: NcsfParams = NcsfParams(),
    range_relD: tuple[float, float] = (-2.4, 2.4),
    step_D: float = 0.2,
    refine: bool = False,
    jobs: int = 1,
) -> ExperimentResult:
    """Evaluate every eye x density x rendered depth and predict accommodation.

    Density 1 (natural view) is only evaluated at the CDP.  Results are
    ordered by (eye, density, depth, metric) regardless of ``jobs``.
    """
    metrics = tuple(metrics)
    for m in metrics:
        if m not in METRICS:
            raise ValueError(f"unknown metric {m!r}; choose from {METRICS}")
    densities = tuple(densities) if densities is not None else (display.density,)
    tasks = []
    for eye in eyes:
        for k in densities:
            depths = (0.0,) if k == 1 else tuple(display.rendered_depths_relD)
            tasks.append(
                _Task(
                    eye,
                    int(k),
                    depths,
                    display.z_cdp_D,
                    display.pupil_diameter_mm,
                    tuple(float(x) for x in spectrum_nm),
                    grid,
                    options,
                    ncsf_params,
                    metrics,
                    tuple(range_relD),
                    step_D,
                    refine,
                )
            )
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_task, tasks))
    else:
        parts = [_run_task(t) for t in tasks]
    result = ExperimentResult()
    for part in parts:
        result.records.extend(part.records)
        result.curves.extend(part.curves)
        result.radial.update(part.radial)
    return result
