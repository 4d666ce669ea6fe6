"""Experiment configuration: a single JSON document with unit-suffixed fields.

Example (all sections optional except ``eyes``)::

    {
      "display": {"z_cdp_D": 2.0, "pupil_diameter_mm": 3.0,
                  "densities": [2, 3, 4],
                  "rendered_depths_relD": [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]},
      "eyes": {"population": "builtin", "count": 10, "seed": 2024, "include_average": true},
      "spectrum": {"min_nm": 400, "max_nm": 700, "step_nm": 10, "reference_nm": 550},
      "metrics": ["VSOTF", "Strehl"],
      "grid": {"size": 256, "pitch_um": 1.0},
      "through_focus": {"range_relD": [-2.4, 2.4], "step_D": 0.2, "refine": false},
      "optics": {"include_accommodation_sa": true, "sa_reading": "absolute",
                 "sa_induced_defocus": false},
      "ncsf": "builtin",
      "outputs": {"dir": "results", "psf_png": []},
      "jobs": 1
    }

Instead of a population, ``eyes`` may name a long-format coefficient CSV
(``eye_id,j,n,m,value_um``, as written by ``lfretina sample-eyes``) with
``{"coefficients_csv": "...", "pupil_diameter_mm": 6.0}``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .display import DisplayConfig
from .eye_model import (
    EyeInstance,
    _luminosity_table,
    average_eye,
    load_population,
    sample_eyes,
    spectrum,
)
from .metrics import NcsfParams, load_ncsf_params
from .optics import RetinalGrid, SimulationOptions, pupil_grid_for
from .through_focus import METRICS
from .zernike import ZernikeCoefficients, osa_index, rescale_pupil

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "PsfRequest"]

DENSITIES = (1, 2, 3, 4)


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` starts with ``path:line: field:``."""

    def __init__(self, message: str, field: str = "", line: int | None = None, path: str = ""):
        self.field = field
        self.line = line
        self.path = path
        where = f"{path}:{line}" if line else path or "<config>"
        super().__init__(f"{where}: {field + ': ' if field else ''}{message}")


@dataclass(frozen=True)
class PsfRequest:
    eye_id: str
    density: int
    rendered_relD: float
    accommodation_D: float


@dataclass
class ExperimentConfig:
    display: DisplayConfig
    densities: tuple[int, ...]
    population: str | None = "builtin"
    count: int = 10
    seed: int | None = None
    include_average: bool = True
    coefficients_csv: str | None = None
    coefficients_pupil_mm: float | None = None
    spectrum_nm: tuple[float, ...] = tuple(float(x) for x in range(400, 701, 10))
    metrics: tuple[str, ...] = ("VSOTF",)
    grid: RetinalGrid = RetinalGrid()
    range_relD: tuple[float, float] = (-2.4, 2.4)
    step_D: float = 0.2
    refine: bool = False
    options: SimulationOptions = SimulationOptions()
    ncsf: str = "builtin"
    out_dir: str = "results"
    psf_png: tuple[PsfRequest, ...] = ()
    jobs: int = 1
    source_text: str = field(default="", repr=False)
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def condition_count(self) -> int:
        """Number of prediction records the run will produce."""
        eyes = (self.count if self.coefficients_csv is None else len(self._csv_rows())) + int(
            self.include_average and self.coefficients_csv is None
        )
        per_eye = sum(1 if k == 1 else len(self.display.rendered_depths_relD) for k in self.densities)
        return eyes * per_eye * len(self.metrics)

    def resolve(self, path: str) -> Path:
        return _asset(self.base_dir, path)

    def ncsf_params(self) -> NcsfParams:
        return load_ncsf_params(None if self.ncsf == "builtin" else self.resolve(self.ncsf))

    def _csv_rows(self) -> dict[str, dict[int, float]]:
        eyes: dict[str, dict[int, float]] = {}
        with open(self.resolve(self.coefficients_csv), newline="") as fh:
            for row in csv.DictReader(fh):
                j = osa_index(int(row["n"]), int(row["m"])) if row.get("n") else int(row["j"])
                eyes.setdefault(row["eye_id"], {})[j] = float(row["value_um"])
        return eyes

    def build_eyes(self, seed: int | None = None) -> list[EyeInstance]:
        d = self.display.pupil_diameter_mm
        if self.coefficients_csv is not None:
            eyes = []
            for eye_id, modes in self._csv_rows().items():
                vec = [modes.get(j, 0.0) for j in range(max(modes) + 1)]
                zc = ZernikeCoefficients.from_osa(vec, self.coefficients_pupil_mm)
                eyes.append(EyeInstance(rescale_pupil(zc, d), eye_id=eye_id))
            return eyes
        model = load_population(None if self.population == "builtin" else self.resolve(self.population))
        seed = self.seed if seed is None else seed
        eyes = sample_eyes(model, self.count, seed, pupil_diameter_mm=d)
        if self.include_average:
            eyes.append(average_eye(model, d))
        return eyes


def _asset(base: Path, name: str) -> Path:
    """Asset paths are relative to the config file's directory."""
    p = Path(name)
    return p if p.is_absolute() else base / p


def _line_of(text: str, path: tuple[str, ...]) -> int | None:
    """Line number of the last key in ``path``, searching after its parents."""
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


class _Reader:
    def __init__(self, doc: dict, text: str, path: str):
        self.doc, self.text, self.path = doc, text, path

    def fail(self, keys: tuple[str, ...], message: str):
        raise ConfigError(message, ".".join(keys), _line_of(self.text, keys), self.path)

    def section(self, name: str) -> dict:
        sec = self.doc.get(name, {})
        if not isinstance(sec, dict):
            self.fail((name,), "must be an object")
        return sec

    def get(self, keys: tuple[str, ...], default: Any, kind):
        node: Any = self.doc
        for k in keys[:-1]:
            node = node.get(k, {}) if isinstance(node, dict) else {}
        if not isinstance(node, dict) or keys[-1] not in node:
            return default
        value = node[keys[-1]]
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                return int(value)
            if kind is float:
                if isinstance(value, bool):
                    raise TypeError
                out = float(value)
                if not math.isfinite(out):
                    raise TypeError
                return out
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
            if kind is list:
                if not isinstance(value, list):
                    raise TypeError
                return value
        except (TypeError, ValueError):
            self.fail(keys, f"expected {kind.__name__}, got {value!r}")
        raise AssertionError(kind)

    def check_keys(self, section: str, allowed: set[str]):
        node = self.doc if not section else self.doc.get(section, {})
        for key in node:
            if key not in allowed:
                self.fail((section, key) if section else (key,), "unknown field")


def parse_config(text: str, path: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=path) from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", path=path)
    r = _Reader(doc, text, path)
    r.check_keys(
        "",
        {"display", "eyes", "spectrum", "metrics", "grid", "through_focus", "optics", "ncsf", "outputs", "jobs"},
    )
    for sec in ("display", "eyes", "spectrum", "grid", "through_focus", "optics", "outputs"):
        r.section(sec)
    r.check_keys("display", {"z_cdp_D", "pupil_diameter_mm", "densities", "rendered_depths_relD"})
    r.check_keys("eyes", {"population", "count", "seed", "include_average", "coefficients_csv", "pupil_diameter_mm"})
    r.check_keys("spectrum", {"min_nm", "max_nm", "step_nm", "reference_nm"})
    r.check_keys("grid", {"size", "pitch_um"})
    r.check_keys("through_focus", {"range_relD", "step_D", "refine"})
    r.check_keys("optics", {"include_accommodation_sa", "sa_reading", "sa_induced_defocus"})
    r.check_keys("outputs", {"dir", "psf_png"})

    # display
    z_cdp = r.get(("display", "z_cdp_D"), 2.0, float)
    if not 0 < z_cdp <= 10:
        r.fail(("display", "z_cdp_D"), "must lie in (0, 10] dioptres")
    pupil = r.get(("display", "pupil_diameter_mm"), 3.0, float)
    if not 1.0 <= pupil <= 8.0:
        r.fail(("display", "pupil_diameter_mm"), "must lie in [1, 8] mm")
    dens_raw = r.get(("display", "densities"), [2, 3, 4], list)
    densities = []
    for k in dens_raw:
        if isinstance(k, bool) or not isinstance(k, int) or k not in DENSITIES:
            r.fail(("display", "densities"), f"each density must be one of {DENSITIES}, got {k!r}")
        densities.append(k)
    if not densities or len(set(densities)) != len(densities):
        r.fail(("display", "densities"), "must be a non-empty list without repeats")
    depths_raw = r.get(("display", "rendered_depths_relD"), [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2], list)
    depths = []
    for dep in depths_raw:
        if isinstance(dep, bool) or not isinstance(dep, (int, float)) or not math.isfinite(dep):
            r.fail(("display", "rendered_depths_relD"), f"not a number: {dep!r}")
        if z_cdp + dep < 0 or abs(dep) > 5:
            r.fail(("display", "rendered_depths_relD"), f"depth {dep:+g} D is beyond infinity or over 5 D from the CDP")
        depths.append(round(float(dep), 10))
    if not depths or len(set(depths)) != len(depths):
        r.fail(("display", "rendered_depths_relD"), "must be a non-empty list without repeats")
    display = DisplayConfig(z_cdp, densities[0], pupil, tuple(sorted(depths)))

    # eyes
    if "eyes" not in doc:
        raise ConfigError("missing required section", "eyes", None, path)
    csv_path = r.get(("eyes", "coefficients_csv"), None, str)
    population = r.get(("eyes", "population"), None if csv_path else "builtin", str)
    if csv_path and population:
        r.fail(("eyes", "population"), "give either population or coefficients_csv, not both")
    base = base_dir if base_dir is not None else Path(path).resolve().parent
    count = r.get(("eyes", "count"), 10, int)
    seed = r.get(("eyes", "seed"), None, int)
    coeff_pupil = None
    if csv_path:
        if not _asset(base, csv_path).is_file():
            r.fail(("eyes", "coefficients_csv"), f"file not found: {csv_path}")
        coeff_pupil = r.get(("eyes", "pupil_diameter_mm"), None, float)
        if coeff_pupil is None:
            r.fail(("eyes", "pupil_diameter_mm"), "required with coefficients_csv")
        if coeff_pupil < pupil:
            r.fail(("eyes", "pupil_diameter_mm"), "must be >= display.pupil_diameter_mm")
    else:
        if not 1 <= count <= 100000:
            r.fail(("eyes", "count"), "must lie in [1, 100000]")
        if seed is None:
            r.fail(("eyes", "seed"), "required when eyes are sampled")
        if seed < 0:
            r.fail(("eyes", "seed"), "must be >= 0")
        if population != "builtin" and not _asset(base, population).is_file():
            r.fail(("eyes", "population"), f"file not found: {population}")
        try:
            model = load_population(None if population == "builtin" else _asset(base, population))
        except (ValueError, KeyError) as exc:
            r.fail(("eyes", "population"), f"invalid population asset: {exc}")
        if model.pupil_diameter_mm < pupil:
            r.fail(("eyes", "population"), "asset pupil is smaller than display.pupil_diameter_mm")
    include_average = r.get(("eyes", "include_average"), True, bool)

    # spectrum
    lam_tab, _ = _luminosity_table()
    lo_tab, hi_tab = float(lam_tab[0]), float(lam_tab[-1])
    lo = r.get(("spectrum", "min_nm"), 400.0, float)
    hi = r.get(("spectrum", "max_nm"), 700.0, float)
    step = r.get(("spectrum", "step_nm"), 10.0, float)
    ref = r.get(("spectrum", "reference_nm"), 550.0, float)
    if not lo_tab <= lo <= hi_tab:
        r.fail(("spectrum", "min_nm"), f"must lie in [{lo_tab:g}, {hi_tab:g}] nm")
    if not lo <= hi <= hi_tab:
        r.fail(("spectrum", "max_nm"), f"must lie in [min_nm, {hi_tab:g}] nm")
    if step <= 0 or (hi > lo and abs((hi - lo) / step - round((hi - lo) / step)) > 1e-9):
        r.fail(("spectrum", "step_nm"), "must be > 0 and divide max_nm - min_nm")
    if not lo_tab <= ref <= hi_tab:
        r.fail(("spectrum", "reference_nm"), f"must lie in [{lo_tab:g}, {hi_tab:g}] nm")
    spec = tuple(spectrum(lo, hi, step)) if hi > lo else (lo,)

    # metrics
    metrics = r.get(("metrics",), ["VSOTF"], list)
    if not metrics or any(m not in METRICS for m in metrics) or len(set(metrics)) != len(metrics):
        r.fail(("metrics",), f"must be a non-empty subset of {list(METRICS)}")

    # grid
    size = r.get(("grid", "size"), 256, int)
    if size < 32 or size > 4096 or size & (size - 1):
        r.fail(("grid", "size"), "must be a power of two in [32, 4096]")
    pitch = r.get(("grid", "pitch_um"), 1.0, float)
    if not 0.05 <= pitch <= 10:
        r.fail(("grid", "pitch_um"), "must lie in [0.05, 10] um")
    grid = RetinalGrid(size, pitch)
    try:
        for lam in (spec[0], spec[-1]):
            pupil_grid_for(grid, lam, EyeInstance(ZernikeCoefficients.zero(pupil)).z_eye_m, pupil)
    except ValueError as exc:
        r.fail(("grid", "pitch_um"), str(exc))

    # through-focus
    rng_raw = r.get(("through_focus", "range_relD"), [-2.4, 2.4], list)
    if (
        len(rng_raw) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in rng_raw)
        or not (rng_raw[0] <= -1 and rng_raw[1] >= 1)
    ):
        r.fail(("through_focus", "range_relD"), "must be [low, high] with low <= -1 and high >= 1")
    tf_step = r.get(("through_focus", "step_D"), 0.2, float)
    if not 0.01 <= tf_step <= 1:
        r.fail(("through_focus", "step_D"), "must lie in [0.01, 1] D")
    refine = r.get(("through_focus", "refine"), False, bool)

    # optics
    reading = r.get(("optics", "sa_reading"), "absolute", str)
    if reading not in ("absolute", "relative"):
        r.fail(("optics", "sa_reading"), "must be 'absolute' or 'relative'")
    options = SimulationOptions(
        lambda_ref_nm=ref,
        include_accommodation_sa=r.get(("optics", "include_accommodation_sa"), True, bool),
        sa_reading=reading,
        sa_induced_defocus=r.get(("optics", "sa_induced_defocus"), False, bool),
    )

    ncsf = r.get(("ncsf",), "builtin", str)
    if ncsf != "builtin":
        if not _asset(base, ncsf).is_file():
            r.fail(("ncsf",), f"file not found: {ncsf}")
        try:
            load_ncsf_params(_asset(base, ncsf))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            r.fail(("ncsf",), f"invalid NCSF parameters: {exc}")

    out_dir = r.get(("outputs", "dir"), "results", str)
    requests = []
    for i, item in enumerate(r.get(("outputs", "psf_png"), [], list)):
        try:
            req = PsfRequest(
                str(item["eye_id"]),
                int(item["density"]),
                float(item["rendered_relD"]),
                float(item["accommodation_D"]),
            )
        except (KeyError, TypeError, ValueError):
            r.fail(("outputs", "psf_png"), f"entry {i} needs eye_id, density, rendered_relD, accommodation_D")
        if req.density not in DENSITIES or req.accommodation_D < 0 or z_cdp + req.rendered_relD < 0:
            r.fail(("outputs", "psf_png"), f"entry {i} is out of range")
        requests.append(req)

    jobs = r.get(("jobs",), 1, int)
    if not 1 <= jobs <= 256:
        r.fail(("jobs",), "must lie in [1, 256]")

    return ExperimentConfig(
        display=display,
        densities=tuple(densities),
        population=population if not csv_path else None,
        count=count,
        seed=seed,
        include_average=include_average,
        coefficients_csv=csv_path,
        coefficients_pupil_mm=coeff_pupil,
        spectrum_nm=spec,
        metrics=tuple(metrics),
        grid=grid,
        range_relD=(float(rng_raw[0]), float(rng_raw[1])),
        step_D=tf_step,
        refine=refine,
        options=options,
        ncsf=ncsf,
        out_dir=out_dir,
        psf_png=tuple(requests),
        jobs=jobs,
        source_text=text,
        base_dir=base,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(p)) from None
    return parse_config(text, str(p), p.resolve().parent)
