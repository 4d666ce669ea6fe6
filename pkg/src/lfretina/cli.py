"""Command-line entry point: ``lfretina {run,validate,render-figures,sample-eyes}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
import time
from collections import defaultdict
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, ExperimentConfig, load_config
from .eye_model import EyeInstance, eyes_to_rows, load_population, sample_eyes
from .optics import RetinaSimulator
from .through_focus import ExperimentResult, experiment_matrix

log = logging.getLogger("lfretina")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CUTOFF_THRESHOLD = 0.05
RESULT_FILES = ("results.csv", "through_focus.csv", "radial_mtf.csv", "cutoff.csv")


def _num(x: float) -> str:
    return format(float(x), ".10g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _asset_hashes(cfg: ExperimentConfig) -> dict:
    data = resources.files("lfretina") / "data"
    out = {"luminosity": _sha256((data / "cie2008_v2deg.csv").read_bytes())}
    if cfg.coefficients_csv:
        out["coefficients"] = _sha256(cfg.resolve(cfg.coefficients_csv).read_bytes())
    elif cfg.population == "builtin":
        out["population"] = _sha256((data / "population_6mm.json").read_bytes())
    else:
        out["population"] = _sha256(cfg.resolve(cfg.population).read_bytes())
    src = data / "ncsf_watson_ahumada.json" if cfg.ncsf == "builtin" else cfg.resolve(cfg.ncsf)
    out["ncsf"] = _sha256(src.read_bytes())
    return out


def _manifest(cfg: ExperimentConfig, seed, elapsed_s: float, files: list[str]) -> dict:
    import scipy

    return {
        "config_sha256": cfg.sha256,
        "config": json.loads(cfg.source_text),
        "seed": seed,
        "assets_sha256": _asset_hashes(cfg),
        "versions": {
            "lfretina": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "kernel_backend": kernels.BACKEND,
        "jobs": cfg.jobs,
        "elapsed_s": round(elapsed_s, 3),
        "outputs": sorted(files),
    }


def write_results(result: ExperimentResult, out: Path) -> list[str]:
    """Write the four result tables into ``out``; returns the file names."""
    _write_csv(
        out / "results.csv",
        ["eye_id", "metric", "density", "rendered_relD", "predicted_D", "error_D", "clamped", "boundary_peak"],
        (
            [
                r.eye_id,
                r.metric,
                r.density,
                _num(r.rendered_rel_depth_D),
                _num(r.predicted_accommodation_D),
                _num(r.accommodation_error_D),
                int(r.clamped),
                int(r.boundary_peak),
            ]
            for r in result.records
        ),
    )
    _write_csv(
        out / "through_focus.csv",
        ["eye_id", "metric", "density", "rendered_relD", "relative_accommodation_D", "accommodation_D", "value"],
        (
            [c.eye_id, c.metric, c.density, _num(c.rendered_relD), _num(rel), _num(c.rendered_abs_D + rel), _num(v)]
            for c in result.curves
            for rel, v in zip(c.relative_accommodation_D, c.values)
        ),
    )
    _write_csv(
        out / "radial_mtf.csv",
        ["eye_id", "metric", "density", "rendered_relD", "frequency_cpd", "gain"],
        (
            [eye, metric, k, _num(depth), _num(f), _num(g)]
            for (eye, metric, k, depth), mtf in result.radial.items()
            for f, g in zip(mtf.frequency_cpd, mtf.gain)
        ),
    )
    cut = {}
    for metric in sorted({key[1] for key in result.radial}):
        cut.update(result.cutoffs(CUTOFF_THRESHOLD, metric))
    _write_csv(
        out / "cutoff.csv",
        ["eye_id", "metric", "density", "rendered_relD", "threshold", "cutoff_cpd", "reached"],
        (
            [eye, metric, k, _num(depth), _num(CUTOFF_THRESHOLD), _num(f), int(ok)]
            for (eye, metric, k, depth), (f, ok) in cut.items()
        ),
    )
    return list(RESULT_FILES)


def _write_psf_pngs(cfg: ExperimentConfig, eyes: list[EyeInstance], out: Path) -> list[str]:
    from PIL import Image

    if not cfg.psf_png:
        return []
    by_id = {e.eye_id: e for e in eyes}
    folder = out / "psf"
    folder.mkdir(exist_ok=True)
    names = []
    for req in cfg.psf_png:
        if req.eye_id not in by_id:
            raise RuntimeError(f"PSF request names unknown eye {req.eye_id!r}")
        sim = RetinaSimulator(
            by_id[req.eye_id],
            cfg.display.z_cdp_m,
            cfg.display.pupil_diameter_mm,
            cfg.spectrum_nm,
            cfg.grid,
            cfg.options,
        )
        rendered = cfg.display.z_cdp_D + req.rendered_relD
        psf = sim.retinal_psf(req.density, rendered, req.accommodation_D)
        peak = float(psf.values.max())
        img = np.round(psf.values / peak * 65535).astype(np.uint16)
        stem = f"psf_{req.eye_id}_k{req.density}_r{req.rendered_relD:+.2f}_a{req.accommodation_D:.2f}"
        Image.fromarray(img).save(folder / f"{stem}.png")
        meta = {
            "eye_id": req.eye_id,
            "density": req.density,
            "rendered_relD": req.rendered_relD,
            "accommodation_D": req.accommodation_D,
            "pitch_um": cfg.grid.pitch_um,
            "size": cfg.grid.size,
            "peak_per_um2": peak,
            "encoding": "uint16, value = psf / peak * 65535",
        }
        (folder / f"{stem}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        names += [f"psf/{stem}.png", f"psf/{stem}.json"]
    return names


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    seed = cfg.seed if args.seed is None else args.seed
    count = cfg.condition_count()
    if args.dry_run:
        print(f"config OK: {count} prediction records")
        return EXIT_OK
    out = Path(args.out) if args.out else cfg.resolve(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    eyes = cfg.build_eyes(seed)
    log.info("%d eyes, %d prediction records, backend %s", len(eyes), count, kernels.BACKEND)
    result = experiment_matrix(
        eyes,
        cfg.display,
        cfg.metrics,
        cfg.densities,
        spectrum_nm=cfg.spectrum_nm,
        grid=cfg.grid,
        options=cfg.options,
        ncsf_params=cfg.ncsf_params(),
        range_relD=cfg.range_relD,
        step_D=cfg.step_D,
        refine=cfg.refine,
        jobs=cfg.jobs,
    )
    files = write_results(result, out)
    files += _write_psf_pngs(cfg, eyes, out)
    manifest = _manifest(cfg, seed, time.perf_counter() - t0, files)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(result.records)} records to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"config OK: {cfg.condition_count()} prediction records")
    return EXIT_OK


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _mean(values) -> float:
    return float(np.mean(np.asarray(values, dtype=float)))


def render_figures(results_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Turn run outputs into tidy per-figure CSVs (long format)."""
    src = Path(results_dir)
    missing = [name for name in RESULT_FILES if not (src / name).is_file()]
    if missing:
        raise FileNotFoundError(f"missing result files in {src}: {', '.join(missing)}")
    dst = Path(out_dir) if out_dir else src / "figures"
    dst.mkdir(parents=True, exist_ok=True)
    written = []

    def key(row):
        return (row["metric"], int(row["density"]), float(row["rendered_relD"]))

    # through-focus: mean curve over sampled eyes plus the average eye
    groups = defaultdict(list)
    for row in _read_csv(src / "through_focus.csv"):
        series = "average_eye" if row["eye_id"] == "average" else "eyes_mean"
        groups[key(row) + (float(row["relative_accommodation_D"]), series)].append(float(row["value"]))
    rows = [[m, k, _num(d), _num(rel), s, _num(_mean(v))] for (m, k, d, rel, s), v in sorted(groups.items())]
    p = dst / "fig_through_focus.csv"
    _write_csv(p, ["metric", "density", "rendered_relD", "relative_accommodation_D", "series", "value"], rows)
    written.append(p)

    # accommodation error against rendered depth
    groups = defaultdict(list)
    for row in _read_csv(src / "results.csv"):
        series = "average_eye" if row["eye_id"] == "average" else "eyes_mean"
        groups[key(row) + (series,)].append(float(row["error_D"]))
    rows = []
    for (m, k, d, s), v in sorted(groups.items()):
        sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
        rows.append([m, k, _num(d), s, _num(_mean(v)), _num(sd), len(v)])
    p = dst / "fig_error_vs_depth.csv"
    _write_csv(p, ["metric", "density", "rendered_relD", "series", "error_D", "sd_D", "n"], rows)
    written.append(p)

    # radial MTF at the predicted focus, averaged over sampled eyes
    groups = defaultdict(list)
    for row in _read_csv(src / "radial_mtf.csv"):
        if row["eye_id"] == "average":
            continue
        groups[key(row) + (float(row["frequency_cpd"]),)].append(float(row["gain"]))
    rows = [[m, k, _num(d), _num(f), _num(_mean(v))] for (m, k, d, f), v in sorted(groups.items())]
    p = dst / "fig_radial_mtf.csv"
    _write_csv(p, ["metric", "density", "rendered_relD", "frequency_cpd", "gain"], rows)
    written.append(p)

    # cut-off frequency against rendered depth, one series per density
    groups = defaultdict(list)
    for row in _read_csv(src / "cutoff.csv"):
        if row["eye_id"] == "average":
            continue
        groups[key(row)].append(float(row["cutoff_cpd"]))
    rows = [[m, k, _num(d), _num(_mean(v)), len(v)] for (m, k, d), v in sorted(groups.items())]
    p = dst / "fig_cutoff_vs_depth.csv"
    _write_csv(p, ["metric", "density", "rendered_relD", "cutoff_cpd", "n"], rows)
    written.append(p)
    return written


def cmd_render_figures(args) -> int:
    src = Path(args.results_dir or args.out or "results")
    for p in render_figures(src, Path(args.out) if args.out and args.results_dir else None):
        print(p)
    return EXIT_OK


def cmd_sample_eyes(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if cfg.coefficients_csv:
            raise ConfigError("sample-eyes needs a population source", "eyes.coefficients_csv", path=args.config)
        model = load_population(None if cfg.population == "builtin" else cfg.resolve(cfg.population))
        count, seed = cfg.count, cfg.seed
    else:
        model = load_population(args.population)
        count, seed = args.count, None
    if args.seed is not None:
        seed = args.seed
    if seed is None:
        raise ConfigError("required when eyes are sampled", "--seed")
    if args.count is not None:
        count = args.count
    pupil = args.pupil_mm if args.pupil_mm is not None else model.pupil_diameter_mm
    eyes = sample_eyes(model, count, seed, pupil_diameter_mm=pupil)
    rows = eyes_to_rows(eyes, model.mode_count)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eye_id", "j", "n", "m", "value_um"])
    for r in rows:
        w.writerow([r["eye_id"], r["j"], r["n"], r["m"], _num(r["value_um"])])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lfretina", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run an experiment and write result tables")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override eyes.seed")
    p.add_argument("--jobs", type=int, help="override the worker count")
    p.add_argument("--out", help="output directory (default: outputs.dir)")
    p.add_argument("--dry-run", action="store_true", help="validate and print the record count only")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render-figures", help="write tidy plot-data CSVs from run outputs")
    p.add_argument("results_dir", nargs="?", help="directory written by 'run'")
    p.add_argument("--out", help="destination (default: <results_dir>/figures)")
    p.set_defaults(func=cmd_render_figures)

    p = sub.add_parser("sample-eyes", help="dump sampled Zernike coefficients as CSV")
    p.add_argument("--config")
    p.add_argument("--population", default=None, help="population asset (default: built-in)")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--pupil-mm", type=float, help="shrink to this pupil (default: asset pupil)")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sample_eyes)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "verb", None) == "sample-eyes" and not args.config and args.count is None:
        args.count = 10
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
