"""End-to-end orchestration: surface -> band -> operator -> spectrum ->
fingerprint, plus the convergence / invariance experiment procedures.

Every output CSV embeds enough metadata to re-run the job: parsing the
header back into a JobSpec and recomputing reproduces the file bit for
bit (fixed seeds, deterministic assembly).
"""

from __future__ import annotations

import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .band import build_band
from .eigen import RitzPair, Spectrum, arnoldi_smallest, extract_spectrum
from .operators import assemble_lb, default_gamma
from .shapedna import dna_distance, normalize_dna
from .surfaces import (SurfaceSpec, make_field, rotation_from_axis_angle,
                       surface_from_json, surface_to_json, transform_surface)

F = "%.17g"  # full double precision for every numeric output


@dataclass(frozen=True)
class JobSpec:
    surface: SurfaceSpec
    dx: float
    k: int = 50
    gamma: float | None = None
    sigma: float | None = None
    inner_tol: float = 1e-10
    seed: int = 42
    interp_degree: int = 3
    label: str = ""

    def validate(self):
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.surface.kind == "mesh" and "path" in self.surface.params:
            import os
            if not os.path.exists(self.surface.params["path"]):
                raise ValueError(
                    f"mesh file not found: {self.surface.params['path']}")
        return self


def _tag_stage(exc: Exception, stage: str):
    setattr(exc, "stage", stage)
    return exc


def compute_spectrum(job: JobSpec) -> Spectrum:
    """build_band -> assemble_lb -> arnoldi -> extract, with the stage
    recorded on any propagated error."""
    job.validate()
    try:
        fld = make_field(job.surface)
    except Exception as exc:
        raise _tag_stage(exc, "surface")
    try:
        band = build_band(fld, job.dx, job.interp_degree)
    except Exception as exc:
        raise _tag_stage(exc, "band")
    try:
        lb = assemble_lb(band, gamma=job.gamma)
    except Exception as exc:
        raise _tag_stage(exc, "operator")
    try:
        pairs = arnoldi_smallest(lb, job.k, sigma=job.sigma,
                                 inner_tol=job.inner_tol, seed=job.seed)
    except Exception as exc:
        raise _tag_stage(exc, "eigensolve")
    sigma = job.sigma if job.sigma is not None else \
        0.05 * lb.gamma * lb.dx ** 2 / band.dim
    meta = {"surface": surface_to_json(fld.spec), "dx": job.dx, "bc": lb.bc,
            "k": job.k, "gamma": lb.gamma, "sigma": sigma, "seed": job.seed,
            "inner_tol": job.inner_tol, "interp_degree": job.interp_degree,
            "label": job.label or _default_label(job.surface), **band.stats()}
    try:
        return extract_spectrum(pairs, meta)
    except Exception as exc:
        raise _tag_stage(exc, "extract")


def _default_label(spec: SurfaceSpec) -> str:
    core = "-".join(f"{v:g}" for v in spec.params.values()
                    if isinstance(v, (int, float)))
    name = spec.params.get("name", spec.kind)
    return f"{name}-{core}" if core else str(name)


# ---------------------------------------------------------------------------
# CSV round trip


def spectrum_to_csv(spec: Spectrum) -> str:
    out = io.StringIO()
    m = spec.meta
    out.write("# cpdna spectrum\n")
    out.write(f"# surface={json.dumps(m['surface'], separators=(',', ':'))}\n")
    out.write("# " + " ".join(
        f"{key}={F % m[key]}" for key in
        ("dx", "gamma", "sigma", "inner_tol", "bandwidth")) + "\n")
    out.write(f"# k={m['k']} seed={m['seed']} interp_degree={m['interp_degree']}"
              f" band_n={m['band_n']} dim={m['dim']} bc={spec.bc}"
              f" label={m.get('label', '')}\n")
    out.write("index,lambda,residual\n")
    for i, (lam, res) in enumerate(zip(spec.values, spec.residuals)):
        out.write(f"{i},{F % lam},{F % res}\n")
    return out.getvalue()


def parse_metadata(text: str) -> dict:
    meta: dict = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            continue
        body = line[1:].strip()
        if body.startswith("surface="):
            meta["surface"] = json.loads(body[len("surface="):])
            continue
        for tok in body.split():
            if "=" in tok:
                key, val = tok.split("=", 1)
                meta[key] = val
    return meta


def jobspec_from_metadata(meta: dict) -> JobSpec:
    return JobSpec(surface=surface_from_json(meta["surface"]),
                   dx=float(meta["dx"]), k=int(meta["k"]),
                   gamma=float(meta["gamma"]), sigma=float(meta["sigma"]),
                   inner_tol=float(meta["inner_tol"]), seed=int(meta["seed"]),
                   interp_degree=int(meta["interp_degree"]),
                   label=meta.get("label", ""))


def spectrum_from_csv(text: str) -> Spectrum:
    meta = parse_metadata(text)
    lam, res = [], []
    for line in text.splitlines():
        if line.startswith("#") or line.startswith("index") or not line.strip():
            continue
        _, v, r = line.split(",")
        lam.append(float(v))
        res.append(float(r))
    return Spectrum(values=np.array(lam), k=int(meta.get("k", len(lam))),
                    dx=float(meta.get("dx", "nan")), bc=meta.get("bc", ""),
                    surface=meta.get("surface", {}), residuals=np.array(res),
                    meta=meta)


# ---------------------------------------------------------------------------
# experiment procedures


@dataclass(frozen=True)
class StudyRow:
    label: str
    dx: float
    error_inf: float
    error_two: float


@dataclass(frozen=True)
class StudyResult:
    rows: list
    slopes: dict          # label -> (slope_inf, slope_two)
    norm: str = "inf"

    def slope(self, label: str = "") -> float:
        s = self.slopes[label]
        return s[0] if self.norm == "inf" else s[1]


def fit_loglog_slope(x, y) -> float:
    x = np.log(np.asarray(x, dtype=np.float64))
    y = np.log(np.maximum(np.asarray(y, dtype=np.float64), 1e-300))
    a = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(coef[0])


def _run_jobs(jobs: list, workers: int = 1) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [compute_spectrum(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(compute_spectrum, jobs))


def convergence_study(job: JobSpec, dx_list, oracle, norm: str = "inf",
                      workers: int = 1) -> StudyResult:
    """Error of the first k eigenvalues against a multiplicity-expanded
    oracle, per dx, with the fitted log-log slope."""
    if len(dx_list) < 3:
        raise ValueError("need at least 3 dx values for a slope")
    ref = np.asarray(oracle.values if hasattr(oracle, "values") else oracle)
    if len(ref) < job.k:
        raise ValueError(f"oracle has {len(ref)} values, job needs {job.k}")
    specs = _run_jobs([replace(job, dx=float(dx)) for dx in dx_list], workers)
    rows = []
    for dx, sp in zip(dx_list, specs):
        kk = min(job.k, len(sp.values))
        diff = sp.values[:kk] - ref[:kk]
        rows.append(StudyRow("", float(dx), float(np.max(np.abs(diff))),
                             float(np.linalg.norm(diff))))
    slopes = {"": (fit_loglog_slope([r.dx for r in rows], [r.error_inf for r in rows]),
                   fit_loglog_slope([r.dx for r in rows], [r.error_two for r in rows]))}
    return StudyResult(rows=rows, slopes=slopes, norm=norm)


def rotation_transform(angle: float, axis=(0.0, 0.0, 1.0)) -> dict:
    return {"kind": "rotation", "angle": float(angle), "axis": list(axis)}


def scale_transform(factor: float) -> dict:
    return {"kind": "scale", "factor": float(factor)}


def _transform_label(tf: dict) -> str:
    if tf["kind"] == "rotation":
        return f"rot-{tf['angle']:.12g}"
    return f"scale-{tf['factor']:.12g}"


def invariance_study(job: JobSpec, transforms: list, dx_list,
                     workers: int = 1) -> StudyResult:
    """Spectrum distance between base and transformed surfaces per dx.

    Rotations compare raw eigenvalues (isometry invariance); scalings
    compare fingerprints, which is where scale invariance lives.  Each
    transformed surface gets a fresh band: nothing is rotated but the
    surface itself.
    """
    jobs = [replace(job, dx=float(dx)) for dx in dx_list]
    all_jobs = list(jobs)
    for tf in transforms:
        for dx in dx_list:
            if tf["kind"] == "rotation":
                dim = 2 if job.surface.kind in ("circle", "arc") else 3
                rot = rotation_from_axis_angle(tf.get("axis", [0, 0, 1]),
                                               tf["angle"], dim)
                surf = transform_surface(job.surface, rotation=rot)
            elif tf["kind"] == "scale":
                surf = transform_surface(job.surface, scale=tf["factor"])
            else:
                raise ValueError(f"unknown transform kind {tf['kind']!r}")
            all_jobs.append(replace(job, surface=surf, dx=float(dx)))
    specs = _run_jobs(all_jobs, workers)
    base = {float(dx): sp for dx, sp in zip(dx_list, specs[:len(dx_list)])}
    rows = []
    pos = len(dx_list)
    for tf in transforms:
        label = _transform_label(tf)
        for dx in dx_list:
            sp = specs[pos]
            pos += 1
            b = base[float(dx)]
            kk = min(job.k, len(sp.values), len(b.values))
            if tf["kind"] == "rotation":
                dist = float(np.linalg.norm(sp.values[:kk] - b.values[:kk]))
            else:
                da = normalize_dna(b)
                db = normalize_dna(sp)
                dist = dna_distance(da, db, min(kk, len(da.values), len(db.values)))
            rows.append(StudyRow(label, float(dx), dist, dist))
    slopes = {}
    for tf in transforms:
        label = _transform_label(tf)
        sub = [r for r in rows if r.label == label]
        s = fit_loglog_slope([r.dx for r in sub], [r.error_two for r in sub])
        slopes[label] = (s, s)
    return StudyResult(rows=rows, slopes=slopes, norm="two")


def study_to_csv(result: StudyResult, meta: dict | None = None,
                 kind: str = "study") -> str:
    out = io.StringIO()
    out.write(f"# cpdna {kind}\n")
    for key, val in (meta or {}).items():
        if key == "surface":
            out.write(f"# surface={json.dumps(val, separators=(',', ':'))}\n")
        else:
            out.write(f"# {key}={val}\n")
    has_labels = any(r.label for r in result.rows)
    if has_labels:
        out.write("transform,dx,distance\n")
        for r in result.rows:
            out.write(f"{r.label},{F % r.dx},{F % r.error_two}\n")
    else:
        out.write("dx,error_inf,error_two\n")
        for r in result.rows:
            out.write(f"{F % r.dx},{F % r.error_inf},{F % r.error_two}\n")
    for label, (si, st) in result.slopes.items():
        if label:
            out.write(f"# slope[{label}]={F % st}\n")
        else:
            out.write(f"# slope_inf={F % si} slope_two={F % st}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# solver benchmark


def solver_benchmark(job: JobSpec) -> dict:
    """Full eigensolve wall time and total inner iterations, with and
    without ILU preconditioning of the shift-invert solves."""
    job.validate()
    fld = make_field(job.surface)
    band = build_band(fld, job.dx, job.interp_degree)
    lb = assemble_lb(band, gamma=job.gamma)
    report: dict = {"dx": job.dx, "k": job.k, "band_n": band.n}
    for tag, precond in (("ilu", True), ("none", False)):
        stats: list = []
        t0 = time.perf_counter()
        pairs = arnoldi_smallest(lb, job.k, sigma=job.sigma,
                                 inner_tol=job.inner_tol, seed=job.seed,
                                 precondition=precond, stats_out=stats)
        wall = time.perf_counter() - t0
        report[tag] = {
            "wall_seconds": wall,
            "inner_iterations": int(sum(s.iterations for s in stats)),
            "inner_solves": len(stats),
            "eigenvalues": [-p.value.real for p in pairs],
        }
    report["speedup"] = report["none"]["wall_seconds"] / report["ilu"]["wall_seconds"]
    report["iteration_ratio"] = (report["none"]["inner_iterations"]
                                 / max(report["ilu"]["inner_iterations"], 1))
    return report


def benchmark_to_csv(report: dict, meta: dict | None = None) -> str:
    out = io.StringIO()
    out.write("# cpdna bench-solver\n")
    for key, val in (meta or {}).items():
        if key == "surface":
            out.write(f"# surface={json.dumps(val, separators=(',', ':'))}\n")
        else:
            out.write(f"# {key}={val}\n")
    out.write(f"# band_n={report['band_n']}\n")
    out.write("metric,ilu,none\n")
    for key in ("wall_seconds", "inner_iterations", "inner_solves"):
        out.write(f"{key},{report['ilu'][key]},{report['none'][key]}\n")
    out.write(f"# speedup={F % report['speedup']} "
              f"iteration_ratio={F % report['iteration_ratio']}\n")
    return out.getvalue()
