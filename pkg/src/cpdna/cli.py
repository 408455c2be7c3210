"""Command line interface.

Exit codes: 0 success, 1 input/validation error, 2 numerical failure.
Data goes to files (written atomically: temp file + rename), diagnostics
to stderr.  Every command that involves randomness takes --seed, and
every output embeds the parameters needed to reproduce it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import mds as mds_mod
from . import pipeline, shapedna
from .errors import CpdnaError, NumericalError
from .linalg import write_matrix_market
from .oracle import (circle_spectrum, hemisphere_spectrum, interval_spectrum,
                     sphere_spectrum)
from .surfaces import SurfaceSpec, surface_from_json, surface_to_json

PRESET_HELP = ("surface JSON file, inline JSON, or preset: sphere[-R], "
               "circle[-R], torus-MINOR-MAJOR, hemisphere[-R], "
               "ellipsoid-A-B-C, arc[-R[-ANGLE]], mobius, "
               "sphere-hole-RHO, sphere-ring-RHOTOP-RHOBOT")


def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cpdna-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_angle(tok: str) -> float:
    """Angles like 'pi/5', '2*pi/3', '0.7853'."""
    tok = tok.strip().replace(" ", "")
    if not all(c in "0123456789.pi/*+-e" for c in tok):
        raise ValueError(f"bad angle {tok!r}")
    return float(eval(tok, {"__builtins__": {}}, {"pi": np.pi}))  # noqa: S307


def preset_surface(name: str) -> SurfaceSpec:
    parts = name.split("-")
    kind, args = parts[0], [float(p) for p in parts[1:] if _is_num(p)]
    tail = [p for p in parts[1:] if not _is_num(p)]
    if kind == "sphere" and tail == ["hole"]:
        rho = args[0]
        return surface_from_json({"kind": "parametric", "bc": "neumann",
                                  "params": {"name": "sphere_patch", "radius": 1.0,
                                             "phi_lo": float(np.arcsin(rho)),
                                             "phi_hi": float(np.pi)}})
    if kind == "sphere" and tail == ["ring"]:
        top, bot = args[0], args[1]
        return surface_from_json({"kind": "parametric", "bc": "neumann",
                                  "params": {"name": "sphere_patch", "radius": 1.0,
                                             "phi_lo": float(np.arcsin(top)),
                                             "phi_hi": float(np.pi - np.arcsin(bot))}})
    if tail:
        raise ValueError(f"unknown preset {name!r}")
    if kind == "sphere":
        return surface_from_json({"kind": "sphere",
                                  "params": {"radius": args[0] if args else 1.0}})
    if kind == "circle":
        return surface_from_json({"kind": "circle",
                                  "params": {"radius": args[0] if args else 1.0}})
    if kind == "hemisphere":
        return surface_from_json({"kind": "hemisphere", "bc": "neumann",
                                  "params": {"radius": args[0] if args else 1.0}})
    if kind == "torus":
        minor, major = (args + [0.5, 1.0])[:2] if args else (0.5, 1.0)
        return surface_from_json({"kind": "torus",
                                  "params": {"major_radius": major,
                                             "minor_radius": minor}})
    if kind == "ellipsoid":
        a, b, c = args if len(args) == 3 else (2.0, 1.0, 1.0)
        return surface_from_json({"kind": "ellipsoid",
                                  "params": {"a": a, "b": b, "c": c}})
    if kind == "arc":
        radius = args[0] if args else 2.0
        angle = args[1] if len(args) > 1 else float(np.pi)
        return surface_from_json({"kind": "arc", "bc": "dirichlet",
                                  "params": {"radius": radius, "angle": angle}})
    if kind == "mobius":
        return surface_from_json({"kind": "parametric", "bc": "neumann",
                                  "params": {"name": "mobius", "radius": 1.0,
                                             "width": 1.0}})
    raise ValueError(f"unknown preset {name!r}")


def _is_num(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def load_surface_arg(arg: str, bc: str | None = None) -> SurfaceSpec:
    if os.path.exists(arg):
        with open(arg) as fh:
            spec = surface_from_json(json.load(fh))
    elif arg.lstrip().startswith("{"):
        spec = surface_from_json(json.loads(arg))
    else:
        spec = preset_surface(arg)
    if bc:
        from dataclasses import replace
        spec = replace(spec, bc=bc)
    return spec


def _oracle_for(name: str, surface: SurfaceSpec, k: int):
    radius = float(surface.params.get("radius", 1.0)) * surface.scale
    if name == "auto":
        bc = surface.bc or "neumann"
        name = {"sphere": "sphere", "circle": "circle",
                "arc": f"interval-{bc}",
                "hemisphere": f"hemisphere-{bc}"}.get(surface.kind)
        if name is None:
            raise ValueError(f"no closed-form oracle for {surface.kind}; "
                             "pass --oracle explicitly")
    if name == "sphere":
        return sphere_spectrum(radius, k)
    if name == "circle":
        return circle_spectrum(radius, k)
    if name.startswith("interval-"):
        return interval_spectrum(name.split("-", 1)[1], k)
    if name.startswith("hemisphere-"):
        return hemisphere_spectrum(name.split("-", 1)[1], radius, k)
    raise ValueError(f"unknown oracle {name!r}")


def _job_from_args(args) -> pipeline.JobSpec:
    surface = load_surface_arg(args.surface, getattr(args, "bc", None))
    return pipeline.JobSpec(
        surface=surface, dx=args.dx, k=args.k, gamma=args.gamma,
        sigma=args.sigma, inner_tol=args.inner_tol, seed=args.seed,
        label=getattr(args, "label", "") or "")


def _add_job_flags(p, dx_list=False):
    p.add_argument("--surface", required=True, help=PRESET_HELP)
    p.add_argument("--bc", choices=["closed", "dirichlet", "neumann"],
                   help="override the surface boundary condition")
    if dx_list:
        p.add_argument("--dx-list", required=True,
                       help="comma separated grid spacings, e.g. 0.4,0.2,0.1")
        p.set_defaults(dx=1.0)
    else:
        p.add_argument("--dx", type=float, required=True, help="grid spacing")
    p.add_argument("--k", type=int, default=10, help="eigenvalue count")
    p.add_argument("--gamma", type=float, default=None,
                   help="penalty parameter (default 2*dim/dx^2)")
    p.add_argument("--sigma", type=float, default=None,
                   help="eigensolver shift (default 0.1)")
    p.add_argument("--inner-tol", type=float, default=1e-10,
                   help="inner GMRES relative tolerance")
    p.add_argument("--seed", type=int, default=42, help="start-vector RNG seed")
    p.add_argument("--label", default="", help="label recorded in outputs")


def _parse_list(text: str, parser=float):
    vals = [parser(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise ValueError(f"empty list {text!r}")
    return vals


def cmd_spectrum(args) -> int:
    job = _job_from_args(args)
    if args.dump_operator:
        from .band import build_band
        from .operators import assemble_lb
        from .surfaces import make_field
        lb = assemble_lb(build_band(make_field(job.surface), job.dx),
                         gamma=job.gamma)
        write_matrix_market(lb.M, args.dump_operator)
    spec = pipeline.compute_spectrum(job)
    atomic_write(args.out, pipeline.spectrum_to_csv(spec))
    return 0


def cmd_dna(args) -> int:
    with open(args.spectrum) as fh:
        spec = pipeline.spectrum_from_csv(fh.read())
    dna = shapedna.normalize_dna(spec, zero_tol=args.zero_tol,
                                 label=spec.meta.get("label", ""))
    atomic_write(args.out, shapedna.dna_to_csv(dna))
    return 0


def cmd_dissim(args) -> int:
    dnas = []
    for path in args.dna:
        with open(path) as fh:
            dnas.append(shapedna.dna_from_csv(fh.read()))
    dm = shapedna.dissimilarity_matrix(dnas, args.k)
    atomic_write(args.out, shapedna.dissim_to_csv(dm, args.k))
    return 0


def cmd_mds(args) -> int:
    with open(args.dissim) as fh:
        dm = shapedna.dissim_from_csv(fh.read())
    emb = mds_mod.smacof(dm, dim=args.dim, tol=args.tol, maxit=args.maxit)
    atomic_write(args.out, mds_mod.embedding_to_csv(emb, dm.labels))
    return 0


def cmd_converge(args) -> int:
    job = _job_from_args(args)
    dx_list = _parse_list(args.dx_list)
    oracle = _oracle_for(args.oracle, job.surface, job.k)
    result = pipeline.convergence_study(job, dx_list, oracle, norm=args.norm,
                                        workers=args.jobs)
    meta = {"surface": surface_to_json(job.surface), "k": job.k,
            "seed": job.seed, "norm": args.norm, "oracle": oracle.provenance}
    atomic_write(args.out, pipeline.study_to_csv(result, meta, "convergence"))
    return 0


def cmd_invariance(args) -> int:
    job = _job_from_args(args)
    dx_list = _parse_list(args.dx_list)
    transforms = []
    axis = {"x": [1, 0, 0], "y": [0, 1, 0], "z": [0, 0, 1]}.get(
        args.axis, None) or _parse_list(args.axis)
    if args.rotations:
        for tok in args.rotations.split(","):
            transforms.append(pipeline.rotation_transform(parse_angle(tok), axis))
    if args.scales:
        for s in _parse_list(args.scales):
            transforms.append(pipeline.scale_transform(s))
    if not transforms:
        raise ValueError("need --rotations and/or --scales")
    result = pipeline.invariance_study(job, transforms, dx_list,
                                       workers=args.jobs)
    meta = {"surface": surface_to_json(job.surface), "k": job.k,
            "seed": job.seed, "axis": args.axis}
    atomic_write(args.out, pipeline.study_to_csv(result, meta, "invariance"))
    return 0


def cmd_bench_solver(args) -> int:
    job = _job_from_args(args)
    report = pipeline.solver_benchmark(job)
    meta = {"surface": surface_to_json(job.surface), "k": job.k,
            "seed": job.seed, "inner_tol": job.inner_tol}
    atomic_write(args.out, pipeline.benchmark_to_csv(report, meta))
    print(f"speedup {report['speedup']:.2f}x, inner iterations "
          f"{report['none']['inner_iterations']} -> "
          f"{report['ilu']['inner_iterations']}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="cpdna", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="compute a truncated spectrum")
    _add_job_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-operator", default=None,
                   help="also write the operator in Matrix Market format")
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("dna", help="normalize a spectrum into a fingerprint")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--zero-tol", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dna)

    p = sub.add_parser("dissim", help="pairwise fingerprint distances")
    p.add_argument("--dna", action="append", required=True,
                   help="fingerprint CSV (repeatable)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dissim)

    p = sub.add_parser("mds", help="embed a dissimilarity matrix")
    p.add_argument("--dissim", required=True)
    p.add_argument("--dim", type=int, default=2, choices=[1, 2, 3])
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--maxit", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mds)

    p = sub.add_parser("converge", help="eigenvalue convergence study")
    _add_job_flags(p, dx_list=True)
    p.add_argument("--norm", choices=["inf", "two"], default="inf")
    p.add_argument("--oracle", default="auto",
                   help="sphere|circle|interval-<bc>|hemisphere-<bc>|auto")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("invariance", help="rotation/scale invariance study")
    _add_job_flags(p, dx_list=True)
    p.add_argument("--rotations", default="",
                   help="comma separated angles, e.g. pi/5,pi/4,pi/3,pi/2")
    p.add_argument("--axis", default="z", help="x|y|z or ax,ay,az")
    p.add_argument("--scales", default="", help="comma separated scale factors")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_invariance)

    p = sub.add_parser("bench-solver", help="time the eigensolve with and "
                                            "without ILU preconditioning")
    _add_job_flags(p)
    p.set_defaults(inner_tol=1e-8)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_bench_solver)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except NumericalError as exc:
        stage = getattr(exc, "stage", None)
        where = f" [stage: {stage}]" if stage else ""
        print(f"cpdna: numerical failure{where}: {exc}", file=sys.stderr)
        return 2
    except (CpdnaError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"cpdna: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
