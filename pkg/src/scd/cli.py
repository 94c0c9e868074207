"""Command-line entry point: scd {tile, generate, diffract, predict, verify, csl}.

Exit codes: 0 success, 1 validation failure, 2 I/O, schema or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .geometry import ParameterError, TileParams, build_tile, mesh_to_obj, polytope_volume
from .tiling import ShiftSequence, TilingConfig, bcc_config, cubic_config, extract_points

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

PRESETS = {"bcc": bcc_config, "cubic": cubic_config}


class UsageError(Exception):
    pass


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config_from_args(args) -> TilingConfig:
    if getattr(args, "preset", None):
        cfg = PRESETS[args.preset]()
    elif getattr(args, "config", None):
        cfg = sio.load_tiling_config(args.config)
    else:
        raise UsageError("give --config FILE or --preset NAME")
    if getattr(args, "random_shifts", False):
        cfg = TilingConfig(cfg.params, ShiftSequence.random(args.seed), cfg.z, cfg.base, cfg.repetitive)
    return cfg


def _params_from_args(args) -> TileParams:
    if args.preset:
        return PRESETS[args.preset]().params
    if args.config:
        return sio.load_tile_params(args.config)
    missing = [n for n in ("lam", "a_len", "angle", "c3") if getattr(args, n) is None]
    if missing:
        raise UsageError("missing tile parameter(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return TileParams(args.lam, args.a_len, sio.parse_angle(args.angle), args.c3)


def cmd_tile(args) -> int:
    params = _params_from_args(args)
    mesh = build_tile(params)
    if args.volume:
        print(sio.fmt(params.volume))
        hull = polytope_volume(mesh.vertices, mesh.facets)
        print(f"# hull volume {sio.fmt(hull)}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(mesh_to_obj(mesh))
    elif not args.volume:
        sys.stdout.write(mesh_to_obj(mesh))
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    if args.r <= 0:
        raise UsageError("-r must be positive")
    cloud = extract_points(cfg, args.r)
    run = sio.RunConfig("generate", args.seed, {"config": cfg.to_json(), "r": args.r, "format": args.format})
    if args.format == "json":
        text = json.dumps(sio.cloud_to_json(cloud, run), sort_keys=True) + "\n"
    else:
        text = sio.cloud_to_xyz(cloud, run)
    _emit(text, args.out)
    if len(cloud) == 0:
        print("warning: no points in the cube; wrote an empty cloud", file=sys.stderr)
    print(f"points {len(cloud)} density {sio.fmt(cloud.density)} expected {sio.fmt(cfg.params.density3)}",
          file=sys.stderr)
    return EXIT_OK


def cmd_diffract(args) -> int:
    from . import diffraction as D

    cloud, _ = sio.read_cloud(args.cloud)
    if args.radial:
        k3, edges = sio.parse_edges(args.radial)
        prof = D.shell_mass_profile(cloud, k3, edges, args.step)
        _emit(sio.radial_csv(prof.edges, prof.mass), args.out)
        return EXIT_OK
    if not args.grid:
        raise UsageError("give --grid SPEC or --radial K3:EDGES")
    ks = sio.parse_grid(args.grid)
    amps = D.fourier_bohr_many(cloud, ks) if len(ks) else np.zeros(0, dtype=complex)
    _emit(sio.spectrum_csv(ks, amps, cloud.r), args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    from . import diffraction as D

    cfg = _config_from_args(args)
    if args.periodic:
        try:
            pred = D.predicted_periodic_spectrum(cfg, args.cutoff, args.kz_cutoff)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
    else:
        pred = D.predicted_support(cfg.params, args.cutoff)
        pred.axis_peaks = D.predicted_axis_spectrum(cfg.params, int(args.kz_cutoff * float(cfg.params.c3)))
    report = {
        "schema": "scd/prediction/1",
        "run": sio.RunConfig("predict", args.seed, {"config": cfg.to_json(), "cutoff": args.cutoff}).to_json(),
        "prediction": pred.to_json(),
        "classification": D.spectral_classification(cfg).to_json(),
    }
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    if args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; valid suites: {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_INPUT
    rep = run_suite(args.suite, args.seed)
    _emit(json.dumps(rep, indent=2, sort_keys=True, default=str) + "\n", args.out)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def cmd_csl(args) -> int:
    from .lattice import aperiodicity_certificate, csl_index

    angle = sio.parse_angle(args.angle)
    out = {"angle": angle.to_json()}
    if args.m is not None:
        try:
            idx = csl_index(angle, args.m)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        out["m"] = args.m
        out["index"] = "inf" if idx == float("inf") else idx
    if args.chain is not None:
        out["certificate"] = aperiodicity_certificate(angle, args.chain, args.radius).to_json()
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scd", description="SCD tiles, tilings and their diffraction.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
        sp.add_argument("-o", "--out", help="output file (default stdout)")

    t = sub.add_parser("tile", help="write the tile as an OBJ mesh")
    common(t)
    t.add_argument("--config", help="tile-params or tiling-config JSON")
    t.add_argument("--preset", choices=sorted(PRESETS))
    t.add_argument("--lambda", dest="lam", type=str)
    t.add_argument("--a-len", dest="a_len", type=str)
    t.add_argument("--angle", help="cos:P/Q, pi:NUM/DEN or rad:PHI")
    t.add_argument("--c3", type=str)
    t.add_argument("--volume", action="store_true", help="print a_len*b2*c3")
    t.set_defaults(func=cmd_tile)

    g = sub.add_parser("generate", help="extract the point set in the cube [-r/2, r/2]^3")
    common(g)
    g.add_argument("--config")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("-r", type=float, required=True)
    g.add_argument("--format", choices=("xyz", "json"), default="xyz")
    g.add_argument("--random-shifts", action="store_true", help="replace the slides by seeded random ones")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("diffract", help="Fourier-Bohr coefficients of a point cloud")
    common(d)
    d.add_argument("cloud", help="XYZ or JSON point cloud")
    d.add_argument("--grid", help="cube:LO:HI:STEP | axis:T0:T1:STEP | plane:K3:EXTENT:STEP | list:x,y,z;...")
    d.add_argument("--radial", help="K3:E0,E1,... annulus edges for a shell-mass profile")
    d.add_argument("--step", type=float, help="planar grid step for --radial (default 1/(4r))")
    d.set_defaults(func=cmd_diffract)

    pr = sub.add_parser("predict", help="support, axis atoms and classification")
    common(pr)
    pr.add_argument("--config")
    pr.add_argument("--preset", choices=sorted(PRESETS))
    pr.add_argument("--cutoff", type=float, default=2.1)
    pr.add_argument("--kz-cutoff", type=float, default=4.0)
    pr.add_argument("--periodic", action="store_true", help="full spectrum of a periodic stacking")
    pr.set_defaults(func=cmd_predict)

    v = sub.add_parser("verify", help="run a self-check suite")
    common(v)
    v.add_argument("suite")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("csl", help="coincidence index and aperiodicity certificate")
    common(c)
    c.add_argument("--angle", required=True)
    c.add_argument("--m", type=int)
    c.add_argument("--chain", type=int, metavar="M")
    c.add_argument("--radius", type=float, default=100.0)
    c.set_defaults(func=cmd_csl)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (sio.SchemaError, ParameterError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
