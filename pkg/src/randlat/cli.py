"""Command line entry point: ``randlat {verify,sweep,spectra,sample,count}``.

Exit codes: 0 all checks pass, 1 a check failed (or was skipped for time),
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from randlat import experiments as ex
from randlat.counting import count_region
from randlat.errors import RandlatError
from randlat.lattice import AffineUnimodularLattice, load_basis, make_lattice, shortest_vector
from randlat.regions import region_from_json
from randlat.sampling import sample_affine, sample_lattice, trial_rng

log = logging.getLogger("randlat")


def _csv_list(cast):
    def parse(text):
        return [cast(x) for x in text.split(",") if x.strip()]
    return parse


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--d", type=int)
    common.add_argument("--setting", choices=["affine", "regular"])
    common.add_argument("--sampler")
    common.add_argument("--hecke-prime", type=int, dest="hecke_prime")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--plot", help="SVG output path (sweep only)")
    common.add_argument("--workers", type=int)
    common.add_argument("--time-budget", type=float, dest="time_budget",
                        help="seconds allowed per check before it is marked skipped")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="randlat", description="Random lattice hole-probability experiments")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the verification suite")
    v.add_argument("--checks", type=_csv_list(str), help=f"subset of {','.join(ex.VERIFY_CHECKS)}")
    v.add_argument("--trials-d3", type=int, dest="trials_d3")
    v.add_argument("--ks-trials", type=int, dest="ks_trials")
    v.add_argument("--bootstrap", type=int)
    v.add_argument("--corrupt-sampler", action="store_true", default=None, dest="corrupt_sampler",
                   help=argparse.SUPPRESS)

    s = sub.add_parser("sweep", parents=[common], help="normalized hole probability over a volume grid")
    s.add_argument("--family", choices=list(ex.SWEEP_FAMILIES))
    s.add_argument("--volumes", type=_csv_list(float))
    s.add_argument("--shape-params", type=_csv_list(float), dest="shape_params")

    sp = sub.add_parser("spectra", parents=[common], help="flat-torus spectrum hole bound")
    sp.add_argument("--radial", help="JSON list of [a, b] intervals")

    sa = sub.add_parser("sample", parents=[common], help="dump sampled lattices as JSON lines")
    sa.add_argument("--count", type=int)
    sa.add_argument("--affine", action="store_true", default=None)

    c = sub.add_parser("count", parents=[common], help="count lattice points in a region")
    c.add_argument("--basis", help="basis file (JSON rows or whitespace text)")
    c.add_argument("--offset", help="JSON offset vector")
    c.add_argument("--region", help="JSON region spec")
    c.add_argument("--list-points", action="store_true", default=None, dest="list_points")
    return p


SKIP = {"command", "config", "verbose"}


def load_config(args) -> ex.ExperimentConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ex.ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key, val in vars(args).items():
        if key not in SKIP and val is not None:
            data[key] = val
    for key in ("offset", "region", "radial"):
        if isinstance(data.get(key), str):
            try:
                data[key] = json.loads(data[key])
            except json.JSONDecodeError as exc:
                raise ex.ConfigError(f"malformed --{key} JSON: {exc}") from exc
    return ex.ExperimentConfig.from_dict(data)


def _emit(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_verify(cfg):
    code, rows = ex.run_verify(cfg)
    _emit(ex.rows_to_csv(rows), cfg.out)
    for r in rows:
        if r.satisfied != "true":
            log.warning("check %s: %s", r.experiment_id, r.satisfied)
    return code


def cmd_sweep(cfg):
    code, rows = ex.run_sweep(cfg)
    _emit(ex.rows_to_csv(rows, ex.SWEEP_COLUMNS), cfg.out)
    if cfg.plot:
        Path(cfg.plot).write_text(ex.sweep_svg(rows))
    return code


def cmd_spectra(cfg):
    code, rows = ex.run_spectra(cfg)
    _emit(ex.rows_to_csv(rows), cfg.out)
    return code


def cmd_sample(cfg):
    if cfg.count < 1:
        raise ex.ConfigError("--count must be >= 1")
    spec = cfg.sampler_spec()
    lines = []
    for i in range(cfg.count):
        rng = trial_rng(cfg.seed, i)
        if cfg.affine:
            lat = sample_affine(spec, rng)
            L = lat.lattice
        else:
            lat = L = sample_lattice(spec, rng)
        rec = {"index": i, "seed": cfg.seed, "sampler": spec.method, "d": spec.d,
               "basis": L.basis.tolist()}
        if cfg.affine:
            rec["offset"] = lat.offset.tolist()
        rec["shortest_vector_norm"] = float(np.linalg.norm(shortest_vector(L)))
        lines.append(json.dumps(rec))
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def cmd_count(cfg):
    if not cfg.basis or cfg.region is None:
        raise ex.ConfigError("count needs --basis and --region")
    try:
        B = load_basis(cfg.basis)
    except (OSError, ValueError) as exc:
        raise ex.ConfigError(f"cannot read basis: {exc}") from exc
    L = make_lattice(B)
    lat = L if cfg.offset is None else AffineUnimodularLattice(L, cfg.offset)
    R = region_from_json(cfg.region, d=L.d)
    res = count_region(lat, R, keep_points=bool(cfg.list_points))
    out = {"count": res.count}
    if cfg.list_points:
        out["points"] = res.points.tolist()
    _emit(json.dumps(out) + "\n", cfg.out)
    return 0


COMMANDS = {"verify": cmd_verify, "sweep": cmd_sweep, "spectra": cmd_spectra,
            "sample": cmd_sample, "count": cmd_count}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (RandlatError, ValueError) as exc:
        print(f"randlat: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
