"""Batch command-line front end.

Every image-producing run writes a flat ``key = value`` manifest next to its
output recording the fully resolved parameters.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import platform
import sys
from importlib import resources

import numpy as np

from . import __version__
from .applications import FUSE_MODES, PipelineParams, balance_mosaic, fuse, remove_shadow
from .bench import bench, steady_comparison, write_bench_csv
from .drift import canonical_drift, gate_label_seams, gate_mask_boundary
from .grid import DimensionMismatch, LabelMap, MultiChannelImage, ScalarField, shift_to_positive
from .operators import apply_A, column_sum_defect, is_irreducible, offdiagonals_nonnegative
from .raster import ImageFormatError, read_image, read_mask, read_raster, read_tiles, write_image
from .solvers import ConvergenceError, SchemeConfig, StabilityError, ZeroPivotError, stable_timestep, step_mos
from .tridiag import set_threads

log = logging.getLogger("osmosis")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DIMENSION = 4
EXIT_FLAGS = 5
EXIT_NUMERIC = 6
EXIT_VERIFY = 7

DEFAULTS = SchemeConfig()


class FlagError(ValueError):
    pass


# -- argument parsing ----------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("evolution")
    g.add_argument("--scheme", choices=("explicit", "implicit", "mos"), default=DEFAULTS.scheme)
    g.add_argument("--tau", type=float, default=None,
                   help=f"time step (default {DEFAULTS.tau:g}; explicit: the stability limit)")
    g.add_argument("--max-steps", type=int, default=DEFAULTS.max_steps)
    g.add_argument("--steady-tol", type=float, default=DEFAULTS.steady_tol)
    g.add_argument("--linear-tol", type=float, default=DEFAULTS.linear_tol)
    g.add_argument("--order", choices=("xy", "yx"), default="xy", help="MOS factor order")
    g.add_argument("--offset", type=float, default=1.0)
    g.add_argument("--band", type=int, default=0)
    g.add_argument("--rescale", choices=("renormalize", "clamp"), default="renormalize")
    g.add_argument("--threads", type=int, default=None)
    g.add_argument("--metrics", metavar="PATH", help="append per-iteration CSV rows here")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--figure", metavar="PATH", help="write a diagnostic figure (PNG/PDF/SVG)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="osmosis", description="Osmosis filtering for images.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shadow", parents=[common], help="remove a constant shadow given its mask")
    p.add_argument("image")
    p.add_argument("mask")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--depth", type=int, choices=(8, 16), default=None)

    p = sub.add_parser("balance", parents=[common], help="balance exposure across mosaic tiles")
    p.add_argument("image")
    p.add_argument("tiles")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--depth", type=int, choices=(8, 16), default=None)

    p = sub.add_parser("fuse", parents=[common], help="evolve an image under a guide's drift")
    p.add_argument("init")
    p.add_argument("guide")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--depth", type=int, choices=(8, 16), default=None)
    p.add_argument("--mode", choices=FUSE_MODES, default="auto")
    p.add_argument("--budget", type=int, default=None, help="stop after this many steps")

    p = sub.add_parser("drift", parents=[common], help="dump the (gated) canonical drift of an image")
    p.add_argument("guide")
    p.add_argument("-o", "--output", required=True, help=".npz file")
    p.add_argument("--mask")
    p.add_argument("--tiles")

    p = sub.add_parser("verify", parents=[common], help="structural self-tests of the operator")
    p.add_argument("--guide", help="image to test instead of the bundled fixture")
    p.add_argument("--mask")
    p.add_argument("--tiles")

    p = sub.add_parser("bench", parents=[common], help="synthetic throughput runs")
    p.add_argument("--sizes", default="0.25,1",
                   help="comma-separated sizes in megapixels (1 MP = 2^20 pixels)")
    p.add_argument("--schemes", default="mos")
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--steady", type=int, metavar="SIDE", default=None,
                   help="also count iterations to steadiness, MOS vs explicit, on a SIDE x SIDE image")
    p.add_argument("-o", "--output", required=True, help="CSV file")
    return parser


def _scheme_config(args, d=None) -> SchemeConfig:
    tau = args.tau
    if args.scheme == "explicit":
        limit = stable_timestep(d) if d is not None else None
        if tau is None:
            if limit is None:
                raise FlagError("--scheme explicit needs --tau here")
            tau = limit
        elif limit is not None and tau > limit:
            raise FlagError(f"--scheme explicit needs --tau <= {limit:.6g} for this drift")
    elif tau is None:
        tau = DEFAULTS.tau
    try:
        return SchemeConfig(args.scheme, tau, args.max_steps, args.steady_tol, args.linear_tol,
                            tuple(args.order))
    except ValueError as exc:
        raise FlagError(str(exc)) from exc


def _params(args, cfg) -> PipelineParams:
    try:
        return PipelineParams(cfg, args.offset, args.band, args.rescale)
    except ValueError as exc:
        raise FlagError(str(exc)) from exc


# -- manifests and metrics -----------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for k, v in entries.items():
            fh.write(f"{k} = {v}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


class MetricsSink:
    """Append-only CSV of per-iteration diagnostics."""

    COLUMNS = ("run", "channel", "iteration", "mass", "min", "update_norm", "wall_time")

    def __init__(self, path, run: str):
        new = not os.path.exists(path) or os.path.getsize(path) == 0
        self._fh = open(path, "a", newline="")
        self._w = csv.writer(self._fh)
        self.run = run
        if new:
            self._w.writerow(self.COLUMNS)

    def __call__(self, channel, k, u, report):
        self._w.writerow((self.run, channel, k, repr(report.mass[-1]), repr(report.min_value[-1]),
                          repr(report.update_norm[-1]), f"{report.wall_time[-1]:.6g}"))

    def close(self):
        self._fh.close()


def _base_manifest(args, cfg, p) -> dict:
    m = {
        "command": args.command,
        "argv": " ".join(sys.argv[1:]) if sys.argv else "",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": set_threads(None),
        "scheme": cfg.scheme,
        "tau": repr(cfg.tau),
        "max_steps": cfg.max_steps,
        "steady_tol": repr(cfg.steady_tol),
        "linear_tol": repr(cfg.linear_tol),
        "order": "".join(cfg.order),
    }
    if p is not None:
        m.update(offset=repr(p.offset), band=p.band, rescale=p.rescale)
    m["metrics"] = args.metrics or ""
    return m


# -- subcommands ---------------------------------------------------------------

def _working_drift(image: MultiChannelImage, offset: float):
    return [canonical_drift(shift_to_positive(c, offset)) for c in image.channels]


def _pipeline_command(args) -> int:
    if args.command == "fuse":
        first, second = args.init, args.guide
    else:
        first, second = args.image, args.mask if args.command == "shadow" else args.tiles
    src = read_raster(first)
    image = read_image(first)
    if args.command == "balance" and args.band:
        raise FlagError("--band applies to shadow removal only")
    if args.command == "shadow":
        other = read_mask(second)
        other.check_matches(image.shape)
    elif args.command == "balance":
        other = read_tiles(second)
        other.check_matches(image.shape)
    else:
        other = read_image(second)
        if other.shape != image.shape:
            raise DimensionMismatch(f"init is {image.shape[1]}x{image.shape[0]}, "
                                    f"guide is {other.shape[1]}x{other.shape[0]}")
        if args.budget is not None and args.budget < 1:
            raise FlagError("--budget must be >= 1")

    if not args.offset > 0:
        raise FlagError("--offset must be positive")
    guide = other if args.command == "fuse" else image
    drifts = _working_drift(guide, args.offset)
    worst = max(dd.max_abs_scaled() for dd in drifts)
    cfg = _scheme_config(args, min(drifts, key=stable_timestep) if args.scheme == "explicit" else None)
    p = _params(args, cfg)
    if worst > 2:
        log.warning("max |d| h = %.3f exceeds 2; positivity is not guaranteed", worst)

    sink = MetricsSink(args.metrics, f"{args.command}:{os.path.basename(args.output)}") if args.metrics else None
    try:
        if args.command == "shadow":
            out, reports = remove_shadow(image, other, p, with_reports=True, callback=sink)
        elif args.command == "balance":
            out, reports = balance_mosaic(image, other, p, with_reports=True, callback=sink)
        else:
            out, reports = fuse(image, other, p, mode=args.mode, budget=args.budget,
                                with_reports=True, callback=sink)
    finally:
        if sink:
            sink.close()

    depth = args.depth or src.depth
    write_image(out, args.output, depth)
    m = _base_manifest(args, cfg, p)
    m.update({
        "input": os.path.abspath(first), "input_sha256": _sha256(first),
        "second_input": os.path.abspath(second), "second_input_sha256": _sha256(second),
        "output": os.path.abspath(args.output), "output_depth": depth,
        "max_abs_drift_h": repr(worst),
    })
    if args.command == "fuse":
        m.update(mode=args.mode, budget=args.budget if args.budget is not None else "none")
    for c, rep in enumerate(reports):
        m[f"channel{c}_iterations"] = rep.iterations
        m[f"channel{c}_converged"] = rep.converged
        m[f"channel{c}_mass_drift"] = repr(rep.max_mass_drift())
    if args.figure:
        from .plotting import plot_convergence
        plot_convergence(reports, args.figure, title=args.command)
        m["figure"] = os.path.abspath(args.figure)
    write_manifest(args.output + ".manifest", m)
    for c, rep in enumerate(reports):
        print(f"channel {c}: {rep.iterations} steps, converged={rep.converged}, "
              f"mass drift {rep.max_mass_drift():.2e}")
    print(f"wrote {args.output}")
    return EXIT_OK


def _gating_inputs(args, shape):
    if args.mask and args.tiles:
        raise FlagError("give --mask or --tiles, not both")
    if args.mask:
        m = read_mask(args.mask)
        m.check_matches(shape)
        return lambda d: gate_mask_boundary(d, m, args.band)
    if args.tiles:
        t = read_tiles(args.tiles)
        t.check_matches(shape)
        return lambda d: gate_label_seams(d, t)
    return None


def _drift_command(args) -> int:
    guide = read_image(args.guide)
    gate = _gating_inputs(args, guide.shape)
    arrays = {}
    for c, dd in enumerate(_working_drift(guide, args.offset)):
        if gate is not None:
            dd = gate(dd)
        arrays[f"d1_{c}"], arrays[f"d2_{c}"] = dd.d1, dd.d2
        worst = dd.max_abs_scaled()
        print(f"channel {c}: max |d| h = {worst:.4f}, stable explicit tau = {stable_timestep(dd):.4g}, "
              f"column-sum defect = {column_sum_defect(dd):.2e}")
        if worst > 2:
            log.warning("channel %d: max |d| h exceeds 2", c)
        if args.figure and c == 0:
            from .plotting import plot_drift
            plot_drift(dd, args.figure)
    np.savez(args.output, h=1.0, offset=args.offset, **arrays)
    print(f"wrote {args.output}")
    return EXIT_OK


def _fixture(name):
    return resources.files("osmosis").joinpath("data", name)


def _verify_command(args) -> int:
    if args.guide:
        guide = read_image(args.guide)
        gates = {"canonical": None}
        g = _gating_inputs(args, guide.shape)
        if g is not None:
            gates["gated"] = g
    else:
        with resources.as_file(_fixture("guide8.pgm")) as gp, \
                resources.as_file(_fixture("mask8.pgm")) as mp, \
                resources.as_file(_fixture("tiles8.pgm")) as tp:
            guide, mask, tiles = read_image(gp), read_mask(mp), read_tiles(tp)
        gates = {"canonical": None,
                 "mask-gated": lambda d: gate_mask_boundary(d, mask, args.band),
                 "seam-gated": lambda d: gate_label_seams(d, tiles)}
    ok = True

    def check(name, value, limit, passed=None):
        nonlocal ok
        passed = value <= limit if passed is None else passed
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:<40s} {value:.3e}  (limit {limit:.0e})")

    for c, chan in enumerate(guide.channels):
        v = shift_to_positive(chan, args.offset)
        base = canonical_drift(v)
        for label, gate in gates.items():
            d = base if gate is None else gate(base)
            check(f"ch{c} {label}: column-sum defect", column_sum_defect(d), 1e-13)
            nonneg = offdiagonals_nonnegative(d)
            check(f"ch{c} {label}: off-diagonals >= 0", d.max_abs_scaled(), 2.0, nonneg)
            check(f"ch{c} {label}: irreducible", 0.0, 0.0, is_irreducible(d))
        scale = np.abs(v.values).max()
        check(f"ch{c} fixed point |A v|/|v|", float(np.abs(apply_A(v, base).values).max()) / scale, 1e-12)
        moved = np.abs(step_mos(v, base, DEFAULTS.tau).values - v.values).max() / scale
        check(f"ch{c} MOS step at tau={DEFAULTS.tau:g} keeps v", float(moved), 1e-9)
    print("verify:", "ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_VERIFY


def _bench_command(args) -> int:
    try:
        sizes = [int(round(float(s) * 2**20)) for s in args.sizes.split(",") if s.strip()]
        schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    except ValueError as exc:
        raise FlagError(f"bad --sizes: {exc}") from exc
    bad = [s for s in schemes if s not in ("explicit", "implicit", "mos")]
    if bad or not sizes or any(s < 4 for s in sizes):
        raise FlagError(f"bad --schemes/--sizes ({', '.join(bad) or args.sizes})")
    tau = args.tau if args.tau is not None else DEFAULTS.tau
    try:
        cfg = SchemeConfig("mos", tau, args.max_steps, args.steady_tol, args.linear_tol, tuple(args.order))
    except ValueError as exc:
        raise FlagError(str(exc)) from exc
    rows = bench(sizes, cfg, schemes, args.steps, args.repeats, args.seed)
    write_bench_csv(rows, args.output)
    for r in rows:
        print(f"{r.scheme:9s} {r.width}x{r.height}: {r.seconds_per_iter * 1e3:9.3f} ms/iter, "
              f"{r.pixels_per_second:.3g} px/s, peak {r.peak_memory_mb:.1f} MiB")
    m = _base_manifest(args, cfg, None)
    m.update(sizes=args.sizes, schemes=",".join(schemes), steps=args.steps, repeats=args.repeats,
             seed=args.seed, output=os.path.abspath(args.output))
    if args.steady:
        res = steady_comparison(args.steady, args.seed, tau)
        print(f"steadiness on {args.steady}x{args.steady}: MOS {res['mos_iterations']} iterations "
              f"(tau {tau:g}), explicit {res['explicit_iterations']} (tau {res['tau_explicit']:.4g})")
        m.update({f"steady_{k}": v for k, v in res.items()})
    if args.figure:
        from .plotting import plot_bench
        plot_bench(rows, args.figure)
        m["figure"] = os.path.abspath(args.figure)
    write_manifest(args.output + ".manifest", m)
    return EXIT_OK


COMMANDS = {
    "shadow": _pipeline_command,
    "balance": _pipeline_command,
    "fuse": _pipeline_command,
    "drift": _drift_command,
    "verify": _verify_command,
    "bench": _bench_command,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise FlagError("--threads must be >= 1")
            set_threads(args.threads)
        return COMMANDS[args.command](args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: unreadable input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ImageFormatError as exc:
        print(f"error: bad image: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DimensionMismatch as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (FlagError, StabilityError) as exc:
        print(f"error: invalid options: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except (ConvergenceError, ZeroPivotError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
