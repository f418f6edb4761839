"""Command-line interface: pattern generation, acquisition, reconstruction,
experiment runs and sweeps, and edge-map scoring.

All state flows through flags and config files; environment variables are
never consulted.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .experiment import (ExperimentConfig, load_config, parse_method, run,
                         sweep)
from .forward import (NoiseSpec, acquire_shifted, gradient_bucket_channel,
                      load_bucket, save_bucket, sobel_bucket_channels)
from .image import gradient_offset, normalize_map, read_pgm, write_pgm
from .metrics import edge_snr, region_masks
from .reconstruct import (CompressedEdgeReconstructor,
                          CorrelationEdgeReconstructor,
                          ImageDomainEdgeReconstructor)
from .solver import TotalVariationSolver
from .speckle import SHIFTED_OFFSETS, generate_patterns, load_stack, offset_index, save_stack


def _add_solver_flags(parser):
    parser.add_argument("--mu", type=float, default=2.0 ** 12)
    parser.add_argument("--tv-flavor", choices=("anisotropic", "isotropic"),
                        default="anisotropic")
    parser.add_argument("--outer-tol", type=float, default=1e-4)
    parser.add_argument("--max-outer", type=int, default=300)
    parser.add_argument("--max-inner", type=int, default=16)
    parser.add_argument("--beta-init", type=float, default=2.0 ** 5)
    parser.add_argument("--beta-growth", type=float, default=2.0)
    parser.add_argument("--beta-cap", type=float, default=2.0 ** 8)


def _solver_from_args(args) -> TotalVariationSolver:
    return TotalVariationSolver(
        mu=args.mu, tv_flavor=args.tv_flavor, outer_tol=args.outer_tol,
        max_outer=args.max_outer, max_inner=args.max_inner,
        beta_init=args.beta_init, beta_growth=args.beta_growth,
        beta_cap=args.beta_cap)


def _cmd_gen_patterns(args) -> int:
    stack = generate_patterns(args.m, args.n, args.count, args.seed,
                              args.distribution, args.mode)
    save_stack(args.out, stack)
    print(f"wrote {args.count} {args.m}x{args.n} patterns "
          f"({args.distribution}, {args.mode}) to {args.out}")
    return 0


def _cmd_acquire(args) -> int:
    stack = load_stack(args.stack)
    obj = read_pgm(args.object)
    noise_db = args.snr_bd

    def noise_for(offset):
        if noise_db is None:
            return None
        return NoiseSpec(noise_db, (args.noise_seed, offset_index(offset)))

    channel = args.channel
    if channel == "raw":
        off = tuple(args.offset)
        vec = acquire_shifted(stack, obj, off, noise_for(off))
    elif channel in ("h", "v"):
        groups = {off: acquire_shifted(stack, obj, off, noise_for(off))
                  for off in SHIFTED_OFFSETS}
        bh, bv = sobel_bucket_channels(groups)
        vec = bh if channel == "h" else bv
    else:
        phi = float(channel)
        dx, dy = gradient_offset(phi)
        base = acquire_shifted(stack, obj, (0, 0), noise_for((0, 0)))
        shifted = acquire_shifted(stack, obj, (-dx, -dy),
                                  noise_for((-dx, -dy)))
        vec = gradient_bucket_channel(base, shifted, phi)
    save_bucket(args.out, vec)
    print(f"wrote {len(vec)} {vec.channel} readings to {args.out}")
    return 0


def _cmd_reconstruct(args) -> int:
    stack = load_stack(args.stack)
    matrix = stack.matrix()
    shape = stack.shape
    method = parse_method(args.method)
    vectors = [load_bucket(p) for p in args.channels]
    solver = _solver_from_args(args)

    if method.family == "CSGI":
        if len(vectors) != 1:
            raise ValueError("CSGI needs exactly one raw channel file")
        est = ImageDomainEdgeReconstructor(shape, operator=method.operator,
                                           solver=solver)
        est.fit(matrix, vectors[0].values)
    else:
        expected = 2 if method.operator == "sobel" else 1
        if len(vectors) != expected:
            raise ValueError(f"{method.name} needs {expected} channel file(s)")
        channels = np.column_stack([v.values for v in vectors]) \
            if expected == 2 else vectors[0].values
        if method.family == "CGEI":
            est = CompressedEdgeReconstructor(shape, solver=solver)
        else:
            est = CorrelationEdgeReconstructor(shape)
        est.fit(matrix, channels)

    write_pgm(args.out, normalize_map(est.edge_map_))
    print(f"wrote {method.name} edge map to {args.out}")
    if getattr(est, "diagnostics_", None):
        for i, diag in enumerate(est.diagnostics_):
            print(f"channel {i}: {diag.n_outer} outer iterations, "
                  f"converged={diag.converged}, "
                  f"residual={diag.residual_norm:.6g}")
        if not est.converged_:
            print("warning: solver did not converge within max_outer",
                  file=sys.stderr)
    return 0


def _overrides_from_pairs(pairs):
    overrides = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, _, val = pair.partition("=")
        overrides[key.strip()] = val.strip()
    return overrides


def _cmd_run(args) -> int:
    config = load_config(args.config, **_overrides_from_pairs(args.set))
    if args.outdir:
        config.outdir = args.outdir
    bundle = run(config)
    for entry in bundle.summary:
        snr = entry["snr_median"]
        print(f"{entry['method']}: median-rank snr = "
              f"{'n/a' if snr is None else f'{snr:.4f}'} "
              f"({entry['successes']}/{entry['repetitions']} reps ok)")
    print(f"rows: {bundle.runs_csv}")
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config, **_overrides_from_pairs(args.set))
    if args.outdir:
        config.outdir = args.outdir
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if args.axis == "ratio":
        values = [float(v) for v in values]
    bundle = sweep(config, args.axis, values)
    for entry in bundle.summary:
        snr = entry["snr_median"]
        print(f"{entry['axis']}={entry['axis_value']} {entry['method']}: "
              f"median-rank snr = "
              f"{'n/a' if snr is None else f'{snr:.4f}'}")
    print(f"rows: {bundle.runs_csv}")
    return 0


def _cmd_metrics(args) -> int:
    edge_map = read_pgm(args.map)
    truth = read_pgm(args.truth)
    masks = region_masks(truth, args.dilation, args.threshold)
    value = edge_snr(edge_map, masks)
    print(f"snr,{value!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghostedge",
        description="Ghost-imaging edge detection: simulate bucket acquisition "
                    "with shifted speckle patterns and reconstruct object edges.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-patterns", help="generate a speckle pattern stack")
    p.add_argument("--out", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--distribution", choices=("bernoulli", "uniform"),
                   default="bernoulli")
    p.add_argument("--mode", choices=("periodic", "master-crop"),
                   default="periodic")
    p.set_defaults(func=_cmd_gen_patterns)

    p = sub.add_parser("acquire", help="simulate bucket readings of an object")
    p.add_argument("--stack", required=True)
    p.add_argument("--object", required=True, help="object image (binary PGM)")
    p.add_argument("--out", required=True)
    p.add_argument("--channel", default="raw",
                   help="raw | h | v | <angle in degrees>")
    p.add_argument("--offset", type=int, nargs=2, default=(0, 0),
                   metavar=("DX", "DY"), help="group shift for raw channel")
    p.add_argument("--snr-bd", type=float, default=None,
                   help="detector SNR in dB (omit for noiseless)")
    p.add_argument("--noise-seed", type=int, default=1)
    p.set_defaults(func=_cmd_acquire)

    p = sub.add_parser("reconstruct", help="edge map from saved channels")
    p.add_argument("--stack", required=True)
    p.add_argument("--method", required=True,
                   help="GGI-<angle> | SSGI-So | CGEI-So | CGEI-<angle> | "
                        "CSGI-So | CSGI-<angle>")
    p.add_argument("--channels", nargs="+", required=True,
                   help="bucket CSV file(s): h v for Sobel methods, one "
                        "differential for gradient methods, one raw for CSGI")
    p.add_argument("--out", required=True, help="output edge map (PGM)")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("run", help="config-driven experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="compression-ratio or noise sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=("ratio", "noise"), required=True)
    p.add_argument("--values", required=True,
                   help="comma list; noise accepts 'inf' for noiseless")
    p.add_argument("--outdir", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("metrics", help="edge SNR of a map against ground truth")
    p.add_argument("--map", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--dilation", type=int, default=2)
    p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
