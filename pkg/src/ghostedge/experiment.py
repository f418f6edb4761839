"""Config-driven experiment harness: runs, sweeps, CSV and image emission."""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import phantoms
from .forward import (NoiseSpec, acquire_shifted, gradient_bucket_channel,
                      sobel_bucket_channels)
from .image import ShiftMode, as_image, gradient_offset, normalize_map, read_pgm, write_pgm
from .metrics import compression_ratio, edge_snr, region_masks
from .reconstruct import (CompressedEdgeReconstructor,
                          CorrelationEdgeReconstructor,
                          ImageDomainEdgeReconstructor)
from .solver import TotalVariationSolver
from .speckle import SHIFTED_OFFSETS, generate_patterns, offset_index

_PHANTOMS = {
    "nested-rectangles": phantoms.nested_rectangles,
    "binary-shapes": phantoms.binary_shapes,
    "detailed-shapes": phantoms.detailed_shapes,
}


@dataclass(frozen=True)
class MethodSpec:
    """A reconstruction method: family plus edge operator."""

    family: str        # GGI | SSGI | CGEI | CSGI
    operator: object   # "sobel" or an angle in degrees

    @property
    def name(self) -> str:
        suffix = "So" if self.operator == "sobel" else f"{int(self.operator)}"
        return f"{self.family}-{suffix}"

    @property
    def shifts_per_pattern(self) -> int:
        """One-pixel shifted exposures per pattern (the l of the sampling
        accounting): 8 for Sobel channels, 2 for a directional gradient,
        1 for the raw channel."""
        if self.family == "CSGI":
            return 1
        return 8 if self.operator == "sobel" else 2

    def offsets_needed(self):
        if self.family == "CSGI":
            return [(0, 0)]
        if self.operator == "sobel":
            return list(SHIFTED_OFFSETS)
        dx, dy = gradient_offset(self.operator)
        return [(0, 0), (-dx, -dy)]


def parse_method(name: str) -> MethodSpec:
    token = name.strip()
    family, _, op = token.partition("-")
    family = family.upper()
    if family not in ("GGI", "SSGI", "CGEI", "CSGI"):
        raise ValueError(f"unknown method family in {name!r}")
    if not op:
        if family == "SSGI":
            op = "So"
        else:
            raise ValueError(f"method {name!r} needs an operator suffix "
                             "(e.g. -So or -45)")
    if op.lower() in ("so", "sobel"):
        operator = "sobel"
    else:
        operator = float(op)
        gradient_offset(operator)  # validates the angle
    if family == "SSGI" and operator != "sobel":
        raise ValueError("SSGI uses the Sobel channels; use GGI-<angle> "
                         "for directional gradients")
    if family == "GGI" and operator == "sobel":
        raise ValueError("GGI needs a gradient angle; use SSGI-So for Sobel")
    return MethodSpec(family, operator)


@dataclass
class ExperimentConfig:
    """Flat description of one experiment, mirrored by the config-file keys."""

    object: str = "phantom:binary-shapes:64"
    m: int | None = None
    n: int | None = None
    patterns: int | None = None
    ratio: float | None = None
    distribution: str = "bernoulli"
    mode: str = "periodic"
    methods: tuple = ("SSGI-So",)
    mu: float = 2.0 ** 12
    tv_flavor: str = "anisotropic"
    outer_tol: float = 1e-4
    max_outer: int = 300
    max_inner: int = 16
    beta_init: float = 2.0 ** 5
    beta_growth: float = 2.0
    beta_cap: float = 2.0 ** 8
    snr_bd_db: float = math.inf  # inf sentinel: noiseless
    pattern_seed: int = 1
    noise_seed: int = 1
    repetitions: int = 1
    outdir: str = "ghostedge-out"
    mask_threshold: float = 0.5
    mask_dilation: int = 2

    def __post_init__(self):
        if (self.patterns is None) == (self.ratio is None):
            raise ValueError("exactly one of 'patterns' and 'ratio' must be set")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if isinstance(self.methods, str):
            self.methods = tuple(t.strip() for t in self.methods.split(",") if t.strip())
        if not self.methods:
            raise ValueError("at least one method is required")
        for name in self.methods:
            parse_method(name)

    def solver_template(self) -> TotalVariationSolver:
        return TotalVariationSolver(
            mu=self.mu, tv_flavor=self.tv_flavor, outer_tol=self.outer_tol,
            max_outer=self.max_outer, max_inner=self.max_inner,
            beta_init=self.beta_init, beta_growth=self.beta_growth,
            beta_cap=self.beta_cap)


_CONFIG_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def parse_config_text(text: str, **overrides) -> ExperimentConfig:
    """Parse the flat ``key = value`` config format ('#' starts a comment)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    values.update({k: v for k, v in overrides.items() if v is not None})
    kwargs = {}
    for key, val in values.items():
        if key not in _CONFIG_TYPES:
            raise ValueError(f"unknown config key: {key!r}")
        kwargs[key] = _coerce_value(key, val)
    return ExperimentConfig(**kwargs)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), **overrides)


def _coerce_value(key: str, val):
    if not isinstance(val, str):
        return val
    if key in ("m", "n", "patterns", "max_outer", "max_inner", "pattern_seed",
               "noise_seed", "repetitions", "mask_dilation"):
        return int(val)
    if key in ("ratio", "mu", "outer_tol", "beta_init", "beta_growth",
               "beta_cap", "mask_threshold"):
        return float(val)
    if key == "snr_bd_db":
        return math.inf if val.lower() in ("inf", "none", "noiseless") else float(val)
    if key == "methods":
        return tuple(t.strip() for t in val.split(",") if t.strip())
    return val


def load_object(config: ExperimentConfig) -> np.ndarray:
    """Resolve the object image: a PGM path or ``phantom:<name>[:<size>]``."""
    spec = config.object
    if spec.startswith("phantom:"):
        parts = spec.split(":")
        name = parts[1]
        if name not in _PHANTOMS:
            raise ValueError(f"unknown phantom {name!r}; "
                             f"choices: {sorted(_PHANTOMS)}")
        size = int(parts[2]) if len(parts) > 2 else (config.m or 64)
        img = _PHANTOMS[name](size)
    else:
        img = read_pgm(spec)
    img = as_image(img, "object")
    if config.m is not None and img.shape != (config.m, config.n or config.m):
        raise ValueError(f"object is {img.shape}, config says "
                         f"{(config.m, config.n or config.m)}")
    return img


@dataclass
class ResultBundle:
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    runs_csv: str | None = None
    summary_csv: str | None = None


_CSV_COLUMNS = (
    "method", "rep", "m", "n", "patterns", "ratio", "shifts_per_pattern",
    "measurements", "distribution", "mode", "snr_bd_db", "pattern_seed",
    "noise_seed", "mask_threshold", "mask_dilation", "mu", "tv_flavor",
    "outer_tol", "max_outer", "max_inner", "beta_init", "beta_growth",
    "beta_cap", "snr", "solver_iters", "converged", "wall_ms", "status",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows):
    from .image import _atomic_write
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def median_rank(values):
    """The paper-style reported value: the ceil(R/2)-th smallest."""
    ordered = sorted(values)
    return ordered[(len(ordered) + 1) // 2 - 1]


def _reconstruct(method: MethodSpec, stack_matrix, groups, shape, solver):
    if method.family in ("SSGI", "GGI", "CGEI"):
        if method.operator == "sobel":
            bh, bv = sobel_bucket_channels(groups)
            channels = np.column_stack([bh.values, bv.values])
        else:
            dx, dy = gradient_offset(method.operator)
            diff = gradient_bucket_channel(groups[(0, 0)], groups[(-dx, -dy)],
                                           method.operator)
            channels = diff.values
        if method.family == "CGEI":
            est = CompressedEdgeReconstructor(shape, solver=solver)
        else:
            est = CorrelationEdgeReconstructor(shape)
        return est.fit(stack_matrix, channels)
    est = ImageDomainEdgeReconstructor(shape, operator=method.operator,
                                       solver=solver)
    return est.fit(stack_matrix, groups[(0, 0)].values)


def run(config: ExperimentConfig, write_files: bool = True) -> ResultBundle:
    """Run every configured method over the repetitions and score it.

    Per repetition the patterns are regenerated from ``pattern_seed + rep``
    and every needed shifted group is acquired once, so all methods see
    identical data.  Emits one normalized edge map (PGM) per cell plus a
    tidy CSV, and reports the median-rank SNR per method.
    """
    obj = load_object(config)
    m, n = obj.shape
    n_patterns = config.patterns
    if n_patterns is None:
        n_patterns = int(round(config.ratio * m * n))
    ratio = compression_ratio(n_patterns, m, n)
    methods = [parse_method(name) for name in config.methods]
    mode = ShiftMode.coerce(config.mode)
    masks = region_masks(obj, config.mask_dilation, config.mask_threshold)
    noiseless = math.isinf(config.snr_bd_db)

    needed = sorted({off for ms in methods for off in ms.offsets_needed()})
    maps_dir = os.path.join(config.outdir, "maps")
    if write_files:
        os.makedirs(maps_dir, exist_ok=True)

    bundle = ResultBundle()
    base_row = dict(
        m=m, n=n, patterns=n_patterns, ratio=ratio,
        distribution=config.distribution, mode=mode.value,
        snr_bd_db=config.snr_bd_db, pattern_seed=config.pattern_seed,
        noise_seed=config.noise_seed, mask_threshold=config.mask_threshold,
        mask_dilation=config.mask_dilation, mu=config.mu,
        tv_flavor=config.tv_flavor, outer_tol=config.outer_tol,
        max_outer=config.max_outer, max_inner=config.max_inner,
        beta_init=config.beta_init, beta_growth=config.beta_growth,
        beta_cap=config.beta_cap,
    )

    per_method: dict[str, list] = {ms.name: [] for ms in methods}
    for rep in range(config.repetitions):
        stack = generate_patterns(m, n, n_patterns, config.pattern_seed + rep,
                                  config.distribution, mode)
        matrix = stack.matrix()
        groups = {}
        for off in needed:
            noise = None
            if not noiseless:
                noise = NoiseSpec(config.snr_bd_db,
                                  (config.noise_seed, rep, offset_index(off)))
            groups[off] = acquire_shifted(stack, obj, off, noise)
        for ms in methods:
            row = dict(base_row, method=ms.name, rep=rep,
                       shifts_per_pattern=ms.shifts_per_pattern,
                       measurements=n_patterns * ms.shifts_per_pattern)
            t0 = time.perf_counter()
            try:
                est = _reconstruct(ms, matrix, groups, (m, n),
                                   config.solver_template())
                snr = edge_snr(est.edge_map_, masks)
                row.update(snr=snr,
                           solver_iters=getattr(est, "n_iter_", 0),
                           converged=getattr(est, "converged_", True),
                           status="ok")
                per_method[ms.name].append(snr)
                if write_files:
                    write_pgm(os.path.join(
                        maps_dir, f"{ms.name}_rep{rep:02d}.pgm"),
                        normalize_map(est.edge_map_))
            except (ValueError, FloatingPointError) as exc:
                row.update(snr=None, solver_iters=None, converged=None,
                           status=f"error: {exc}")
            row["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
            bundle.rows.append(row)

    for ms in methods:
        scores = per_method[ms.name]
        entry = dict(method=ms.name, repetitions=config.repetitions,
                     successes=len(scores),
                     snr_median=median_rank(scores) if scores else None)
        bundle.summary.append(entry)

    if write_files:
        os.makedirs(config.outdir, exist_ok=True)
        bundle.runs_csv = os.path.join(config.outdir, "runs.csv")
        _write_csv(bundle.runs_csv, _CSV_COLUMNS, bundle.rows)
        bundle.summary_csv = os.path.join(config.outdir, "summary.csv")
        _write_csv(bundle.summary_csv,
                   ("method", "repetitions", "successes", "snr_median"),
                   bundle.summary)
    if all(row["status"] != "ok" for row in bundle.rows):
        raise RuntimeError("all runs failed; see the CSV status column")
    return bundle


def sweep(config: ExperimentConfig, axis: str, values,
          write_files: bool = True) -> ResultBundle:
    """Run the full method list at each axis point with shared pattern seeds.

    ``axis`` is ``ratio`` or ``noise``; emits one long-format CSV across all
    points (columns ``axis``/``axis_value`` prepended).
    """
    axis = axis.lower()
    if axis not in ("ratio", "noise"):
        raise ValueError("axis must be 'ratio' or 'noise'")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one axis value")

    bundle = ResultBundle()
    for value in values:
        if axis == "ratio":
            sub = replace(config, ratio=float(value), patterns=None,
                          outdir=os.path.join(config.outdir, f"ratio-{value}"))
        else:
            db = math.inf if (isinstance(value, str)
                              and value.lower() == "inf") else float(value)
            sub = replace(config, snr_bd_db=db,
                          outdir=os.path.join(config.outdir, f"noise-{value}"))
        result = run(sub, write_files=write_files)
        for row in result.rows:
            bundle.rows.append(dict(row, axis=axis, axis_value=value))
        for entry in result.summary:
            bundle.summary.append(dict(entry, axis=axis, axis_value=value))

    if write_files:
        os.makedirs(config.outdir, exist_ok=True)
        bundle.runs_csv = os.path.join(config.outdir, "sweep.csv")
        _write_csv(bundle.runs_csv, ("axis", "axis_value") + _CSV_COLUMNS,
                   bundle.rows)
        bundle.summary_csv = os.path.join(config.outdir, "sweep_summary.csv")
        _write_csv(bundle.summary_csv,
                   ("axis", "axis_value", "method", "repetitions",
                    "successes", "snr_median"), bundle.summary)
    return bundle
