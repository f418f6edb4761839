"""Bucket-detector forward model: acquisition, differential channels, noise."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .image import as_grid, gradient_offset
from .speckle import PatternStack, shifted_stack

# Differential channel weights over the shifted groups, keyed by offset.
# Horizontal: +{1,2,1} on the offsets that sample one row above, -{1,2,1}
# on those sampling one row below; vertical is the 90-degree rotation.
SOBEL_H_WEIGHTS = {(1, 1): 1.0, (1, 0): 2.0, (1, -1): 1.0,
                   (-1, 1): -1.0, (-1, 0): -2.0, (-1, -1): -1.0}
SOBEL_V_WEIGHTS = {(1, 1): 1.0, (0, 1): 2.0, (-1, 1): 1.0,
                   (1, -1): -1.0, (0, -1): -2.0, (-1, -1): -1.0}


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise at a target detector SNR in dB."""

    snr_bd_db: float
    seed: object = 0  # int or tuple of ints

    def __post_init__(self):
        if not np.isfinite(self.snr_bd_db):
            raise ValueError("snr_bd_db must be finite")


@dataclass(frozen=True, eq=False)
class BucketVector:
    """Length-M detector readings with their channel tag.

    ``channel`` is one of ``raw`` (plain bucket values, ``offset`` records
    the group shift of the illuminating stack), ``diff_h`` / ``diff_v``
    (Sobel-weighted combinations) or ``diff_phi`` (one-pixel directional
    difference at angle ``phi``).
    """

    values: np.ndarray
    channel: str
    offset: tuple[int, int] | None = None
    phi: float | None = None
    noise: NoiseSpec | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("bucket values must be a non-empty 1-D array")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def bucket_value(pattern, obj) -> float:
    """Total light through the object under one pattern:
    ``sum_xy pattern[x, y] * obj[x, y]``."""
    pattern = as_grid(pattern, "pattern")
    obj = as_grid(obj, "object")
    if pattern.shape != obj.shape:
        raise ValueError(
            f"dimension mismatch: pattern {pattern.shape} vs object {obj.shape}")
    return float(pattern.reshape(-1) @ obj.reshape(-1))


def acquire(stack: PatternStack, obj, noise: NoiseSpec | None = None) -> BucketVector:
    """Bucket readings of ``obj`` under every pattern of ``stack``.

    When ``noise`` is given, AWGN at the requested detector SNR is added to
    the raw readings (deterministically from the noise seed).
    """
    obj = as_grid(obj, "object")
    if stack.shape != obj.shape:
        raise ValueError(
            f"dimension mismatch: patterns {stack.shape} vs object {obj.shape}")
    values = stack.matrix() @ obj.reshape(-1)
    out = BucketVector(values, "raw", offset=stack.offset)
    if noise is not None:
        out = add_awgn(out, noise.snr_bd_db, noise.seed)
    return out


def acquire_shifted(stack: PatternStack, obj, offset,
                    noise: NoiseSpec | None = None) -> BucketVector:
    """Acquire with the one-pixel shifted group of ``stack`` at ``offset``."""
    return acquire(shifted_stack(stack, offset), obj, noise)


def _combine(groups, weights, channel, phi=None) -> BucketVector:
    length = None
    noisy = False
    for off in weights:
        if off not in groups:
            raise ValueError(f"missing shifted group for offset {off}")
        vec = groups[off]
        if length is None:
            length = len(vec)
        elif len(vec) != length:
            raise ValueError("length mismatch between shifted bucket vectors")
        noisy = noisy or vec.noise is not None
    # Positive and negative taps accumulate separately so structurally equal
    # halves (constant objects under periodic shifts) cancel exactly.
    pos = np.zeros(length, dtype=np.float64)
    neg = np.zeros(length, dtype=np.float64)
    for off, w in weights.items():
        if w > 0:
            pos += w * groups[off].values
        else:
            neg += (-w) * groups[off].values
    values = pos - neg
    record = next((groups[o].noise for o in weights if groups[o].noise is not None),
                  None) if noisy else None
    return BucketVector(values, channel, phi=phi, noise=record)


def sobel_bucket_channels(groups) -> tuple[BucketVector, BucketVector]:
    """Combine the eight shifted-group bucket vectors into the horizontal
    and vertical Sobel channels.

    ``groups`` maps offsets (dx, dy) to the raw readings acquired with the
    correspondingly shifted stack.  Under periodic shifts the horizontal
    output equals bucket products of the unshifted patterns with the
    horizontal Sobel channel of the object; likewise vertically.
    """
    h = _combine(groups, SOBEL_H_WEIGHTS, "diff_h")
    v = _combine(groups, SOBEL_V_WEIGHTS, "diff_v")
    return h, v


def gradient_bucket_channel(base: BucketVector, shifted: BucketVector,
                            phi) -> BucketVector:
    """Differential channel of a one-pixel gradient at angle ``phi``.

    ``base`` must be the unshifted acquisition and ``shifted`` the one
    acquired with the stack shifted one pixel *against* the gradient
    direction: displacing the illumination by -(dx, dy) samples the object
    at +(dx, dy), so the difference equals bucket products with the
    directional difference of the object (periodic shifts).
    """
    if len(base) != len(shifted):
        raise ValueError("length mismatch between bucket vectors")
    dx, dy = gradient_offset(phi)
    if base.offset is not None and base.offset != (0, 0):
        raise ValueError(f"base channel must be unshifted, got offset {base.offset}")
    if shifted.offset is not None and shifted.offset != (-dx, -dy):
        raise ValueError(
            f"shifted channel for phi={phi} must use offset {(-dx, -dy)}, "
            f"got {shifted.offset}")
    values = shifted.values - base.values
    record = shifted.noise or base.noise
    return BucketVector(values, "diff_phi", phi=float(phi), noise=record)


def add_awgn(vec: BucketVector, snr_bd_db, seed=0) -> BucketVector:
    """Add white Gaussian noise at a target detector SNR (dB).

    The signal power is the mean-removed (AC) power of the readings: the
    constant background the detector always collects carries no object
    information, so the SNR is calibrated against the fluctuating part.
    The noise power is ``power_s * 10**(-snr_bd_db / 10)``.
    ``snr_bd_db=None`` is the no-noise path and returns the vector unchanged.
    """
    if snr_bd_db is None:
        return vec
    snr_bd_db = float(snr_bd_db)
    if np.isinf(snr_bd_db) and snr_bd_db > 0:
        return vec
    power_s = float(np.var(vec.values))
    if power_s == 0.0:
        raise ValueError("undefined SNR_BD for zero signal")
    power_n = power_s * 10.0 ** (-snr_bd_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(power_n), size=len(vec))
    return replace(vec, values=vec.values + noise,
                   noise=NoiseSpec(snr_bd_db, seed))


def save_bucket(path, vec: BucketVector) -> None:
    """Write readings as ``index,value`` CSV with a JSON sidecar holding the
    channel tag and noise record (``<path>.meta.json``)."""
    from .image import _atomic_write
    lines = ["index,value"]
    lines += [f"{k},{float(v)!r}" for k, v in enumerate(vec.values)]
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))
    meta = {
        "channel": vec.channel,
        "offset": list(vec.offset) if vec.offset is not None else None,
        "phi": vec.phi,
        "count": len(vec),
        "noise": None if vec.noise is None else {
            "snr_bd_db": vec.noise.snr_bd_db,
            "seed": list(vec.noise.seed) if isinstance(vec.noise.seed, tuple)
                    else vec.noise.seed,
        },
    }
    _atomic_write(str(path) + ".meta.json",
                  json.dumps(meta, indent=2).encode("utf-8"))


def load_bucket(path) -> BucketVector:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "index,value":
        raise ValueError(f"{path}: expected an 'index,value' bucket CSV")
    values = np.array([float(ln.split(",")[1]) for ln in lines[1:]])
    channel, offset, phi, noise = "raw", None, None, None
    try:
        with open(str(path) + ".meta.json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        channel = meta.get("channel", "raw")
        if meta.get("offset") is not None:
            offset = tuple(int(v) for v in meta["offset"])
        phi = meta.get("phi")
        if meta.get("noise") is not None:
            seed = meta["noise"]["seed"]
            noise = NoiseSpec(meta["noise"]["snr_bd_db"],
                              tuple(seed) if isinstance(seed, list) else seed)
    except FileNotFoundError:
        pass
    return BucketVector(values, channel, offset=offset, phi=phi, noise=noise)
