"""Random speckle stacks, one-pixel shifted groups and the sampling matrix."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .image import ShiftMode

# Row-major enumeration of the 3x3 offset neighborhood; index 4 is (0, 0).
OFFSETS_3X3 = tuple((dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1))
SHIFTED_OFFSETS = tuple(o for o in OFFSETS_3X3 if o != (0, 0))


def offset_index(offset) -> int:
    """Canonical index of a one-pixel offset in the 3x3 neighborhood."""
    try:
        return OFFSETS_3X3.index((int(offset[0]), int(offset[1])))
    except ValueError:
        raise ValueError(f"offset {offset!r} is not in {{-1, 0, 1}}^2") from None


class Distribution(Enum):
    """Per-pixel amplitude law of the random patterns."""

    BERNOULLI01 = "bernoulli"  # fair coin on {0, 1}; matches binary modulators
    UNIFORM = "uniform"        # uniform on [0, 1)

    @classmethod
    def coerce(cls, value) -> "Distribution":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for dist in cls:
            if dist.value == key or dist.name.lower() == key:
                return dist
        raise ValueError(f"unknown distribution: {value!r}")


@dataclass(frozen=True, eq=False)
class PatternStack:
    """A stack of M random illumination patterns plus generation metadata.

    ``patterns`` has shape (M, m, n).  In MASTER_CROP mode ``masters``
    holds the (M, m+2, n+2) canvases every one-pixel crop derives from,
    so all nine shifted groups of a pattern come from one field.
    ``offset`` records the cumulative group shift relative to generation.
    """

    patterns: np.ndarray
    distribution: Distribution
    seed: int
    mode: ShiftMode
    masters: np.ndarray | None = None
    offset: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.patterns.ndim != 3 or self.patterns.shape[0] < 1:
            raise ValueError("patterns must be a non-empty (M, m, n) array")
        if self.mode is ShiftMode.MASTER_CROP and self.masters is None:
            raise ValueError("no master canvas")

    @property
    def count(self) -> int:
        return self.patterns.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.patterns.shape[1:]

    def matrix(self) -> np.ndarray:
        """(M, m*n) sampling matrix: row k is pattern k flattened row-major,
        i.e. all y of x_1 first, then x_2, ..."""
        return self.patterns.reshape(self.count, -1)


def _pattern_rng(seed: int, k: int) -> np.random.Generator:
    # Counter-based generator keyed per pattern: pattern k is reproducible
    # independently of generation order.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, k))))


def generate_patterns(m: int, n: int, count: int, seed: int,
                      distribution=Distribution.BERNOULLI01,
                      mode: ShiftMode = ShiftMode.PERIODIC) -> PatternStack:
    """Draw ``count`` independent m x n patterns, deterministically from ``seed``.

    MASTER_CROP mode draws (m+2) x (n+2) master canvases and defines each
    pattern as the center crop.
    """
    m, n, count = int(m), int(n), int(count)
    if m < 3 or n < 3:
        raise ValueError(f"pattern size must be at least 3x3, got {m}x{n}")
    if count < 1:
        raise ValueError(f"pattern count must be positive, got {count}")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a nonnegative 64-bit integer")
    distribution = Distribution.coerce(distribution)
    mode = ShiftMode.coerce(mode)

    draw_shape = (m + 2, n + 2) if mode is ShiftMode.MASTER_CROP else (m, n)
    draws = np.empty((count,) + draw_shape, dtype=np.float64)
    for k in range(count):
        rng = _pattern_rng(seed, k)
        if distribution is Distribution.BERNOULLI01:
            draws[k] = rng.integers(0, 2, size=draw_shape)
        else:
            draws[k] = rng.random(draw_shape)

    if mode is ShiftMode.MASTER_CROP:
        patterns = draws[:, 1:1 + m, 1:1 + n].copy()
        return PatternStack(patterns, distribution, seed, mode, masters=draws)
    return PatternStack(draws, distribution, seed, mode)


def shifted_stack(stack: PatternStack, offset) -> PatternStack:
    """The group of one-pixel shifted copies: pattern k of the result is
    ``shift(pattern k, dx, dy)`` under the stack's boundary mode.

    Offsets accumulate, so shifting by (+1, 0) then (-1, 0) restores the
    original patterns.
    """
    dx, dy = int(offset[0]), int(offset[1])
    if abs(dx) > 1 or abs(dy) > 1:
        raise ValueError(f"offset {offset!r} is not in {{-1, 0, 1}}^2")
    if (dx, dy) == (0, 0):
        return replace(stack)
    total = (stack.offset[0] + dx, stack.offset[1] + dy)
    if stack.mode is ShiftMode.PERIODIC:
        patterns = np.roll(stack.patterns, shift=(-dx, -dy), axis=(1, 2))
    else:
        if stack.masters is None:
            raise ValueError("no master canvas")
        if abs(total[0]) > 1 or abs(total[1]) > 1:
            raise ValueError(
                f"cumulative master-crop offset {total} exceeds one pixel")
        m, n = stack.shape
        ox, oy = total
        patterns = stack.masters[:, 1 + ox:1 + ox + m, 1 + oy:1 + oy + n].copy()
    return replace(stack, patterns=patterns, offset=total)


def unflatten(row, shape) -> np.ndarray:
    """Inverse of the row-major flattening used by :meth:`PatternStack.matrix`."""
    row = np.asarray(row, dtype=np.float64)
    m, n = int(shape[0]), int(shape[1])
    if row.size != m * n:
        raise ValueError(f"row of length {row.size} cannot fill {m}x{n}")
    return row.reshape(m, n)


# Stack container: little-endian header followed by row-major float32
# payload (master canvases in MASTER_CROP mode, plain patterns otherwise).
_MAGIC = b"GHOSTPAT"
_VERSION = 1
_HEADER = struct.Struct("<8sIIIIBBHQ")
_DIST_CODE = {Distribution.BERNOULLI01: 0, Distribution.UNIFORM: 1}
_MODE_CODE = {ShiftMode.PERIODIC: 0, ShiftMode.MASTER_CROP: 1}


def save_stack(path, stack: PatternStack) -> None:
    """Serialize an unshifted stack; the round trip is bit-exact."""
    if stack.offset != (0, 0):
        raise ValueError("only unshifted stacks can be serialized")
    m, n = stack.shape
    header = _HEADER.pack(_MAGIC, _VERSION, m, n, stack.count,
                          _DIST_CODE[stack.distribution],
                          _MODE_CODE[stack.mode], 0, stack.seed)
    payload = stack.masters if stack.mode is ShiftMode.MASTER_CROP else stack.patterns
    from .image import _atomic_write
    _atomic_write(path, header + payload.astype(np.float32).tobytes())


def load_stack(path) -> PatternStack:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated stack container")
    magic, version, m, n, count, dist_code, mode_code, _, seed = \
        _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a pattern stack container")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    distribution = {v: k for k, v in _DIST_CODE.items()}[dist_code]
    mode = {v: k for k, v in _MODE_CODE.items()}[mode_code]
    rows, cols = (m + 2, n + 2) if mode is ShiftMode.MASTER_CROP else (m, n)
    expected = count * rows * cols
    if len(raw) - _HEADER.size < 4 * expected:
        raise ValueError(f"{path}: truncated pattern payload")
    payload = np.frombuffer(raw, dtype="<f4", count=expected,
                            offset=_HEADER.size)
    grids = payload.reshape(count, rows, cols).astype(np.float64)
    if mode is ShiftMode.MASTER_CROP:
        patterns = grids[:, 1:1 + m, 1:1 + n].copy()
        return PatternStack(patterns, distribution, seed, mode, masters=grids)
    return PatternStack(grids, distribution, seed, mode)
