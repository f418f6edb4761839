"""Image grids, pixel-shift primitives and reference edge operators.

Images are 2-D float64 arrays indexed ``img[x, y]`` with ``x`` the
horizontal (row) coordinate and ``y`` the vertical (column) coordinate.
Object images are dimensionless intensities in [0, 1]; edge maps and
directional channels are unconstrained real grids.
"""

from __future__ import annotations

import math
import os
import re
import tempfile
from enum import Enum

import numpy as np


class ShiftMode(Enum):
    """Boundary rule for one-pixel shifts.

    PERIODIC wraps indices modulo the grid size, which makes every
    shift-based identity exact.  MASTER_CROP reads a larger master canvas
    ((m+2) x (n+2)) and realizes each shift as a crop window, matching how
    a modulator displays displaced copies of one physical field.
    """

    PERIODIC = "periodic"
    MASTER_CROP = "master-crop"

    @classmethod
    def coerce(cls, value) -> "ShiftMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown shift mode: {value!r}")


def as_grid(arr, name: str = "array") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


def as_image(arr, name: str = "image") -> np.ndarray:
    """Coerce to a valid object image: 2-D, >= 3x3, finite, values in [0, 1]."""
    out = as_grid(arr, name)
    m, n = out.shape
    if m < 3 or n < 3:
        raise ValueError(f"{name} must be at least 3x3, got {m}x{n}")
    if out.min() < 0.0 or out.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return out


def shift(img, dx: int, dy: int, mode: ShiftMode = ShiftMode.PERIODIC,
          master: np.ndarray | None = None) -> np.ndarray:
    """Shift a grid so that ``result[a, b] = img[a + dx, b + dy]``.

    PERIODIC wraps out-of-range indices.  MASTER_CROP requires the
    (m+2) x (n+2) master canvas the grid was cropped from and supports
    ``|dx|, |dy| <= 1`` only.
    """
    img = as_grid(img, "img")
    mode = ShiftMode.coerce(mode)
    dx, dy = int(dx), int(dy)
    if mode is ShiftMode.PERIODIC:
        return np.roll(img, shift=(-dx, -dy), axis=(0, 1))
    if master is None:
        raise ValueError("no master canvas")
    master = as_grid(master, "master")
    m, n = img.shape
    if master.shape != (m + 2, n + 2):
        raise ValueError(
            f"master canvas must be {(m + 2, n + 2)}, got {master.shape}")
    if abs(dx) > 1 or abs(dy) > 1:
        raise ValueError("master-crop shifts are limited to one pixel")
    return master[1 + dx:1 + dx + m, 1 + dy:1 + dy + n].copy()


# Stencil taps of the horizontal channel: +{1,2,1} one row above,
# -{1,2,1} one row below.  The vertical channel is the 90-degree rotation.
# Positive and negative taps are accumulated separately and subtracted so
# that structurally equal halves (e.g. on constant images) cancel exactly.
_SOBEL_H_POS = (((-1, -1), 1.0), ((-1, 0), 2.0), ((-1, 1), 1.0))
_SOBEL_H_NEG = (((1, -1), 1.0), ((1, 0), 2.0), ((1, 1), 1.0))
_SOBEL_V_POS = (((-1, -1), 1.0), ((0, -1), 2.0), ((1, -1), 1.0))
_SOBEL_V_NEG = (((-1, 1), 1.0), ((0, 1), 2.0), ((1, 1), 1.0))


def sobel_edges(img, mode: ShiftMode = ShiftMode.PERIODIC,
                master: np.ndarray | None = None):
    """Sobel channels of a grid.

    Returns ``(h, v, magnitude)`` where
    ``h[x, y] = img[x-1, y-1] + 2 img[x-1, y] + img[x-1, y+1]
    - img[x+1, y-1] - 2 img[x+1, y] - img[x+1, y+1]``, ``v`` is the
    90-degree-rotated stencil and ``magnitude = sqrt(h**2 + v**2)``.
    Neighbors are resolved by ``mode``.
    """
    img = as_grid(img, "img")
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError("sobel_edges needs at least a 3x3 grid")

    def taps(weighted):
        acc = np.zeros_like(img)
        for (dx, dy), w in weighted:
            acc += w * shift(img, dx, dy, mode, master)
        return acc

    h = taps(_SOBEL_H_POS) - taps(_SOBEL_H_NEG)
    v = taps(_SOBEL_V_POS) - taps(_SOBEL_V_NEG)
    return h, v, np.hypot(h, v)


def gradient_offset(phi_degrees) -> tuple[int, int]:
    """Unit pixel offset (dx, dy) of a 45-degree-multiple direction."""
    phi = float(phi_degrees) % 360.0
    if phi % 45.0 != 0.0:
        raise ValueError(
            f"unsupported angle {phi_degrees!r}: only multiples of 45 degrees "
            "map onto integer pixel offsets")
    rad = math.radians(phi)
    return int(round(math.cos(rad))), int(round(math.sin(rad)))


def directional_gradient(img, phi_degrees, mode: ShiftMode = ShiftMode.PERIODIC,
                         master: np.ndarray | None = None) -> np.ndarray:
    """One-pixel directional difference ``img[p + (dx, dy)] - img[p]``.

    ``(dx, dy)`` is the rounded unit vector of ``phi_degrees``; neighbors
    are resolved by ``mode``.
    """
    img = as_grid(img, "img")
    dx, dy = gradient_offset(phi_degrees)
    return shift(img, dx, dy, mode, master) - img


def normalize_map(arr) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant map collapses to all zeros."""
    arr = as_grid(arr, "map")
    lo = arr.min()
    span = arr.max() - lo
    if span == 0.0:
        return np.zeros_like(arr)
    return (arr - lo) / span


def _atomic_write(path, data: bytes) -> None:
    """Write bytes via a temp file + rename so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pgm(path, img) -> None:
    """Write a grid as binary 8-bit PGM (P5), mapping [0, 1] to 0..255.

    Values are clipped to [0, 1] before quantization.
    """
    img = as_grid(img, "img")
    data = np.clip(img, 0.0, 1.0)
    pixels = np.rint(data * 255.0).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    _atomic_write(path, header + pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM (P5) into a float image in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        match = re.match(rb"(?:\s+|#[^\n]*\n)*(\d+)", raw[pos:])
        if match is None:
            raise ValueError(f"{path}: malformed PGM header")
        tokens.append(int(match.group(1)))
        pos += match.end()
    width, height, maxval = tokens
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval={maxval})")
    pos += 1  # single whitespace byte after maxval
    expected = width * height
    if len(raw) - pos < expected:
        raise ValueError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=expected, offset=pos)
    img = pixels.reshape(height, width).astype(np.float64) / float(maxval)
    return img
