"""Deterministic test objects at desk scale."""

from __future__ import annotations

import numpy as np


def nested_rectangles(n: int = 32) -> np.ndarray:
    """Piecewise-constant phantom: three nested axis-aligned rectangles."""
    if n < 16:
        raise ValueError("nested_rectangles needs n >= 16")
    img = np.zeros((n, n))
    img[n // 4:n - n // 4, n // 4:n - n // 4] = 0.4
    img[3 * n // 8:n - 3 * n // 8, 3 * n // 8:n - 3 * n // 8] = 0.75
    img[7 * n // 16:n - 7 * n // 16, 7 * n // 16:n - 7 * n // 16] = 1.0
    return img


def binary_shapes(n: int = 64) -> np.ndarray:
    """Binary object made of a few solid blocks with crisp boundaries."""
    if n < 32:
        raise ValueError("binary_shapes needs n >= 32")
    s = n / 64.0
    img = np.zeros((n, n))

    def block(x0, x1, y0, y1, value=1.0):
        img[int(x0 * s):int(x1 * s), int(y0 * s):int(y1 * s)] = value

    block(10, 30, 14, 50)
    block(38, 56, 8, 24)
    block(40, 52, 34, 56)
    return img


def detailed_shapes(n: int = 64, dots: int = 60, contrast: float = 0.3,
                    seed: int = 7) -> np.ndarray:
    """Gray object: the solid blocks of :func:`binary_shapes` over a mid-gray
    background peppered with small low-contrast blocks.

    The fine detail keeps the image content busy while the dominant edges
    remain the shape outlines, the regime where edge-domain recovery pays
    off against image-then-operator pipelines.
    """
    if n < 32:
        raise ValueError("detailed_shapes needs n >= 32")
    rng = np.random.default_rng(seed)
    img = np.full((n, n), 0.45)
    s = n / 64.0

    def block(x0, x1, y0, y1, value):
        img[int(x0 * s):int(x1 * s), int(y0 * s):int(y1 * s)] = value

    block(10, 30, 14, 50, 0.9)
    block(38, 56, 8, 24, 0.05)
    block(40, 52, 34, 56, 0.95)

    # Keep the pepper clear of the shapes and their close surroundings.
    from scipy.ndimage import binary_dilation
    exclusion = binary_dilation(img != 0.45, np.ones((7, 7), dtype=bool))
    placed = 0
    while placed < dots:
        x0, y0 = (int(v) for v in rng.integers(1, n - 3, 2))
        size = int(rng.integers(1, 3))
        if exclusion[x0 - 1:x0 + size + 1, y0 - 1:y0 + size + 1].any():
            continue
        level = 0.45 + rng.choice([-1.0, 1.0]) * contrast * rng.uniform(0.5, 1.0)
        img[x0:x0 + size, y0:y0 + size] = level
        placed += 1
    return np.clip(img, 0.0, 1.0)
