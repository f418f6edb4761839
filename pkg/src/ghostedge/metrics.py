"""Quantitative evaluation of edge maps: region masks, edge SNR, sampling ratios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from .image import ShiftMode, as_grid, sobel_edges


@dataclass(frozen=True)
class RegionMasks:
    """Disjoint boolean masks selecting edge pixels and background pixels."""

    edge: np.ndarray
    background: np.ndarray

    def __post_init__(self):
        edge = np.asarray(self.edge, dtype=bool)
        back = np.asarray(self.background, dtype=bool)
        if edge.shape != back.shape:
            raise ValueError("edge and background masks must share a shape")
        if np.any(edge & back):
            raise ValueError("edge and background masks must be disjoint")
        if not edge.any():
            raise ValueError("edge mask is empty")
        if int(back.sum()) < 2:
            raise ValueError("background mask needs at least 2 pixels")
        object.__setattr__(self, "edge", edge)
        object.__setattr__(self, "background", back)


def edge_snr(edge_map, masks: RegionMasks) -> float:
    """Contrast of the edge region against the background scatter:
    ``(mean(edge) - mean(back)) / std(back)`` with population variance."""
    edge_map = as_grid(edge_map, "edge_map")
    if edge_map.shape != masks.edge.shape:
        raise ValueError(
            f"map shape {edge_map.shape} does not match masks {masks.edge.shape}")
    back = edge_map[masks.background]
    var = float(np.var(back))
    if var == 0.0:
        raise ValueError("degenerate background")
    return float((edge_map[masks.edge].mean() - back.mean()) / np.sqrt(var))


def compression_ratio(n_patterns: int, m: int, n: int) -> float:
    """Fraction of Nyquist-rate samples used: ``M / (m * n)``."""
    n_patterns, m, n = int(n_patterns), int(m), int(n)
    if n_patterns < 1 or m < 1 or n < 1:
        raise ValueError("pattern count and dimensions must be positive")
    return n_patterns / (m * n)


def total_measurements(n_patterns: int, shifts_per_pattern: int) -> int:
    """Bucket readings consumed: patterns times one-pixel shifts per pattern
    (2 for a directional gradient, 8 for the Sobel channels)."""
    n_patterns, shifts = int(n_patterns), int(shifts_per_pattern)
    if n_patterns < 1 or shifts < 1:
        raise ValueError("counts must be positive")
    return n_patterns * shifts


def region_masks(ground_truth, dilation: int = 2,
                 threshold_fraction: float = 0.5) -> RegionMasks:
    """Edge/background partition of a ground-truth object.

    Edge pixels are where the Sobel magnitude of the ground truth reaches
    ``threshold_fraction`` of its maximum; the background is the complement
    minus a ``dilation``-pixel halo around the edges, so ambiguous border
    pixels count toward neither region.
    """
    truth = as_grid(ground_truth, "ground_truth")
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must lie strictly in (0, 1)")
    dilation = int(dilation)
    if dilation < 0:
        raise ValueError("dilation must be nonnegative")
    _, _, magnitude = sobel_edges(truth, ShiftMode.PERIODIC)
    peak = magnitude.max()
    if peak == 0.0:
        raise ValueError("no edge pixels: ground truth has uniform intensity")
    edge = magnitude >= threshold_fraction * peak
    if dilation > 0:
        halo = binary_dilation(edge, structure=np.ones((3, 3), dtype=bool),
                               iterations=dilation)
    else:
        halo = edge
    background = ~halo
    if int(background.sum()) < 2:
        raise ValueError("background region is empty after edge dilation")
    return RegionMasks(edge, background)
