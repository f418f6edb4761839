import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sobel_loop_oracle(img):
    """Dense 3x3 stencil applied pixel by pixel with periodic wrap.

    Independent of the package implementation: plain index arithmetic,
    no shift helpers.
    """
    m, n = img.shape
    h = np.zeros((m, n))
    v = np.zeros((m, n))
    for x in range(m):
        for y in range(n):
            up, down = (x - 1) % m, (x + 1) % m
            left, right = (y - 1) % n, (y + 1) % n
            h[x, y] = (img[up, left] + 2 * img[up, y] + img[up, right]
                       - img[down, left] - 2 * img[down, y] - img[down, right])
            v[x, y] = (img[up, left] + 2 * img[x, left] + img[down, left]
                       - img[up, right] - 2 * img[x, right] - img[down, right])
    return h, v, np.sqrt(h ** 2 + v ** 2)


def diff_loop_oracle(img, dx, dy):
    """One-pixel directional difference by explicit index arithmetic."""
    m, n = img.shape
    out = np.zeros((m, n))
    for x in range(m):
        for y in range(n):
            out[x, y] = img[(x + dx) % m, (y + dy) % n] - img[x, y]
    return out


def bucket_loop_oracle(pattern, obj):
    """Multiply-accumulate over all pixels, one term at a time."""
    total = 0.0
    m, n = pattern.shape
    for x in range(m):
        for y in range(n):
            total += pattern[x, y] * obj[x, y]
    return total


def ncc(a, b):
    """Zero-mean normalized cross-correlation of two maps."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    a = a - a.mean()
    b = b - b.mean()
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom)
