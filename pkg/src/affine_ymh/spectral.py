"""Trigonometric differentiation on the uniform periodic grid of [0, 1)^n."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _ik(grid: int) -> np.ndarray:
    k = np.fft.fftfreq(grid, d=1.0 / grid)
    if grid % 2 == 0:
        # the Nyquist mode has no odd-derivative partner; dropping it keeps D real and skew
        k[grid // 2] = 0.0
    return 2j * np.pi * k


def diff(values: np.ndarray, axis: int) -> np.ndarray:
    """First derivative of periodic grid data along ``axis``."""
    grid = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = grid
    spec = np.fft.fft(values, axis=axis)
    spec *= _ik(grid).reshape(shape)
    return np.fft.ifft(spec, axis=axis)


def wavenumbers(grid: int, dim: int) -> list:
    """Angular wavenumbers 2*pi*k per axis, broadcastable over an n-dimensional grid."""
    k = 2.0 * np.pi * np.fft.fftfreq(grid, d=1.0 / grid)
    out = []
    for axis in range(dim):
        shape = [1] * dim
        shape[axis] = grid
        out.append(k.reshape(shape))
    return out


def grid_points(grid: int, dim: int) -> list:
    """Coordinate arrays x^1..x^n of the grid, each of shape (grid,)*dim."""
    x = np.arange(grid) / grid
    return list(np.meshgrid(*([x] * dim), indexing="ij"))
