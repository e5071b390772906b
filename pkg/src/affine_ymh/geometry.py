"""Flat affine tori R^n/Z^n with a parallel volume form and a Riemannian metric."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np

from . import calculus
from .calculus import PQField
from .errors import BadGrid, NonSPDMetric
from .spectral import grid_points


@dataclass(frozen=True, eq=False)
class AffineTorus:
    """Unit-lattice torus sampled on a uniform N^n grid.

    ``metric`` holds g_ij(x) with shape ``(*grid, n, n)``; ``nu`` is the constant
    coefficient of the parallel volume form nu dx^1 ^ ... ^ dx^n.
    """

    dim: int
    grid: int
    metric: np.ndarray
    nu: float

    @property
    def shape(self) -> tuple:
        return (self.grid,) * self.dim

    @cached_property
    def metric_inv(self) -> np.ndarray:
        return np.linalg.inv(self.metric)

    @cached_property
    def points(self) -> list:
        return grid_points(self.grid, self.dim)

    @cached_property
    def omega(self) -> PQField:
        """The (1,1)-form omega_g = sum g_ij dz^i (x) dzbar^j."""
        coeffs = np.moveaxis(self.metric, (-2, -1), (0, 1)).astype(complex)
        return PQField(1, 1, self.dim, coeffs)

    def omega_power(self, k: int) -> PQField:
        if k == 0:
            return PQField.function(np.ones(self.shape), self.dim)
        out = self.omega
        for _ in range(k - 1):
            out = calculus.wedge(out, self.omega)
        return out

    @cached_property
    def volume_density(self) -> np.ndarray:
        """Grid density of omega^n / nu (positive for an SPD metric)."""
        return np.real(calculus.divide_by_nu(self.omega_power(self.dim), self.nu))

    @cached_property
    def volume(self) -> float:
        """Integral of omega^n / nu."""
        return integrate(self, self.omega_power(self.dim))

    def is_constant_metric(self) -> bool:
        flat = self.metric.reshape(-1, self.dim, self.dim)
        return bool(np.all(flat == flat[0]))


def make_torus(dim: int, grid: int, metric, nu: float = 1.0) -> AffineTorus:
    """Validated torus.

    ``metric`` is a constant n x n matrix, a ``(*grid, n, n)`` array, or a callable
    taking the list of coordinate arrays and returning one of those.
    """
    if dim < 1:
        raise BadGrid(f"dimension must be >= 1, got {dim}")
    if grid < 4 or grid % 2:
        raise BadGrid(f"grid resolution must be even and >= 4, got {grid}")
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    shape = (grid,) * dim
    if callable(metric):
        metric = metric(grid_points(grid, dim))
    g = np.asarray(metric, dtype=float)
    if g.shape == (dim, dim):
        g = np.broadcast_to(g, shape + (dim, dim)).copy()
    if g.shape != shape + (dim, dim):
        raise NonSPDMetric(f"metric has shape {g.shape}, expected {(dim, dim)} or {shape + (dim, dim)}")
    if not np.allclose(g, np.swapaxes(g, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
        raise NonSPDMetric("metric is not symmetric")
    lowest = np.linalg.eigvalsh(g).min()
    if not lowest > 0:
        raise NonSPDMetric(f"metric not positive-definite (smallest eigenvalue {lowest:.3g})")
    g.setflags(write=False)
    return AffineTorus(dim, grid, g, float(nu))


def conformal_sine(dim: int, amplitude: float = 1.0, axis: int = 0):
    """g(x) = exp(a sin 2 pi x^axis) I; not Gauduchon unless a = 0 or n = 1."""

    def metric(points):
        factor = np.exp(amplitude * np.sin(2 * np.pi * points[axis]))
        return factor[..., None, None] * np.eye(dim)

    return metric


def separable_sine(amplitudes):
    """g = diag(exp(a_k sin 2 pi x^k)); each g_kk depends on x^k only, which makes it Gauduchon."""
    amplitudes = list(amplitudes)
    dim = len(amplitudes)

    def metric(points):
        g = np.zeros(points[0].shape + (dim, dim))
        for k, a in enumerate(amplitudes):
            g[..., k, k] = np.exp(a * np.sin(2 * np.pi * points[k]))
        return g

    return metric


def integrate(torus: AffineTorus, chi: PQField):
    """Integral of chi/nu over M by the periodic midpoint rule."""
    value = np.mean(calculus.divide_by_nu(chi, torus.nu))
    if abs(value.imag) <= 1e-10 * max(1.0, abs(value.real)):
        return float(value.real)
    return complex(value)


def gauduchon_defect(torus: AffineTorus) -> float:
    """Sup-norm of del dbar (omega^{n-1}); zero iff g is affine Gauduchon."""
    form = torus.omega_power(torus.dim - 1)
    return calculus.del_(calculus.dbar(form)).sup_norm()


def astheno_defect(torus: AffineTorus) -> float:
    """Sup-norm of del dbar (omega^{n-2})."""
    if torus.dim < 2:
        raise ValueError("astheno-Kaehler condition needs n >= 2")
    if torus.dim == 2:
        # omega^0 is the constant 1
        return 0.0
    form = torus.omega_power(torus.dim - 2)
    return calculus.del_(calculus.dbar(form)).sup_norm()


def volume_oracle(torus: AffineTorus) -> float:
    """n! mean(det g) / nu, the value integrate(omega^n) must reproduce."""
    return factorial(torus.dim) * float(np.mean(np.linalg.det(torus.metric))) / torus.nu
