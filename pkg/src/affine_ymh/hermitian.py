"""Hermitian metrics on flat Higgs bundles: connection, curvature, degree, Chern-Weil integrals.

A metric is stored as the matrix field H(x) of h in the periodic frame, with the
convention h(s, t) = t^dagger H s.  With alpha = 1/2 sum L_j dzbar^j the (0,1)
part of the flat connection, the (1,0) part of the metric connection is

    theta_i = 1/2 H^{-1} (d_i H - L_i^dagger H),

and the Higgs adjoint is phi*_j = H^{-1} phi_j^dagger H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus
from .bundle import FlatHiggsBundle
from .calculus import PQField
from .errors import NotAstheno, NotPositive, RankMismatch, ZeroVolume
from .geometry import AffineTorus, astheno_defect, integrate
from .matfun import dagger, hermitize
from .spectral import diff

EIGEN_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class MetricField:
    """Grid of Hermitian positive-definite r x r matrices, shape (*grid, r, r)."""

    H: np.ndarray

    def __post_init__(self):
        if self.H.ndim < 3 or self.H.shape[-1] != self.H.shape[-2]:
            raise RankMismatch(f"metric field has shape {self.H.shape}")

    @property
    def rank(self) -> int:
        return self.H.shape[-1]

    @classmethod
    def from_array(cls, H, floor: float = EIGEN_FLOOR) -> "MetricField":
        H = np.asarray(H, dtype=complex)
        scale = max(1.0, float(np.abs(H).max()))
        if np.abs(H - dagger(H)).max() > 1e-10 * scale:
            raise NotPositive("metric field is not Hermitian")
        H = hermitize(H)
        lowest = float(np.linalg.eigvalsh(H).min())
        if lowest <= floor:
            raise NotPositive(f"metric eigenvalue {lowest:.3g} at or below floor {floor:g}")
        return cls(H)

    @classmethod
    def constant(cls, torus: AffineTorus, matrix) -> "MetricField":
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls.from_array(np.broadcast_to(m, torus.shape + m.shape).copy())

    @classmethod
    def identity(cls, torus: AffineTorus, rank: int) -> "MetricField":
        return cls.constant(torus, np.eye(rank))

    def scaled(self, factor: np.ndarray) -> "MetricField":
        """Conformal change H -> factor(x) H for a positive grid function."""
        return MetricField(self.H * np.asarray(factor)[..., None, None])


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    part20: PQField
    part11: PQField
    part02: PQField

    def total_22(self) -> PQField:
        """The (2,2) part of Omega ^ Omega."""
        w = calculus.wedge
        return w(self.part11, self.part11) + w(self.part20, self.part02) + w(self.part02, self.part20)


def _check(bundle: FlatHiggsBundle, torus: AffineTorus, H: MetricField):
    if H.rank != bundle.rank:
        raise RankMismatch(f"metric has rank {H.rank}, bundle has rank {bundle.rank}")
    if bundle.dim != torus.dim:
        raise RankMismatch(f"bundle over T^{bundle.dim} but torus has dimension {torus.dim}")
    if H.H.shape[:-2] != torus.shape:
        raise RankMismatch(f"metric grid {H.H.shape[:-2]} differs from torus grid {torus.shape}")


def _constant_form(mats: np.ndarray, torus: AffineTorus, holomorphic: bool) -> PQField:
    """sum_i mats[i] dz^i (or dzbar^i) as a constant End E-valued field."""
    n, r = torus.dim, mats.shape[-1]
    field = np.broadcast_to(mats[(slice(None),) + (None,) * n], (n,) + torus.shape + (r, r))
    coeffs = field[:, None] if holomorphic else field[None, :]
    return PQField(1, 0, n, coeffs.astype(complex)) if holomorphic else PQField(0, 1, n, coeffs.astype(complex))


def higgs_form(bundle: FlatHiggsBundle, torus: AffineTorus) -> PQField:
    return _constant_form(bundle.higgs, torus, holomorphic=True)


def flat_01_form(bundle: FlatHiggsBundle, torus: AffineTorus) -> PQField:
    """alpha = 1/2 sum L_j dzbar^j, the (0,1) part of the flat connection matrix."""
    return _constant_form(0.5 * bundle.logs, torus, holomorphic=False)


def extended_connection_form(bundle, torus, H: MetricField) -> PQField:
    _check(bundle, torus, H)
    Hm = H.H
    Hinv = np.linalg.inv(Hm)
    coeffs = np.stack(
        [0.5 * Hinv @ (diff(Hm, axis=i) - dagger(bundle.logs[i]) @ Hm) for i in range(torus.dim)]
    )
    return PQField(1, 0, torus.dim, coeffs[:, None])


def higgs_adjoint(bundle, torus, H: MetricField) -> PQField:
    _check(bundle, torus, H)
    Hm = H.H
    Hinv = np.linalg.inv(Hm)
    coeffs = np.stack([Hinv @ dagger(p) @ Hm for p in bundle.higgs])
    return PQField(0, 1, torus.dim, coeffs[None, :])


def extended_curvature(bundle, torus, H: MetricField) -> CurvatureBundle:
    theta = extended_connection_form(bundle, torus, H)
    phi_star = higgs_adjoint(bundle, torus, H)
    phi = higgs_form(bundle, torus)
    alpha = flat_01_form(bundle, torus)
    br = calculus.bracket
    # on a circle there are no 2-forms
    part20 = part02 = None
    if torus.dim >= 2:
        part20 = calculus.del_(phi) + br(theta, phi)
        part02 = calculus.dbar(phi_star) + br(alpha, phi_star)
    part11 = calculus.dbar(theta) + br(alpha, theta) + br(phi, phi_star)
    return CurvatureBundle(part20, part11, part02)


def mean_curvature(bundle, torus, H: MetricField) -> np.ndarray:
    """K^phi = tr_g of the (1,1) part of the extended curvature, shape (*grid, r, r)."""
    return calculus.contract_g(torus, extended_curvature(bundle, torus, H).part11).values()


def first_chern_form(bundle, torus, H: MetricField) -> PQField:
    return extended_curvature(bundle, torus, H).part11.trace()


def chern_identity_defect(bundle, torus, H: MetricField) -> float:
    """Sup-norm of (tr K) omega^n - n c_1 ^ omega^{n-1}."""
    n = torus.dim
    curv = extended_curvature(bundle, torus, H)
    trK = calculus.contract_g(torus, curv.part11).values()
    trK = np.trace(trK, axis1=-2, axis2=-1)
    lhs = calculus.wedge(PQField.function(trK, n), torus.omega_power(n))
    rhs = calculus.wedge(curv.part11.trace(), torus.omega_power(n - 1))
    return (lhs - n * rhs).sup_norm()


def degree(bundle, torus, H: MetricField | None = None) -> float:
    if H is None:
        H = MetricField.identity(torus, bundle.rank)
    c1 = first_chern_form(bundle, torus, H)
    return float(np.real(integrate(torus, calculus.wedge(c1, torus.omega_power(torus.dim - 1)))))


def slope(bundle, torus, H: MetricField | None = None) -> float:
    return degree(bundle, torus, H) / bundle.rank


def einstein_factor(bundle, torus, H: MetricField | None = None) -> float:
    volume = torus.volume
    if volume == 0:
        raise ZeroVolume("integral of omega^n vanishes")
    return torus.dim * slope(bundle, torus, H) / volume


def bogomolov_integral(bundle, torus, H: MetricField, tol: float = 1e-10) -> float:
    """Integral of (2r c_2 - (r-1) c_1^2) ^ omega^{n-2}, bare-trace normalization.

    With c_2 = 1/2 (c_1^2 - tr Omega^2) the integrand is c_1^2 - r tr(Omega ^ Omega),
    which vanishes identically in rank 1 and for flat Omega.
    """
    if torus.dim < 2:
        raise ValueError("Bogomolov integral needs n >= 2")
    defect = astheno_defect(torus)
    if defect > tol:
        raise NotAstheno(f"del dbar omega^(n-2) has sup-norm {defect:.3g} > {tol:g}")
    curv = extended_curvature(bundle, torus, H)
    c1_11 = curv.part11.trace()
    c1_20, c1_02 = curv.part20.trace(), curv.part02.trace()
    w = calculus.wedge
    c1_sq = w(c1_11, c1_11) + w(c1_20, c1_02) + w(c1_02, c1_20)
    density = c1_sq - bundle.rank * curv.total_22().trace()
    return float(np.real(integrate(torus, w(density, torus.omega_power(torus.dim - 2)))))
