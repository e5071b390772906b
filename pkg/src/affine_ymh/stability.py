"""Slope stability of flat Higgs bundles on tori.

Flat phi-invariant subbundles correspond to subspaces invariant under every
monodromy matrix and every Higgs matrix.  Since these generators commute, the
invariant subspaces are sums of invariant subspaces of the joint generalized
eigenspaces, which is what ``invariant_subspaces`` enumerates.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import calculus
from .bundle import FlatHiggsBundle, _riesz_projectors, make_bundle
from .errors import NotInvariant, SlopeDefectMismatch
from .geometry import integrate
from .hermitian import (
    MetricField,
    degree,
    extended_connection_form,
    flat_01_form,
    higgs_adjoint,
    mean_curvature,
    slope,
)
from .matfun import dagger

logger = logging.getLogger(__name__)

TIE_TOL = 1e-7
BAND_TOL = 1e-6
INVARIANCE_TOL = 1e-10

VERDICTS = ("stable", "semistable_not_polystable", "polystable", "unstable", "indeterminate")


@dataclass
class Witness:
    basis: np.ndarray
    rank: int
    slope: float


@dataclass
class StabilityReport:
    verdict: str
    mu_E: float
    witnesses: list = field(default_factory=list)


def invariance_residual(bundle: FlatHiggsBundle, basis: np.ndarray) -> float:
    """max ||(I - P) G P|| over generators G, P the orthogonal projector onto span(basis)."""
    q, _ = np.linalg.qr(basis)
    proj = q @ dagger(q)
    comp = np.eye(bundle.rank) - proj
    worst = 0.0
    for g in bundle.generators:
        scale = max(1.0, np.linalg.norm(g))
        worst = max(worst, float(np.linalg.norm(comp @ g @ proj)) / scale)
    return worst


def _orth(vectors: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    if vectors.size == 0:
        return vectors.reshape(vectors.shape[0], 0)
    return scipy.linalg.orth(vectors, rcond=rtol)


def _joint_spectral_projectors(bundle: FlatHiggsBundle) -> list:
    """Projectors onto the joint generalized eigenspaces of the commuting generators."""
    r = bundle.rank
    rng = np.random.default_rng(12345)
    weights = rng.normal(size=len(bundle.generators)) + 1j * rng.normal(size=len(bundle.generators))
    combo = sum(w * g for w, g in zip(weights, bundle.generators))
    projectors = _riesz_projectors(combo)
    return projectors or [np.eye(r, dtype=complex)]


def _socle_series(bundle, proj: np.ndarray) -> list:
    """Increasing chain of invariant subspaces S_1 (joint eigenvectors) < S_2 < ... inside range(proj)."""
    r = bundle.rank
    dim = int(round(np.real(np.trace(proj))))
    space = _orth(proj)
    shifted = []
    for g in bundle.generators:
        lam = np.trace(dagger(space) @ g @ space) / dim
        shifted.append(g - lam * np.eye(r))
    outside = np.eye(r) - space @ dagger(space)
    chain = []
    current = np.zeros((r, 0), dtype=complex)
    while current.shape[1] < dim:
        comp = np.eye(r) - current @ dagger(current)
        system = np.vstack([comp @ n for n in shifted] + [outside])
        nxt = scipy.linalg.null_space(system, rcond=1e-8)
        if nxt.shape[1] <= current.shape[1]:
            break
        chain.append(nxt)
        current = nxt
    return chain


def _candidates_in_block(bundle, proj) -> list:
    chain = _socle_series(bundle, proj)
    cands = list(chain)
    if chain and chain[0].shape[1] >= 2:
        # a continuum of joint eigenlines; keep a basis of representatives
        cands.extend(chain[0][:, [k]] for k in range(chain[0].shape[1]))
    cands.append(_orth(proj))
    return cands


def invariant_subspaces(bundle: FlatHiggsBundle) -> list:
    """Orthonormal bases of proper joint invariant subspaces (deduplicated)."""
    r = bundle.rank
    if r == 1:
        return []
    blocks = [_candidates_in_block(bundle, p) for p in _joint_spectral_projectors(bundle)]
    seen, out = [], []
    for choice in itertools.product(*[[None] + b for b in blocks]):
        parts = [c for c in choice if c is not None]
        if not parts:
            continue
        basis = _orth(np.hstack(parts))
        if not 0 < basis.shape[1] < r:
            continue
        proj = basis @ dagger(basis)
        if any(np.linalg.norm(proj - s) < 1e-8 for s in seen):
            continue
        if invariance_residual(bundle, basis) > INVARIANCE_TOL:
            logger.debug("dropping candidate of rank %d with invariance residual above tolerance", basis.shape[1])
            continue
        seen.append(proj)
        out.append(basis)
    out.sort(key=lambda b: (b.shape[1], -np.abs(b[0]).max()))
    return out


def subbundle(bundle: FlatHiggsBundle, basis: np.ndarray) -> FlatHiggsBundle:
    """Flat Higgs bundle induced on span(basis) (basis orthonormal, invariant)."""
    left = np.linalg.pinv(basis)
    s = basis.shape[1]
    rho = [left @ m @ basis for m in bundle.monodromy]
    phi = [left @ p @ basis for p in bundle.higgs]
    return make_bundle(s, rho, phi)


def induced_metric(H: MetricField, basis: np.ndarray) -> MetricField:
    return MetricField(dagger(basis) @ H.H @ basis)


def subbundle_slope(bundle, torus, basis, H: MetricField | None = None) -> float:
    if H is None:
        H = MetricField.identity(torus, bundle.rank)
    sub = subbundle(bundle, basis)
    return slope(sub, torus, induced_metric(H, basis))


def is_diagonalizable(bundle: FlatHiggsBundle) -> bool:
    """Whether all generators are simultaneously diagonalizable."""
    total = 0
    for proj in _joint_spectral_projectors(bundle):
        chain = _socle_series(bundle, proj)
        dim = int(round(np.real(np.trace(proj))))
        if not chain or chain[0].shape[1] != dim:
            return False
        total += dim
    return total == bundle.rank


def stability_verdict(bundle: FlatHiggsBundle, torus) -> StabilityReport:
    mu_E = slope(bundle, torus)
    if bundle.rank == 1:
        return StabilityReport("stable", mu_E)
    witnesses = [
        Witness(b, b.shape[1], subbundle_slope(bundle, torus, b)) for b in invariant_subspaces(bundle)
    ]
    gaps = np.array([w.slope - mu_E for w in witnesses])
    if gaps.size and np.any(gaps > BAND_TOL):
        verdict = "unstable"
    elif gaps.size and np.any((np.abs(gaps) > TIE_TOL) & (np.abs(gaps) <= BAND_TOL)):
        verdict = "indeterminate"
    elif not gaps.size or np.all(gaps < -BAND_TOL):
        verdict = "stable"
    elif is_diagonalizable(bundle) and _lines_tie(bundle, torus, mu_E):
        verdict = "polystable"
    else:
        verdict = "semistable_not_polystable"
    return StabilityReport(verdict, mu_E, witnesses)


def _lines_tie(bundle, torus, mu_E) -> bool:
    """All joint eigenlines of a diagonalizable bundle have slope equal to mu(E)."""
    for proj in _joint_spectral_projectors(bundle):
        for k in range(_orth(proj).shape[1]):
            line = _orth(proj)[:, [k]]
            if abs(subbundle_slope(bundle, torus, line) - mu_E) > TIE_TOL:
                return False
    return True


def orthogonal_projection(H: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Pointwise H-orthogonal projector onto span(basis), shape (*grid, r, r)."""
    gram = dagger(basis) @ H @ basis
    return basis @ np.linalg.solve(gram, dagger(basis) @ H)


def _pointwise_h_norm2(torus, H, coeffs, holomorphic: bool) -> np.ndarray:
    """sum_ij g^{ij} tr(a_i a_j^*) for a (1,0) or (0,1) End E-valued field."""
    Hinv = np.linalg.inv(H)
    a = coeffs[:, 0] if holomorphic else coeffs[0, :]
    adj = Hinv[None] @ dagger(a) @ H[None]
    prod = np.einsum("i...ab,j...ba->ij...", a, adj)
    return np.real(np.einsum("...ij,ij...->...", torus.metric_inv, prod))


def slope_defect(bundle, torus, H_ymh: MetricField, basis: np.ndarray, check: bool = True, tol: float = 1e-6):
    """(mu(E) - mu(F), int |A|^2, int |phi~|^2) for the flat invariant subbundle span(basis).

    A = pi_perp (d_A pi) pi is the second fundamental form and phi~ = pi_perp phi* pi.
    With check=True the Chern-Weil identity
        mu(E) - mu(F) = (int |A|^2 + int |phi~|^2) / (s n)
    is asserted for a Yang-Mills-Higgs metric.
    """
    residual = invariance_residual(bundle, basis)
    if residual > INVARIANCE_TOL:
        raise NotInvariant(f"subspace is not invariant (residual {residual:.2e})")
    basis = _orth(basis)
    s, n = basis.shape[1], torus.dim
    H = H_ymh.H
    pi = orthogonal_projection(H, basis)
    perp = np.eye(bundle.rank) - pi
    pi_field = calculus.PQField.function(pi, n)
    theta = extended_connection_form(bundle, torus, H_ymh)
    d_pi = calculus.del_(pi_field) + calculus.bracket(theta, pi_field)
    A = d_pi.map_values(lambda c: perp @ c @ pi)
    phi_t = higgs_adjoint(bundle, torus, H_ymh).map_values(lambda c: perp @ c @ pi)
    density = torus.volume_density
    A_norm2 = float(np.mean(_pointwise_h_norm2(torus, H, A.coeffs, True) * density))
    phi_norm2 = float(np.mean(_pointwise_h_norm2(torus, H, phi_t.coeffs, False) * density))
    mu_gap = slope(bundle, torus, H_ymh) - subbundle_slope(bundle, torus, basis, H_ymh)
    if check:
        predicted = (A_norm2 + phi_norm2) / (s * n)
        if abs(mu_gap - predicted) > tol:
            raise SlopeDefectMismatch(
                f"slope gap {mu_gap:.3e} differs from Chern-Weil prediction {predicted:.3e}"
            )
    return mu_gap, A_norm2, phi_norm2
