"""Flat Higgs bundles over tori, described by commuting monodromy and Higgs matrices.

On T^n = R^n/Z^n a flat bundle is determined by its holonomies rho_1..rho_n around
the lattice loops.  A covariant-constant Higgs field is then a tuple of constant
matrices phi_i commuting with every rho_k, and phi ^ phi = 0 says they commute with
each other.

Fields are stored in the periodic frame W(x) = exp(sum x^k L_k), L_k = log rho_k,
where the flat connection has the constant matrix sum L_k dx^k.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    HiggsNotFlat,
    HiggsWedgeNonzero,
    NoPrincipalLog,
    NonCommutingMonodromy,
    RankMismatch,
)

logger = logging.getLogger(__name__)

COMMUTE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FlatHiggsBundle:
    rank: int
    monodromy: np.ndarray  # (n, r, r)
    higgs: np.ndarray  # (n, r, r)
    logs: np.ndarray  # (n, r, r)

    @property
    def dim(self) -> int:
        return self.monodromy.shape[0]

    @property
    def generators(self) -> list:
        return list(self.monodromy) + list(self.higgs)


def _commutator_defect(a, b) -> float:
    scale = max(1.0, np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.linalg.norm(a @ b - b @ a) / scale)


def principal_log(rho: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvals(rho)
    scale = max(1.0, np.abs(eig).max())
    for lam in eig:
        if abs(lam.imag) <= 1e-12 * scale and lam.real <= 1e-12 * scale:
            raise NoPrincipalLog(f"monodromy eigenvalue {lam:.6g} lies on the closed negative real axis")
    log = scipy.linalg.logm(rho)
    err = np.linalg.norm(scipy.linalg.expm(log) - rho) / max(1.0, np.linalg.norm(rho))
    if err > 1e-10:
        raise NoPrincipalLog(f"matrix logarithm inaccurate (relative error {err:.2e})")
    return np.asarray(log, dtype=complex)


def _as_stack(mats, rank, name):
    arr = np.asarray(mats, dtype=complex)
    if arr.ndim == 1 and rank == 1:
        arr = arr.reshape(-1, 1, 1)
    if arr.ndim != 3 or arr.shape[1:] != (rank, rank):
        raise RankMismatch(f"{name} must be a list of {rank}x{rank} matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_invariants(rank, monodromy, higgs, tol=COMMUTE_TOL):
    """Raise the matching error if the data is not a flat Higgs bundle."""
    n = len(monodromy)
    for k in range(n):
        for l in range(k + 1, n):
            if _commutator_defect(monodromy[k], monodromy[l]) > tol:
                raise NonCommutingMonodromy(f"rho_{k + 1} and rho_{l + 1} do not commute")
    for k in range(n):
        for i in range(n):
            if _commutator_defect(monodromy[k], higgs[i]) > tol:
                raise HiggsNotFlat(f"phi_{i + 1} is not invariant under rho_{k + 1}")
    for i in range(n):
        for j in range(i + 1, n):
            if _commutator_defect(higgs[i], higgs[j]) > tol:
                raise HiggsWedgeNonzero(f"[phi_{i + 1}, phi_{j + 1}] != 0, so phi ^ phi != 0")


def make_bundle(rank: int, monodromy, higgs) -> FlatHiggsBundle:
    if rank < 1:
        raise RankMismatch(f"rank must be >= 1, got {rank}")
    rho = _as_stack(monodromy, rank, "monodromy")
    phi = _as_stack(higgs, rank, "higgs")
    if len(rho) != len(phi):
        raise RankMismatch(f"{len(rho)} monodromy matrices but {len(phi)} Higgs components")
    for k, m in enumerate(rho):
        if abs(np.linalg.det(m)) < 1e-300:
            raise NoPrincipalLog(f"rho_{k + 1} is singular")
    check_invariants(rank, rho, phi)
    logs = np.stack([principal_log(m) for m in rho])
    return FlatHiggsBundle(rank, rho, phi, logs)


def family_curvature_defect(bundle: FlatHiggsBundle, t: float) -> float:
    """Norm of the curvature t d^nabla(phi) + t^2 phi ^ phi of nabla + t phi.

    In the periodic frame the coefficient of dx^i ^ dx^j is
    t([L_i, phi_j] - [L_j, phi_i]) + t^2 [phi_i, phi_j].
    """
    L, phi = bundle.logs, bundle.higgs
    worst = 0.0
    for i in range(bundle.dim):
        for j in range(i + 1, bundle.dim):
            d_phi = L[i] @ phi[j] - phi[j] @ L[i] - (L[j] @ phi[i] - phi[i] @ L[j])
            sq = phi[i] @ phi[j] - phi[j] @ phi[i]
            worst = max(worst, float(np.linalg.norm(t * d_phi + t * t * sq)))
    return worst


def _ad(x: np.ndarray) -> np.ndarray:
    """Matrix of X -> [x, X] on row-major vec(X)."""
    eye = np.eye(x.shape[0])
    return np.kron(x, eye) - np.kron(eye, x.T)


def endo_bundle(bundle: FlatHiggsBundle) -> FlatHiggsBundle:
    """End E with monodromy Ad rho_k and Higgs field ad phi_i.

    Uses row-major vectorization, so Ad rho = kron(rho, rho^{-T}).  The logs
    kron(L, I) - kron(I, L^T) exponentiate to Ad rho but are not always principal.
    """
    r = bundle.rank
    eye = np.eye(r)
    rho = np.stack([np.kron(m, np.linalg.inv(m).T) for m in bundle.monodromy])
    phi = np.stack([_ad(p) for p in bundle.higgs])
    logs = np.stack([np.kron(L, eye) - np.kron(eye, L.T) for L in bundle.logs])
    check_invariants(r * r, rho, phi)
    return FlatHiggsBundle(r * r, rho, phi, logs)


def commutant(bundle: FlatHiggsBundle, rtol: float = 1e-9) -> np.ndarray:
    """Basis (k, r, r) of matrices commuting with every rho_k and phi_i."""
    r = bundle.rank
    system = np.concatenate([_ad(g) for g in bundle.generators])
    _, sv, vh = np.linalg.svd(system)
    # absolute floor: scalar generators give a system of pure round-off
    cutoff = rtol * max(1.0, sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > cutoff))
    null = np.conj(vh[rank:]).T
    return np.stack([null[:, a].reshape(r, r) for a in range(null.shape[1])])


def _riesz_projectors(b: np.ndarray, cluster_tol: float = 1e-6) -> list:
    """Spectral projectors of b, one per eigenvalue cluster, by contour integration."""
    eig = np.linalg.eigvals(b)
    scale = max(1.0, np.abs(eig).max())
    centers = []
    for lam in eig:
        if all(abs(lam - c) > cluster_tol * scale for c in centers):
            centers.append(lam)
    if len(centers) < 2:
        return []
    centers = np.array(centers)
    eye = np.eye(b.shape[0])
    out = []
    nodes = np.exp(2j * np.pi * np.arange(128) / 128)
    for c in centers:
        others = np.abs(centers - c)
        radius = 0.5 * others[others > 0].min()
        proj = np.zeros_like(b, dtype=complex)
        for w in nodes:
            z = c + radius * w
            # dz = i radius w dtheta, and (1/2 pi i) * i * 2 pi / M = 1/M
            proj += radius * w * np.linalg.inv(z * eye - b)
        out.append(proj / len(nodes))
    return out


def is_simple(bundle: FlatHiggsBundle):
    """(True, None) if the joint commutant is the scalars, else (False, witness)."""
    basis = commutant(bundle)
    if len(basis) <= 1:
        return True, None
    r = bundle.rank
    eye = np.eye(r)
    tracefree = [m - np.trace(m) / r * eye for m in basis]
    b = max(tracefree, key=np.linalg.norm)
    projectors = _riesz_projectors(b)
    if projectors:
        witness = max(projectors, key=lambda p: abs(p[0, 0]))
        witness = np.where(np.abs(witness) < 1e-12, 0.0, witness)
        return False, witness
    b = b / b.flat[np.argmax(np.abs(b))]
    return False, np.where(np.abs(b) < 1e-12, 0.0, b)
