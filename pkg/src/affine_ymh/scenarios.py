"""Named flat Higgs bundles used as a test corpus and as CLI presets.

Every builder takes the torus dimension n; Higgs components beyond the first are
zero and monodromies beyond those listed are trivial.
"""

import numpy as np

from .bundle import FlatHiggsBundle, make_bundle


def _pad(mats, n, rank, fill):
    mats = [np.asarray(m, dtype=complex) for m in mats][:n]
    while len(mats) < n:
        mats.append(fill(rank))
    return mats


def _identity(rank):
    return np.eye(rank, dtype=complex)


def _zero(rank):
    return np.zeros((rank, rank), dtype=complex)


def flat_unitary(n: int = 2) -> FlatHiggsBundle:
    """Unitary diagonal monodromy, no Higgs field."""
    rho = [np.diag([1.0, np.exp(0.7j)]), np.diag([np.exp(-0.4j), 1.0])]
    return make_bundle(2, _pad(rho, n, 2, _identity), _pad([], n, 2, _zero))


def diagonal(n: int = 2) -> FlatHiggsBundle:
    """Trivial monodromy, phi_1 = diag(1, 2): a sum of two line bundles, polystable."""
    return make_bundle(2, _pad([], n, 2, _identity), _pad([np.diag([1.0, 2.0])], n, 2, _zero))


def diagonal_kernel(n: int = 2) -> FlatHiggsBundle:
    """Trivial monodromy, phi_1 = diag(0, 1); e_1 is a joint null vector of phi."""
    return make_bundle(2, _pad([], n, 2, _identity), _pad([np.diag([0.0, 1.0])], n, 2, _zero))


def jordan(n: int = 2) -> FlatHiggsBundle:
    """Trivial monodromy, nilpotent phi_1: semistable but not polystable."""
    return make_bundle(2, _pad([], n, 2, _identity), _pad([[[0.0, 1.0], [0.0, 0.0]]], n, 2, _zero))


def jordan_unitary(n: int = 2) -> FlatHiggsBundle:
    """Scalar unitary monodromy with the nilpotent Higgs field."""
    rho = [np.exp(0.3j) * np.eye(2)]
    return make_bundle(2, _pad(rho, n, 2, _identity), _pad([[[0.0, 1.0], [0.0, 0.0]]], n, 2, _zero))


def rank1(n: int = 2) -> FlatHiggsBundle:
    """Line bundle with monodromy 2 around the first loop."""
    return make_bundle(1, _pad([[[2.0]]], n, 1, _identity), _pad([], n, 1, _zero))


CORPUS = {
    "flat_unitary": flat_unitary,
    "diagonal": diagonal,
    "diagonal_kernel": diagonal_kernel,
    "jordan": jordan,
    "jordan_unitary": jordan_unitary,
    "rank1": rank1,
}


def without_higgs(bundle: FlatHiggsBundle) -> FlatHiggsBundle:
    return make_bundle(bundle.rank, bundle.monodromy, np.zeros_like(bundle.higgs))
