import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_ymh import stability
from affine_ymh.bundle import is_simple, make_bundle
from affine_ymh.errors import NotInvariant, SlopeDefectMismatch
from affine_ymh.geometry import make_torus
from affine_ymh.hermitian import MetricField, degree
from affine_ymh.matfun import dagger
from affine_ymh.scenarios import CORPUS, diagonal, jordan, rank1, without_higgs
from affine_ymh.stability import (
    invariance_residual,
    invariant_subspaces,
    is_diagonalizable,
    slope_defect,
    stability_verdict,
    subbundle,
    subbundle_slope,
)


@pytest.fixture(scope="module")
def torus():
    return make_torus(2, 16, np.eye(2))


def _projector(basis):
    q, _ = np.linalg.qr(basis)
    return q @ dagger(q)


def _same_span(a, b):
    return a.shape[1] == b.shape[1] and np.allclose(_projector(a), _projector(b), atol=1e-8)


def test_rank_one_has_no_proper_subspaces():
    assert invariant_subspaces(rank1()) == []


def test_jordan_has_exactly_one_invariant_line():
    subs = invariant_subspaces(jordan())
    assert len(subs) == 1
    assert _same_span(subs[0], np.array([[1.0], [0.0]]))


def test_diagonal_has_both_coordinate_lines():
    subs = invariant_subspaces(diagonal())
    assert len(subs) == 2
    for e in (np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])):
        assert any(_same_span(s, e) for s in subs)


def test_three_dimensional_block_structure():
    # phi = diag(J_2, 5): invariant subspaces e1, e3, e1+e3, e1+e2
    phi = np.zeros((3, 3))
    phi[0, 1] = 1.0
    phi[2, 2] = 5.0
    b = make_bundle(3, [np.eye(3)], [phi])
    subs = invariant_subspaces(b)
    e = np.eye(3)
    expected = [e[:, [0]], e[:, [2]], e[:, [0, 2]], e[:, [0, 1]]]
    assert len(subs) == len(expected)
    for want in expected:
        assert any(_same_span(s, want) for s in subs)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_witnesses_are_invariant(name, torus):
    report = stability_verdict(CORPUS[name](), torus)
    for w in report.witnesses:
        assert invariance_residual(CORPUS[name](), w.basis) < 1e-10


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_dropping_higgs_only_adds_subspaces(name):
    b = CORPUS[name]()
    for basis in invariant_subspaces(b):
        assert invariance_residual(without_higgs(b), basis) < 1e-10


@pytest.mark.parametrize(
    "name,verdict",
    [
        ("rank1", "stable"),
        ("jordan", "semistable_not_polystable"),
        ("jordan_unitary", "semistable_not_polystable"),
        ("diagonal", "polystable"),
        ("diagonal_kernel", "polystable"),
        ("flat_unitary", "polystable"),
    ],
)
def test_corpus_verdicts(name, verdict, torus):
    report = stability_verdict(CORPUS[name](), torus)
    assert report.verdict == verdict
    assert abs(report.mu_E) < 1e-12


def test_jordan_witness(torus):
    report = stability_verdict(jordan(), torus)
    (w,) = report.witnesses
    assert w.rank == 1 and abs(w.slope) < 1e-12
    assert _same_span(w.basis, np.array([[1.0], [0.0]]))


def test_stable_implies_simple(torus):
    for name, build in CORPUS.items():
        if stability_verdict(build(), torus).verdict == "stable":
            assert is_simple(build())[0], name


def test_degree_is_additive_on_split_bundle(torus):
    b = diagonal()
    x, y = torus.points
    d1 = np.exp(0.2 * np.sin(2 * np.pi * x))
    d2 = np.exp(0.3 * np.cos(2 * np.pi * y))
    H = MetricField.from_array(np.stack([np.stack([d1, 0 * d1], -1), np.stack([0 * d2, d2], -1)], -2) + 0j)
    lines = [np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])]
    total = sum(subbundle_slope(b, torus, e, H) for e in lines)
    assert total == pytest.approx(degree(b, torus, H), abs=1e-10)


def test_subbundle_restricts_generators():
    sub = subbundle(jordan(), np.array([[1.0], [0.0]]))
    assert sub.rank == 1
    assert np.allclose(sub.higgs, 0)


def test_diagonalizability():
    assert is_diagonalizable(diagonal())
    assert not is_diagonalizable(jordan())


@pytest.mark.parametrize(
    "shift,verdict",
    [(1e-3, "unstable"), (5e-7, "indeterminate"), (-1e-3, "stable"), (1e-9, "semistable_not_polystable")],
)
def test_verdict_tolerance_band(monkeypatch, torus, shift, verdict):
    # degrees of flat bundles on tori vanish, so the other verdicts need synthetic slopes
    monkeypatch.setattr(stability, "subbundle_slope", lambda *a, **k: shift)
    assert stability_verdict(jordan(), torus).verdict == verdict


def test_slope_defect_rejects_non_invariant(torus):
    with pytest.raises(NotInvariant):
        slope_defect(jordan(), torus, MetricField.identity(torus, 2), np.array([[0.0], [1.0]]))


def test_slope_defect_detects_non_ymh_metric(torus):
    # H = I is not Yang-Mills-Higgs for the Jordan bundle: phi~ = e2 e1^T has |phi~|^2 = 1 pointwise,
    # integrated against omega^n / nu whose total mass is the volume
    H = MetricField.identity(torus, 2)
    e1 = np.array([[1.0], [0.0]])
    with pytest.raises(SlopeDefectMismatch):
        slope_defect(jordan(), torus, H, e1)
    gap, a2, p2 = slope_defect(jordan(), torus, H, e1, check=False)
    assert abs(gap) < 1e-12 and a2 < 1e-20
    assert p2 == pytest.approx(torus.volume)


def test_slope_defect_vanishes_for_orthogonal_splitting(torus):
    gap, a2, p2 = slope_defect(diagonal(), torus, MetricField.identity(torus, 2), np.array([[1.0], [0.0]]))
    assert abs(gap) < 1e-12 and a2 < 1e-20 and p2 < 1e-20


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), split=st.booleans())
def test_random_families_give_invariant_subspaces(seed, split):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    Pinv = np.linalg.inv(P)
    if split:
        D = np.diag([0.0, 1.0, 2.0])
    else:
        D = np.diag([1.0, 1.0, 2.0])
        D[0, 1] = 1.0
    b = make_bundle(3, [np.eye(3)], [P @ D @ Pinv])
    subs = invariant_subspaces(b)
    assert subs
    for basis in subs:
        assert invariance_residual(b, basis) < 1e-10
        assert 0 < basis.shape[1] < 3
    # every joint eigenvector line is present
    w, v = np.linalg.eig(P @ D @ Pinv)
    lines = [v[:, [k]] for k in range(3)] if split else [P[:, [0]], P[:, [2]]]
    for line in lines:
        assert any(_same_span(s, line) for s in subs if s.shape[1] == 1)
