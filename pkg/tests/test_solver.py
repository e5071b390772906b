import numpy as np
import pytest

from affine_ymh import matfun
from affine_ymh.checks import random_metric
from affine_ymh.errors import NoSpectralGap, UnsolvableNormalization
from affine_ymh.hermitian import MetricField, einstein_factor, extended_connection_form, higgs_adjoint, mean_curvature
from affine_ymh.scenarios import CORPUS, diagonal, jordan, rank1, without_higgs
from affine_ymh.solver import (
    SolverOptions,
    SolverTrace,
    _newton,
    _Problem,
    continuation_trace_defects,
    extract_destabilizer,
    linearize_Xi,
    normalize_background,
    residual_L_eps,
)


@pytest.mark.parametrize(
    "kwargs,expected",
    [
        ({}, [0.5**k for k in range(14)] + [1e-4]),
        ({"eps_min": 0.25}, [1.0, 0.5, 0.25]),
        ({"eps_max": 0.1, "eps_min": 0.01, "eps_ratio": 0.1}, [0.1, 0.01]),
    ],
)
def test_eps_schedule(kwargs, expected):
    assert SolverOptions(**kwargs).eps_schedule() == pytest.approx(expected)


@pytest.mark.parametrize("kwargs", [{"eps_min": 0.0}, {"eps_min": 2.0}, {"eps_ratio": 1.0}, {"newton_tol": -1.0}])
def test_bad_options(kwargs):
    with pytest.raises(ValueError):
        SolverOptions(**kwargs)


def test_residual_at_identity_and_scalar(flat_torus):
    b = jordan()
    H0 = MetricField.identity(flat_torus, 2)
    K0 = mean_curvature(b, flat_torus, H0)
    eye = np.broadcast_to(np.eye(2), flat_torus.shape + (2, 2))
    assert np.allclose(residual_L_eps(b, flat_torus, H0, eye, 0.3), K0, atol=1e-13)
    # L_eps(c f) = L_eps(f) + eps log c
    assert np.allclose(residual_L_eps(b, flat_torus, H0, 3.0 * eye, 0.3), K0 + 0.3 * np.log(3.0) * np.eye(2), atol=1e-12)


def test_xi_is_flat_laplacian_plus_eps_at_identity(flat_torus):
    # trivial bundle, phi = 0, f = id: Xi(eta) = -1/4 Laplacian(eta) + eps eta
    b = without_higgs(diagonal())
    H0 = MetricField.identity(flat_torus, 2)
    eye = np.broadcast_to(np.eye(2), flat_torus.shape + (2, 2))
    x, y = flat_torus.points
    M = np.array([[1.0, 0.5j], [-0.5j, 2.0]])
    eta = np.cos(2 * np.pi * (x + 2 * y))[..., None, None] * M
    xi = linearize_Xi(b, flat_torus, H0, eye, 0.2)
    assert np.allclose(xi(eta), (5 * np.pi**2 + 0.2) * eta, atol=1e-10)
    assert np.abs(xi(np.zeros_like(eta))).max() == 0


@pytest.mark.parametrize("eps", [0.0, 0.1, 1.0])
def test_xi_matches_finite_differences_for_jordan(flat_torus, eps):
    rng = np.random.default_rng(5)
    b = jordan()
    H0 = MetricField.identity(flat_torus, 2)
    f = random_metric(rng, 32, 2, amplitude=0.2).H
    eta = random_metric(rng, 32, 2, amplitude=0.2).H - np.eye(2)
    h = 1e-5
    fd = (residual_L_eps(b, flat_torus, H0, f + h * eta, eps) - residual_L_eps(b, flat_torus, H0, f - h * eta, eps)) / (2 * h)
    # Xi is the derivative of f -> f L(f)
    L = residual_L_eps(b, flat_torus, H0, f, eps)
    expected = eta @ L + f @ fd
    got = linearize_Xi(b, flat_torus, H0, f, eps)(eta)
    assert np.abs(got - expected).max() / np.abs(expected).max() < 1e-6


def test_normalize_background_line_bundle(flat_torus):
    x = flat_torus.points[0]
    b = CORPUS["rank1"]()
    H_init = MetricField.from_array(np.exp(np.sin(2 * np.pi * x))[..., None, None])
    H0 = normalize_background(b, flat_torus, H_init)
    K0 = mean_curvature(b, flat_torus, H0)
    assert np.abs(K0).max() < 1e-8
    # the only solutions are the constant multiples of the flat metric
    ratio = H0.H[..., 0, 0].real
    assert np.ptp(ratio) / ratio.mean() < 1e-8


def test_normalize_background_needs_enough_rounds(flat_torus):
    x = flat_torus.points[0]
    H_init = MetricField.from_array(np.exp(np.sin(2 * np.pi * x))[..., None, None])
    with pytest.raises(UnsolvableNormalization):
        normalize_background(rank1(), flat_torus, H_init, max_rounds=1)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_newton_converges_at_eps_one(flat_torus, name):
    b = CORPUS[name]()
    H0 = normalize_background(b, flat_torus)
    prob = _Problem(b, flat_torus, H0)
    ft = np.broadcast_to(np.eye(b.rank, dtype=complex), flat_torus.shape + (b.rank, b.rank)).copy()
    _, _, res = _newton(prob, ft, 1.0, SolverOptions())
    assert res <= 1e-10


def test_converged_runs(flat_runs):
    for name in ("flat_unitary", "flat_unitary_bumpy", "diagonal", "diagonal_bumpy"):
        trace = flat_runs[name]
        assert trace.status == "converged", (name, trace.message)
        assert trace.final_residual < 1e-9
        assert trace.gamma == pytest.approx(0.0, abs=1e-12)


def test_flat_unitary_from_identity_stays_at_identity(flat_runs):
    trace = flat_runs["flat_unitary"]
    assert np.allclose(trace.f, np.eye(2), atol=1e-12)
    assert trace.final_residual < 1e-12


def test_diagonal_solution_is_a_constant_orthogonal_splitting(flat_runs):
    H = flat_runs["diagonal_bumpy"].metric().H
    assert np.abs(H[..., 0, 1]).max() < 1e-8
    for k in range(2):
        assert np.ptp(H[..., k, k].real) / H[..., k, k].real.mean() < 1e-8


def test_det_defect_before_renormalization(flat_runs):
    for trace in flat_runs.values():
        assert max(rec.det_defect for rec in trace.records) < 1e-6


def test_continuation_direction_is_trace_free(flat_runs):
    for name in ("diagonal_bumpy", "flat_unitary_bumpy", "jordan"):
        defects = continuation_trace_defects(flat_runs[name])
        assert len(defects) == len(flat_runs[name].records) - 1
        assert max(v for _, v in defects) < 1e-4, name


def test_rescaling_bounds_in_blowup_run(flat_runs):
    trace = flat_runs["jordan"]
    assert trace.status == "blowup"
    for _, ft in trace.iterates:
        w = np.linalg.eigvalsh(ft)
        rho = np.exp(-np.log(w).max())
        scaled = rho * w
        assert scaled.min() > 0 and scaled.max() <= 1 + 1e-8
        assert np.all(scaled[..., 0] <= rho * (1 + 1e-8))


def test_uniqueness_up_to_scale(rank1_runs):
    a, b = (rank1_runs[k].metric().H[..., 0, 0].real for k in ("identity", "bumpy"))
    ratio = a / b
    assert np.ptp(ratio) / ratio.mean() < 1e-8


def test_kernel_of_higgs_field_is_parallel_and_killed_by_adjoint(kernel_run, flat_torus):
    # with gamma = 0 a joint null vector of phi fixed by the monodromy must be parallel with phi*(s) = 0
    assert kernel_run.status == "converged"
    b = kernel_run.bundle
    H = kernel_run.metric()
    s = np.array([1.0, 0.0])
    theta = extended_connection_form(b, flat_torus, H)
    star = higgs_adjoint(b, flat_torus, H)

    def h_norm(v):
        return np.sqrt(np.abs(np.einsum("...a,...ab,...b->...", np.conj(v), H.H, v))).max()

    assert max(h_norm(theta.coeffs[i, 0] @ s) for i in range(2)) < 1e-6
    assert max(h_norm(star.coeffs[0, j] @ s) for j in range(2)) < 1e-6


def _synthetic_trace(torus, diag_values):
    b = without_higgs(diagonal())
    ft = np.broadcast_to(np.diag(diag_values).astype(complex), torus.shape + (2, 2)).copy()
    H0 = MetricField.identity(torus, 2)
    return SolverTrace("blowup", 0.0, b, torus, H0, ft, iterates=[(0.0, ft)])


def test_synthetic_destabilizer_keeps_collapsed_direction(flat_torus):
    varpi, basis, report = extract_destabilizer(_synthetic_trace(flat_torus, [1.0, 1e-6]))
    # 1e-6 ** sigma for sigma = 0.5, 0.25, 0.1 stays below 1/2 - 0.2; at 0.05 it is 0.50
    assert report["sigma"] == 0.1
    assert np.allclose(varpi, np.diag([0.0, 1.0]))
    assert report["rank"] == 1
    assert abs(abs(basis[1, 0]) - 1) < 1e-12


def test_no_collapse_means_no_spectral_gap(flat_torus):
    with pytest.raises(NoSpectralGap):
        extract_destabilizer(_synthetic_trace(flat_torus, [1.0, 1.0]))


def test_jordan_destabilizer(flat_runs):
    varpi, basis, report = extract_destabilizer(flat_runs["jordan"])
    assert np.abs(varpi - np.diag([1.0, 0.0])).max() < 1e-2
    assert report["rank"] == 1 and report["destabilizing"]
    assert max(report["identity_residuals"].values()) < 1e-2
    assert report["invariance_residual"] < 1e-10


def test_einstein_factor_of_solution_metric(flat_runs, flat_torus):
    trace = flat_runs["diagonal_bumpy"]
    assert einstein_factor(trace.bundle, flat_torus, trace.metric()) == pytest.approx(trace.gamma, abs=1e-10)
