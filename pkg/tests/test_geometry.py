import numpy as np
import pytest

from affine_ymh.errors import BadGrid, NonSPDMetric
from affine_ymh.geometry import (
    astheno_defect,
    conformal_sine,
    gauduchon_defect,
    integrate,
    make_torus,
    separable_sine,
    volume_oracle,
)
from affine_ymh.calculus import PQField


@pytest.mark.parametrize("grid", [3, 7, 2])
def test_bad_grid(grid):
    with pytest.raises(BadGrid):
        make_torus(2, grid, np.eye(2))


@pytest.mark.parametrize(
    "metric",
    [np.diag([1.0, -1.0]), np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([[1.0, 0.5], [0.0, 1.0]])],
)
def test_rejects_non_spd_metric(metric):
    with pytest.raises(NonSPDMetric):
        make_torus(2, 8, metric)


def test_constant_metric_is_broadcast():
    torus = make_torus(3, 4, np.diag([1.0, 2.0, 3.0]), nu=2.0)
    assert torus.metric.shape == (4, 4, 4, 3, 3)
    assert torus.is_constant_metric
    assert torus.volume == pytest.approx(6 * 6 / 2.0)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("nu", [0.5, 1.0, 3.0])
def test_volume_matches_oracle(n, nu):
    torus = make_torus(n, 8, separable_sine([0.3] * n), nu=nu)
    assert torus.volume == pytest.approx(volume_oracle(torus), rel=1e-12)


def test_integrate_is_linear():
    torus = make_torus(2, 16, separable_sine([0.2, 0.1]))
    rng = np.random.default_rng(0)
    a = PQField(2, 2, 2, rng.normal(size=(1, 1, 16, 16)) + 0j)
    b = PQField(2, 2, 2, rng.normal(size=(1, 1, 16, 16)) + 0j)
    assert integrate(torus, a * 2.0 + b) == pytest.approx(2 * integrate(torus, a) + integrate(torus, b))


def test_flat_and_separable_metrics_are_gauduchon():
    assert gauduchon_defect(make_torus(2, 32, np.eye(2))) < 1e-12
    assert gauduchon_defect(make_torus(3, 16, separable_sine([0.4, -0.3, 0.2]))) < 1e-10


def test_conformal_sine_gauduchon_defect_matches_analytic_value():
    # on T^2, del dbar omega for g = e^s I has the single coefficient -1/4 d_0^2 e^s
    torus = make_torus(2, 32, conformal_sine(2))
    s = np.sin(2 * np.pi * torus.points[0])
    second = (4 * np.pi**2) * np.exp(s) * (np.cos(2 * np.pi * torus.points[0]) ** 2 - s)
    assert gauduchon_defect(torus) == pytest.approx(0.25 * np.abs(second).max(), rel=1e-10)


def test_conformal_sine_astheno_defect_matches_analytic_value():
    # omega^2 = -2 e^{2s} sum dz^{ik} (x) dzbar^{ik}; only pairs avoiding index 0 survive del dbar
    a = 0.5
    torus = make_torus(4, 16, conformal_sine(4, amplitude=a))
    x = torus.points[0]
    s = a * np.sin(2 * np.pi * x)
    second = (4 * np.pi**2) * np.exp(2 * s) * (4 * a**2 * np.cos(2 * np.pi * x) ** 2 - 2 * s)
    # e^{sin} is not band-limited; the spectral error at N=16 is about 5e-6
    assert astheno_defect(torus) == pytest.approx(0.5 * np.abs(second).max(), rel=2e-5)


def test_astheno_defect_vanishes_for_constant_metrics():
    g = np.eye(4) + 0.1 * np.ones((4, 4))
    assert astheno_defect(make_torus(4, 8, g)) < 1e-10
    assert astheno_defect(make_torus(2, 8, np.eye(2))) == 0.0
    with pytest.raises(ValueError):
        astheno_defect(make_torus(1, 8, np.eye(1)))
