"""Self-check suites for the sign conventions and the Chern-Weil identities.

Each suite returns a list of ``Check`` records.  They back the ``selftest`` CLI
command and the acceptance tests, and they are what a flipped sign convention
must trip.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb, factorial

import numpy as np

from . import calculus
from .calculus import PQField, multi_indices
from .geometry import integrate, make_torus, separable_sine
from .hermitian import (
    MetricField,
    chern_identity_defect,
    degree,
    extended_connection_form,
    higgs_adjoint,
    higgs_form,
)
from .scenarios import diagonal, flat_unitary, jordan_unitary


@dataclass
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name}: {self.value:.3e} (tol {self.tolerance:.0e})"


# random data -----------------------------------------------------------------


def random_field(rng, n, grid, p, q, rank=None, max_mode=2, amplitude=1.0) -> PQField:
    """Band-limited random (p,q)-field: a few Fourier modes with |k_i| <= max_mode."""
    out = PQField.zeros(n, grid, p, q, rank)
    x = np.arange(grid) / grid
    pts = np.meshgrid(*([x] * n), indexing="ij")
    value_shape = () if rank is None else (rank, rank)
    for _ in range(3):
        k = rng.integers(-max_mode, max_mode + 1, size=n)
        wave = np.exp(2j * np.pi * sum(ki * xi for ki, xi in zip(k, pts)))
        amp = amplitude * (rng.normal(size=out.coeffs.shape[:2] + value_shape)
                           + 1j * rng.normal(size=out.coeffs.shape[:2] + value_shape))
        amp = amp.reshape(amp.shape[:2] + (1,) * n + value_shape)
        out.coeffs[...] += amp * wave.reshape(wave.shape + (1,) * len(value_shape))
    return out


def random_metric(rng, grid, rank, n=2, amplitude=0.3, max_mode=1) -> MetricField:
    """H = I + A A^dagger with a band-limited random matrix field A."""
    A = random_field(rng, n, grid, 0, 0, rank, max_mode=max_mode, amplitude=amplitude).values()
    H = np.eye(rank) + A @ np.conj(np.swapaxes(A, -1, -2))
    return MetricField.from_array(H)


# Grassmann-algebra oracle for the wedge product ------------------------------


def _canonical(word):
    """Sign and sorted word (dz's before dzbar's, indices increasing), or None if a generator repeats."""
    if len(set(word)) < len(word):
        return None
    word = list(word)
    sign = 1
    for i in range(len(word)):
        for j in range(len(word) - 1 - i):
            if word[j] > word[j + 1]:
                word[j], word[j + 1] = word[j + 1], word[j]
                sign = -sign
    return sign, tuple(word)


def grassmann_wedge(a: dict, b: dict) -> dict:
    """Product of constant forms given as {(I, J): c} for c dz^I dzbar^J, by brute-force reordering."""
    out = {}
    for (I1, J1), c1 in a.items():
        for (I2, J2), c2 in b.items():
            word = [(0, i) for i in I1] + [(1, j) for j in J1] + [(0, i) for i in I2] + [(1, j) for j in J2]
            canon = _canonical(word)
            if canon is None:
                continue
            sign, sorted_word = canon
            key = (tuple(i for s, i in sorted_word if s == 0), tuple(j for s, j in sorted_word if s == 1))
            out[key] = out.get(key, 0) + sign * c1 * c2
    return out


def _as_dict(field: PQField) -> dict:
    return {
        (I, J): field.coeffs[a, b].flat[0]
        for a, I in enumerate(multi_indices(field.n, field.p))
        for b, J in enumerate(multi_indices(field.n, field.q))
    }


def _constant_integer_field(rng, n, p, q) -> PQField:
    coeffs = rng.integers(-3, 4, size=(comb(n, p), comb(n, q), 2, 2)).astype(complex)
    return PQField(p, q, n, coeffs)


# suites ----------------------------------------------------------------------


def calculus_suite(grid: int = 32, per_bidegree: int = 50, n: int = 2, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    dd = dbdb = anti = 0.0
    for p, q in product(range(n + 1), repeat=2):
        for _ in range(per_bidegree):
            f = random_field(rng, n, grid, p, q)
            if p + 2 <= n:
                dd = max(dd, calculus.del_(calculus.del_(f)).sup_norm())
            if q + 2 <= n:
                dbdb = max(dbdb, calculus.dbar(calculus.dbar(f)).sup_norm())
            if p < n and q < n:
                mixed = calculus.del_(calculus.dbar(f)) + calculus.dbar(calculus.del_(f))
                anti = max(anti, mixed.sup_norm())

    leibniz = leibniz_bar = graded = 0.0
    pairs = [((pa, qa), (pb, qb)) for pa, qa, pb, qb in product(range(n + 1), repeat=4)
             if pa + pb <= n and qa + qb <= n]
    per_pair = max(1, per_bidegree // 10)
    for (pa, qa), (pb, qb) in pairs:
        for _ in range(per_pair):
            a = random_field(rng, n, grid, pa, qa)
            b = random_field(rng, n, grid, pb, qb)
            sign = -1 if (pa + qa) % 2 else 1
            if pa + pb < n:
                lhs = calculus.del_(calculus.wedge(a, b))
                rhs = calculus.wedge(calculus.del_(a), b) + sign * calculus.wedge(a, calculus.del_(b))
                leibniz = max(leibniz, (lhs - rhs).sup_norm())
            if qa + qb < n:
                lhs = calculus.dbar(calculus.wedge(a, b))
                rhs = calculus.wedge(calculus.dbar(a), b) + sign * calculus.wedge(a, calculus.dbar(b))
                leibniz_bar = max(leibniz_bar, (lhs - rhs).sup_norm())
            gsign = -1 if ((pa + qa) * (pb + qb)) % 2 else 1
            graded = max(graded, (calculus.wedge(a, b) - gsign * calculus.wedge(b, a)).sup_norm())

    oracle = 0.0
    for (pa, qa), (pb, qb) in pairs:
        for _ in range(per_pair):
            a = _constant_integer_field(rng, n, pa, qa)
            b = _constant_integer_field(rng, n, pb, qb)
            got = _as_dict(calculus.wedge(a, b))
            want = grassmann_wedge(_as_dict(a), _as_dict(b))
            for key, value in got.items():
                oracle = max(oracle, abs(value - want.get(key, 0)))

    # integrate(omega^n) = n! mean(det g) / nu fixes the sign of division by nu
    torus = make_torus(n, grid, separable_sine([0.5 + 0.1 * k for k in range(n)]), nu=1.7)
    vol_oracle = factorial(n) * float(np.mean(np.linalg.det(torus.metric))) / torus.nu
    volume = abs(integrate(torus, torus.omega_power(n)) - vol_oracle) / vol_oracle
    trace_omega = float(np.abs(calculus.contract_g(torus, torus.omega).values() - n).max())

    return [
        Check("del del = 0", dd, 1e-10),
        Check("dbar dbar = 0", dbdb, 1e-10),
        Check("del dbar + dbar del = 0", anti, 1e-10),
        Check("Leibniz rule for del", leibniz, 1e-9),
        Check("Leibniz rule for dbar", leibniz_bar, 1e-9),
        Check("graded commutativity of wedge", graded, 1e-9),
        Check("wedge vs Grassmann expansion (exact)", oracle, 0.0),
        Check("integral of omega^n vs n! det g / nu (relative)", volume, 1e-12),
        Check("tr_g omega = n", trace_omega, 1e-12),
    ]


def _chern_bundles(n=2):
    return {"jordan_unitary": jordan_unitary(n), "diagonal": diagonal(n), "flat_unitary": flat_unitary(n)}


def chern_suite(grid: int = 32, metrics: int = 10, seed: int = 1) -> list:
    rng = np.random.default_rng(seed)
    tori = [make_torus(2, grid, np.eye(2)), make_torus(2, grid, separable_sine([0.4, -0.3]))]
    identity = tr_comm = 0.0
    for bundle in _chern_bundles().values():
        for torus in tori:
            for _ in range(metrics):
                H = random_metric(rng, grid, bundle.rank)
                identity = max(identity, chern_identity_defect(bundle, torus, H))
                comm = calculus.bracket(higgs_form(bundle, torus), higgs_adjoint(bundle, torus, H))
                tr_comm = max(tr_comm, comm.trace().sup_norm())
    return [
        Check("(tr K) omega^n - n c1 ^ omega^(n-1)", identity, 1e-8),
        Check("tr [phi, phi*] = 0", tr_comm, 1e-12),
    ]


def degree_oracle(bundle, torus, H) -> float:
    """Degree by integrating by parts: int c1 ^ omega^(n-1) = int tr(theta) ^ dbar(omega^(n-1))."""
    tr_theta = extended_connection_form(bundle, torus, H).trace()
    form = calculus.dbar(torus.omega_power(torus.dim - 1))
    return float(np.real(integrate(torus, calculus.wedge(tr_theta, form))))


def degree_suite(grid: int = 32, pairs: int = 10, seed: int = 2) -> list:
    rng = np.random.default_rng(seed)
    tori = [make_torus(2, grid, np.eye(2)), make_torus(2, grid, separable_sine([0.4, -0.3]))]
    spread = worst = oracle_gap = 0.0
    for bundle in _chern_bundles().values():
        for torus in tori:
            for _ in range(pairs):
                H1 = random_metric(rng, grid, bundle.rank)
                H2 = random_metric(rng, grid, bundle.rank)
                d1, d2 = degree(bundle, torus, H1), degree(bundle, torus, H2)
                spread = max(spread, abs(d1 - d2))
                worst = max(worst, abs(d1), abs(d2))
                oracle_gap = max(oracle_gap, abs(d1 - degree_oracle(bundle, torus, H1)))
    return [
        Check("|deg(H1) - deg(H2)|", spread, 1e-8),
        Check("|deg| on tori", worst, 1e-8),
        Check("degree vs integration-by-parts oracle", oracle_gap, 1e-8),
    ]


def identity_suites(grid: int = 32, per_bidegree: int = 50, metrics: int = 10) -> dict:
    return {
        "calculus": calculus_suite(grid, per_bidegree),
        "chern": chern_suite(grid, metrics),
        "degree": degree_suite(grid, metrics),
    }
