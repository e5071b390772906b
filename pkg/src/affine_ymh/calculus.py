"""(p,q)-form calculus on an affine torus.

A field of type (p, q) is a section of Lambda^p T*M (x) Lambda^q T*M, written in
affine coordinates as a sum of ``c_IJ dz^I (x) dzbar^J`` over strictly increasing
multi-indices.  On M itself dz^i = dzbar^i = dx^i; the two slots are kept apart
because the operators below act on them differently:

    del  (phi (x) psi) = 1/2 (d phi) (x) psi
    dbar (phi (x) psi) = (-1)^p 1/2 phi (x) (d psi)
    (phi1 (x) psi1) ^ (phi2 (x) psi2) = (-1)^(q1 p2) (phi1 ^ phi2) (x) (psi1 ^ psi2)

Coefficients are either scalars or r x r matrices (End E-valued forms).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import DegreeMismatch, DegreeOverflow, TopDegree
from .spectral import diff


# Sign conventions live in these three functions; the mutation tests patch them.
def _wedge_sign(q1: int, p2: int) -> int:
    return -1 if (q1 * p2) % 2 else 1


def _dbar_sign(p: int) -> int:
    return -1 if p % 2 else 1


def _nu_sign(n: int) -> int:
    return -1 if (n * (n - 1) // 2) % 2 else 1


@lru_cache(maxsize=None)
def multi_indices(n: int, p: int) -> tuple:
    return tuple(combinations(range(n), p))


@lru_cache(maxsize=None)
def _position(n: int, p: int) -> dict:
    return {I: a for a, I in enumerate(multi_indices(n, p))}


@lru_cache(maxsize=None)
def _merge(I1: tuple, I2: tuple):
    """Sign and sorted union of dx^I1 ^ dx^I2, or None if they overlap."""
    if set(I1) & set(I2):
        return None
    inversions = sum(1 for a in I1 for b in I2 if a > b)
    return (-1 if inversions % 2 else 1), tuple(sorted(I1 + I2))


@dataclass(frozen=True, eq=False)
class PQField:
    """Discretized (p,q)-form.

    ``coeffs`` has shape ``(C(n,p), C(n,q), *grid, *value_shape)`` where the grid
    part is ``(N,)*n`` and ``value_shape`` is ``()`` or ``(r, r)``.
    """

    p: int
    q: int
    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not (0 <= self.p <= self.n and 0 <= self.q <= self.n):
            raise DegreeOverflow(f"bidegree ({self.p},{self.q}) out of range for n={self.n}")
        lead = (comb(self.n, self.p), comb(self.n, self.q))
        if self.coeffs.shape[:2] != lead:
            raise DegreeMismatch(
                f"coefficient array leads with {self.coeffs.shape[:2]}, expected {lead}"
            )
        if self.coeffs.ndim not in (2 + self.n, 4 + self.n):
            raise DegreeMismatch("coefficients must be scalar or square-matrix valued")

    # construction -----------------------------------------------------------

    @classmethod
    def zeros(cls, n, grid, p, q, rank=None, dtype=complex):
        value_shape = () if rank is None else (rank, rank)
        shape = (comb(n, p), comb(n, q)) + (grid,) * n + value_shape
        return cls(p, q, n, np.zeros(shape, dtype=dtype))

    @classmethod
    def function(cls, values: np.ndarray, n: int) -> "PQField":
        """Wrap a grid function (scalar or matrix valued) as a (0,0)-field."""
        values = np.asarray(values)
        return cls(0, 0, n, values[None, None].astype(complex, copy=False))

    # shape info -------------------------------------------------------------

    @property
    def grid(self) -> int:
        return self.coeffs.shape[2]

    @property
    def is_matrix(self) -> bool:
        return self.coeffs.ndim == 4 + self.n

    @property
    def rank(self):
        return self.coeffs.shape[-1] if self.is_matrix else None

    def component(self, I, J) -> np.ndarray:
        return self.coeffs[_position(self.n, self.p)[tuple(I)], _position(self.n, self.q)[tuple(J)]]

    def values(self) -> np.ndarray:
        """Grid values of a (0,0)-field."""
        if (self.p, self.q) != (0, 0):
            raise DegreeMismatch(f"values() needs a (0,0)-field, got ({self.p},{self.q})")
        return self.coeffs[0, 0]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    # linear structure -------------------------------------------------------

    def _check_same(self, other: "PQField"):
        if (self.p, self.q, self.n) != (other.p, other.q, other.n):
            raise DegreeMismatch(
                f"cannot add ({self.p},{self.q}) and ({other.p},{other.q}) fields"
            )

    def __add__(self, other):
        self._check_same(other)
        return PQField(self.p, self.q, self.n, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_same(other)
        return PQField(self.p, self.q, self.n, self.coeffs - other.coeffs)

    def __neg__(self):
        return PQField(self.p, self.q, self.n, -self.coeffs)

    def __mul__(self, scalar):
        return PQField(self.p, self.q, self.n, self.coeffs * scalar)

    __rmul__ = __mul__

    def trace(self) -> "PQField":
        """Fiber trace of an End E-valued field."""
        if not self.is_matrix:
            raise DegreeMismatch("trace of a scalar-valued field")
        return PQField(self.p, self.q, self.n, np.trace(self.coeffs, axis1=-2, axis2=-1))

    def map_values(self, fn) -> "PQField":
        """Apply ``fn`` to the coefficient array (e.g. left/right matrix multiplication)."""
        return PQField(self.p, self.q, self.n, fn(self.coeffs))


def del_(phi: PQField) -> PQField:
    """The operator del: A^{p,q} -> A^{p+1,q}."""
    n, p, q = phi.n, phi.p, phi.q
    if p >= n:
        raise TopDegree(f"del of a ({p},{q})-field with p = n = {n}")
    out = np.zeros((comb(n, p + 1),) + phi.coeffs.shape[1:], dtype=complex)
    target = _position(n, p + 1)
    for k in range(n):
        dk = diff(phi.coeffs, axis=2 + k)
        for a, I in enumerate(multi_indices(n, p)):
            merged = _merge((k,), I)
            if merged is None:
                continue
            sign, K = merged
            out[target[K]] += 0.5 * sign * dk[a]
    return PQField(p + 1, q, n, out)


def dbar(phi: PQField) -> PQField:
    """The operator dbar: A^{p,q} -> A^{p,q+1}."""
    n, p, q = phi.n, phi.p, phi.q
    if q >= n:
        raise TopDegree(f"dbar of a ({p},{q})-field with q = n = {n}")
    out = np.zeros(phi.coeffs.shape[:1] + (comb(n, q + 1),) + phi.coeffs.shape[2:], dtype=complex)
    target = _position(n, q + 1)
    global_sign = _dbar_sign(p)
    for k in range(n):
        dk = diff(phi.coeffs, axis=2 + k)
        for b, J in enumerate(multi_indices(n, q)):
            merged = _merge((k,), J)
            if merged is None:
                continue
            sign, K = merged
            out[:, target[K]] += 0.5 * global_sign * sign * dk[:, b]
    return PQField(p, q + 1, n, out)


def _multiply(a: np.ndarray, b: np.ndarray, a_matrix: bool, b_matrix: bool) -> np.ndarray:
    if a_matrix and b_matrix:
        return a @ b
    if a_matrix:
        return a * b[..., None, None]
    if b_matrix:
        return a[..., None, None] * b
    return a * b


def wedge(a: PQField, b: PQField) -> PQField:
    """Signed wedge product; matrix coefficients multiply in argument order."""
    if a.n != b.n:
        raise DegreeMismatch("fields live on tori of different dimension")
    n = a.n
    p, q = a.p + b.p, a.q + b.q
    if p > n or q > n:
        raise DegreeOverflow(f"({a.p},{a.q}) ^ ({b.p},{b.q}) exceeds dimension {n}")
    if a.is_matrix and b.is_matrix and a.rank != b.rank:
        raise DegreeMismatch("matrix ranks differ")
    rank = a.rank if a.is_matrix else b.rank
    out = PQField.zeros(n, a.grid, p, q, rank).coeffs
    pos_p, pos_q = _position(n, p), _position(n, q)
    outer = _wedge_sign(a.q, b.p)
    for a1, I1 in enumerate(multi_indices(n, a.p)):
        for a2, I2 in enumerate(multi_indices(n, b.p)):
            mi = _merge(I1, I2)
            if mi is None:
                continue
            for b1, J1 in enumerate(multi_indices(n, a.q)):
                for b2, J2 in enumerate(multi_indices(n, b.q)):
                    mj = _merge(J1, J2)
                    if mj is None:
                        continue
                    sign = outer * mi[0] * mj[0]
                    prod = _multiply(a.coeffs[a1, b1], b.coeffs[a2, b2], a.is_matrix, b.is_matrix)
                    out[pos_p[mi[1]], pos_q[mj[1]]] += sign * prod
    return PQField(p, q, n, out)


def bracket(a: PQField, b: PQField) -> PQField:
    """Graded commutator a^b - (-1)^(|a||b|) b^a of End E-valued forms."""
    sign = -1 if ((a.p + a.q) * (b.p + b.q)) % 2 == 0 else 1
    return wedge(a, b) + sign * wedge(b, a)


def contract_g(torus, a: PQField) -> PQField:
    """Metric contraction tr_g of a (1,1)-field: sum_ij g^{ij} a_ij."""
    if (a.p, a.q) != (1, 1):
        raise DegreeMismatch(f"tr_g needs a (1,1)-field, got ({a.p},{a.q})")
    ginv = torus.metric_inv
    if a.is_matrix:
        values = np.einsum("...ij,ij...ab->...ab", ginv, a.coeffs)
    else:
        values = np.einsum("...ij,ij...->...", ginv, a.coeffs)
    return PQField(0, 0, a.n, values[None, None])


def divide_by_nu(chi: PQField, nu: float) -> np.ndarray:
    """Grid density of chi/nu for a scalar (n,n)-field and nu = nu * dx^1^...^dx^n."""
    if (chi.p, chi.q) != (chi.n, chi.n) or chi.is_matrix:
        raise DegreeMismatch(f"division by nu needs a scalar (n,n)-field, got ({chi.p},{chi.q})")
    return _nu_sign(chi.n) * chi.coeffs[0, 0] / nu
