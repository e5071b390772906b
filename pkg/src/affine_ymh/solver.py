"""Continuity method for affine Yang-Mills-Higgs metrics.

Given a background metric H0 normalized so that tr K0 = r gamma, we look for an
h0-self-adjoint positive endomorphism field f solving

    L_eps(f) = K0 - gamma I + tr_g dbar_A(f^-1 d_A f) + tr_g [phi, f^-1 [phi*, f]] + eps log f = 0

for eps running from 1 down to a small eps_min, then at eps = 0, where H0 f is the
sought metric.  When no such metric exists the iterates f_eps degenerate, and the
rescaled limit of f_eps^sigma yields a destabilizing flat subbundle.

Internally f is carried as the Hermitian matrix field ft = G f G^-1 with G = H0^(1/2).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import calculus, matfun
from .bundle import FlatHiggsBundle
from .calculus import PQField
from .errors import NoSpectralGap, NotInvariant, NotPositive, UnsolvableNormalization
from .geometry import AffineTorus
from .hermitian import (
    EIGEN_FLOOR,
    MetricField,
    einstein_factor,
    extended_connection_form,
    flat_01_form,
    higgs_adjoint,
    higgs_form,
    mean_curvature,
    slope,
)
from .matfun import dagger
from .spectral import diff, wavenumbers
from .stability import invariance_residual, subbundle_slope

logger = logging.getLogger(__name__)

STATUSES = ("converged", "blowup", "stalled")


@dataclass
class SolverOptions:
    eps_max: float = 1.0
    eps_min: float = 1e-4
    eps_ratio: float = 0.5
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    blowup_threshold: float = 12.0
    grid: int | None = None
    det_renormalize: bool = True
    linear_rtol: float = 1e-3
    linear_maxiter: int = 500
    min_step_fraction: float = 1e-3
    eigen_floor: float = EIGEN_FLOOR

    def __post_init__(self):
        if not 0 < self.eps_min <= self.eps_max <= 1:
            raise ValueError("need 0 < eps_min <= eps_max <= 1")
        if not 0 < self.eps_ratio < 1:
            raise ValueError("eps_ratio must lie in (0, 1)")
        if self.newton_tol <= 0 or self.blowup_threshold <= 0:
            raise ValueError("tolerances must be positive")

    def eps_schedule(self) -> list:
        """Geometric schedule eps_max, eps_max*ratio, ... ending exactly at eps_min."""
        out = [self.eps_max]
        while out[-1] * self.eps_ratio > self.eps_min * (1 + 1e-12):
            out.append(out[-1] * self.eps_ratio)
        if out[-1] > self.eps_min:
            out.append(self.eps_min)
        return out


@dataclass
class StepRecord:
    eps: float
    newton_iters: int
    residual: float
    m_eps: float
    det_defect: float


@dataclass
class SolverTrace:
    status: str
    gamma: float
    bundle: FlatHiggsBundle
    torus: AffineTorus
    H0: MetricField
    f: np.ndarray
    records: list = field(default_factory=list)
    zero_records: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    final_residual: float = float("nan")
    message: str = ""
    wall_time: float = 0.0

    @property
    def f_tilde(self) -> np.ndarray:
        return self.iterates[-1][1]

    @property
    def m_history(self) -> list:
        return [rec.m_eps for rec in self.records + self.zero_records]

    def accepted_iterates(self) -> list:
        """(eps, ft) for the accepted continuation steps with eps > 0."""
        return [(eps, ft) for eps, ft in self.iterates if eps > 0]

    def metric(self) -> MetricField:
        """The metric H0 f reached by the run."""
        return MetricField(matfun.hermitize(self.H0.H @ self.f))


# background normalization ----------------------------------------------------


def _metric_laplacian(torus: AffineTorus, u: np.ndarray) -> np.ndarray:
    """sum_ij g^{ij} d_i d_j u for a scalar grid function."""
    first = [diff(u, axis=i) for i in range(torus.dim)]
    out = np.zeros(torus.shape, dtype=complex)
    for i in range(torus.dim):
        for j in range(torus.dim):
            out += torus.metric_inv[..., i, j] * diff(first[j], axis=i)
    return out


def _mean_symbol(torus: AffineTorus) -> np.ndarray:
    """sum_ij gbar^{ij} k_i k_j with gbar the grid-mean inverse metric."""
    k = wavenumbers(torus.grid, torus.dim)
    gbar = torus.metric_inv.reshape(-1, torus.dim, torus.dim).mean(axis=0)
    sym = np.zeros(torus.shape)
    for i in range(torus.dim):
        for j in range(torus.dim):
            sym = sym + gbar[i, j] * k[i] * k[j]
    return sym


def _solve_poisson(torus: AffineTorus, rhs: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Zero-mean u with g^{ij} d_i d_j u = rhs (rhs assumed in the range)."""
    axes = tuple(range(torus.dim))
    sym = _mean_symbol(torus)
    inv_sym = np.where(sym > 0, -1.0 / np.where(sym > 0, sym, 1.0), 0.0)
    size = int(np.prod(torus.shape))

    def precond(v):
        return np.fft.ifftn(inv_sym * np.fft.fftn(v.reshape(torus.shape), axes=axes), axes=axes).ravel()

    op = spla.LinearOperator((size, size), lambda v: _metric_laplacian(torus, v.reshape(torus.shape)).ravel(), dtype=complex)
    M = spla.LinearOperator((size, size), precond, dtype=complex)
    b = rhs.astype(complex).ravel()
    u, info = spla.gmres(op, b, M=M, rtol=tol, atol=0.0, restart=80, maxiter=10)
    if info < 0:
        raise UnsolvableNormalization(f"GMRES breakdown (info={info})")
    # Nyquist modes lie in the kernel of the discrete operator; drop them with the mean
    spec = np.fft.fftn(u.reshape(torus.shape), axes=axes)
    spec[(0,) * torus.dim] = 0.0
    spec *= _nyquist_mask(torus)
    return np.real(np.fft.ifftn(spec, axes=axes))


def _nyquist_mask(torus: AffineTorus) -> np.ndarray:
    mask = np.ones(torus.shape)
    half = torus.grid // 2
    for axis in range(torus.dim):
        index = [slice(None)] * torus.dim
        index[axis] = half
        mask[tuple(index)] = 0.0
    return mask


def normalize_background(bundle, torus, H_init: MetricField | None = None, tol: float = 1e-8, max_rounds: int = 8) -> MetricField:
    """H0 = e^u H_init with tr K^phi[H0] = r gamma."""
    r = bundle.rank
    H = H_init if H_init is not None else MetricField.identity(torus, r)
    gamma = einstein_factor(bundle, torus, H)
    best, defect = H, np.inf
    for _ in range(max_rounds):
        trK = np.real(np.trace(mean_curvature(bundle, torus, H), axis1=-2, axis2=-1))
        excess = trK - r * gamma
        current = float(np.abs(excess).max())
        if current >= defect:
            break
        best, defect = H, current
        if defect < 1e-3 * tol:
            break
        # tr K[e^u H] = tr K[H] - (r/4) g^{ij} d_i d_j u, exact up to aliasing
        u = _solve_poisson(torus, 4.0 * excess / r)
        H = H.scaled(np.exp(u))
    H = best
    if defect >= tol:
        raise UnsolvableNormalization(f"max |tr K0 - r gamma| = {defect:.3e} after {max_rounds} rounds")
    return H


# the perturbed equation ------------------------------------------------------


class _Problem:
    """Background data for L_eps shared across residual and linearization calls."""

    def __init__(self, bundle, torus, H0: MetricField, gamma: float | None = None):
        self.bundle, self.torus, self.H0 = bundle, torus, H0
        self.n, self.r = torus.dim, bundle.rank
        self.gamma = einstein_factor(bundle, torus, H0) if gamma is None else gamma
        self.G = matfun.sqrth(H0.H)
        self.Ginv = np.linalg.inv(self.G)
        self.K0 = mean_curvature(bundle, torus, H0)
        self.theta0 = extended_connection_form(bundle, torus, H0)
        self.alpha = flat_01_form(bundle, torus)
        self.phi = higgs_form(bundle, torus)
        self.phi_star = higgs_adjoint(bundle, torus, H0)
        self.eye = np.eye(self.r)
        self.symbol = _mean_symbol(torus)

    # frames
    def to_f(self, ft):
        return self.Ginv @ ft @ self.G

    def to_tilde(self, x):
        return self.G @ x @ self.Ginv

    def norm(self, L) -> float:
        """Max pointwise h0-Frobenius norm."""
        return float(np.linalg.norm(self.to_tilde(L), axis=(-2, -1)).max())

    def d_A(self, x: np.ndarray) -> PQField:
        X = PQField.function(x, self.n)
        return calculus.del_(X) + calculus.bracket(self.theta0, X)

    def dbar_A(self, y: PQField) -> PQField:
        return calculus.dbar(y) + calculus.bracket(self.alpha, y)

    def pieces(self, ft):
        lowest = float(np.linalg.eigvalsh(ft).min())
        if lowest <= 0 or not np.isfinite(lowest):
            raise NotPositive(f"f has eigenvalue {lowest:.3g}")
        f = self.to_f(ft)
        finv = np.linalg.inv(f)
        Y = self.d_A(f).map_values(lambda c: finv @ c)
        Z = calculus.bracket(self.phi_star, PQField.function(f, self.n)).map_values(lambda c: finv @ c)
        return f, finv, Y, Z

    def residual(self, ft, eps) -> np.ndarray:
        f, finv, Y, Z = self.pieces(ft)
        T1 = calculus.contract_g(self.torus, self.dbar_A(Y)).values()
        T2 = calculus.contract_g(self.torus, calculus.bracket(self.phi, Z)).values()
        out = self.K0 - self.gamma * self.eye + T1 + T2
        if eps:
            out = out + eps * self.Ginv @ matfun.logh(ft) @ self.G
        return out

    def xi(self, ft, eps, eta, pieces=None, L=None) -> np.ndarray:
        """Directional derivative of f -> f L_eps(f) along eta (original frame)."""
        f, finv, Y, Z = pieces if pieces is not None else self.pieces(ft)
        if L is None:
            L = self.residual(ft, eps)
        dY = Y.map_values(lambda c: -finv @ eta @ c) + self.d_A(eta).map_values(lambda c: finv @ c)
        dZ = Z.map_values(lambda c: -finv @ eta @ c) + calculus.bracket(
            self.phi_star, PQField.function(eta, self.n)
        ).map_values(lambda c: finv @ c)
        dL = calculus.contract_g(self.torus, self.dbar_A(dY)).values()
        dL = dL + calculus.contract_g(self.torus, calculus.bracket(self.phi, dZ)).values()
        if eps:
            dL = dL + eps * self.Ginv @ matfun.frechet_log(ft, self.to_tilde(eta)) @ self.G
        return eta @ L + f @ dL


def residual_L_eps(bundle, torus, H0: MetricField, f, eps: float, gamma: float | None = None) -> np.ndarray:
    """L_eps(f) on the grid; ``f`` is the endomorphism field (array or MetricField-wrapped)."""
    prob = _Problem(bundle, torus, H0, gamma)
    f = f.H if isinstance(f, MetricField) else np.asarray(f, dtype=complex)
    return prob.residual(matfun.hermitize(prob.to_tilde(f)), eps)


def linearize_Xi(bundle, torus, H0: MetricField, f, eps: float, gamma: float | None = None):
    """Apply-only handle eta -> Xi(eta) at f."""
    prob = _Problem(bundle, torus, H0, gamma)
    f = f.H if isinstance(f, MetricField) else np.asarray(f, dtype=complex)
    ft = matfun.hermitize(prob.to_tilde(f))
    pieces = prob.pieces(ft)
    L = prob.residual(ft, eps)

    def apply(eta):
        return prob.xi(ft, eps, np.asarray(eta, dtype=complex), pieces, L)

    return apply


# Newton ----------------------------------------------------------------------


def _m_eps(ft) -> float:
    return float(np.linalg.norm(matfun.logh(ft), axis=(-2, -1)).max())


def _retract(ft, X, t):
    s = matfun.sqrth(ft)
    sinv = np.linalg.inv(s)
    return matfun.hermitize(s @ matfun.exph(t * matfun.hermitize(sinv @ X @ sinv)) @ s)


class _NewtonFailure(Exception):
    pass


class _Blowup(Exception):
    pass


def _newton_direction(prob: _Problem, ft, eps, L, opts: SolverOptions):
    """Solve Xi_eps(eta) = -f L by preconditioned GMRES; ``eps`` only enters the operator."""
    pieces = prob.pieces(ft)
    shape = ft.shape
    size = ft.size
    axes = tuple(range(prob.n))
    sym = 0.25 * prob.symbol + eps
    sym = np.where(sym > 0, sym, 1.0)[..., None, None]

    def matvec(v):
        X = v.reshape(shape)
        out = prob.xi(ft, eps, prob.to_f(X), pieces, L)
        return prob.to_tilde(out).ravel()

    def precond(v):
        spec = np.fft.fftn(v.reshape(shape), axes=axes)
        return np.fft.ifftn(spec / sym, axes=axes).ravel()

    rhs = -prob.to_tilde(prob.to_f(ft) @ L).ravel()
    op = spla.LinearOperator((size, size), matvec, dtype=complex)
    M = spla.LinearOperator((size, size), precond, dtype=complex)
    restart = min(100, opts.linear_maxiter)
    x, info = spla.gmres(
        op, rhs, M=M, rtol=opts.linear_rtol, atol=0.0, restart=restart,
        maxiter=max(1, opts.linear_maxiter // restart),
    )
    if info < 0:
        raise _NewtonFailure(f"GMRES breakdown (info={info})")
    return matfun.hermitize(x.reshape(shape))


def _newton(prob: _Problem, ft, eps, opts: SolverOptions, watch_blowup: bool = False, on_iterate=None):
    """Newton iteration for L_eps = 0 from ft; returns (ft, iterations, residual)."""
    L = prob.residual(ft, eps)
    res = prob.norm(L)
    for it in range(opts.newton_max_iter + 1):
        if watch_blowup and _m_eps(ft) >= opts.blowup_threshold:
            raise _Blowup(it)
        if res <= opts.newton_tol:
            return ft, it, res
        if it == opts.newton_max_iter:
            break
        # At eps = 0 the linearization is singular along scalings of f and the
        # commutant; -f L is orthogonal to that kernel, so a shift that vanishes
        # with the residual gives a well-posed direction without moving the root.
        shift = eps if eps > 0 else min(opts.eps_min, res)
        try:
            X = _newton_direction(prob, ft, shift, L, opts)
        except NotPositive as exc:
            raise _NewtonFailure(str(exc)) from exc
        t = 1.0
        while t >= 2.0**-12:
            try:
                trial = _retract(ft, X, t)
                L_trial = prob.residual(trial, eps)
                res_trial = prob.norm(L_trial)
            except (NotPositive, np.linalg.LinAlgError):
                res_trial = np.inf
            if np.isfinite(res_trial) and res_trial <= (1 - 1e-4 * t) * res:
                break
            t *= 0.5
        else:
            raise _NewtonFailure(f"line search failed at residual {res:.3e}")
        ft, L, res = trial, L_trial, res_trial
        if on_iterate is not None:
            on_iterate(ft)
    raise _NewtonFailure(f"no convergence in {opts.newton_max_iter} iterations (residual {res:.3e})")


def _det_renormalize(ft, r):
    det = np.real(np.linalg.det(ft))
    defect = float(np.abs(det - 1.0).max())
    return ft / (det ** (1.0 / r))[..., None, None], defect


def continuity_solve(bundle, torus, opts: SolverOptions | None = None, H_init: MetricField | None = None) -> SolverTrace:
    opts = opts or SolverOptions()
    start = time.perf_counter()
    H0 = normalize_background(bundle, torus, H_init)
    prob = _Problem(bundle, torus, H0)
    r = bundle.rank
    ft = np.broadcast_to(np.eye(r, dtype=complex), torus.shape + (r, r)).copy()
    trace = SolverTrace("stalled", prob.gamma, bundle, torus, H0, prob.to_f(ft))

    def accept(ft, eps, iters, res):
        det_defect = 0.0
        if opts.det_renormalize:
            ft, det_defect = _det_renormalize(ft, r)
        m = _m_eps(ft)
        trace.records.append(StepRecord(eps, iters, res, m, det_defect))
        trace.iterates.append((eps, ft))
        logger.info("eps=%.3e iters=%d residual=%.2e m=%.3f det_defect=%.1e", eps, iters, res, m, det_defect)
        return ft, m

    def finish(status, message=""):
        trace.status = status
        trace.message = message
        trace.f = prob.to_f(ft)
        K = mean_curvature(bundle, torus, trace.metric())
        trace.final_residual = float(np.abs(K - prob.gamma * prob.eye).max())
        trace.wall_time = time.perf_counter() - start
        return trace

    eps_cur = None
    for eps_target in opts.eps_schedule():
        target = eps_target
        while True:
            try:
                new_ft, iters, res = _newton(prob, ft, target, opts)
            except _NewtonFailure as exc:
                if eps_cur is None:
                    return finish("stalled", f"Newton failed at eps={target:.3e}: {exc}")
                step = (eps_cur - target) / 2
                if step < opts.min_step_fraction * eps_cur:
                    return finish("stalled", f"step size collapsed below eps={target:.3e}: {exc}")
                target = eps_cur - step
                logger.info("halving eps step, new target %.4e", target)
                continue
            ft, m = accept(new_ft, target, iters, res)
            eps_cur = target
            if m >= opts.blowup_threshold:
                return finish("blowup", f"m_eps={m:.3f} at eps={target:.3e}")
            if target == eps_target:
                break
            target = eps_target

    # final solve at eps = 0, watching for degeneration of the iterates
    def watch(new_ft):
        # det f is not pinned at eps = 0, so the defect here is informational
        det_defect = float(np.abs(np.real(np.linalg.det(new_ft)) - 1.0).max())
        trace.iterates.append((0.0, new_ft))
        trace.zero_records.append(
            StepRecord(0.0, len(trace.zero_records) + 1, prob.norm(prob.residual(new_ft, 0.0)), _m_eps(new_ft), det_defect)
        )

    try:
        ft, iters, res = _newton(prob, ft, 0.0, opts, watch_blowup=True, on_iterate=watch)
    except _Blowup:
        ft = trace.iterates[-1][1]
        return finish("blowup", f"m exceeded {opts.blowup_threshold} during the eps=0 solve")
    except _NewtonFailure as exc:
        ft = trace.iterates[-1][1]
        return finish("stalled", f"eps=0 solve failed: {exc}")
    if opts.det_renormalize:
        ft, _ = _det_renormalize(ft, r)
    finish("converged")
    if trace.final_residual >= 10 * opts.newton_tol:
        trace.status = "stalled"
        trace.message = f"final |K - gamma| = {trace.final_residual:.3e}"
    return trace


def continuation_trace_defects(trace: SolverTrace) -> list:
    """(eps', |int tr eta|) between adjacent accepted steps.

    eta approximates f^{-1/2} (df/deps) f^{-1/2} by the trapezoid rule over the
    step, averaging the difference quotient sandwiched by either endpoint.  The
    one-sided quotient carries an O(step) bias, since tr(f0^{-1} f1) >= r when
    det f0 = det f1 = 1.
    """
    density = trace.torus.volume_density
    steps = trace.accepted_iterates()
    out = []
    for (e0, f0), (e1, f1) in zip(steps, steps[1:]):
        diff_q = (f1 - f0) / (e1 - e0)
        eta = 0.0
        for f in (f0, f1):
            root_inv = np.linalg.inv(matfun.sqrth(f))
            eta = eta + 0.5 * root_inv @ diff_q @ root_inv
        total = np.mean(np.real(np.trace(eta, axis1=-2, axis2=-1)) * density)
        out.append((e1, float(abs(total))))
    return out


# destabilizer -------------------------------------------------------------


def _l1(torus, values) -> float:
    """Volume-normalized integral of the pointwise Frobenius norm."""
    density = torus.volume_density
    pointwise = np.linalg.norm(values, axis=(-2, -1))
    return float(np.mean(pointwise * density) / np.mean(density))


def extract_destabilizer(trace: SolverTrace, sigma_schedule=(0.5, 0.25, 0.1, 0.05), gap: float = 0.2, tol: float = 1e-2):
    """Projection field, constant basis and diagnostics of the destabilizing subbundle.

    The last iterate is rescaled to fhat = exp(-M) f with M the largest eigenvalue
    of log f, so its eigenvalues lie in (0, 1].  The smallest sigma in the schedule
    at which the eigenvalues of fhat^sigma avoid (1/2 - gap, 1/2 + gap) with the same
    number of collapsed directions at every grid point fixes the limit projector.
    """
    bundle, torus = trace.bundle, trace.torus
    r = bundle.rank
    ft = trace.f_tilde if trace.iterates else matfun.hermitize(trace.H0.H @ trace.f)
    w, v = np.linalg.eigh(ft)
    M = float(np.log(w).max())
    rho = np.exp(-M)
    what = rho * w
    chosen, table = None, []
    for sigma in sorted(sigma_schedule, reverse=True):
        powered = what**sigma
        table.append({"sigma": sigma, "min": float(powered.min()), "max": float(powered.max())})
        in_band = np.any(np.abs(powered - 0.5) < gap)
        collapsed = np.sum(powered < 0.5, axis=-1)
        if not in_band and collapsed.min() == collapsed.max() and 0 < collapsed.min() < r:
            chosen = sigma
    if chosen is None:
        raise NoSpectralGap("no sigma separates the rescaled spectrum from 1/2")
    keep = (what**chosen > 0.5).astype(float)
    limit_t = (v * keep[..., None, :]) @ dagger(v)
    varpi_t = np.eye(r) - limit_t
    G = matfun.sqrth(trace.H0.H)
    Ginv = np.linalg.inv(G)
    varpi = Ginv @ varpi_t @ G

    H0 = trace.H0.H
    comp = np.eye(r) - varpi
    adj = np.linalg.inv(H0) @ dagger(varpi) @ H0
    alpha = flat_01_form(bundle, torus)
    V = PQField.function(varpi, torus.dim)
    dbar_varpi = calculus.dbar(V) + calculus.bracket(alpha, V)
    residuals = {
        "idempotent": _l1(torus, varpi @ varpi - varpi),
        "self_adjoint": _l1(torus, adj - varpi),
        "holomorphic": max(_l1(torus, comp @ dbar_varpi.coeffs[0, j]) for j in range(torus.dim)),
        "higgs_invariant": max(_l1(torus, comp @ p @ varpi) for p in bundle.higgs),
    }
    worst = max(residuals.values())
    if worst > tol:
        raise NotInvariant(f"destabilizer identities violated: {residuals}")

    mean = varpi.reshape(-1, r, r).mean(axis=0)
    s = int(round(np.real(np.trace(mean))))
    if not 0 < s < r:
        raise NoSpectralGap(f"limit projection has rank {s}, not a proper subbundle")
    u, _, _ = np.linalg.svd(mean)
    basis = u[:, :s]
    mu_F = subbundle_slope(bundle, torus, basis)
    mu_E = slope(bundle, torus)
    report = {
        "sigma": chosen,
        "rho": rho,
        "rank": s,
        "mu_F": mu_F,
        "mu_E": mu_E,
        "destabilizing": bool(mu_F >= mu_E - 1e-6),
        "identity_residuals": residuals,
        "invariance_residual": invariance_residual(bundle, basis),
        "sigma_table": table,
    }
    return varpi, basis, report
