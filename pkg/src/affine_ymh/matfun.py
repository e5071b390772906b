"""Pointwise functions of Hermitian matrix fields via eigendecomposition."""

import numpy as np


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def apply(a: np.ndarray, fn) -> np.ndarray:
    """fn(a) for a stack of Hermitian matrices a[..., r, r]."""
    w, v = np.linalg.eigh(hermitize(a))
    return (v * fn(w)[..., None, :]) @ dagger(v)


def logh(a):
    return apply(a, np.log)


def exph(a):
    return apply(a, np.exp)


def powh(a, s: float):
    return apply(a, lambda w: w**s)


def sqrth(a):
    return apply(a, np.sqrt)


def frechet(a: np.ndarray, e: np.ndarray, fn, dfn) -> np.ndarray:
    """Directional derivative of a -> fn(a) at Hermitian a along e (Daleckii-Krein).

    ``e`` need not be Hermitian; the formula is complex-linear in e.
    """
    w, v = np.linalg.eigh(hermitize(a))
    fw = fn(w)
    wi, wj = w[..., :, None], w[..., None, :]
    gap = wi - wj
    close = np.abs(gap) <= 1e-9 * np.maximum(1.0, np.abs(wi))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (fw[..., :, None] - fw[..., None, :]) / np.where(close, 1.0, gap)
    mid = dfn(0.5 * (wi + wj))
    gamma = np.where(close, mid, ratio)
    return v @ (gamma * (dagger(v) @ e @ v)) @ dagger(v)


def frechet_log(a, e):
    return frechet(a, e, np.log, lambda w: 1.0 / w)
