"""Closed-form unperturbed orbits, first-order manifold corrections, and the
leading-order asymptotic predictors for the splitting and critical energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import Params, coupling_F, coupling_dF, from_complex, ComplexOsc

# beyond this |v sqrt(kappa1)/2| the sinh form is evaluated through logs
_LOG_SWITCH = 30.0


def _check_nonneg(name, value):
    if not value >= 0.0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")


def separatrix(v, kappa1: float):
    """Pendulum heteroclinic at energy ``kappa1`` as a function of flow time v.

    ``kappa1 = 0`` is the separatrix ``X = asinh(v/sqrt 2)``,
    ``Z = 8/sqrt(v^2+2)``; for ``kappa1 > 0``
    ``sinh X = sqrt((2+k)/k) sinh(v sqrt(k)/2)``. Returns ``(X, Z)``, scalars
    or arrays following ``v``.
    """
    _check_nonneg("kappa1", kappa1)
    v = np.asarray(v, dtype=float)
    if kappa1 == 0.0:
        X = np.arcsinh(v / math.sqrt(2.0))
        Z = 8.0 / np.sqrt(v * v + 2.0)
    else:
        k = kappa1
        A = math.sqrt((2.0 + k) / k)
        u = v * math.sqrt(k) / 2.0
        au = np.abs(u)
        small = au <= _LOG_SWITCH
        us = np.where(small, u, 0.0)
        X_small = np.arcsinh(A * np.sinh(us))
        X_big = np.sign(u) * (au + math.log(A))
        X = np.where(small, X_small, X_big)
        # Z = 4 cosh u / sqrt(1/(2+k) + sinh^2 u / k), divided through by cosh u
        inv_c2 = np.where(small, 1.0 / np.cosh(us) ** 2, 0.0)
        Z = 4.0 / np.sqrt(inv_c2 / (2.0 + k) + np.tanh(u) ** 2 / k)
    if X.ndim == 0:
        return float(X), float(Z)
    return X, Z


def separatrix_time(X, kappa1: float):
    """Inverse of :func:`separatrix` in the X component: the v with X(v) = X."""
    _check_nonneg("kappa1", kappa1)
    X = np.asarray(X, dtype=float)
    if kappa1 == 0.0:
        v = math.sqrt(2.0) * np.sinh(X)
    else:
        k = kappa1
        A = math.sqrt((2.0 + k) / k)
        v = 2.0 / math.sqrt(k) * np.arcsinh(np.sinh(X) / A)
    return float(v) if v.ndim == 0 else v


def torus_point(tau, kappa2: float, p: Params):
    """Point of the oscillator circle ``Gamma = sqrt(2 kappa2/omega) e^{i tau}``
    as ``(b, B)``."""
    _check_nonneg("kappa2", kappa2)
    rho = math.sqrt(2.0 * kappa2 / p.omega)
    tau = np.asarray(tau, dtype=float)
    b, B = rho * np.sin(tau), rho * np.cos(tau)
    if b.ndim == 0:
        return float(b), float(B)
    return b, B


def _first_order_scale(p: Params) -> float:
    # delta / (omega sqrt(2 Omega)), with the coupling knob applied
    return p.coupling / p.omega


def first_order_Q(v, kappa1: float, p: Params):
    """First-order oscillator response ``Q = -i delta/(omega sqrt(2 Omega)) F(X_k(v))``."""
    X, _ = separatrix(v, kappa1)
    return -1j * _first_order_scale(p) * coupling_F(X)


def first_order_Q_at(X, p: Params):
    """Same as :func:`first_order_Q` but parameterized directly by X."""
    return -1j * _first_order_scale(p) * coupling_F(X)


def first_order_Zcorr(v, tau, kappa1: float, kappa2: float, p: Params):
    """First-order correction to Z on the 2-d manifold over the torus of
    oscillator energy ``kappa2``."""
    _check_nonneg("kappa2", kappa2)
    X, _ = separatrix(v, kappa1)
    rho = math.sqrt(2.0 * kappa2 / p.omega)
    return _first_order_scale(p) * coupling_dF(X) * rho * np.cos(tau)


def first_order_Zcorr_at(X, tau, kappa2: float, p: Params):
    """Same as :func:`first_order_Zcorr` but parameterized directly by X."""
    _check_nonneg("kappa2", kappa2)
    rho = math.sqrt(2.0 * kappa2 / p.omega)
    return _first_order_scale(p) * coupling_dF(X) * rho * np.cos(tau)


def manifold_oscillator(X: float, tau: float, kappa2: float, p: Params):
    """(b, B) on the first-order 2-d manifold at position X and phase tau."""
    b0, B0 = torus_point(tau, kappa2, p)
    q = first_order_Q_at(X, p)
    bq, Bq = from_complex(ComplexOsc(q, -q))
    return b0 + bq, B0 + Bq


@dataclass(frozen=True)
class PredictorSet:
    """Leading-order asymptotics for one parameter pack."""

    eps: float
    d0: float
    hs: float
    hc: float
    vc: float
    c_eps: float = 1.0

    def mu(self, h):
        """Energy normalized by the tangency scale, ``h = hs * mu^2``."""
        return np.sqrt(np.asarray(h) / self.hs)

    def vf(self, v_i, vc: float | None = None):
        """Output velocity ``sqrt(2 vc c_eps) sqrt(v_i - vc)``; NaN below vc."""
        vc = self.vc if vc is None else vc
        v_i = np.asarray(v_i, dtype=float)
        gap = v_i - vc
        out = np.where(gap >= 0.0,
                       np.sqrt(2.0 * vc * self.c_eps * np.maximum(gap, 0.0)),
                       np.nan)
        return float(out) if out.ndim == 0 else out


def predictors(p: Params, c_eps: float = 1.0) -> PredictorSet:
    eps, Om = p.eps, p.Omega
    expo = Om * math.sqrt(2.0 / eps)
    d0 = 2.0 * math.pi * p.delta / math.sqrt(Om) * math.exp(-expo)
    hs = eps * math.pi ** 2 * math.exp(-2.0 * expo) / 2.0
    hc = 2.0 * math.pi ** 2 * eps * math.exp(-2.0 * expo)
    return PredictorSet(eps=eps, d0=d0, hs=hs, hc=hc, vc=4.0 * math.sqrt(hc),
                        c_eps=c_eps)
