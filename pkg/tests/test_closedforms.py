import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kinklab.closedforms import (first_order_Q, first_order_Q_at, first_order_Zcorr,
                                 first_order_Zcorr_at, manifold_oscillator, predictors,
                                 separatrix, separatrix_time, torus_point)
from kinklab.errors import DomainError
from kinklab.melnikov import melnikov_residue
from kinklab.model import coupling_F, make_params, potential_U

kappa_st = st.sampled_from([0.0, 1e-8, 1e-4, 0.01, 0.3, 2.0])


def test_separatrix_at_origin():
    assert separatrix(0.0, 0.0) == (0.0, pytest.approx(8 / math.sqrt(2)))
    k = 0.3
    X, Z = separatrix(0.0, k)
    assert X == 0.0
    assert Z == pytest.approx(4 * math.sqrt(2 + k))


@given(st.floats(-50, 50), kappa_st)
def test_separatrix_energy(v, k):
    X, Z = separatrix(v, k)
    assert Z * Z / 16 + potential_U(X) == pytest.approx(k, abs=1e-12)


@given(st.floats(-40, 40), kappa_st)
def test_separatrix_solves_flow(v, k):
    """dX/dv = Z/8, checked by central differences."""
    h = 1e-5
    Xp, _ = separatrix(v + h, k)
    Xm, _ = separatrix(v - h, k)
    _, Z = separatrix(v, k)
    assert (Xp - Xm) / (2 * h) == pytest.approx(Z / 8, rel=1e-7, abs=1e-9)


@given(st.floats(-15, 15), kappa_st)
def test_separatrix_time_inverts(X, k):
    v = separatrix_time(X, k)
    assert separatrix(v, k)[0] == pytest.approx(X, abs=1e-9)


def test_separatrix_large_times_are_finite():
    X, Z = separatrix(np.array([-1e6, 1e6]), 0.01)
    assert np.all(np.isfinite(X)) and np.all(Z > 0)
    assert Z[0] == pytest.approx(4 * math.sqrt(0.01), rel=1e-12)


def test_separatrix_rejects_negative_energy():
    with pytest.raises(DomainError):
        separatrix(0.0, -1e-3)


@given(st.floats(0, 2 * math.pi), st.floats(0, 0.1))
def test_torus_point_energy(tau, k2):
    p = make_params(0.1)
    b, B = torus_point(tau, k2, p)
    assert 0.5 * p.omega * (b * b + B * B) == pytest.approx(k2, abs=1e-16)


@given(st.floats(-10, 10))
def test_first_order_response_is_forced_equilibrium(X):
    """Q solves i omega Q - c F(X) = 0 (the slow-manifold condition)."""
    p = make_params(0.1)
    q = first_order_Q_at(X, p)
    assert abs(1j * p.omega * q - p.coupling * coupling_F(X)) < 1e-16
    v = separatrix_time(X, 0.0)
    assert first_order_Q(v, 0.0, p) == pytest.approx(q, abs=1e-12)


def test_manifold_oscillator_splits_into_torus_and_response(p01):
    b, B = manifold_oscillator(2.0, 0.0, 0.0, p01)
    assert B == 0.0
    assert b == pytest.approx(-p01.coupling / p01.omega * coupling_F(2.0))


def test_zcorr_forms_agree(p01):
    v = separatrix_time(5.0, 0.0)
    assert first_order_Zcorr(v, 0.7, 0.0, 0.01, p01) == pytest.approx(
        first_order_Zcorr_at(5.0, 0.7, 0.01, p01), rel=1e-9)


def test_predictors_at_eps_01(p01):
    pr = predictors(p01)
    assert pr.d0 == pytest.approx(1.2842718812581e-2, rel=1e-12)
    assert pr.hc == pytest.approx(2.6046e-4, rel=1e-4)
    assert pr.hs == pytest.approx(6.5115e-5, rel=1e-4)
    assert pr.hc == pytest.approx(4 * pr.hs, rel=1e-14)
    assert pr.vc == pytest.approx(4 * math.sqrt(pr.hc), rel=1e-14)
    assert pr.c_eps == 1.0


@given(st.floats(0.01, 0.5))
def test_d0_equals_melnikov_modulus(eps):
    p = make_params(eps)
    assert predictors(p).d0 == pytest.approx(abs(melnikov_residue(p).c1), rel=1e-13)


@given(st.floats(0.01, 0.5))
def test_hc_is_omega_d0_squared_over_two(eps):
    p = make_params(eps)
    pr = predictors(p)
    assert pr.hc == pytest.approx(p.omega * pr.d0 ** 2 / 2, rel=1e-12)


def test_mu_and_vf(p01):
    pr = predictors(p01)
    assert pr.mu(4 * pr.hs) == pytest.approx(2.0)
    assert math.isnan(pr.vf(0.5 * pr.vc))
    assert pr.vf(pr.vc) == 0.0
    vi = np.array([pr.vc * 1.1, pr.vc * 1.2])
    np.testing.assert_allclose(pr.vf(vi), np.sqrt(2 * pr.vc * (vi - pr.vc)))
