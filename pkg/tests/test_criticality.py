import math

import numpy as np
import pytest

from kinklab import criticality as crit
from kinklab.closedforms import predictors
from kinklab.errors import BracketError, DegenerateError, DomainError
from kinklab.integrator import IntegratorConfig
from kinklab.model import make_params


def test_linear_fit_recovers_line():
    x = np.linspace(0, 1, 6)
    fit = crit.linear_fit(x, 2.0 - 3.0 * x)
    assert fit.slope == pytest.approx(-3.0) and fit.intercept == pytest.approx(2.0)
    assert fit.residual_norm < 1e-12 and fit.n == 6


def test_linear_fit_needs_four_points():
    with pytest.raises(DomainError):
        crit.linear_fit([0, 1, 2], [0, 1, 2])


def test_bisect_synthetic_root():
    res = crit._bisect(lambda h: h - 0.3, 0.1, 1.0, 1e-6, predicted=0.3)
    assert res.h == pytest.approx(0.3, rel=1e-6)
    assert res.width <= 1e-6 * res.h * 1.01
    assert len(res.interior) == 5
    assert float(res) == res.h and res.ratio == pytest.approx(1.0, rel=1e-6)


def test_bisect_widens_bracket():
    res = crit._bisect(lambda h: h - 5.0, 1.0, 2.0, 1e-4, predicted=5.0)
    assert res.h == pytest.approx(5.0, rel=1e-4)


def test_bisect_gives_up_after_three_widenings():
    calls = []

    def ind(h):
        calls.append(h)
        return 1.0

    with pytest.raises(BracketError):
        crit._bisect(ind, 1.0, 2.0, 1e-3, predicted=1.0)
    assert min(calls) == pytest.approx(1.0 / 8) and max(calls) == pytest.approx(16.0)


def test_bisect_detects_non_monotone_indicator():
    clean = crit._bisect(lambda h: h - 0.5, 0.1, 1.0, 1e-4, predicted=0.5)
    # flip one interior probe so the signs read ...+ - ... or ...+ - ...
    hs = [h for h, _ in clean.interior]
    vals = [v for _, v in clean.interior] + [clean.indicators[1]]
    k = next(i for i in range(5) if (vals[i] < 0 and vals[i + 1] < 0)
             or (i > 0 and vals[i] > 0 and vals[i - 1] > 0))
    blip = hs[k]

    def ind(h):
        return -(h - 0.5) if h == blip else h - 0.5

    with pytest.raises(crit.InconsistencyError):
        crit._bisect(ind, 0.1, 1.0, 1e-4, predicted=0.5)


def test_find_hc_decoupled_has_no_bracket():
    p = make_params(0.1, coupling_scale=0.0)
    with pytest.raises(BracketError):
        crit.find_hc(p, IntegratorConfig(X_max=3.0), n_tau=16)


def test_find_hs_decoupled_is_degenerate():
    p = make_params(0.1, coupling_scale=0.0)
    with pytest.raises(DegenerateError):
        crit.find_hs(p, IntegratorConfig(X_max=3.0), n_tau=16)


def test_find_hc_agrees_with_shooting_on_narrow_bracket(p01, cfg8):
    pred = predictors(p01).hc
    geo = crit.find_hc(p01, cfg8, bracket=(0.99 * pred, 1.01 * pred), n_tau=16)
    shot = crit.find_hc_shooting(p01, IntegratorConfig(X_max=10.0),
                                 bracket=(0.99 * pred, 1.01 * pred))
    assert geo.bracket[0] <= shot.h <= geo.bracket[1]
    assert geo.indicators[0] < 0 < geo.indicators[1]


def test_measure_vf_decoupled(p_free, cfg10):
    row = crit.measure_vf(0.01, p_free, cfg10)
    assert row.outcome == "Escaped"
    assert row.v_f == pytest.approx(row.v_i, abs=1e-10)


def test_measure_vf_deterministic(p01, cfg10):
    h = 1.05 * predictors(p01).hc
    assert crit.measure_vf(h, p01, cfg10) == crit.measure_vf(h, p01, cfg10)


def test_measure_vf_far_above_critical(p01, cfg10):
    row = crit.measure_vf(0.04, p01, cfg10)
    assert row.outcome == "Escaped"
    # the oscillator takes ~ omega d^2 / 2, about the critical energy itself
    assert row.kappa2 / row.h < 0.01
    assert row.kappa2 == pytest.approx(predictors(p01).hc, rel=0.2)
    assert (row.v_i - row.v_f) / row.v_i < 0.01
    assert row.v_i ** 2 / 16 - row.v_f ** 2 / 16 == pytest.approx(row.kappa2, abs=1e-9)


def test_measure_vf_below_critical(p01, cfg10):
    row = crit.measure_vf(0.5 * predictors(p01).hc, p01, cfg10)
    assert row.outcome == "TurnedBack" and math.isnan(row.v_f)


def test_measure_vf_rejects_nonpositive(p01, cfg10):
    with pytest.raises(DomainError):
        crit.measure_vf(0.0, p01, cfg10)


def _synthetic_rows(vc, c_eps, outcomes=None):
    g = np.geomspace(1e-2, 0.2, 8)
    rows = []
    for i, gi in enumerate(g):
        vi = vc * (1 + gi)
        x = vi - vc
        vf = math.sqrt(2 * vc * c_eps * x + 0.3 * x * x)
        kind = outcomes[i] if outcomes else "Escaped"
        rows.append(crit.ScanRow(0.1, (vi / 4) ** 2, vi, kind, vf ** 2 / 16, 0.0, vf, 0.0))
    return rows


def test_fit_vf_law_on_synthetic_data(p01, cfg10):
    vc = 0.0645
    fa, fb, _ = crit.fit_vf_law(p01, cfg10, vc=vc, rows=_synthetic_rows(vc, 0.93))
    assert fb.extra["c_eps"] == pytest.approx(0.93, rel=1e-9)
    assert fa.slope == pytest.approx(0.5, abs=0.03)


def test_fit_vf_law_flags_capture_above_vc(p01, cfg10):
    vc = 0.0645
    rows = _synthetic_rows(vc, 1.0, outcomes=["Escaped"] * 5 + ["TurnedBack"] + ["Escaped"] * 2)
    with pytest.raises(crit.InconsistencyError):
        crit.fit_vf_law(p01, cfg10, vc=vc, rows=rows)


def test_fit_vf_law_decoupled(p_free, cfg10):
    with pytest.raises(DegenerateError):
        crit.fit_vf_law(p_free, cfg10)


def _splitting_rows(rate):
    rows = []
    for eps in (0.05, 0.07, 0.1, 0.15, 0.2):
        p = make_params(eps)
        pre = 2 * math.pi * p.delta / math.sqrt(p.Omega)
        d = pre * math.exp(-rate * math.sqrt(2 / eps))
        rows.append(crit.SplittingRow(eps, d, predictors(p).d0, d, -d / 2, 0.0, d / 2, 0.0))
    return rows


def test_fit_exponential_rate_synthetic():
    fit = crit.fit_exponential_rate([0.05, 0.07, 0.1, 0.15, 0.2], IntegratorConfig(),
                                    rows=_splitting_rows(0.97))
    assert fit.slope == pytest.approx(-0.97, rel=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.extra["loo_max_rel_change"] < 1e-10


def test_fit_exponential_rate_needs_four():
    with pytest.raises(DomainError):
        crit.fit_exponential_rate([0.1, 0.2, 0.3], IntegratorConfig())


def test_measure_splitting_decoupled():
    row = crit.measure_splitting(0.1, IntegratorConfig(X_max=10.0), coupling_scale=0.0)
    assert row.d_meas < 1e-10


def test_csv_records(tmp_path):
    row = crit.ScanRow(0.1, 1e-3, 4 * math.sqrt(1e-3), "Escaped", 1e-4, 9e-4, 0.04, 0.039)
    path = tmp_path / "v.csv"
    crit.write_rows(path, crit.VOUT_FIELDS, [crit.vout_record(row)])
    lines = path.read_text().splitlines()
    assert lines[0] == "eps,h,v_i,outcome,kappa1,kappa2,v_f,v_f_pred"
    assert lines[1].split(",")[3] == "Escaped"
    pr = predictors(make_params(0.1))
    rec = crit.critical_record(0.1, None, None, pr)
    assert len(rec) == len(crit.CRITICAL_FIELDS) and math.isnan(rec[1])
