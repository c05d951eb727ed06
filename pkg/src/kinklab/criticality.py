"""Drivers that extract the tangency and critical energies, the output
velocity law and the exponential rate of the splitting, and compare them with
the leading-order predictors."""

from __future__ import annotations

import csv
import dataclasses
import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .closedforms import PredictorSet, predictors
from .errors import BracketError, DegenerateError, DomainError, KinklabError
from .integrator import IntegratorConfig, Outcome, shoot
from .manifolds import (SectionCurve, TrigCurve, _nearest_trig, _trace, curve_gap,
                        curve_intersections, point_curve_relation, splitting_points,
                        stable_curve, unstable_point, _tail_state)
from .melnikov import melnikov_residue
from .model import Params, make_params

log = logging.getLogger(__name__)

# escape radius for output-velocity shots: the coupling energy there is
# below 1e-13 so kappa1 + kappa2 = h to round-off
X_ESCAPE = 20.0


class InconsistencyError(KinklabError):
    """Measured data contradict a structural expectation of the scan."""


@dataclass(frozen=True)
class ScanRow:
    eps: float
    h: float
    v_i: float
    outcome: str
    kappa1: float
    kappa2: float
    v_f: float
    v_f_pred: float


@dataclass(frozen=True)
class FitReport:
    """Ordinary least-squares line ``y = intercept + slope x``."""

    slope: float
    intercept: float
    slope_err: float
    intercept_err: float
    residual_norm: float
    n: int
    extra: dict = field(default_factory=dict)


def linear_fit(x, y, extra_columns=()) -> FitReport:
    """OLS of y on [1, x, *extra_columns]; reports the first two coefficients."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise DomainError(f"fit needs at least 4 points, got {x.size}")
    A = np.column_stack([np.ones_like(x), x, *extra_columns])
    if x.size <= A.shape[1]:
        raise DomainError("fit is under-determined")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = x.size - A.shape[1]
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return FitReport(slope=float(coef[1]), intercept=float(coef[0]),
                     slope_err=math.sqrt(cov[1, 1]), intercept_err=math.sqrt(cov[0, 0]),
                     residual_norm=float(np.linalg.norm(resid)), n=int(x.size),
                     extra={"coef": coef.tolist()})


# --- critical energy ---------------------------------------------------------

def _curve_cfg(cfg: IntegratorConfig, curve_x_max):
    if curve_x_max is None:
        return cfg
    return dataclasses.replace(cfg, X_max=float(curve_x_max))


def hc_indicator(h: float, p: Params, cfg: IntegratorConfig, n_tau: int = 32,
                 curve_x_max: float | None = None, refine: str = "fourier") -> float:
    """Signed distance of the unstable point to the stable curve at energy h,
    positive when the point lies inside the curve."""
    C = stable_curve(0.0, h, p, _curve_cfg(cfg, curve_x_max), n_tau)
    P = unstable_point(h, p, cfg)
    d, _ = point_curve_relation(P, C, refine=refine)
    return d


@dataclass(frozen=True)
class CriticalEnergy:
    """Bisection result; ``float(result)`` is the bracket midpoint."""

    h: float
    bracket: tuple
    indicators: tuple
    evaluations: int
    predicted: float
    interior: tuple = ()

    def __float__(self):
        return self.h

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    @property
    def ratio(self) -> float:
        return self.h / self.predicted


def _bisect(indicator, lo, hi, rel_width, predicted, widen=3, check_interior=5):
    """Bisection on ``indicator(h) > 0``; widens the bracket by 2 at both ends
    up to ``widen`` times when the endpoint signs agree."""
    f_lo, f_hi = indicator(lo), indicator(hi)
    n = 2
    tries = 0
    while (f_lo > 0) == (f_hi > 0):
        if tries == widen:
            raise BracketError(
                f"no sign change on [{lo:.6g}, {hi:.6g}]: indicators {f_lo:.6g}, {f_hi:.6g}")
        lo, hi = lo / 2.0, hi * 2.0
        f_lo, f_hi = indicator(lo), indicator(hi)
        n += 2
        tries += 1
    up = f_hi > 0
    while (hi - lo) > rel_width * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        f_mid = indicator(mid)
        n += 1
        if (f_mid > 0) == up:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    interior = ()
    if check_interior:
        hs = lo + (hi - lo) * np.arange(1, check_interior + 1) / (check_interior + 1)
        vals = pmap(indicator, [float(h) for h in hs])
        n += check_interior
        flags = [(v > 0) == up for v in [f_lo, *vals, f_hi]]
        # monotone: once on the upper side, stays there
        if any(a and not b for a, b in zip(flags, flags[1:])):
            raise InconsistencyError(
                f"indicator not monotone on final bracket [{lo:.8g}, {hi:.8g}]: {vals}")
        interior = tuple(zip(hs.tolist(), vals))
    return CriticalEnergy(0.5 * (lo + hi), (lo, hi), (f_lo, f_hi), n, predicted, interior)


class _HcIndicator:
    def __init__(self, p, cfg, n_tau, curve_x_max):
        self.p, self.cfg, self.n_tau, self.curve_x_max = p, cfg, n_tau, curve_x_max

    def __call__(self, h):
        return hc_indicator(h, self.p, self.cfg, self.n_tau, self.curve_x_max)


def find_hc(p: Params, cfg: IntegratorConfig, bracket=None, rel_width: float = 1e-3,
            n_tau: int = 32, curve_x_max: float | None = None) -> CriticalEnergy:
    """Energy at which the unstable point crosses the stable curve.

    The indicator is the signed distance of P^u_h to the stable curve of the
    oscillator circle at energy h; it is negative (outside) below the
    critical energy and positive above. Bisection to relative width
    ``rel_width``; the indicator sign is checked for monotonicity at five
    interior points of the final bracket.
    """
    pred = predictors(p).hc
    lo, hi = bracket if bracket is not None else (0.25 * pred, 4.0 * pred)
    if not 0.0 < lo < hi:
        raise DomainError("bracket must satisfy 0 < lo < hi")
    return _bisect(_HcIndicator(p, cfg, n_tau, curve_x_max), lo, hi, rel_width, pred)


# --- tangency energy -----------------------------------------------------------

class _HsIndicator:
    def __init__(self, p, cfg, n_tau):
        self.p, self.cfg, self.n_tau = p, cfg, n_tau

    def __call__(self, h):
        Cs = stable_curve(0.0, h, self.p, self.cfg, self.n_tau)
        Cu = Cs.mirror()
        radius = math.sqrt(2.0 * h / self.p.omega)
        if abs(Cu.centroid() - Cs.centroid()) < 1e-9 * radius:
            raise DegenerateError(
                "unstable and stable curves are concentric; tangency energy undefined")
        return curve_gap(Cu, Cs)


def find_hs(p: Params, cfg: IntegratorConfig, bracket=None, rel_width: float = 1e-3,
            n_tau: int = 32) -> CriticalEnergy:
    """Smallest energy at which the unstable and stable curves meet.

    The unstable curve is the reflection of the stable one. The indicator is
    the largest depth of a point of the unstable curve inside the stable
    curve (trigonometric interpolants), positive iff the curves cross.
    """
    pred = predictors(p).hs
    lo, hi = bracket if bracket is not None else (0.25 * pred, 4.0 * pred)
    if not 0.0 < lo < hi:
        raise DomainError("bracket must satisfy 0 < lo < hi")
    return _bisect(_HsIndicator(p, cfg, n_tau), lo, hi, rel_width, pred)


def intersection_count(h: float, p: Params, cfg: IntegratorConfig, n_tau: int = 32,
                       direct: bool = False) -> int:
    """Number of crossings between the unstable and stable curves at energy h.

    ``direct`` integrates the unstable curve instead of reflecting.
    """
    Cs = stable_curve(0.0, h, p, cfg, n_tau)
    if direct:
        from .manifolds import unstable_curve
        Cu = unstable_curve(0.0, h, p, cfg, n_tau)
    else:
        Cu = Cs.mirror()
    return len(curve_intersections(Cu, Cs))


# --- shots and the output velocity ----------------------------------------------

def _tail_shot(h: float, p: Params, cfg: IntegratorConfig, x_escape: float):
    s0 = _tail_state(-cfg.X_max, 0.0, 0.0, h, p)
    return shoot(s0, p, cfg, x_escape=x_escape)


def escapes(h: float, p: Params, cfg: IntegratorConfig) -> float:
    """Pendulum energy at ``X = cfg.X_max`` of the shot from the unstable
    manifold tail, or ``-inf`` if the kink turns back first.

    Positive values mean the kink escapes (the pendulum energy is conserved
    to within the coupling tail beyond X_max).
    """
    out = _tail_shot(h, p, cfg, cfg.X_max)
    if not out.escaped:
        return -math.inf
    return out.kappa1


def find_hc_shooting(p: Params, cfg: IntegratorConfig, bracket=None,
                     rel_width: float = 1e-9) -> CriticalEnergy:
    """Critical energy from escape versus capture of the shot along the
    unstable manifold of the point at X = -inf; no curves involved."""
    pred = predictors(p).hc
    lo, hi = bracket if bracket is not None else (0.25 * pred, 4.0 * pred)
    ind = functools.partial(escapes, p=p, cfg=cfg)
    return _bisect(ind, lo, hi, rel_width, pred, check_interior=0)


def measure_vf(h: float, p: Params, cfg: IntegratorConfig,
               vc: float | None = None, x_escape: float = X_ESCAPE) -> ScanRow:
    """One shot along the unstable manifold at energy h, through the defect.

    ``v_f_pred`` uses the measured ``vc`` when given, else the predictor.
    """
    if not h > 0:
        raise DomainError("h must be > 0")
    pr = predictors(p)
    out = _tail_shot(h, p, cfg, x_escape)
    v_i = 4.0 * math.sqrt(h)
    v_pred = pr.vf(v_i, vc)
    if out.escaped:
        return ScanRow(p.eps, h, v_i, out.kind.value, out.kappa1, out.kappa2,
                       out.v_f, v_pred)
    return ScanRow(p.eps, h, v_i, out.kind.value, math.nan, math.nan, math.nan, v_pred)


class _VfShot:
    def __init__(self, p, cfg, vc):
        self.p, self.cfg, self.vc = p, cfg, vc

    def __call__(self, h):
        return measure_vf(h, self.p, self.cfg, self.vc)


def vf_scan(p: Params, cfg: IntegratorConfig, vc: float, n_points: int = 8,
            spread: float = 0.2, lo: float = 1e-2):
    """ScanRows at ``v_i = vc (1 + g)`` with g geometric in ``[lo, spread]``."""
    g = np.geomspace(lo, spread, n_points)
    hs = [(vc * (1.0 + gi) / 4.0) ** 2 for gi in g]
    return pmap(_VfShot(p, cfg, vc), hs)


def fit_vf_law(p: Params, cfg: IntegratorConfig, n_points: int = 8,
               spread: float = 0.2, vc: float | None = None, rows=None):
    """Fits of the output-velocity law above the measured critical velocity.

    Fit A regresses ``log v_f`` on ``log(v_i - vc)`` (slope 1/2 expected).
    Fit B regresses ``v_f^2`` on ``x = v_i - vc`` with an ``x^2`` nuisance
    column (the law's remainder), and reports ``c_eps = slope / (2 vc)``.
    Returns ``(fit_a, fit_b, rows)``.
    """
    if p.coupling_scale == 0.0:
        raise DegenerateError("no coupling: v_f = v_i and the law does not apply")
    if vc is None:
        vc = 4.0 * math.sqrt(find_hc_shooting(p, cfg).h)
    if rows is None:
        rows = vf_scan(p, cfg, vc, n_points, spread)
    bad = [r for r in rows if r.outcome != Outcome.ESCAPED.value and r.v_i >= vc * 1.01]
    if bad:
        raise InconsistencyError(f"{len(bad)} shots above 1.01 vc did not escape: {bad[0]}")
    x = np.array([r.v_i - vc for r in rows])
    vf = np.array([r.v_f for r in rows])
    fit_a = linear_fit(np.log(x), np.log(vf))
    fit_b = linear_fit(x, vf ** 2, extra_columns=(x ** 2,))
    fit_b.extra["c_eps"] = fit_b.slope / (2.0 * vc)
    fit_b.extra["vc"] = vc
    return fit_a, fit_b, rows


# --- splitting and its exponential rate -------------------------------------------

@dataclass(frozen=True)
class SplittingRow:
    eps: float
    d_meas: float
    d_pred: float
    melnikov_abs: float
    b_u: float
    B_u: float
    b_s: float
    B_s: float

    @property
    def ratio(self) -> float:
        return self.d_meas / self.d_pred


def measure_splitting(eps: float, cfg: IntegratorConfig, coupling_scale: float = 1.0) -> SplittingRow:
    p = make_params(eps, coupling_scale)
    pu, ps = splitting_points(p, cfg)
    return SplittingRow(eps, abs(pu.z - ps.z), predictors(p).d0,
                        abs(melnikov_residue(p).c1), pu.b, pu.B, ps.b, ps.B)


def fit_exponential_rate(eps_grid, cfg: IntegratorConfig, rows=None) -> FitReport:
    """Regress ``log d - log(2 pi eps^(3/4)/sqrt(Omega))`` on ``sqrt(2/eps)``.

    The slope estimates ``-Omega``. ``extra`` carries the leave-one-out
    slopes and the largest relative slope change among them.
    """
    eps_grid = [float(e) for e in eps_grid]
    if len(eps_grid) < 4:
        raise DomainError("need at least 4 eps values")
    if rows is None:
        rows = pmap(functools.partial(measure_splitting, cfg=cfg), eps_grid)
    x, y = [], []
    for r in rows:
        p = make_params(r.eps)
        x.append(math.sqrt(2.0 / r.eps))
        y.append(math.log(r.d_meas) - math.log(2.0 * math.pi * p.delta / math.sqrt(p.Omega)))
    x, y = np.array(x), np.array(y)
    fit = linear_fit(x, y)
    loo = []
    if len(x) >= 5:
        for i in range(len(x)):
            keep = np.arange(len(x)) != i
            loo.append(linear_fit(x[keep], y[keep]).slope)
    fit.extra["loo_slopes"] = loo
    fit.extra["loo_max_rel_change"] = max((abs(s / fit.slope - 1.0) for s in loo), default=0.0)
    fit.extra["rows"] = rows
    return fit


# --- robustness of the critical energy in X_max ---------------------------------

def _local_relation(P, h, p, cfg, tau0, dtau, center, n_local=5):
    # samples of the stable curve around phase tau0 only; signed distance from
    # the parabola through the three samples nearest P
    taus = tau0 + dtau * (np.arange(n_local) - n_local // 2)
    pts = np.array([complex(*_trace(cfg.X_max, "backward", float(t), h, h, p, cfg)[:2])
                    for t in taus])
    k = int(np.argmin(np.abs(pts - P)))
    k = min(max(k, 1), n_local - 2)
    zm, z0, zp = pts[k - 1], pts[k], pts[k + 1]
    d1, d2 = (zp - zm) / 2.0, zp - 2.0 * z0 + zm
    s = np.linspace(-1.0, 1.0, 20001)
    q = z0 + s * d1 + 0.5 * s * s * d2
    j = int(np.argmin(np.abs(q - P)))
    foot = q[j]
    dist = abs(foot - P)
    inside = ((P - foot) * np.conj(center - foot)).real > 0
    return dist if inside else -dist


def hc_xmax_shift(res: CriticalEnergy, p: Params, cfg: IntegratorConfig,
                  X_max_values=(12.0, 14.0), n_tau: int = 32,
                  curve_x_max: float | None = None) -> dict:
    """Shift of the critical energy when the tail cut-off changes.

    At ``h = res.h`` the indicator is re-evaluated for each X_max, using
    only the few curve samples near the unstable point (the phase offset
    between cut-offs is measured from one extra sample). Each indicator
    value is converted to a shift of the root with the indicator slope
    across the final bracket.
    """
    h = res.h
    base_cfg = _curve_cfg(cfg, curve_x_max)
    C = stable_curve(0.0, h, p, base_cfg, n_tau)
    T = TrigCurve(C.z)
    center = C.centroid()
    P0 = unstable_point(h, p, cfg)
    _, _, _, tau_star = _nearest_trig(T, P0.z)
    slope = (res.indicators[1] - res.indicators[0]) / res.width
    out = {"h": h, "slope": slope, "width": res.width, "shifts": {}}
    for xm in X_max_values:
        c2 = dataclasses.replace(cfg, X_max=float(xm))
        P = unstable_point(h, p, c2).z
        q = complex(*_trace(xm, "backward", float(tau_star), h, h, p, c2)[:2])
        _, _, _, t_q = _nearest_trig(T, q)
        shift = (t_q - tau_star + math.pi) % (2.0 * math.pi) - math.pi
        d = _local_relation(P, h, p, c2, tau_star - shift, 2.0 * math.pi / n_tau, center)
        out["shifts"][float(xm)] = -d / slope
    return out


# --- CSV --------------------------------------------------------------------

VOUT_FIELDS = ["eps", "h", "v_i", "outcome", "kappa1", "kappa2", "v_f", "v_f_pred"]
CRITICAL_FIELDS = ["eps", "h_c_meas", "h_c_pred", "ratio", "h_s_meas", "h_s_pred"]
SPLITTING_FIELDS = ["eps", "d_meas", "d_pred", "ratio", "melnikov_abs"]


def vout_record(r: ScanRow) -> list:
    return [r.eps, r.h, r.v_i, r.outcome, r.kappa1, r.kappa2, r.v_f, r.v_f_pred]


def splitting_record(r: SplittingRow) -> list:
    return [r.eps, r.d_meas, r.d_pred, r.ratio, r.melnikov_abs]


def critical_record(eps, hc: CriticalEnergy | None, hs: CriticalEnergy | None,
                    pr: PredictorSet) -> list:
    hcm = hc.h if hc is not None else math.nan
    hsm = hs.h if hs is not None else math.nan
    return [eps, hcm, pr.hc, hcm / pr.hc, hsm, pr.hs]


def write_rows(path, fields, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for rec in records:
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in rec])
