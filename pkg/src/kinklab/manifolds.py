"""Traces of the invariant manifolds on the section X = 0.

``unstable_point``/``stable_point`` follow the one-dimensional manifolds of
the points at X = -inf / +inf (pendulum energy h, oscillator at rest);
``stable_curve``/``unstable_curve`` follow the two-dimensional manifolds of
the oscillator circles. Each trace is obtained by initializing on the
first-order parameterization at ``|X| = X_max`` and integrating to X = 0.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ._parallel import pmap
from .closedforms import first_order_Zcorr_at, manifold_oscillator
from .errors import DomainError, IntegrationError, KinklabError
from .integrator import IntegratorConfig, integrate_to_section
from .model import Params, PhaseState, state_on_level

UNSTABLE = "unstable"
STABLE = "stable"


def disk_radius2(h: float, p: Params) -> float:
    """Squared radius of the section disk at energy h."""
    return (4.0 + 2.0 * h) * math.sqrt(p.eps) / p.Omega


@dataclass(frozen=True)
class SectionPoint:
    b: float
    B: float
    h: float
    Z: float
    side: str

    @property
    def z(self) -> complex:
        return complex(self.b, self.B)

    def mirror(self) -> "SectionPoint":
        """Image under the reversibility symmetry, ``(b, B) -> (-b, B)``."""
        other = STABLE if self.side == UNSTABLE else UNSTABLE
        return SectionPoint(-self.b, self.B, self.h, self.Z, other)

    def in_disk(self, p: Params) -> bool:
        return self.b ** 2 + self.B ** 2 <= disk_radius2(self.h, p)


@dataclass(frozen=True)
class SectionCurve:
    """Closed curve sampled at uniform phases ``tau_k = 2 pi k / n``."""

    tau: np.ndarray
    b: np.ndarray
    B: np.ndarray
    side: str
    kappa1: float
    kappa2: float

    @property
    def h(self) -> float:
        return self.kappa1 + self.kappa2

    @property
    def z(self) -> np.ndarray:
        return self.b + 1j * self.B

    def __len__(self):
        return len(self.tau)

    def mirror(self) -> "SectionCurve":
        other = STABLE if self.side == UNSTABLE else UNSTABLE
        return SectionCurve(self.tau, -self.b, self.B, other, self.kappa1, self.kappa2)

    def centroid(self) -> complex:
        return complex(np.mean(self.z))

    def spacing(self) -> float:
        z = self.z
        return float(np.max(np.abs(np.roll(z, -1) - z)))

    def trig(self) -> "TrigCurve":
        return TrigCurve(self.z)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "b", "B"])
            for row in zip(self.tau, self.b, self.B):
                w.writerow([repr(float(v)) for v in row])


class TrigCurve:
    """Trigonometric interpolant of a closed curve sampled at uniform phases."""

    def __init__(self, z):
        z = np.asarray(z, dtype=complex)
        n = len(z)
        c = np.fft.fft(z) / n
        m = np.fft.fftfreq(n, 1.0 / n)
        if n % 2 == 0:
            # split the Nyquist mode symmetrically
            k = n // 2
            c = np.append(c, c[k] / 2.0)
            c[k] /= 2.0
            m = np.append(m, float(k))
            m[k] = -float(k)
        self.coef = c
        self.freq = m
        self.n = n

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.exp(1j * np.multiply.outer(tau, self.freq)) @ self.coef

    def deriv(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.exp(1j * np.multiply.outer(tau, self.freq)) @ (1j * self.freq * self.coef)


# --- manifold traces --------------------------------------------------------

def _tail_state(X0: float, tau: float, kappa2: float, h: float, p: Params,
                zcorr: bool = True) -> PhaseState:
    b, B = manifold_oscillator(X0, tau, kappa2, p)
    s = state_on_level(X0, b, B, h, p, sign=1.0)
    if not zcorr or kappa2 == 0.0:
        return s
    # Add the first-order oscillating part of Z and give the energy it carries
    # back to the oscillator circle, so H = h still holds exactly. The cross
    # terms between circle and response cancel in H, so the shift is exact.
    Z = s.Z + first_order_Zcorr_at(X0, tau, kappa2, p)
    k2 = kappa2 - (Z * Z - s.Z * s.Z) / 16.0
    if not k2 > 0.0:
        raise DomainError("Z-correction exceeds the oscillator energy")
    b, B = manifold_oscillator(X0, tau, k2, p)
    return PhaseState(X0, Z, b, B)


def _trace(X0: float, direction: str, tau: float, kappa2: float, h: float,
           p: Params, cfg: IntegratorConfig) -> tuple[float, float, float]:
    s0 = _tail_state(X0, tau, kappa2, h, p)
    try:
        s = integrate_to_section(s0, p, cfg, 0.0, direction)
    except IntegrationError as exc:
        raise IntegrationError(f"trace from X={X0} (tau={tau!r}) failed: {exc}") from exc
    return s.b, s.B, s.Z


def unstable_point(h: float, p: Params, cfg: IntegratorConfig) -> SectionPoint:
    """First crossing of X = 0 by the unstable manifold of the point at X = -inf
    with pendulum energy h."""
    if not h >= 0:
        raise DomainError(f"h must be >= 0, got {h!r}")
    b, B, Z = _trace(-cfg.X_max, "forward", 0.0, 0.0, h, p, cfg)
    return SectionPoint(b, B, h, Z, UNSTABLE)


def stable_point(h: float, p: Params, cfg: IntegratorConfig,
                 via_symmetry: bool = False) -> SectionPoint:
    """Mirror of :func:`unstable_point` for the point at X = +inf.

    With ``via_symmetry`` the result is the reflected unstable point instead
    of a backward integration.
    """
    if via_symmetry:
        return unstable_point(h, p, cfg).mirror()
    if not h >= 0:
        raise DomainError(f"h must be >= 0, got {h!r}")
    b, B, Z = _trace(cfg.X_max, "backward", 0.0, 0.0, h, p, cfg)
    return SectionPoint(b, B, h, Z, STABLE)


def _curve(kappa1, kappa2, p, cfg, n_tau, side) -> SectionCurve:
    if kappa1 < 0 or not kappa2 > 0:
        raise DomainError("need kappa1 >= 0 and kappa2 > 0")
    if n_tau < 16:
        raise DomainError("n_tau must be >= 16")
    h = kappa1 + kappa2
    tau = 2.0 * np.pi * np.arange(n_tau) / n_tau
    if side == STABLE:
        X0, direction = cfg.X_max, "backward"
    else:
        X0, direction = -cfg.X_max, "forward"
    fn = functools.partial(_trace, X0, direction, kappa2=kappa2, h=h, p=p, cfg=cfg)
    pts = np.array(pmap(_TauCall(fn), tau))
    return SectionCurve(tau, pts[:, 0], pts[:, 1], side, kappa1, kappa2)


class _TauCall:
    # picklable adaptor so pmap can ship the partial to worker processes
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, tau):
        return self.fn(tau=float(tau))


def stable_curve(kappa1: float, kappa2: float, p: Params, cfg: IntegratorConfig,
                 n_tau: int = 256) -> SectionCurve:
    """Trace on X = 0 of the stable manifold of the oscillator circle of
    energy kappa2 at X = +inf, sampled at n_tau phases."""
    return _curve(kappa1, kappa2, p, cfg, n_tau, STABLE)


def unstable_curve(kappa1: float, kappa2: float, p: Params, cfg: IntegratorConfig,
                   n_tau: int = 256, via_symmetry: bool = False) -> SectionCurve:
    if via_symmetry:
        return stable_curve(kappa1, kappa2, p, cfg, n_tau).mirror()
    return _curve(kappa1, kappa2, p, cfg, n_tau, UNSTABLE)


def splitting_points(p: Params, cfg: IntegratorConfig, h: float = 0.0):
    return unstable_point(h, p, cfg), stable_point(h, p, cfg)


def splitting_distance(p: Params, cfg: IntegratorConfig, h: float = 0.0) -> float:
    """Euclidean distance between the unstable and stable section points."""
    pu, ps = splitting_points(p, cfg, h)
    return abs(pu.z - ps.z)


# --- planar geometry --------------------------------------------------------

def _segments_cross(a0, a1, b0, b1):
    """Vectorized proper-intersection test between segment sets (complex)."""
    def cross(u, v):
        return u.real * v.imag - u.imag * v.real
    d1 = cross(a1 - a0, b0 - a0)
    d2 = cross(a1 - a0, b1 - a0)
    d3 = cross(b1 - b0, a0 - b0)
    d4 = cross(b1 - b0, a1 - b0)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def polygon_self_intersects(z) -> bool:
    z = np.asarray(z)
    n = len(z)
    a0, a1 = z, np.roll(z, -1)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    return bool(np.any(_segments_cross(a0[i], a1[i], a0[j], a1[j])))


def winding_number(z, P: complex) -> int:
    d = np.asarray(z) - P
    ang = np.angle(np.roll(d, -1) / d)
    return int(round(float(np.sum(ang)) / (2.0 * np.pi)))


def _orientation(z) -> float:
    z = np.asarray(z)
    area = 0.5 * np.sum((z.real * np.roll(z.imag, -1)) - (np.roll(z.real, -1) * z.imag))
    return 1.0 if area > 0 else -1.0


def _nearest_quadratic(z, P):
    """Closest point to P on the parabola through the three samples nearest P.

    Returns (distance, point, tangent).
    """
    n = len(z)
    k = int(np.argmin(np.abs(z - P)))
    zm, z0, zp = z[(k - 1) % n], z[k], z[(k + 1) % n]
    d1 = (zp - zm) / 2.0
    d2 = zp - 2.0 * z0 + zm

    def q(s):
        return z0 + s * d1 + 0.5 * s * s * d2

    res = minimize_scalar(lambda s: abs(q(s) - P) ** 2, bounds=(-1.0, 1.0),
                          method="bounded", options={"xatol": 1e-12})
    s = float(res.x)
    return abs(q(s) - P), q(s), d1 + s * d2


def _nearest_trig(curve: TrigCurve, P, upsample: int = 8):
    m = curve.n * upsample
    grid = 2.0 * np.pi * np.arange(m) / m
    k = int(np.argmin(np.abs(curve(grid) - P)))
    w = 2.0 * np.pi / m
    res = minimize_scalar(lambda t: abs(curve(t) - P) ** 2,
                          bounds=(grid[k] - w, grid[k] + w), method="bounded",
                          options={"xatol": 1e-13})
    t = float(res.x)
    pt = complex(curve(t))
    return abs(pt - P), pt, complex(curve.deriv(t)), t


def point_curve_relation(P, C: SectionCurve, refine: str = "quadratic",
                         check_simple: bool = True):
    """Signed distance from P to the closed curve C, positive inside.

    ``refine='quadratic'`` uses the parabola through the three nearest
    samples; ``'fourier'`` uses the trigonometric interpolant of the samples.
    The inside flag comes from the winding number of the sample polygon,
    except within one sagitta of the polygon where the local normal at the
    closest point decides.

    Returns ``(signed_distance, inside)``.
    """
    if len(C) < 16:
        raise DomainError("curve needs at least 16 samples")
    z = C.z
    if check_simple and polygon_self_intersects(z):
        raise KinklabError("degenerate curve: sample polygon self-intersects")
    Pz = P.z if isinstance(P, SectionPoint) else complex(*P) if isinstance(P, tuple) else complex(P)
    if refine == "quadratic":
        dist, foot, tangent = _nearest_quadratic(z, Pz)
    elif refine == "fourier":
        dist, foot, tangent, _ = _nearest_trig(TrigCurve(z), Pz)
    else:
        raise DomainError(f"unknown refine mode {refine!r}")
    orient = _orientation(z)
    spacing = C.spacing()
    radius = max(float(np.max(np.abs(z - np.mean(z)))), 1e-300)
    if dist > spacing ** 2 / radius:
        inside = winding_number(z, Pz) != 0
    else:
        # inward normal is +i * tangent for counter-clockwise curves
        side = ((Pz - foot) * np.conj(1j * tangent * orient)).real
        inside = side > 0
    return (dist if inside else -dist), inside


def curve_gap(Cu: SectionCurve, Cs: SectionCurve, upsample: int = 8) -> float:
    """Largest signed depth of a point of Cu inside Cs (trigonometric interpolants).

    Positive iff the two curves intersect (for non-nested curves); zero at
    tangency.
    """
    tu, ts = TrigCurve(Cu.z), TrigCurve(Cs.z)
    orient = _orientation(Cs.z)
    grid = 2.0 * np.pi * np.arange(len(Cu) * upsample) / (len(Cu) * upsample)
    zs_fine = ts(2.0 * np.pi * np.arange(len(Cs) * upsample) / (len(Cs) * upsample))

    def depth(t):
        P = complex(tu(t))
        dist, foot, tangent, _ = _nearest_trig(ts, P)
        side = ((P - foot) * np.conj(1j * tangent * orient)).real
        return dist if side > 0 else -dist

    # coarse: signed distance to the fine polygon via winding on each point
    zu = tu(grid)
    dmin = np.min(np.abs(zu[:, None] - zs_fine[None, :]), axis=1)
    wind = np.array([winding_number(zs_fine, P) != 0 for P in zu])
    coarse = np.where(wind, dmin, -dmin)
    k = int(np.argmax(coarse))
    w = grid[1] - grid[0]
    res = minimize_scalar(lambda t: -depth(t), bounds=(grid[k] - w, grid[k] + w),
                          method="bounded", options={"xatol": 1e-12})
    return float(-res.fun)


def curve_intersections(Cu: SectionCurve, Cs: SectionCurve, upsample: int = 8):
    """Intersection points of two closed curves (segment-pair test on the
    trigonometric resamplings, refined by a local linear solve)."""
    tu, ts = TrigCurve(Cu.z), TrigCurve(Cs.z)
    mu, ms = len(Cu) * upsample, len(Cs) * upsample
    gu = 2.0 * np.pi * np.arange(mu) / mu
    gs = 2.0 * np.pi * np.arange(ms) / ms
    zu, zs = tu(gu), ts(gs)
    a0, a1 = zu[:, None], np.roll(zu, -1)[:, None]
    b0, b1 = zs[None, :], np.roll(zs, -1)[None, :]
    hit = _segments_cross(a0, a1, b0, b1)
    points = []
    for i, j in zip(*np.nonzero(hit)):
        # Newton on tu(s) = ts(t) from the segment-crossing guess
        s, t = gu[i], gs[j]
        for _ in range(20):
            r = complex(tu(s) - ts(t))
            du, ds_ = complex(tu.deriv(s)), complex(-ts.deriv(t))
            J = np.array([[du.real, ds_.real], [du.imag, ds_.imag]])
            try:
                step = np.linalg.solve(J, [-r.real, -r.imag])
            except np.linalg.LinAlgError:
                break
            s, t = s + step[0], t + step[1]
            if abs(step[0]) + abs(step[1]) < 1e-14:
                break
        points.append(complex(tu(s)))
    return points


def write_points_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "side", "b", "B"])
        for P in points:
            w.writerow([repr(P.h), P.side, repr(P.b), repr(P.B)])
