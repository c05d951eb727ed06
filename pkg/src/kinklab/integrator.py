"""Adaptive DOP853 integration of the reduced system with section landing.

Crossings of a section ``X = const`` are located by stepping past them and
then carrying the last pre-crossing state onto the section with X as the
independent variable (Henon's trick), so landed states sit exactly on the
section instead of on an interpolant.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DomainError, IntegrationError, IntegrationTimeout, TurnedBackError
from .model import Params, PhaseState, energy_split, hamiltonian

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and cut-offs for one integration.

    ``max_step`` defaults to ``0.25/omega`` (resolved per Params);
    ``X_max`` is the tail cut-off where manifolds are initialized and escape
    is declared.
    """

    rtol: float = 1e-12
    atol: float = 1e-14
    max_step: float | None = None
    max_time: float = 1e8
    X_max: float = 12.0

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise DomainError("rtol and atol must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise DomainError("max_step must be positive")
        if not self.X_max > 0:
            raise DomainError("X_max must be positive")

    def step_cap(self, p: Params) -> float:
        cap = 0.25 / p.omega if self.max_step is None else self.max_step
        if cap * p.omega > 1.0:
            raise DomainError(
                f"max_step={cap!r} does not resolve the oscillator (omega={p.omega:.4g})")
        return cap

    def check_tail(self, p: Params) -> None:
        """Warn when X_max is too short for the splitting to dominate the
        initialization error (needs X_max >~ sqrt(2) omega + margin)."""
        if self.X_max < math.sqrt(2.0) * p.omega / 2.0 + 4.0:
            log.warning("X_max=%.3g may be too small for eps=%.3g", self.X_max, p.eps)


class Outcome(str, enum.Enum):
    ESCAPED = "Escaped"
    TURNED_BACK = "TurnedBack"
    TIMEOUT = "Timeout"


@dataclass
class Trajectory:
    state: PhaseState
    t: float
    n_accepted: int
    n_rejected: int
    energy_drift: float
    samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 5)))

    def write_csv(self, path, p: Params) -> None:
        """Dump recorded samples as ``t,X,Z,b,B,H``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "X", "Z", "b", "B", "H"])
            for row in self.samples:
                s = PhaseState.from_array(row[1:])
                w.writerow([repr(float(v)) for v in row] + [repr(hamiltonian(s, p))])


@dataclass
class ShotOutcome:
    """Result of one forward shot through the defect.

    For escaped shots ``kappa2`` is the oscillator energy at the escape
    point, ``kappa1 = H - kappa2 - R`` the pendulum energy and
    ``v_f = 4 sqrt(kappa1)``.
    """

    kind: Outcome
    state: PhaseState
    t: float
    crossings: list[PhaseState]
    energy: float
    energy_drift: float
    kappa1: float = math.nan
    kappa2: float = math.nan
    coupling_energy: float = math.nan
    v_f: float = math.nan

    @property
    def escaped(self) -> bool:
        return self.kind is Outcome.ESCAPED


def _run(s: PhaseState, p: Params, cfg: IntegratorConfig, *, direction=1.0,
         x_section=0.0, stop_at_section=False, stop_on_turn=False, t_end=0.0,
         x_max=None, record_stride=0, record_cap=0):
    y0 = s.to_array()
    out = K.run(y0, float(direction), p.coupling, p.omega, cfg.rtol, cfg.atol,
                cfg.step_cap(p), float(cfg.max_time),
                float(cfg.X_max if x_max is None else x_max), float(x_section),
                bool(stop_at_section), bool(stop_on_turn), float(t_end),
                int(record_stride), int(record_cap))
    status, y, t, cross, n_cross, n_acc, n_rej, drift, _, rec, n_rec = out
    if status == K.FAILED or not np.all(np.isfinite(y)):
        raise IntegrationError(
            f"step size underflow at t={t:.6g}, state={y.tolist()} "
            f"after {n_acc} accepted / {n_rej} rejected steps")
    return status, y, t, cross[:n_cross], n_acc, n_rej, drift, rec[:n_rec]


def integrate(s: PhaseState, p: Params, cfg: IntegratorConfig, t_end: float,
              direction: float = 1.0, record_stride: int = 0,
              record_cap: int = 100_000) -> Trajectory:
    """Integrate for a time span ``t_end`` (forward or backward).

    ``cfg.X_max`` plays no role here; the orbit is followed for the full span.
    """
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    status, y, t, _, n_acc, n_rej, drift, rec = _run(
        s, p, cfg, direction=direction, t_end=t_end, x_section=math.inf,
        x_max=math.inf, record_stride=record_stride, record_cap=record_cap if record_stride else 0)
    if status == K.TIMEOUT:
        raise IntegrationTimeout(f"max_time reached at t={t:.6g}")
    return Trajectory(PhaseState.from_array(y), t, n_acc, n_rej, drift, rec)


def step_adaptive(s: PhaseState, p: Params, cfg: IntegratorConfig,
                  h: float | None = None):
    """Take one accepted DOP853 step.

    Starts from trial size ``h`` (default: the step cap) and shrinks it until
    the local error estimate passes. Returns ``(state, h_used, error_norm)``
    where ``error_norm <= 1`` in units of the tolerances.
    """
    h = cfg.step_cap(p) if h is None else float(h)
    y = s.to_array()
    f0 = np.empty(4)
    K.field(y, p.coupling, p.omega, f0)
    Kst = np.empty((K.N_STAGES + 1, 4))
    y_new, f_new, tmp_y, tmp_f, stage = (np.empty(4) for _ in range(5))
    while True:
        if abs(h) < 1e-14:
            raise IntegrationError("step size underflow in step_adaptive")
        err = K.dop853_step(K.TIME_MODE, y, 0.0, f0, h, p.coupling, p.omega,
                            cfg.rtol, cfg.atol, Kst, y_new, f_new, tmp_y, tmp_f, stage)
        if err <= 1.0:
            return PhaseState.from_array(y_new), h, err
        h *= max(K.MIN_FACTOR, K.SAFETY * err ** (-1.0 / K.ORDER))


def integrate_to_section(s: PhaseState, p: Params, cfg: IntegratorConfig,
                         X_target: float = 0.0, direction: str = "forward",
                         return_time: bool = False):
    """Integrate until the orbit crosses ``X = X_target`` and land on it exactly.

    Raises TurnedBackError if Z changes sign first and IntegrationTimeout if
    nothing happens before ``cfg.max_time``.
    """
    sign = {"forward": 1.0, "backward": -1.0}[direction]
    if s.X == X_target:
        return (s, 0.0) if return_time else s
    status, y, t, cross, *_ = _run(
        s, p, cfg, direction=sign, x_section=X_target, stop_at_section=True,
        stop_on_turn=True, x_max=math.inf)
    if status == K.TURNED_BACK:
        raise TurnedBackError(f"Z changed sign at X={y[0]:.6g} before reaching "
                              f"X={X_target}")
    if status == K.TIMEOUT:
        raise IntegrationTimeout(f"no crossing of X={X_target} within "
                                 f"t={cfg.max_time:g}")
    landed = PhaseState.from_array(cross[0, 1:])
    return (landed, float(cross[0, 0])) if return_time else landed


def shoot(s: PhaseState, p: Params, cfg: IntegratorConfig,
          x_escape: float | None = None) -> ShotOutcome:
    """Fire a kink forward from the left tail and classify the outcome.

    Integrates until ``X >= x_escape`` (default ``cfg.X_max``; Escaped),
    ``Z <= 0`` (TurnedBack), or ``cfg.max_time`` (Timeout), recording every
    crossing of ``X = 0``.
    """
    if not s.Z > 0:
        raise DomainError("shoot needs Z > 0 (kink moving right)")
    x_escape = cfg.X_max if x_escape is None else x_escape
    if s.X >= x_escape:
        raise DomainError("initial X must lie left of the escape point")
    H0 = hamiltonian(s, p)
    status, y, t, cross, _, _, drift, _ = _run(
        s, p, cfg, direction=1.0, x_section=0.0, stop_on_turn=True, x_max=x_escape)
    final = PhaseState.from_array(y)
    crossings = [PhaseState.from_array(row[1:]) for row in cross]
    if status == K.ESCAPED:
        sp = energy_split(final, p)
        kappa2 = sp.h_osc
        kappa1 = H0 - kappa2 - sp.r
        return ShotOutcome(Outcome.ESCAPED, final, t, crossings, H0, drift,
                           kappa1=kappa1, kappa2=kappa2, coupling_energy=sp.r,
                           v_f=4.0 * math.sqrt(max(kappa1, 0.0)))
    kind = Outcome.TURNED_BACK if status == K.TURNED_BACK else Outcome.TIMEOUT
    return ShotOutcome(kind, final, t, crossings, H0, drift)
