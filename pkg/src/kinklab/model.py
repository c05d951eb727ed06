"""Reduced kink-defect Hamiltonian system.

Phase space is ``(X, Z, b, B)``: kink position and scaled velocity, and the
defect-mode amplitude with its conjugate momentum. The Hamiltonian is

    H = Z**2/16 + U(X) + (omega/2) (b**2 + B**2) + c F(X) b

with ``U = -2 sech^2 X``, ``F = -2 tanh X sech X`` and coupling amplitude
``c = delta * coupling_scale / sqrt(2 Omega)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

EPS_MAX = 0.5


@dataclass(frozen=True)
class Params:
    """Parameter pack derived from the defect strength ``eps``.

    Use :func:`make_params` to build one; the derived fields are stored so
    that synthetic packs (e.g. with a modified ``omega``) can be made with
    :func:`dataclasses.replace`.
    """

    eps: float
    delta: float
    Omega: float
    omega: float
    coupling_scale: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.eps <= EPS_MAX):
            raise DomainError(f"eps must lie in (0, {EPS_MAX}], got {self.eps!r}")
        if not (0.0 <= self.coupling_scale <= 1.0):
            raise DomainError(
                f"coupling_scale must lie in [0, 1], got {self.coupling_scale!r}")

    @property
    def coupling(self) -> float:
        """Effective coupling amplitude ``delta * coupling_scale / sqrt(2 Omega)``."""
        return self.delta * self.coupling_scale / math.sqrt(2.0 * self.Omega)


def make_params(eps: float, coupling_scale: float = 1.0) -> Params:
    eps = float(eps)
    if not (0.0 < eps <= EPS_MAX) or not math.isfinite(eps):
        raise DomainError(f"eps must lie in (0, {EPS_MAX}], got {eps!r}")
    Omega = math.sqrt(1.0 - eps * eps / 4.0)
    return Params(eps=eps, delta=eps ** 0.75, Omega=Omega,
                  omega=Omega / math.sqrt(eps), coupling_scale=coupling_scale)


# --- potentials -----------------------------------------------------------

def _sech_tanh(X):
    X = np.asarray(X, dtype=float)
    ax = np.abs(X)
    e = np.exp(-2.0 * ax)
    sech = 2.0 * np.exp(-ax) / (1.0 + e)
    tanh = np.copysign((1.0 - e) / (1.0 + e), X)
    return sech, tanh


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def potential_U(X):
    """``U(X) = -2 sech^2 X``. Accepts scalars or arrays."""
    sech, _ = _sech_tanh(X)
    return _out(-2.0 * sech * sech)


def potential_dU(X):
    sech, tanh = _sech_tanh(X)
    return _out(4.0 * sech * sech * tanh)


def potential_d2U(X):
    sech, tanh = _sech_tanh(X)
    s2 = sech * sech
    return _out(4.0 * s2 * (s2 - 2.0 * tanh * tanh))


def coupling_F(X):
    """``F(X) = -2 tanh X sech X``. Accepts scalars or arrays."""
    sech, tanh = _sech_tanh(X)
    return _out(-2.0 * tanh * sech)


def coupling_dF(X):
    sech, tanh = _sech_tanh(X)
    return _out(-2.0 * sech * (sech * sech - tanh * tanh))


def coupling_d2F(X):
    sech, tanh = _sech_tanh(X)
    s2 = sech * sech
    return _out(2.0 * sech * tanh * (5.0 * s2 - tanh * tanh))


# --- state ----------------------------------------------------------------

@dataclass(frozen=True)
class EnergySplit:
    h_p: float
    h_osc: float
    r: float

    @property
    def total(self) -> float:
        return self.h_p + self.h_osc + self.r


@dataclass(frozen=True)
class ComplexOsc:
    """Oscillator in complex form, ``gamma = B + i b`` and ``theta = B - i b``."""

    gamma: complex
    theta: complex


@dataclass(frozen=True)
class PhaseState:
    X: float
    Z: float
    b: float
    B: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.X, self.Z, self.b, self.B)):
            raise DomainError(f"non-finite phase state {self!r}")

    def to_array(self) -> np.ndarray:
        return np.array([self.X, self.Z, self.b, self.B], dtype=float)

    @classmethod
    def from_array(cls, y) -> "PhaseState":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]))

    def energy(self, p: Params) -> float:
        return hamiltonian(self, p)

    def split(self, p: Params) -> EnergySplit:
        return energy_split(self, p)


def energy_split(s: PhaseState, p: Params) -> EnergySplit:
    return EnergySplit(
        h_p=s.Z * s.Z / 16.0 + potential_U(s.X),
        h_osc=0.5 * p.omega * (s.b * s.b + s.B * s.B),
        r=p.coupling * coupling_F(s.X) * s.b,
    )


def hamiltonian(s: PhaseState, p: Params) -> float:
    return energy_split(s, p).total


def vector_field(s: PhaseState, p: Params) -> np.ndarray:
    c = p.coupling
    return np.array([
        s.Z / 8.0,
        -potential_dU(s.X) - c * coupling_dF(s.X) * s.b,
        p.omega * s.B,
        -p.omega * s.b - c * coupling_F(s.X),
    ])


def reflect(s: PhaseState) -> PhaseState:
    """Reversibility involution ``(X, Z, b, B) -> (-X, Z, -b, B)``.

    Paired with time reversal it maps solutions to solutions, and unstable
    manifolds at X = -inf onto stable manifolds at X = +inf.
    """
    return PhaseState(-s.X, s.Z, -s.b, s.B)


def to_complex(b: float, B: float) -> ComplexOsc:
    return ComplexOsc(gamma=complex(B, b), theta=complex(B, -b))


def from_complex(z: ComplexOsc) -> tuple[float, float]:
    """Inverse of :func:`to_complex`; uses both components, so it also
    accepts non-conjugate pairs and returns the real parts."""
    B = 0.5 * (z.gamma + z.theta)
    b = (z.gamma - z.theta) / 2j
    return float(b.real), float(B.real)


def state_on_level(X: float, b: float, B: float, h: float, p: Params,
                   sign: float = 1.0) -> PhaseState:
    """Solve ``H(X, Z, b, B) = h`` for Z with the given sign.

    Raises DomainError when the level set does not reach (X, b, B).
    """
    rest = h - potential_U(X) - 0.5 * p.omega * (b * b + B * B) \
        - p.coupling * coupling_F(X) * b
    if rest < 0.0:
        raise DomainError(f"energy level h={h!r} not reachable at X={X!r}")
    return PhaseState(X, math.copysign(4.0 * math.sqrt(rest), sign), b, B)
