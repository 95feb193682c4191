"""Mode functions and Bogolyubov coefficients for conformal-time detectors.

Conventions: the longitudinal and transverse width parameters ``d`` and ``s``
enter the Gaussian exponents as ``(k - k0)**2 / (2 d)`` and ``k**2 / (2 s)``,
so they carry units of rad^2/s^2. Frequency widths quoted in s^-1 must be
squared first; use :meth:`DetectorParams.from_widths` to convert those.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .constants import HBAR, K_B, SINGULAR_GUARD


class Label(str, enum.Enum):
    FUTURE = "future"
    PAST = "past"


class PairingError(ValueError):
    """Future/Past detector pair violates the anti-symmetry conditions."""


@dataclass(frozen=True)
class DetectorParams:
    """Local-oscillator mode parameters of one energy-scaled homodyne detector.

    Attributes:
        a: scaling rate (rad/s).
        omega_do: peak conformal frequency (rad/s).
        d: longitudinal width parameter (rad^2/s^2, exponent convention).
        s: transverse width parameter (rad^2/s^2, exponent convention).
        epsilon: longitudinal phase offset (s).
        tau: local-oscillator centre in conformal time (s).
        label: Future (Alice) or Past (Bob).
    """

    a: float
    omega_do: float
    d: float
    s: float
    epsilon: float = 0.0
    tau: float = 0.0
    label: Label = Label.FUTURE

    def __post_init__(self):
        for name in ("a", "omega_do", "d", "s"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        object.__setattr__(self, "label", Label(self.label))

    @classmethod
    def from_widths(cls, a, omega_do, d_width, s_width, **kwargs) -> "DetectorParams":
        """Build parameters from frequency widths (s^-1), squaring them into the exponent."""
        return cls(a=a, omega_do=omega_do, d=d_width**2, s=s_width**2, **kwargs)

    def with_omega(self, omega_do: float) -> "DetectorParams":
        return replace(self, omega_do=omega_do)

    def partner(self) -> "DetectorParams":
        """The matched detector on the other light cone (phases mirrored)."""
        other = Label.PAST if self.label is Label.FUTURE else Label.FUTURE
        return replace(self, epsilon=-self.epsilon, tau=-self.tau, label=other)


def make_pair(a, omega_do, d, s, epsilon=0.0, tau=0.0):
    """Return a (Future, Past) pair satisfying the anti-symmetry conditions."""
    future = DetectorParams(a, omega_do, d, s, epsilon=epsilon, tau=tau, label=Label.FUTURE)
    return future, future.partner()


def validate_pair(pair_f: DetectorParams, pair_p: DetectorParams, rtol: float = 1e-12) -> None:
    """Raise :class:`PairingError` unless the two detectors can be used jointly."""
    if pair_f.label is not Label.FUTURE or pair_p.label is not Label.PAST:
        raise PairingError("expected (Future, Past) detectors in that order")
    for name in ("a", "omega_do", "d", "s"):
        x, y = getattr(pair_f, name), getattr(pair_p, name)
        if not math.isclose(x, y, rel_tol=rtol):
            raise PairingError(f"envelopes differ in {name}: {x} vs {y}")
    if not math.isclose(pair_f.epsilon, -pair_p.epsilon, rel_tol=rtol, abs_tol=1e-300):
        raise PairingError("epsilon_F must equal -epsilon_P")
    if not math.isclose(pair_f.tau, -pair_p.tau, rel_tol=rtol, abs_tol=1e-300):
        raise PairingError("tau_F must equal -tau_P")


class BogolyubovPair(NamedTuple):
    a_coef: complex
    b_coef: complex


def bogolyubov(omega_d: float, k_s1: float, omega_s: float, a: float) -> BogolyubovPair:
    """Bogolyubov coefficients relating a Future mode to a Minkowski plane wave.

    ``A = N exp(i phi(k_s1) omega_d / a) / sqrt(2 pi omega_s)`` and
    ``B = exp(-pi omega_d / a) A``, with N taken real and positive.
    """
    if omega_d <= 0 or a <= 0 or omega_s <= 0:
        raise ValueError("omega_d, omega_s and a must be positive")
    if omega_s <= abs(k_s1):
        raise ValueError("omega_s must exceed |k_s1| (rapidity diverges)")
    ratio = omega_d / a
    phi = 0.5 * math.log((omega_s + k_s1) / (omega_s - k_s1))
    norm = 1.0 / math.sqrt(-math.expm1(-2.0 * math.pi * ratio))
    a_coef = norm / math.sqrt(2.0 * math.pi * omega_s) * complex(math.cos(phi * ratio), math.sin(phi * ratio))
    return BogolyubovPair(a_coef, math.exp(-math.pi * ratio) * a_coef)


def longitudinal_mode(k_d1, params: DetectorParams):
    """Gaussian longitudinal amplitude peaked at ``omega_do``, unit L2 norm on the real line."""
    k = np.asarray(k_d1, dtype=float)
    env = (params.d * math.pi) ** -0.25 * np.exp(-((k - params.omega_do) ** 2) / (2.0 * params.d))
    return env * np.exp(1j * params.epsilon * k)


def transverse_mode(k_perp_sq, params: DetectorParams):
    """Transverse amplitude for one transverse axis; ``k_perp_sq`` is that component squared.

    The full two-dimensional profile is the product over both axes, see
    :func:`transverse_profile`.
    """
    return (params.s * math.pi) ** -0.25 * np.exp(-np.asarray(k_perp_sq, dtype=float) / (2.0 * params.s))


def transverse_profile(k_perp_sq, params: DetectorParams):
    """Two-dimensional transverse amplitude g(k2) h(k3) as a function of |k_perp|^2.

    Normalized so that the integral of its square over the transverse plane is 1.
    """
    return (params.s * math.pi) ** -0.5 * np.exp(-np.asarray(k_perp_sq, dtype=float) / (2.0 * params.s))


class EffectiveAmplitude(NamedTuple):
    value: np.ndarray
    clamped: np.ndarray


def effective_longitudinal(omega_bar, k_perp_sq, params: DetectorParams, K: float = 1.0) -> EffectiveAmplitude:
    """Longitudinal amplitude re-expressed in terms of ``omega_bar = sqrt(k_d1^2 + k_perp^2)``.

    The prefactor ``omega_bar / sqrt(omega_bar^2 - k_perp^2)`` diverges at the
    light-cone boundary; the denominator is clamped at
    ``SINGULAR_GUARD * omega_bar^2`` and such points are flagged in ``clamped``.
    Integrators should work in ``u = k_d1`` instead of ``omega_bar``.
    """
    ob = np.asarray(omega_bar, dtype=float)
    kk = np.asarray(k_perp_sq, dtype=float)
    if np.any(ob**2 < kk * (1 - 1e-15)):
        raise ValueError("omega_bar must be at least |k_perp|")
    u_sq = np.maximum(ob**2 - kk, 0.0)
    floor = SINGULAR_GUARD * ob**2
    clamped = u_sq < floor
    u = np.sqrt(u_sq)
    pref = ob / np.sqrt(np.where(clamped, floor, u_sq))
    value = math.sqrt(K) * pref * (longitudinal_mode(u, params) + longitudinal_mode(-u, params))
    return EffectiveAmplitude(value, clamped)


def unruh_temperature(a: float) -> float:
    """Temperature (K) of the thermal bath seen by detectors with scaling rate ``a``."""
    if a < 0:
        raise ValueError("a must be non-negative")
    return a * HBAR / (2.0 * math.pi * K_B)
