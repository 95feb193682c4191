"""Two-mode Gaussian states, the diffraction loss channel and CV-QKD key rates.

Covariance matrices use the ordering (x_A, p_A, x_B, p_B) in shot-noise units
(vacuum variance 1). Key rates are asymptotic, reverse reconciliation with
homodyne detection, in bits per sifted symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .correlations import CorrelationRecord, correlation_record
from .field import make_pair

PHYS_TOL = 1e-9


class UnphysicalError(ValueError):
    """Covariance matrix violates the uncertainty principle."""


class DegenerateError(ValueError):
    """Conditional variances vanish or go negative."""


@dataclass(frozen=True, eq=False)
class TwoModeCovariance:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError("covariance matrix must be 4x4")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("covariance matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_blocks(cls, va_x, va_p, vb_x, vb_p, c_x, c_p) -> "TwoModeCovariance":
        return cls(np.array([
            [va_x, 0.0, c_x, 0.0],
            [0.0, va_p, 0.0, c_p],
            [c_x, 0.0, vb_x, 0.0],
            [0.0, c_p, 0.0, vb_p],
        ]))

    @property
    def alice(self) -> np.ndarray:
        return self.matrix[:2, :2]

    @property
    def bob(self) -> np.ndarray:
        return self.matrix[2:, 2:]

    @property
    def coupling(self) -> np.ndarray:
        return self.matrix[:2, 2:]

    def is_physical(self, tol: float = PHYS_TOL) -> bool:
        nu = symplectic_eigenvalues(self)
        return bool(min(nu) >= 1.0 - tol and np.all(np.linalg.eigvalsh(self.matrix) > 0))

    def to_list(self):
        return self.matrix.tolist()


@dataclass(frozen=True)
class ChannelParams:
    eta: float

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")

    @classmethod
    def from_geometry(cls, waist: float, wavelength: float, distance: float) -> "ChannelParams":
        return cls(rayleigh_eta(waist, wavelength, distance))


@dataclass(frozen=True)
class KeyRateResult:
    i_ab: float
    chi_be: float
    key_rate: float
    nu: tuple
    beta_rec: float
    per_basis: dict = field(default_factory=dict, compare=False)


def epr_correlation(G: float) -> float:
    """Correlation variance (sqrt(G) - sqrt(G-1))^2 of a lossless EPR source."""
    if G < 1:
        raise ValueError("gain must be >= 1")
    return 1.0 / (math.sqrt(G) + math.sqrt(G - 1.0)) ** 2


def effective_gain(omega_do: float, a: float) -> float:
    """EPR gain whose correlations match vacuum detection at (omega_do, a)."""
    if omega_do <= 0 or a <= 0:
        raise ValueError("omega_do and a must be positive")
    return -1.0 / math.expm1(-2.0 * math.pi * omega_do / a)


def lossy_correlation(G: float, eta: float) -> float:
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return eta * epr_correlation(G) + 1.0 - eta


def rayleigh_length(waist: float, wavelength: float) -> float:
    return math.pi * waist**2 / wavelength


def rayleigh_eta(waist: float, wavelength: float, distance: float) -> float:
    """Far-field transmissivity (z0/z)^2, clamped at 1 inside the Rayleigh range."""
    if waist <= 0 or wavelength <= 0 or distance <= 0:
        raise ValueError("waist, wavelength and distance must be positive")
    return min(1.0, (rayleigh_length(waist, wavelength) / distance) ** 2)


def epr_covariance(G: float, eta: float = 1.0, excess: float = 0.0) -> TwoModeCovariance:
    """Two-mode squeezed vacuum of gain G with Bob's arm sent through loss eta."""
    if G < 1:
        raise ValueError("gain must be >= 1")
    v = 2.0 * G - 1.0
    c = 2.0 * math.sqrt(G * (G - 1.0))
    vb = eta * v + 1.0 - eta + excess
    return TwoModeCovariance.from_blocks(v, v, vb, vb, math.sqrt(eta) * c, -math.sqrt(eta) * c)


def cm_from_correlations(record: CorrelationRecord, channel: ChannelParams | float,
                         excess: float = 0.0) -> TwoModeCovariance:
    """Effective covariance matrix of the observed correlations after Bob's loss channel.

    x quadratures carry the phase-0 cross term and p quadratures the phase-pi/2
    one, so the x_A - x_B and p_A + p_B combinations are the squeezed ones.
    """
    eta = channel.eta if isinstance(channel, ChannelParams) else float(channel)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if excess < 0:
        raise ValueError("excess noise must be non-negative")
    va = record.v_f
    vb = eta * record.v_p + 1.0 - eta + excess
    s = math.sqrt(eta)
    cm = TwoModeCovariance.from_blocks(va, va, vb, vb, s * record.c0, s * record.cpi2)
    nu = symplectic_eigenvalues(cm)
    if min(nu) < 1.0 - PHYS_TOL:
        raise UnphysicalError(f"symplectic eigenvalues {nu} below 1")
    return cm


def apply_loss(cm: TwoModeCovariance, eta: float, modes=("B",)) -> TwoModeCovariance:
    """Send the selected modes through a pure-loss beamsplitter of transmissivity eta."""
    scale = np.ones(4)
    for mode in modes:
        idx = {"A": [0, 1], "B": [2, 3]}[mode]
        scale[idx] = math.sqrt(eta)
    m = cm.matrix * np.outer(scale, scale)
    m = m + np.diag(1.0 - scale**2)
    return TwoModeCovariance(m)


OMEGA = np.array([[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0]])


def symplectic_eigenvalues(cm: TwoModeCovariance | np.ndarray) -> tuple[float, float]:
    """Symplectic spectrum (nu_-, nu_+) of a two-mode covariance matrix.

    Computed as the moduli of the eigenvalues of sqrt(V) Omega sqrt(V), which is
    antisymmetric, so degenerate (pure-state) spectra keep full precision. The
    result agrees with the invariant formula
    nu^2 = (Delta -/+ sqrt(Delta^2 - 4 det V)) / 2, Delta = det A + det B + 2 det C.
    """
    m = cm.matrix if isinstance(cm, TwoModeCovariance) else np.asarray(cm, dtype=float)
    w, vecs = np.linalg.eigh(m)
    if w.min() <= 0:
        raise UnphysicalError("covariance matrix is not positive definite")
    root = (vecs * np.sqrt(w)) @ vecs.T
    herm = 1j * (root @ OMEGA @ root)
    ev = np.linalg.eigvalsh(0.5 * (herm + herm.conj().T))
    nu = np.sort(np.abs(ev))[::2]
    return float(nu[0]), float(nu[1])


def holevo_g(nu: float) -> float:
    """Von Neumann entropy (bits) of a thermal mode with symplectic eigenvalue nu."""
    if nu < 1.0 - PHYS_TOL:
        raise UnphysicalError(f"symplectic eigenvalue {nu} below 1")
    if nu <= 1.0:
        return 0.0
    p, m = 0.5 * (nu + 1.0), 0.5 * (nu - 1.0)
    return p * math.log2(p) - m * math.log2(m)


def _basis_rate(cm: np.ndarray, q: int, g_nu12: float, beta_rec: float, lenient: bool):
    va, vb, c = cm[q, q], cm[2 + q, 2 + q], cm[q, 2 + q]
    if vb <= 0 or va <= 0:
        raise DegenerateError("variances must be positive")
    vb_a = vb - c * c / va
    if vb_a <= 0:
        raise DegenerateError("conditional variance of Bob given Alice is not positive")
    i_ab = 0.5 * math.log2(vb / vb_a)
    # Alice conditioned on Bob's homodyne of quadrature q.
    cond = cm[:2, :2] - np.outer(cm[:2, 2 + q], cm[:2, 2 + q]) / vb
    det = np.linalg.det(cond)
    if det <= 0:
        raise DegenerateError("conditional state of Alice is degenerate")
    nu3 = math.sqrt(det)
    if lenient:
        nu3 = max(nu3, 1.0)
    chi = g_nu12 - holevo_g(nu3)
    return i_ab, chi, nu3


def key_rate(cm: TwoModeCovariance, beta_rec: float = 1.0, *, lenient: bool = False) -> KeyRateResult:
    """Reverse-reconciliation homodyne key rate, averaged over the x and p bases.

    With ``lenient=True`` symplectic eigenvalues slightly below one (as
    produced by finite-sample estimates) are clipped to one instead of raising.
    """
    if not 0.0 < beta_rec <= 1.0:
        raise ValueError("beta_rec must lie in (0, 1]")
    nu = symplectic_eigenvalues(cm)
    if lenient:
        nu_eff = tuple(max(n, 1.0) for n in nu)
    else:
        if min(nu) < 1.0 - PHYS_TOL:
            raise UnphysicalError(f"symplectic eigenvalues {nu} below 1")
        nu_eff = nu
    g12 = holevo_g(nu_eff[0]) + holevo_g(nu_eff[1])
    m = cm.matrix
    per = {}
    for name, q in (("x", 0), ("p", 1)):
        per[name] = _basis_rate(m, q, g12, beta_rec, lenient)
    i_ab = 0.5 * (per["x"][0] + per["p"][0])
    chi = max(0.0, 0.5 * (per["x"][1] + per["p"][1]))
    return KeyRateResult(i_ab=i_ab, chi_be=chi, key_rate=beta_rec * i_ab - chi, nu=nu,
                         beta_rec=beta_rec, per_basis=per)


# Geometry of the key-rate-versus-distance figure.
FIG3_GEOMETRY = dict(waist=0.1925, wavelength=3e-6)
FIG3_SOURCES = {
    "blue": dict(omega_do=40e9, a=60e9, preset="a"),
    "red": dict(omega_do=10e9, a=14e9, preset="b"),
}


def approximate_record(omega_do: float, a: float) -> CorrelationRecord:
    f, p = make_pair(a, omega_do, 1.0, 1.0)
    return correlation_record(f, p, method="approximate")


def fig3_sweep(source, z_grid, waist: float = FIG3_GEOMETRY["waist"],
               wavelength: float = FIG3_GEOMETRY["wavelength"], beta_rec: float = 1.0,
               excess: float = 0.0) -> list[tuple[float, float, KeyRateResult]]:
    """Key rate against distance; ``source`` is ``(omega_do, a)`` or a CorrelationRecord.

    Returns ``(z, eta, result)`` triples.
    """
    z_grid = list(z_grid)
    if not z_grid:
        raise ValueError("z_grid must be non-empty")
    record = source if isinstance(source, CorrelationRecord) else approximate_record(*source)
    out = []
    for z in z_grid:
        eta = rayleigh_eta(waist, wavelength, z)
        cm = cm_from_correlations(record, eta, excess)
        out.append((float(z), eta, key_rate(cm, beta_rec)))
    return out
