"""Vacuum quadrature variances and cross-correlations seen by scaled homodyne detectors.

The exact quantities are double integrals over the transverse wavenumber
``k = |k_perp|`` and the longitudinal wavenumber ``u = k_d1 >= 0``, with
``omega_bar = sqrt(u^2 + k^2)``. In these variables the normalized measure is

    K * (omega_bar / u) * |f(u) + f(-u)|^2 * g(k)^2 * 2 pi k  du dk

and the thermal kernels are ``coth(x)`` (variance) and ``csch(x)`` (cross
term), ``x = pi * omega_bar / a``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constants import SINGULAR_GUARD
from .field import DetectorParams, longitudinal_mode, make_pair, transverse_profile, validate_pair
from .quadrature import Budget, integrate


class Method(str, enum.Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    n_sigma: float = 8.0
    max_evals: int = 20_000_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.n_sigma < 4:
            raise ValueError("n_sigma must be at least 4")


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class CorrelationRecord:
    omega_do: float
    v_f: float
    v_p: float
    c0: float
    cpi2: float
    dx_minus_0: float
    dx_plus_0: float
    dx_minus_pi2: float
    dx_plus_pi2: float
    purity_minus: float
    purity_plus: float
    entangled: bool
    method: Method

    @property
    def squeezing(self) -> float:
        return self.dx_minus_0

    @property
    def purity(self) -> float:
        return max(self.purity_minus, self.purity_plus)


@dataclass(frozen=True)
class Moments:
    """Unnormalized integrals of the measure, the variance kernel and the cross kernel."""

    norm: float
    var: float
    cross: float
    norm_err: float
    var_err: float
    cross_err: float
    evals: int

    @property
    def K(self) -> float:
        return 1.0 / self.norm

    @property
    def variance(self) -> float:
        return self.var / self.norm

    @property
    def cross_term(self) -> float:
        return self.cross / self.norm


def _coth(x):
    with np.errstate(over="ignore"):
        return 1.0 + 2.0 / np.expm1(2.0 * x)


def _csch(x):
    return 2.0 * np.exp(-x) / -np.expm1(-2.0 * x)


def vacuum_moments(params: DetectorParams, spec: QuadratureSpec = DEFAULT_SPEC,
                   delta_tau: float = 0.0) -> Moments:
    """Evaluate the three double integrals in one nested adaptive pass.

    ``delta_tau`` is tau_F - tau_P; it multiplies the cross kernel by
    ``cos(omega_bar * delta_tau)``.
    """
    a = params.a
    k0 = params.omega_do
    sd, ss = math.sqrt(params.d), math.sqrt(params.s)
    u_lo = max(0.0, k0 - spec.n_sigma * sd)
    u_hi = k0 + spec.n_sigma * sd
    k_hi = spec.n_sigma * ss
    budget = Budget(spec.max_evals)
    inner_rel = spec.rel_tol / 10.0
    guard = math.sqrt(SINGULAR_GUARD)

    def kernel(u, k):
        ob = np.hypot(u, k)
        jac = ob * u / np.maximum(u * u, SINGULAR_GUARD * ob * ob)
        env = np.abs(longitudinal_mode(u, params) + longitudinal_mode(-u, params)) ** 2
        w = jac * env
        x = np.pi * ob / a
        cross = w * _csch(x)
        if delta_tau:
            cross = cross * np.cos(ob * delta_tau)
        return np.stack([w, w * _coth(x), cross])

    def inner(k):
        opts = dict(rel_tol=inner_rel, abs_tol=spec.abs_tol, budget=budget)
        total = np.zeros(3)
        error = np.zeros(3)
        if u_lo == 0.0 and k > 0:
            # The 1/u growth of the measure below u ~ k is integrated in log(u).
            ug = min(guard * k, u_hi)
            kc = min(k, u_hi)
            r = integrate(lambda u: kernel(u, k), 0.0, ug, **opts)
            total += r.value
            error += r.error
            if kc > ug:
                r = integrate(lambda t: kernel(np.exp(t), k) * np.exp(t), math.log(ug), math.log(kc), **opts)
                total += r.value
                error += r.error
            if u_hi > kc:
                r = integrate(lambda u: kernel(u, k), kc, u_hi, **opts)
                total += r.value
                error += r.error
        else:
            r = integrate(lambda u: kernel(u, k), u_lo, u_hi, breakpoints=(k,), **opts)
            total, error = r.value, r.error
        return total, error

    worst_inner = np.zeros(3)

    def outer(ks):
        out = np.empty((3, ks.size))
        for i, k in enumerate(ks):
            val, err = inner(k)
            out[:, i] = val * (transverse_profile(k * k, params) ** 2 * 2.0 * math.pi * k)
            rel = err / np.maximum(np.abs(val), spec.abs_tol)
            np.maximum(worst_inner, rel, out=worst_inner)
        return out

    res = integrate(outer, 0.0, k_hi, rel_tol=spec.rel_tol, abs_tol=spec.abs_tol, budget=budget)
    err = res.error + worst_inner * np.abs(res.value)
    return Moments(*res.value, *err, budget.used)


def normalization_constant(params: DetectorParams, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """K such that the effective longitudinal-transverse measure integrates to one."""
    return vacuum_moments(params, spec).K


def signal_variance_exact(params: DetectorParams, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Vacuum-normalized quadrature variance of one detector (>= 1)."""
    return vacuum_moments(params, spec).variance


def signal_variance_approx(omega_do: float, a: float) -> float:
    """Narrow-band limit: the thermal variance coth(pi omega_do / a)."""
    if omega_do <= 0 or a <= 0:
        raise ValueError("omega_do and a must be positive")
    return float(_coth(math.pi * omega_do / a))


def squeezing_approx(omega_do: float, a: float) -> float:
    """Narrow-band correlation variance tanh(pi omega_do / (2a))."""
    x = math.pi * omega_do / a
    return -math.expm1(-x) / (1.0 + math.exp(-x))


def cross_correlation_exact(pair_f: DetectorParams, pair_p: DetectorParams, phi: float,
                            spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Normalized cross term at local-oscillator phase 0 or pi/2."""
    validate_pair(pair_f, pair_p)
    sign = _phase_sign(phi)
    return sign * vacuum_moments(pair_f, spec, pair_f.tau - pair_p.tau).cross_term


def _phase_sign(phi: float) -> float:
    if math.isclose(phi, 0.0, abs_tol=1e-12):
        return 1.0
    if math.isclose(phi, math.pi / 2, abs_tol=1e-12):
        return -1.0
    raise ValueError("phi must be 0 or pi/2")


def record_from_moments(omega_do, v_f, v_p, c0, cpi2, method) -> CorrelationRecord:
    """Assemble correlation variances, purity products and the entanglement flag."""
    dx_m0 = 0.5 * (v_f + v_p - 2 * c0)
    dx_p0 = 0.5 * (v_f + v_p + 2 * c0)
    dx_mp = 0.5 * (v_f + v_p - 2 * cpi2)
    dx_pp = 0.5 * (v_f + v_p + 2 * cpi2)
    v_f, v_p, c0, cpi2 = float(v_f), float(v_p), float(c0), float(cpi2)
    dx_m0, dx_p0, dx_mp, dx_pp = float(dx_m0), float(dx_p0), float(dx_mp), float(dx_pp)
    return CorrelationRecord(
        omega_do=float(omega_do), v_f=v_f, v_p=v_p, c0=c0, cpi2=cpi2,
        dx_minus_0=dx_m0, dx_plus_0=dx_p0, dx_minus_pi2=dx_mp, dx_plus_pi2=dx_pp,
        purity_minus=dx_m0 * dx_mp, purity_plus=dx_p0 * dx_pp,
        entangled=bool(dx_m0 * dx_pp < 1.0), method=Method(method),
    )


def correlation_record(pair_f: DetectorParams, pair_p: DetectorParams,
                       spec: QuadratureSpec = DEFAULT_SPEC,
                       method: Method | str = Method.EXACT) -> CorrelationRecord:
    validate_pair(pair_f, pair_p)
    method = Method(method)
    if method is Method.APPROXIMATE:
        x = math.pi * pair_f.omega_do / pair_f.a
        v = float(_coth(x))
        c = float(_csch(x))
        # Squeezed and anti-squeezed variances tanh(x/2) and its inverse, formed
        # directly so the purity products stay at 1 to rounding.
        t = squeezing_approx(pair_f.omega_do, pair_f.a)
        return CorrelationRecord(
            omega_do=float(pair_f.omega_do), v_f=v, v_p=v, c0=c, cpi2=-c,
            dx_minus_0=t, dx_plus_0=1.0 / t, dx_minus_pi2=1.0 / t, dx_plus_pi2=t,
            purity_minus=t * (1.0 / t), purity_plus=(1.0 / t) * t,
            entangled=bool(t * t < 1.0), method=method,
        )
    m = vacuum_moments(pair_f, spec, pair_f.tau - pair_p.tau)
    v = m.variance
    c = m.cross_term
    return record_from_moments(pair_f.omega_do, v, v, c, -c, method)


# Figure presets: (a, longitudinal width, transverse width), widths in s^-1.
FIG1_PRESETS = {
    "a": dict(a=60e9, d_width=2.0e9, s_width=0.25e9),
    "b": dict(a=14e9, d_width=5.0e9, s_width=0.5e9),
}


def preset_pair(name: str, omega_do: float):
    p = FIG1_PRESETS[name]
    return make_pair(p["a"], omega_do, p["d_width"] ** 2, p["s_width"] ** 2)


def _record_at(args):
    base, omega, spec, method = args
    f = base.with_omega(omega)
    return correlation_record(f, f.partner(), spec, method)


def fig1_sweep(base: tuple[DetectorParams, DetectorParams], omega_grid, spec: QuadratureSpec = DEFAULT_SPEC,
               method: Method | str = Method.EXACT, workers: int | None = None) -> list[CorrelationRecord]:
    """One correlation record per conformal frequency in ``omega_grid``."""
    omega_grid = list(omega_grid)
    if not omega_grid:
        raise ValueError("omega_grid must be non-empty")
    validate_pair(*base)
    jobs = [(base[0], float(w), spec, Method(method)) for w in omega_grid]
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_record_at, jobs))
    return [_record_at(j) for j in jobs]
