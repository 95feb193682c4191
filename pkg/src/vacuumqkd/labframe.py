"""Laboratory-frame chirp schedules for conformal-time detectors.

A detector whose clock runs in conformal time tau sees lab time
t = exp(a tau) / a, so a fixed conformal frequency appears in the lab as a
chirp omega(dt) = omega_do / (exp(a tau_o) + a dt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, K_B
from .field import Label

# Reference lab-frame table inputs.
TABLE1_A = 14e9
TABLE1_OMEGA_DO = 10e9
TABLE1_TAU_O = (-0.98e-9, -0.47e-9, -0.14e-9)
TABLE1_T_MAX = (300.0, 3.0, 1e-3)
# Printed values (omega_i, omega_f, delta_t) for comparison.
TABLE1_PRINTED = (
    (9.40e15, 6.28e14, 10e-15),
    (7.48e12, 5.0e11, 12.6e-12),
    (7.48e10, 5.0e9, 1.26e-9),
)
# Conformal integration window fixed once by the first row's frequency ratio.
TABLE1_DELTA_TAU_T = math.log(TABLE1_PRINTED[0][0] / TABLE1_PRINTED[0][1]) / TABLE1_A


@dataclass(frozen=True)
class ChirpSchedule:
    tau_o: float
    omega_i: float
    omega_f: float
    delta_t: float
    a: float
    omega_do: float
    label: Label
    samples: tuple = ()
    temperature: float | None = None
    occupancy: float | None = None


def lab_interval(tau_o: float, delta_tau: float, a: float) -> float:
    """Lab-time duration of a conformal interval ``delta_tau`` starting at ``tau_o``."""
    if a <= 0:
        raise ValueError("a must be positive")
    return math.exp(a * tau_o) / a * math.expm1(a * delta_tau)


def frequency_ratio(a: float, delta_tau_T: float) -> float:
    """omega_f / omega_i over a conformal window of length ``delta_tau_T``."""
    if a <= 0 or delta_tau_T < 0:
        raise ValueError("a must be positive and delta_tau_T non-negative")
    return math.exp(-a * delta_tau_T)


def window_from_ratio(a: float, ratio: float) -> float:
    """Inverse of :func:`frequency_ratio`."""
    return -math.log(ratio) / a


def initial_frequency(omega_do: float, a: float, tau_o: float) -> float:
    return omega_do * math.exp(-a * tau_o)


def chirp_frequency(delta_t, omega_do: float, a: float, tau_o: float):
    return omega_do / (math.exp(a * tau_o) + a * np.asarray(delta_t, dtype=float))


def thermal_occupancy(omega: float, temperature: float) -> float:
    """Bose-Einstein occupancy of a mode at angular frequency ``omega``."""
    if temperature <= 0:
        return 0.0
    x = HBAR * omega / (K_B * temperature)
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def chirp_profile(omega_do: float, a: float, tau_o: float, delta_t_grid, label: Label | str = Label.FUTURE,
                  delta_tau_T: float = TABLE1_DELTA_TAU_T, temperature: float | None = None) -> ChirpSchedule:
    """Sample the lab-frame local-oscillator frequency over one detection window.

    The Future (Alice) detector chirps down from omega_i; the Past (Bob) one is
    its time mirror, with elapsed time counted back from the end of the window.
    """
    label = Label(label)
    total = lab_interval(tau_o, delta_tau_T, a)
    grid = np.asarray(list(delta_t_grid), dtype=float)
    if grid.size and (grid.min() < 0 or grid.max() > total * (1 + 1e-12)):
        raise ValueError(f"grid must lie within [0, {total}]")
    elapsed = grid if label is Label.FUTURE else total - grid
    omega = chirp_frequency(elapsed, omega_do, a, tau_o)
    omega_i = initial_frequency(omega_do, a, tau_o)
    omega_f = omega_i * frequency_ratio(a, delta_tau_T)
    occ = thermal_occupancy(omega_f, temperature) if temperature is not None else None
    return ChirpSchedule(
        tau_o=tau_o, omega_i=omega_i, omega_f=omega_f, delta_t=total, a=a, omega_do=omega_do,
        label=label, samples=tuple(zip(grid.tolist(), omega.tolist())),
        temperature=temperature, occupancy=occ,
    )


def table1(a: float = TABLE1_A, omega_do: float = TABLE1_OMEGA_DO, rows=TABLE1_TAU_O,
           temperature_grid=TABLE1_T_MAX, delta_tau_T: float = TABLE1_DELTA_TAU_T,
           n_samples: int = 0) -> list[ChirpSchedule]:
    """Lab-frame parameters for each initial conformal time in ``rows``.

    ``temperature_grid`` supplies the background temperature reported alongside
    each row (cycled if shorter than ``rows``); ``None`` entries skip it.
    """
    rows = list(rows)
    temps = list(temperature_grid) if temperature_grid else [None]
    out = []
    for i, tau_o in enumerate(rows):
        total = lab_interval(tau_o, delta_tau_T, a)
        grid = np.linspace(0.0, total, n_samples) if n_samples else ()
        out.append(chirp_profile(omega_do, a, tau_o, grid, Label.FUTURE, delta_tau_T, temps[i % len(temps)]))
    return out
