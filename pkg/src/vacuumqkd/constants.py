"""Physical constants and unit conventions.

Internally hbar = c = 1. Frequencies, rates and widths are angular (rad/s).
SI constants are only needed where a temperature enters.
"""

from scipy import constants as _c

HBAR = _c.hbar  # J s
K_B = _c.k  # J / K
C_LIGHT = _c.c  # m / s

# Guard on Omega_bar^2 - k_perp^2 relative to Omega_bar^2 (see field.effective_longitudinal).
SINGULAR_GUARD = 1e-12
