"""Unit conventions and physical constants.

Internal dynamics run in angular frequency (rad/ps) with times in ps and
lengths in um.  Reported spectra use wavenumbers (cm^-1).  The single
conversion point is nu_tilde = omega / (2 pi c0) with c0 in cm/ps.
"""

import math

# Vacuum speed of light.
C0_CM_PER_PS = 0.0299792458
C0_UM_PER_PS = 299.792458


def wavenumber_to_angular(nu_cm1: float) -> float:
    """Convert a wavenumber in cm^-1 to angular frequency in rad/ps."""
    return 2.0 * math.pi * C0_CM_PER_PS * nu_cm1


def angular_to_wavenumber(omega_rad_ps: float) -> float:
    """Convert an angular frequency in rad/ps to a wavenumber in cm^-1."""
    return omega_rad_ps / (2.0 * math.pi * C0_CM_PER_PS)
