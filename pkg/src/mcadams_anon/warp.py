"""Pole-angle warping by the McAdams coefficient.

A complex pole at angle ``phi`` moves to ``phi ** alpha``; its magnitude is
untouched.  For ``alpha < 1`` angles below one radian move up and angles
above move down, so formants contract towards ``fs / (2 pi)`` Hz (about
2.5 kHz at 16 kHz).  Real poles are left where they are.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .lpc import PoleSet, check_conjugate_closed


def validate_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0) or not np.isfinite(alpha):
        raise ConfigError(f"McAdams coefficient must lie in (0, 1], got {alpha}")
    return alpha


def warp_angle(phi, alpha: float):
    """Return ``phi ** alpha`` for angles in (0, pi).

    Accepts scalars or arrays.  Angles on the real axis must be handled by
    the caller; passing them here is a contract violation.
    """
    alpha = validate_alpha(alpha)
    phi_arr = np.asarray(phi, dtype=np.float64)
    if np.any(phi_arr <= 0.0) or np.any(phi_arr >= np.pi):
        raise ValueError("warp_angle expects angles strictly inside (0, pi)")
    out = np.power(phi_arr, alpha)
    return float(out) if out.ndim == 0 else out


def unwarp_angle(phi, alpha: float):
    """Inverse of :func:`warp_angle` for a known coefficient: ``phi ** (1/alpha)``."""
    alpha = validate_alpha(alpha)
    phi_arr = np.asarray(phi, dtype=np.float64)
    if np.any(phi_arr <= 0.0) or np.any(phi_arr >= np.pi**alpha):
        raise ValueError("unwarp_angle expects angles inside (0, pi**alpha)")
    out = np.power(phi_arr, 1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def _map_poleset(poles: PoleSet, fn) -> PoleSet:
    real_idx, upper, partners = check_conjugate_closed(poles)
    phi = poles.phi.copy()
    if len(upper):
        new = np.atleast_1d(fn(np.abs(poles.phi[upper])))
        phi[upper] = new
        # mirror is constructed from the warped upper pole, never recomputed
        phi[partners] = -new
    return PoleSet(poles.rho.copy(), phi)


def warp_poleset(poles: PoleSet, alpha: float) -> PoleSet:
    """Warp the angle of every complex pole; real poles pass through.

    Magnitudes are copied unchanged, so a stable set stays stable.  The
    output has the same cardinality and is conjugate-closed.
    """
    alpha = validate_alpha(alpha)
    if alpha == 1.0:
        return PoleSet(poles.rho.copy(), poles.phi.copy())
    return _map_poleset(poles, lambda phi: warp_angle(phi, alpha))


def unwarp_poleset(poles: PoleSet, alpha: float) -> PoleSet:
    """Undo :func:`warp_poleset` given the exact coefficient."""
    alpha = validate_alpha(alpha)
    return _map_poleset(poles, lambda phi: unwarp_angle(phi, alpha))


def angle_to_hz(phi, sample_rate_hz: float):
    """Map a z-plane angle in [0, pi] to Hz (pi is Nyquist)."""
    if np.ndim(phi):
        phi = np.asarray(phi, dtype=np.float64)
    return phi * sample_rate_hz / (2.0 * np.pi)


def hz_to_angle(freq_hz, sample_rate_hz: float):
    if np.ndim(freq_hz):
        freq_hz = np.asarray(freq_hz, dtype=np.float64)
    return 2.0 * np.pi * freq_hz / sample_rate_hz
