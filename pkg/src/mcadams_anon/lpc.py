"""Linear prediction analysis and synthesis.

Conventions: ``A(z) = 1 + a_1 z^-1 + ... + a_p z^-p``.  The residual is the
frame filtered by ``A(z)`` and synthesis filters a residual by ``1/A(z)``,
both from a zero initial state, so the two are exact inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import NumericError, StructuralError

SILENCE_R0 = 1e-12
DIAGONAL_LOADING = 1e-9
REAL_POLE_TOL = 1e-8
CONJUGATE_TOL = 1e-9
IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True)
class LpcModel:
    """Prediction coefficients ``a_1..a_p`` and the frame's residual.

    ``passthrough`` marks a silent frame that bypassed analysis: its
    coefficients are all zero and the residual is the frame itself.
    """

    coeffs: np.ndarray
    residual: np.ndarray
    passthrough: bool = False

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def polynomial(self) -> np.ndarray:
        """``[1, a_1, ..., a_p]``"""
        return np.concatenate(([1.0], self.coeffs))


@dataclass(frozen=True)
class PoleSet:
    """Roots of ``z^p A(z)`` in polar form, ``rho >= 0`` and ``phi`` in (-pi, pi]."""

    rho: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=np.float64).reshape(-1)
        phi = np.asarray(self.phi, dtype=np.float64).reshape(-1)
        if rho.shape != phi.shape:
            raise StructuralError("rho and phi must have the same length")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", phi)

    @property
    def order(self) -> int:
        return len(self.rho)

    def __len__(self):
        return self.order

    @classmethod
    def from_complex(cls, values) -> "PoleSet":
        values = np.asarray(values, dtype=np.complex128)
        return cls(np.abs(values), np.angle(values))

    def is_real(self, tol: float = REAL_POLE_TOL) -> np.ndarray:
        """Boolean mask of poles on the real axis (including the origin)."""
        return np.abs(self.rho * np.sin(self.phi)) <= tol

    def to_complex(self) -> np.ndarray:
        values = self.rho * np.exp(1j * self.phi)
        real = self.is_real()
        # snap real-axis poles exactly; sin(pi) is not exactly zero
        values[real] = np.where(np.abs(self.phi[real]) > np.pi / 2, -self.rho[real], self.rho[real])
        return values

    def is_stable(self) -> bool:
        return bool(np.all(self.rho < 1.0))


def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation ``r[0..max_lag]``; a 2-D input is treated row by row."""
    x = np.asarray(frame, dtype=np.float64)
    rows = np.atleast_2d(x)
    n = rows.shape[1]
    r = np.zeros((rows.shape[0], max_lag + 1))
    for k in range(min(max_lag + 1, n)):
        r[:, k] = np.einsum("ij,ij->i", rows[:, : n - k], rows[:, k:])
    return r[0] if x.ndim == 1 else r


def levinson_durbin(r: np.ndarray, order: int | None = None):
    """Solve the normal equations for a Toeplitz autocorrelation sequence.

    Parameters
    ----------
    r : ndarray
        Autocorrelation ``r[0..p]`` with ``r[0] > 0``, or a 2-D array with
        one sequence per row (solved together).
    order : int, optional
        Prediction order; defaults to ``len(r) - 1``.

    Returns
    -------
    coeffs : ndarray
        ``a_1..a_p`` of ``A(z)``.
    reflection : ndarray
        Reflection coefficients ``k_1..k_p``, each strictly inside (-1, 1).
    error : float or ndarray
        Final prediction error power.
    """
    r = np.asarray(r, dtype=np.float64)
    rows = np.atleast_2d(r)
    p = rows.shape[1] - 1 if order is None else order
    if np.any(rows[:, 0] <= 0):
        raise NumericError("autocorrelation r[0] must be positive", _first(rows[:, 0] <= 0, r.ndim))
    a = np.zeros((rows.shape[0], p + 1))
    a[:, 0] = 1.0
    reflection = np.zeros((rows.shape[0], p))
    err = rows[:, 0].copy()
    for i in range(1, p + 1):
        acc = rows[:, i] + np.einsum("ij,ij->i", a[:, 1:i], rows[:, i - 1 : 0 : -1])
        k = -acc / err
        bad = ~((k > -1.0) & (k < 1.0))
        if np.any(bad):
            raise NumericError(
                f"reflection coefficient {k[bad][0]} at stage {i} outside (-1, 1)", _first(bad, r.ndim)
            )
        a[:, 1:i] = a[:, 1:i] + k[:, None] * a[:, i - 1 : 0 : -1]
        a[:, i] = k
        reflection[:, i - 1] = k
        err *= 1.0 - k * k
    if r.ndim == 1:
        return a[0, 1:], reflection[0], float(err[0])
    return a[:, 1:], reflection, err


def _first(mask, ndim):
    """Row index of the first offending frame, or None for 1-D input."""
    return int(np.flatnonzero(mask)[0]) if ndim > 1 else None


def inverse_filter(coeffs: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Residual ``e[n] = x[n] + sum_k a_k x[n-k]`` from zero history."""
    return lfilter(np.concatenate(([1.0], coeffs)), [1.0], frame)


def fit_lpc(frame: np.ndarray, order: int) -> LpcModel:
    """Autocorrelation-method LPC fit of a windowed frame.

    Silent frames (``r[0]`` below ``SILENCE_R0``) are returned as a
    pass-through model with zero coefficients.
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("fit_lpc expects a single 1-D frame")
    try:
        return fit_lpc_frames(x[None, :], order)[0]
    except NumericError as exc:
        raise NumericError(exc.detail) from None


def fit_lpc_frames(frames: np.ndarray, order: int) -> list[LpcModel]:
    """:func:`fit_lpc` applied to every row of ``frames``, sharing the Levinson recursion."""
    x = np.asarray(frames, dtype=np.float64)
    if order < 1:
        raise ValueError("order must be positive")
    if x.shape[1] <= order:
        raise ValueError(f"frame length {x.shape[1]} must exceed order {order}")
    finite = np.all(np.isfinite(x), axis=1)
    if not np.all(finite):
        raise NumericError("frame contains non-finite samples", int(np.flatnonzero(~finite)[0]))
    r = autocorrelation(x, order)
    voiced = np.flatnonzero(r[:, 0] >= SILENCE_R0)
    coeffs = np.zeros((len(x), order))
    if len(voiced):
        rv = r[voiced]
        rv[:, 0] *= 1.0 + DIAGONAL_LOADING
        try:
            coeffs[voiced], _, _ = levinson_durbin(rv, order)
        except NumericError as exc:
            raise NumericError(exc.detail, int(voiced[exc.frame_index])) from None
    is_voiced = np.zeros(len(x), dtype=bool)
    is_voiced[voiced] = True
    return [
        LpcModel(coeffs[i], inverse_filter(coeffs[i], x[i])) if is_voiced[i]
        else LpcModel(np.zeros(order), x[i].copy(), passthrough=True)
        for i in range(len(x))
    ]


def companion_matrix(coeffs: np.ndarray) -> np.ndarray:
    """Frobenius companion matrix of the monic ``z^p + a_1 z^(p-1) + ... + a_p``."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    p = len(coeffs)
    mat = np.zeros((p, p))
    mat[0, :] = -coeffs
    if p > 1:
        mat[1:, :-1] = np.eye(p - 1)
    return mat


def _pair_conjugates(values: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices of real values, upper-half values, and each upper value's conjugate partner."""
    imag = values.imag
    real_idx = np.flatnonzero(np.abs(imag) <= REAL_POLE_TOL)
    upper = np.flatnonzero(imag > REAL_POLE_TOL)
    lower = np.flatnonzero(imag < -REAL_POLE_TOL)
    if len(upper) != len(lower):
        raise StructuralError(f"{len(upper)} upper-half poles but {len(lower)} lower-half poles")
    # fast path: sorting both halves the same way pairs exact mirrors directly
    up_order = upper[np.lexsort((values[upper].imag, values[upper].real))]
    lo_order = lower[np.lexsort((-values[lower].imag, values[lower].real))]
    if np.all(np.abs(values[up_order] - np.conj(values[lo_order])) <= tol):
        return real_idx, up_order, lo_order
    dist = np.abs(values[upper][:, None] - np.conj(values[lower])[None, :])
    partners = np.empty(len(upper), dtype=int)
    for n in range(len(upper)):
        best = int(np.argmin(dist[n]))
        if dist[n, best] > tol:
            raise StructuralError(
                f"pole {values[upper[n]]} has no conjugate partner (nearest off by {dist[n, best]:.3g})"
            )
        partners[n] = lower[best]
        dist[:, best] = np.inf
    return real_idx, upper, partners


def poles_from_coeffs(model_or_coeffs) -> PoleSet:
    """Roots of ``z^p + a_1 z^(p-1) + ... + a_p`` via companion-matrix eigenvalues.

    Roots with ``|Im| <= REAL_POLE_TOL`` are snapped onto the real axis; the
    others are paired with their nearest conjugate and symmetrised so the
    result is exactly conjugate-closed.
    """
    coeffs = getattr(model_or_coeffs, "coeffs", model_or_coeffs)
    return poles_from_coeff_rows(np.asarray(coeffs, dtype=np.float64)[None, :])[0]


def poles_from_coeff_rows(rows: np.ndarray) -> list[PoleSet]:
    """:func:`poles_from_coeffs` for each row of a 2-D coefficient array."""
    rows = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(rows)):
        raise NumericError("non-finite LPC coefficients")
    n_rows, p = rows.shape
    roots = np.zeros((n_rows, p), dtype=np.complex128)
    if p:
        full = rows[:, -1] != 0.0
        if np.any(full):
            mats = np.zeros((int(full.sum()), p, p))
            mats[:, 0, :] = -rows[full]
            mats[:, 1:, :-1] = np.eye(p - 1)
            roots[full] = np.linalg.eigvals(mats)
        # trailing zero coefficients are exact roots at the origin; QR iteration
        # on a nilpotent block would smear them out to ~eps**(1/p)
        for i in np.flatnonzero(~full):
            nz = np.flatnonzero(rows[i])
            if len(nz):
                eff = int(nz[-1]) + 1
                roots[i, :eff] = np.linalg.eigvals(companion_matrix(rows[i, :eff]))
    return [_symmetrise(r) for r in roots]


def _symmetrise(roots: np.ndarray) -> PoleSet:
    p = len(roots)
    if p == 0:
        return PoleSet(np.zeros(0), np.zeros(0))
    real_idx, upper, partners = _pair_conjugates(roots, tol=1e-6 * max(1.0, np.max(np.abs(roots))))
    sym = (roots[upper] + np.conj(roots[partners])) / 2
    out = np.empty(p, dtype=np.complex128)
    out[real_idx] = roots[real_idx].real
    out[upper] = sym
    out[partners] = np.conj(sym)
    rho = np.abs(out)
    phi = np.angle(out)
    # mirror angles bit-exactly and keep real poles exactly on the axis
    phi[partners] = -phi[upper]
    phi[real_idx] = np.where(out[real_idx].real < 0, np.pi, 0.0)
    return PoleSet(rho, phi)


def check_conjugate_closed(poles: PoleSet, tol: float = CONJUGATE_TOL):
    """Raise StructuralError unless every complex pole has its conjugate."""
    return _pair_conjugates(poles.to_complex(), tol)


def coeffs_from_poles(poles: PoleSet) -> np.ndarray:
    """Expand ``prod(z - p_i)`` into real coefficients ``a_1..a_p``."""
    values = poles.to_complex()
    check_conjugate_closed(poles)
    poly = np.array([1.0 + 0j])
    for v in values:
        poly = np.convolve(poly, [1.0, -v])
    residue = np.max(np.abs(poly.imag)) if len(poly) else 0.0
    if residue > IMAG_RESIDUE_TOL:
        raise StructuralError(f"imaginary residue {residue:.3g} in expanded coefficients")
    return poly.real[1:].copy()


def synthesize(coeffs: np.ndarray, residual: np.ndarray, frame_index: int | None = None) -> np.ndarray:
    """All-pole synthesis ``out[n] = e[n] - sum_k a_k out[n-k]`` from zero state."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if not np.all(np.isfinite(coeffs)):
        raise NumericError("non-finite synthesis coefficients", frame_index)
    with np.errstate(over="ignore", invalid="ignore"):
        out = lfilter([1.0], np.concatenate(([1.0], coeffs)), np.asarray(residual, dtype=np.float64))
    if not np.all(np.isfinite(out)):
        raise NumericError("synthesis filter produced non-finite output", frame_index)
    return out
