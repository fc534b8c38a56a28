"""Frequency-grid bookkeeping and spectral primitives.

Everything downstream trades in one-sided spectra of real impulse
responses: ``n_bins = n_fft // 2 + 1`` complex values from DC to Nyquist.
This module owns the FFT round trip, the discrete Hilbert transform used
by the causality (Kramers-Kronig) regularizer, and the zero-lag
exponential smoother used by the envelope loss.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class FrequencyGrid:
    """One-sided DFT frequency grid for real signals of length ``n_fft``.

    Parameters
    ----------
    n_fft : int
        Length of the underlying impulse response. Must be even and >= 8.
    sample_rate : float
        Sampling rate in Hz.
    """

    n_fft: int
    sample_rate: float

    def __post_init__(self):
        if self.n_fft < 8 or self.n_fft % 2 != 0:
            raise InvalidInputError(f"n_fft must be even and >= 8, got {self.n_fft}")
        if self.sample_rate <= 0:
            raise InvalidInputError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate / 2.0

    def bin_hz(self, i) -> float:
        return i * self.sample_rate / self.n_fft

    def bins_hz(self) -> np.ndarray:
        """Frequencies of all one-sided bins, DC through Nyquist."""
        return np.arange(self.n_bins) * (self.sample_rate / self.n_fft)


@dataclass
class ComplexSpectrum:
    """One-sided complex pressure spectrum on a :class:`FrequencyGrid`."""

    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n_bins,):
            raise InvalidInputError(
                f"spectrum length {self.values.shape} does not match grid n_bins {self.grid.n_bins}"
            )


@dataclass
class ImpulseResponse:
    """Real time-domain pressure signal of length ``grid.n_fft``."""

    grid: FrequencyGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.shape != (self.grid.n_fft,):
            raise InvalidInputError(
                f"IR length {self.samples.shape} does not match grid n_fft {self.grid.n_fft}"
            )


def forward_spectrum(ir: ImpulseResponse) -> ComplexSpectrum:
    """One-sided DFT of a real impulse response."""
    return ComplexSpectrum(ir.grid, np.fft.rfft(ir.samples))


def inverse_ir(spec: ComplexSpectrum) -> ImpulseResponse:
    """Real impulse response whose one-sided DFT is ``spec``.

    The DC and Nyquist bins of a real signal's spectrum are real; any
    imaginary part there is discarded (with a warning when it exceeds
    1e-6 of the bin magnitude).
    """
    values = spec.values.copy()
    for idx in (0, spec.grid.n_bins - 1):
        v = values[idx]
        if abs(v.imag) > 1e-6 * max(abs(v), 1e-300):
            warnings.warn(
                f"bin {idx} has non-negligible imaginary part {v.imag:.3e}; discarding",
                stacklevel=2,
            )
        values[idx] = v.real
    return ImpulseResponse(spec.grid, np.fft.irfft(values, n=spec.grid.n_fft))


def _even_extension(profile: np.ndarray) -> np.ndarray:
    """Two-sided even extension of a one-sided profile, FFT wrap-around order.

    For ``n_bins`` one-sided values the extension has ``2 * n_bins - 2``
    entries: ``[p0, p1, ..., p_nyq, p_{nyq-1}, ..., p1]``.
    """
    return np.concatenate([profile, profile[..., -2:0:-1]], axis=-1)


def _taper_window(n_bins: int, taper_fraction: float) -> np.ndarray:
    """Raised-cosine window rolling the one-sided ends (DC and Nyquist) to zero."""
    w = np.ones(n_bins)
    n_taper = int(round(taper_fraction * n_bins))
    if n_taper > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_taper) / n_taper))
        w[:n_taper] = ramp
        w[-n_taper:] = ramp[::-1]
    return w


def taper_zone_mask(n_bins: int, taper_fraction: float) -> np.ndarray:
    """Boolean mask, True on bins inside the raised-cosine taper zones."""
    mask = np.zeros(n_bins, dtype=bool)
    n_taper = int(round(taper_fraction * n_bins))
    if n_taper > 0:
        mask[:n_taper] = True
        mask[-n_taper:] = True
    return mask


def hilbert_kk(sigma_profile: np.ndarray, taper_fraction: float = 0.1) -> np.ndarray:
    """Discrete Hilbert transform pairing dispersion with absorption.

    The one-sided profile is even-extended to a full two-sided spectrum
    (wrap-around order), transformed with the FFT sign multiplier
    ``-j * sgn``, and the one-sided part is returned with a raised-cosine
    taper over ``taper_fraction`` of the bins at each end. The taper sits
    on the output so the operator stays linear and maps constants to an
    exact zero; the tapered edge bins are where the discrete transform of
    a non-periodic profile is unreliable anyway.

    Accepts a single profile of length ``n_bins`` or a batch with bins on
    the last axis; operates row-wise.
    """
    if not (0.0 <= taper_fraction <= 0.5):
        raise InvalidInputError(f"taper_fraction must be in [0, 0.5], got {taper_fraction}")
    profile = np.asarray(sigma_profile, dtype=np.float64)
    n_bins = profile.shape[-1]
    if n_bins < 2:
        raise InvalidInputError("profile must have at least 2 bins")
    ext = _even_extension(profile)
    n_ext = ext.shape[-1]
    spectrum = np.fft.fft(ext, axis=-1)
    multiplier = np.zeros(n_ext, dtype=np.complex128)
    multiplier[1 : n_ext // 2] = -1j
    multiplier[n_ext // 2 + 1 :] = 1j
    transformed = np.fft.ifft(spectrum * multiplier, axis=-1).real
    one_sided = transformed[..., :n_bins]
    return one_sided * _taper_window(n_bins, taper_fraction)


def hilbert_kk_matrix(n_bins: int, taper_fraction: float = 0.1) -> np.ndarray:
    """Dense matrix ``M`` with ``hilbert_kk(x) == M @ x``.

    The transform is linear; the matrix form gives the exact adjoint
    (``M.T``) for gradient propagation through the regularizer.
    """
    return hilbert_kk(np.eye(n_bins), taper_fraction).T


def smooth_pass(values: np.ndarray, alpha: float, reverse: bool = False) -> np.ndarray:
    """Single-direction exponential smoothing along the last axis.

    First sample passes through unchanged so constants are preserved:
    ``s[0] = e[0]``, ``s[i] = alpha * e[i] + (1 - alpha) * s[i - 1]``.
    """
    e = np.asarray(values, dtype=np.float64)
    if reverse:
        return smooth_pass(e[..., ::-1], alpha)[..., ::-1]
    out = np.empty_like(e)
    out[..., 0] = e[..., 0]
    for i in range(1, e.shape[-1]):
        out[..., i] = alpha * e[..., i] + (1.0 - alpha) * out[..., i - 1]
    return out


def smooth_pass_adjoint(upstream: np.ndarray, alpha: float, reverse: bool = False) -> np.ndarray:
    """Adjoint of :func:`smooth_pass` (transpose of its matrix)."""
    u = np.asarray(upstream, dtype=np.float64)
    if reverse:
        return smooth_pass_adjoint(u[..., ::-1], alpha)[..., ::-1]
    n = u.shape[-1]
    out = np.empty_like(u)
    carry = np.zeros(u.shape[:-1])
    for i in range(n - 1, -1, -1):
        total = u[..., i] + (1.0 - alpha) * carry
        out[..., i] = total if i == 0 else alpha * total
        carry = total
    return out


def zero_lag_smooth(values: np.ndarray, alpha: float) -> np.ndarray:
    """Average of the left-to-right and right-to-left smoothing passes.

    Symmetric in direction, so spectral features do not shift.
    """
    return 0.5 * (smooth_pass(values, alpha) + smooth_pass(values, alpha, reverse=True))


def zero_lag_smooth_adjoint(upstream: np.ndarray, alpha: float) -> np.ndarray:
    return 0.5 * (
        smooth_pass_adjoint(upstream, alpha)
        + smooth_pass_adjoint(upstream, alpha, reverse=True)
    )


def smooth_log_envelope(
    spec: ComplexSpectrum,
    weights: np.ndarray,
    alpha: float = 0.1,
    epsilon: float = 1e-6,
) -> np.ndarray:
    """Smoothed log-magnitude envelope ``S(log(|H| * w + eps))``.

    Parameters
    ----------
    spec : ComplexSpectrum
        Input spectrum.
    weights : array of shape (n_bins,)
        Non-negative per-bin weights applied inside the log.
    alpha : float
        Smoothing coefficient in (0, 1]; ``alpha == 1`` disables smoothing.
    epsilon : float
        Positive floor keeping the log finite on empty bins.
    """
    if not (0.0 < alpha <= 1.0):
        raise InvalidInputError(f"alpha must be in (0, 1], got {alpha}")
    if epsilon <= 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (spec.grid.n_bins,):
        raise InvalidInputError("weights length must equal n_bins")
    if np.any(weights < 0):
        raise InvalidInputError("weights must be non-negative")
    e = np.log(np.abs(spec.values) * weights + epsilon)
    return zero_lag_smooth(e, alpha)
