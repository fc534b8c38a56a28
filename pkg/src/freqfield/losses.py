"""Spectral supervision: complex/magnitude/phase losses, envelope loss,
causality (Kramers-Kronig) consistency regularizer, and their weighted sum.

Every loss has an analytic gradient companion used by the trainer; the
phase terms carry a zero-magnitude guard (angle of a silent bin is
defined as 0 with zero gradient) so training never divides by zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import spectra
from .errors import InvalidConfigError, InvalidInputError
from .spectra import ComplexSpectrum, FrequencyGrid

_ZERO_MAG_GUARD = 1e-12


@dataclass
class LossWeights:
    """Per-bin weight vectors and scalar term weights of the objective."""

    w_spec: np.ndarray
    w_mag: np.ndarray
    w_phase: np.ndarray
    w_env: np.ndarray
    lambda_spec: float = 1.0
    lambda_mag: float = 1.0
    lambda_phase: float = 1.0
    lambda_env: float = 0.5
    lambda_kk: float = 0.01
    env_alpha: float = 0.1
    env_epsilon: float = 1e-6

    def __post_init__(self):
        vecs = [self.w_spec, self.w_mag, self.w_phase, self.w_env]
        n = len(vecs[0])
        for v in vecs:
            v = np.asarray(v)
            if v.shape != (n,) or np.any(v < 0):
                raise InvalidConfigError("weight vectors must share length and be >= 0")
        for lam in (self.lambda_spec, self.lambda_mag, self.lambda_phase,
                    self.lambda_env, self.lambda_kk):
            if lam < 0:
                raise InvalidConfigError("term weights must be >= 0")

    @classmethod
    def uniform(cls, n_bins: int, **kwargs) -> "LossWeights":
        ones = np.ones(n_bins)
        return cls(ones.copy(), ones.copy(), ones.copy(), ones.copy(), **kwargs)


def default_band_mask(n_bins: int, taper_fraction: float = 0.1) -> np.ndarray:
    """Band mask excluding DC, Nyquist, and the Hilbert taper zones."""
    mask = ~spectra.taper_zone_mask(n_bins, taper_fraction)
    mask[0] = False
    mask[-1] = False
    return mask


@dataclass
class KKContext:
    """Configuration of the causality regularizer.

    The band mask never includes DC or Nyquist; those bins are cleared on
    construction.
    """

    band_mask: np.ndarray
    taper_fraction: float = 0.1

    def __post_init__(self):
        self.band_mask = np.asarray(self.band_mask, dtype=bool).copy()
        self.band_mask[0] = False
        self.band_mask[-1] = False

    @classmethod
    def for_grid(cls, grid: FrequencyGrid, taper_fraction: float = 0.1) -> "KKContext":
        return cls(default_band_mask(grid.n_bins, taper_fraction), taper_fraction)


def _check_grids(h_true: ComplexSpectrum, h_pred: ComplexSpectrum):
    if h_true.grid != h_pred.grid:
        raise InvalidInputError("spectra live on different frequency grids")
    return h_true.values, h_pred.values


def loss_spec(h_true: ComplexSpectrum, h_pred: ComplexSpectrum, w_spec) -> float:
    """Weighted L1 distance of real and imaginary parts."""
    a, b = _check_grids(h_true, h_pred)
    return float(np.sum(w_spec * (np.abs(a.real - b.real) + np.abs(a.imag - b.imag))))


def loss_spec_grad(h_true: ComplexSpectrum, h_pred: ComplexSpectrum, w_spec) -> np.ndarray:
    a, b = _check_grids(h_true, h_pred)
    return w_spec * (np.sign(b.real - a.real) + 1j * np.sign(b.imag - a.imag))


def loss_mag(h_true: ComplexSpectrum, h_pred: ComplexSpectrum, w_mag) -> float:
    """Weighted L1 distance of magnitudes; blind to phase."""
    a, b = _check_grids(h_true, h_pred)
    return float(np.sum(w_mag * np.abs(np.abs(a) - np.abs(b))))


def loss_mag_grad(h_true: ComplexSpectrum, h_pred: ComplexSpectrum, w_mag) -> np.ndarray:
    a, b = _check_grids(h_true, h_pred)
    mb = np.abs(b)
    sign = np.sign(mb - np.abs(a))
    safe = np.maximum(mb, _ZERO_MAG_GUARD)
    g = w_mag * sign / safe
    out = g * (b.real + 1j * b.imag)
    out[mb < _ZERO_MAG_GUARD] = 0.0
    return out


def _phase_parts(values: np.ndarray):
    m = np.abs(values)
    guarded = m < _ZERO_MAG_GUARD
    safe = np.where(guarded, 1.0, m)
    c = np.where(guarded, 1.0, values.real / safe)
    s = np.where(guarded, 0.0, values.imag / safe)
    return c, s, m, guarded


def loss_phase(h_true: ComplexSpectrum, h_pred: ComplexSpectrum, w_phase) -> float:
    """Weighted L1 distance of (cos, sin) of the phases; wrap-safe."""
    a, b = _check_grids(h_true, h_pred)
    ca, sa, _, _ = _phase_parts(a)
    cb, sb, _, _ = _phase_parts(b)
    return float(np.sum(w_phase * (np.abs(ca - cb) + np.abs(sa - sb))))


def loss_phase_grad(h_true: ComplexSpectrum, h_pred: ComplexSpectrum, w_phase) -> np.ndarray:
    a, b = _check_grids(h_true, h_pred)
    ca, sa, _, _ = _phase_parts(a)
    cb, sb, mb, guarded = _phase_parts(b)
    sign_c = np.sign(cb - ca)
    sign_s = np.sign(sb - sa)
    m3 = np.maximum(mb, _ZERO_MAG_GUARD) ** 3
    re, im = b.real, b.imag
    g_re = w_phase * (sign_c * im * im - sign_s * re * im) / m3
    g_im = w_phase * (-sign_c * re * im + sign_s * re * re) / m3
    out = g_re + 1j * g_im
    out[guarded] = 0.0
    return out


def loss_env(
    h_true: ComplexSpectrum,
    h_pred: ComplexSpectrum,
    w_env,
    alpha: float = 0.1,
    epsilon: float = 1e-6,
) -> float:
    """L1 distance of smoothed weighted log-magnitude envelopes."""
    _check_grids(h_true, h_pred)
    e_true = spectra.smooth_log_envelope(h_true, w_env, alpha, epsilon)
    e_pred = spectra.smooth_log_envelope(h_pred, w_env, alpha, epsilon)
    return float(np.sum(np.abs(e_true - e_pred)))


def loss_env_grad(
    h_true: ComplexSpectrum,
    h_pred: ComplexSpectrum,
    w_env,
    alpha: float = 0.1,
    epsilon: float = 1e-6,
) -> np.ndarray:
    _, b = _check_grids(h_true, h_pred)
    e_true = spectra.smooth_log_envelope(h_true, w_env, alpha, epsilon)
    e_pred = spectra.smooth_log_envelope(h_pred, w_env, alpha, epsilon)
    g_smoothed = np.sign(e_pred - e_true)
    g_log = spectra.zero_lag_smooth_adjoint(g_smoothed, alpha)
    mb = np.abs(b)
    g_mag = g_log * w_env / (mb * w_env + epsilon)
    safe = np.maximum(mb, _ZERO_MAG_GUARD)
    out = g_mag / safe * (b.real + 1j * b.imag)
    out[mb < _ZERO_MAG_GUARD] = 0.0
    return out


_hilbert_matrix_cache: dict = {}


def hilbert_matrix(n_bins: int, taper_fraction: float) -> np.ndarray:
    key = (n_bins, taper_fraction)
    if key not in _hilbert_matrix_cache:
        _hilbert_matrix_cache[key] = spectra.hilbert_kk_matrix(n_bins, taper_fraction)
    return _hilbert_matrix_cache[key]


def loss_kk(sigma_batch, beta_batch, kk_scale: float, ctx: KKContext) -> float:
    """Causality penalty: dispersion must match the scaled Hilbert
    transform of absorption over the masked band, averaged over points."""
    value, _, _, _ = loss_kk_with_grad(sigma_batch, beta_batch, kk_scale, ctx)
    return value


def loss_kk_with_grad(sigma_batch, beta_batch, kk_scale: float, ctx: KKContext):
    """Returns (value, g_sigma, g_beta, g_kk_scale)."""
    if not np.any(ctx.band_mask):
        raise InvalidConfigError("band mask is empty")
    sig = np.atleast_2d(np.asarray(sigma_batch, dtype=np.float64))
    bet = np.atleast_2d(np.asarray(beta_batch, dtype=np.float64))
    if sig.shape != bet.shape or sig.shape[1] != ctx.band_mask.size:
        raise InvalidInputError("sigma/beta batch shapes must match the band mask")
    n_pts = sig.shape[0]
    m = hilbert_matrix(sig.shape[1], ctx.taper_fraction)
    beta_hat = sig @ m.T
    r = (bet - kk_scale * beta_hat) * ctx.band_mask
    value = float(np.sum(r * r) / n_pts)
    g_beta = (2.0 / n_pts) * r
    g_beta_hat = -(kk_scale * 2.0 / n_pts) * r
    g_sigma = g_beta_hat @ m
    g_kappa = float(-(2.0 / n_pts) * np.sum(r * beta_hat))
    return value, g_sigma, g_beta, g_kappa


def loss_total(
    h_true: ComplexSpectrum,
    h_pred: ComplexSpectrum,
    field_batch,
    weights: LossWeights,
    ctx: KKContext,
    kk_scale: float = 1.0,
):
    """Weighted combination of all terms.

    ``field_batch`` is a (sigma_batch, beta_batch) pair of per-point
    coefficient vectors, or None to skip the causality term. Returns
    (total, per-term breakdown dict).
    """
    parts = {
        "spec": loss_spec(h_true, h_pred, weights.w_spec),
        "mag": loss_mag(h_true, h_pred, weights.w_mag),
        "phase": loss_phase(h_true, h_pred, weights.w_phase),
        "env": loss_env(h_true, h_pred, weights.w_env, weights.env_alpha, weights.env_epsilon),
    }
    if field_batch is not None:
        sig, bet = field_batch
        parts["kk"] = loss_kk(sig, bet, kk_scale, ctx)
    else:
        parts["kk"] = 0.0
    total = (
        weights.lambda_spec * parts["spec"]
        + weights.lambda_mag * parts["mag"]
        + weights.lambda_phase * parts["phase"]
        + weights.lambda_env * parts["env"]
        + weights.lambda_kk * parts["kk"]
    )
    return total, parts


def loss_total_grad_h(
    h_true: ComplexSpectrum, h_pred: ComplexSpectrum, weights: LossWeights
) -> np.ndarray:
    """Gradient of the spectral terms with respect to the prediction."""
    return (
        weights.lambda_spec * loss_spec_grad(h_true, h_pred, weights.w_spec)
        + weights.lambda_mag * loss_mag_grad(h_true, h_pred, weights.w_mag)
        + weights.lambda_phase * loss_phase_grad(h_true, h_pred, weights.w_phase)
        + weights.lambda_env
        * loss_env_grad(h_true, h_pred, weights.w_env, weights.env_alpha, weights.env_epsilon)
    )


def make_perceptual_weights(grid: FrequencyGrid, profile="uniform", **kwargs) -> LossWeights:
    """Weight profiles for perceptual / hardware-aware supervision.

    Profiles
    --------
    - ``uniform``: all ones.
    - ``lowfreq-phase``: phase weights fall off as ``1 / (1 + f / 500 Hz)``,
      emphasizing phase accuracy where localization depends on it.
    - ``crossover-notch`` (center_hz, width_hz, depth): multiplies the
      spec/mag/phase weights by a Gaussian notch, de-emphasizing a
      hardware crossover band. Also accepted in CLI string form
      ``crossover-notch:<center>:<width>:<depth>``.
    """
    if isinstance(profile, str) and profile.startswith("crossover-notch:"):
        try:
            _, c, w, d = profile.split(":")
            kwargs = {"center_hz": float(c), "width_hz": float(w), "depth": float(d)}
        except ValueError as exc:
            raise InvalidConfigError(f"malformed crossover-notch spec {profile!r}") from exc
        profile = "crossover-notch"

    weights = LossWeights.uniform(grid.n_bins)
    f = grid.bins_hz()
    if profile == "uniform":
        return weights
    if profile == "lowfreq-phase":
        weights.w_phase = 1.0 / (1.0 + f / 500.0)
        return weights
    if profile == "crossover-notch":
        try:
            center = kwargs["center_hz"]
            width = kwargs["width_hz"]
            depth = kwargs["depth"]
        except KeyError as exc:
            raise InvalidConfigError("crossover-notch needs center_hz, width_hz, depth") from exc
        notch = 1.0 - depth * np.exp(-((f - center) ** 2) / (2.0 * width**2))
        weights.w_spec = weights.w_spec * notch
        weights.w_mag = weights.w_mag * notch
        weights.w_phase = weights.w_phase * notch
        return weights
    raise InvalidConfigError(f"unknown weight profile {profile!r}")
