import numpy as np
import pytest

from freqfield import spectra
from freqfield.errors import InvalidInputError


@pytest.fixture
def grid():
    return spectra.FrequencyGrid(512, 16000)


def test_grid_invariants(grid):
    assert grid.n_bins == 257
    assert grid.bin_hz(0) == 0.0
    assert grid.bin_hz(grid.n_bins - 1) == grid.sample_rate / 2.0


@pytest.mark.parametrize("n_fft", [7, 6, 9, 0, -4])
def test_grid_rejects_bad_n_fft(n_fft):
    with pytest.raises(InvalidInputError):
        spectra.FrequencyGrid(n_fft, 16000)


def test_spectrum_shape_check(grid):
    with pytest.raises(InvalidInputError):
        spectra.ComplexSpectrum(grid, np.zeros(grid.n_bins - 1, dtype=complex))
    with pytest.raises(InvalidInputError):
        spectra.ImpulseResponse(grid, np.zeros(grid.n_fft + 1))


def test_delta_transforms_to_flat_spectrum():
    g = spectra.FrequencyGrid(8, 8000)
    ir = np.zeros(8)
    ir[0] = 1.0
    spec = spectra.forward_spectrum(spectra.ImpulseResponse(g, ir))
    assert np.allclose(spec.values, np.ones(5), atol=1e-14)


def test_shifted_delta_phase():
    g = spectra.FrequencyGrid(16, 8000)
    d = 3
    ir = np.zeros(16)
    ir[d] = 1.0
    spec = spectra.forward_spectrum(spectra.ImpulseResponse(g, ir))
    i = np.arange(g.n_bins)
    expected = np.exp(-2j * np.pi * i * d / g.n_fft)
    assert np.allclose(spec.values, expected, atol=1e-13)
    assert np.allclose(np.abs(spec.values), 1.0, atol=1e-13)


def test_fft_round_trip(grid):
    rng = np.random.default_rng(7)
    for n_fft in (8, 64, 4096):
        g = spectra.FrequencyGrid(n_fft, 48000)
        x = rng.normal(size=n_fft)
        back = spectra.inverse_ir(spectra.forward_spectrum(spectra.ImpulseResponse(g, x)))
        assert np.max(np.abs(back.samples - x)) <= 1e-9 * max(1.0, np.max(np.abs(x)))


def test_inverse_flat_spectrum_is_delta():
    g = spectra.FrequencyGrid(32, 8000)
    spec = spectra.ComplexSpectrum(g, np.ones(g.n_bins, dtype=complex))
    ir = spectra.inverse_ir(spec)
    expected = np.zeros(32)
    expected[0] = 1.0
    assert np.allclose(ir.samples, expected, atol=1e-13)


def test_inverse_shifted_delta_spectrum():
    g = spectra.FrequencyGrid(32, 8000)
    d = 5
    i = np.arange(g.n_bins)
    spec = spectra.ComplexSpectrum(g, np.exp(-2j * np.pi * i * d / g.n_fft))
    ir = spectra.inverse_ir(spec)
    assert np.argmax(np.abs(ir.samples)) == d
    assert ir.samples[d] == pytest.approx(1.0, abs=1e-12)


def test_inverse_warns_on_complex_dc():
    g = spectra.FrequencyGrid(8, 8000)
    values = np.ones(5, dtype=complex)
    values[0] = 1.0 + 0.5j
    with pytest.warns(UserWarning):
        spectra.inverse_ir(spectra.ComplexSpectrum(g, values))


def test_free_field_spectrum_time_peak():
    # oracle-style check: 1/(4 pi r) e^{-j 2 pi f r / v} peaks at round(r/v*sr)
    g = spectra.FrequencyGrid(4096, 48000)
    r, v = 3.43, 343.0
    f = g.bins_hz()
    spec = spectra.ComplexSpectrum(g, np.exp(-2j * np.pi * f * r / v) / (4 * np.pi * r))
    ir = spectra.inverse_ir(spec)
    assert np.argmax(np.abs(ir.samples)) == round(r / v * g.sample_rate)


def test_parseval(grid):
    rng = np.random.default_rng(3)
    x = rng.normal(size=grid.n_fft)
    spec = spectra.forward_spectrum(spectra.ImpulseResponse(grid, x))
    mags2 = np.abs(spec.values) ** 2
    rhs = (mags2[0] + mags2[-1] + 2 * mags2[1:-1].sum()) / grid.n_fft
    lhs = np.sum(x**2)
    assert abs(lhs - rhs) <= 1e-6 * abs(lhs)


class TestHilbert:
    def test_constant_maps_to_zero(self, grid):
        out = spectra.hilbert_kk(np.full(grid.n_bins, 4.2), 0.1)
        assert np.all(out == 0.0)

    def test_cos_sin_pair(self, grid):
        n = grid.n_bins
        n_ext = 2 * n - 2
        i = np.arange(n)
        out = spectra.hilbert_kk(np.cos(2 * np.pi * 3 * i / n_ext), 0.1)
        expected = np.sin(2 * np.pi * 3 * i / n_ext)
        outside = ~spectra.taper_zone_mask(n, 0.1)
        assert np.max(np.abs(out - expected)[outside]) <= 1e-3

    def test_against_direct_dft_sign_flip(self, grid):
        # independent oracle: naive O(n^2) DFT with the -j*sgn multiplier
        rng = np.random.default_rng(11)
        n = 33
        prof = rng.normal(size=n)
        ext = np.concatenate([prof, prof[1:-1][::-1]])
        n_ext = ext.size
        k = np.arange(n_ext)
        dft = np.exp(-2j * np.pi * np.outer(k, k) / n_ext) @ ext
        mult = np.zeros(n_ext, dtype=complex)
        mult[1 : n_ext // 2] = -1j
        mult[n_ext // 2 + 1 :] = 1j
        back = (np.exp(2j * np.pi * np.outer(k, k) / n_ext) @ (dft * mult)) / n_ext
        expected = back.real[:n]  # untapered
        got = spectra.hilbert_kk(prof, 0.0)
        assert np.max(np.abs(got - expected)) <= 1e-10

    def test_linearity(self, grid):
        rng = np.random.default_rng(5)
        x = rng.normal(size=grid.n_bins)
        y = rng.normal(size=grid.n_bins)
        a, b = 2.5, -1.7
        lhs = spectra.hilbert_kk(a * x + b * y)
        rhs = a * spectra.hilbert_kk(x) + b * spectra.hilbert_kk(y)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))

    def test_taper_fraction_validation(self, grid):
        with pytest.raises(InvalidInputError):
            spectra.hilbert_kk(np.ones(grid.n_bins), 0.6)
        with pytest.raises(InvalidInputError):
            spectra.hilbert_kk(np.ones(grid.n_bins), -0.1)

    def test_matrix_matches_function(self):
        rng = np.random.default_rng(2)
        m = spectra.hilbert_kk_matrix(65, 0.1)
        v = rng.normal(size=65)
        assert np.allclose(m @ v, spectra.hilbert_kk(v, 0.1), atol=1e-12)

    def test_batched_rows(self):
        rng = np.random.default_rng(8)
        batch = rng.normal(size=(4, 33))
        out = spectra.hilbert_kk(batch, 0.1)
        for i in range(4):
            assert np.allclose(out[i], spectra.hilbert_kk(batch[i], 0.1), atol=1e-14)


class TestEnvelope:
    def test_constant_magnitude(self, grid):
        m = 0.7
        spec = spectra.ComplexSpectrum(
            grid, m * np.exp(1j * np.linspace(0, 9, grid.n_bins))
        )
        out = spectra.smooth_log_envelope(spec, np.ones(grid.n_bins), 0.25, 1e-6)
        assert np.allclose(out, np.log(m + 1e-6), atol=1e-12)

    def test_alpha_one_is_identity(self, grid):
        rng = np.random.default_rng(4)
        vals = rng.normal(size=grid.n_bins) + 1j * rng.normal(size=grid.n_bins)
        spec = spectra.ComplexSpectrum(grid, vals)
        w = np.ones(grid.n_bins)
        out = spectra.smooth_log_envelope(spec, w, 1.0, 1e-6)
        assert np.allclose(out, np.log(np.abs(vals) + 1e-6), atol=1e-14)

    def test_spike_matches_direct_recurrence(self):
        g = spectra.FrequencyGrid(64, 8000)
        n = g.n_bins
        vals = np.zeros(n, dtype=complex)
        vals[n // 2] = 5.0
        spec = spectra.ComplexSpectrum(g, vals)
        alpha, eps = 0.3, 1e-6
        out = spectra.smooth_log_envelope(spec, np.ones(n), alpha, eps)

        # independent re-run of the stated recurrence
        e = np.log(np.abs(vals) + eps)
        fwd = np.empty(n)
        fwd[0] = e[0]
        for i in range(1, n):
            fwd[i] = alpha * e[i] + (1 - alpha) * fwd[i - 1]
        bwd = np.empty(n)
        bwd[-1] = e[-1]
        for i in range(n - 2, -1, -1):
            bwd[i] = alpha * e[i] + (1 - alpha) * bwd[i + 1]
        expected = 0.5 * (fwd + bwd)
        assert np.max(np.abs(out - expected)) <= 1e-12

        # spike spreads and decays monotonically on each side
        peak = np.argmax(out)
        assert np.all(np.diff(out[: peak + 1]) >= 0)
        assert np.all(np.diff(out[peak:]) <= 0)

    def test_palindrome_reversal_invariance(self):
        g = spectra.FrequencyGrid(64, 8000)
        n = g.n_bins
        rng = np.random.default_rng(6)
        mags = rng.uniform(0.1, 2.0, size=n)
        mags = 0.5 * (mags + mags[::-1])  # force exact palindrome
        spec = spectra.ComplexSpectrum(g, mags.astype(complex))
        out = spectra.smooth_log_envelope(spec, np.ones(n), 0.4, 1e-6)
        assert np.allclose(out, out[::-1], atol=1e-12)

    def test_parameter_validation(self, grid):
        spec = spectra.ComplexSpectrum(grid, np.ones(grid.n_bins, dtype=complex))
        w = np.ones(grid.n_bins)
        with pytest.raises(InvalidInputError):
            spectra.smooth_log_envelope(spec, w, 0.0, 1e-6)
        with pytest.raises(InvalidInputError):
            spectra.smooth_log_envelope(spec, w, 0.5, 0.0)
        with pytest.raises(InvalidInputError):
            spectra.smooth_log_envelope(spec, -w, 0.5, 1e-6)


def test_smoother_adjoint_identity():
    rng = np.random.default_rng(9)
    for alpha in (0.1, 0.5, 1.0):
        a = rng.normal(size=40)
        b = rng.normal(size=40)
        lhs = np.dot(spectra.zero_lag_smooth(a, alpha), b)
        rhs = np.dot(a, spectra.zero_lag_smooth_adjoint(b, alpha))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
