"""Tests for the correlated-fading simulator and empirical estimators.

Statistical tolerances below were sized from pilot runs at the stated seeds;
each carries at least a factor-two margin over the observed deviation so the
tests guard the estimator, not the luck of one draw.
"""

import math

import numpy as np
import pytest

from ris_lcr.channel import (
    ArrayGeometry,
    CorrelationMatrix,
    LinkGains,
    spatial_correlation,
    steering_vector,
)
from ris_lcr.errors import DomainError
from ris_lcr.montecarlo import (
    FadingProcessConfig,
    FadingSeries,
    SnrSeries,
    count_upcrossings,
    empirical_lcr,
    empirical_mean_speed,
    empirical_moments,
    empirical_pdf,
    gen_correlated_fading,
    iter_fading_chunks,
    ris_phase_cascade,
    ris_reflection_matrix,
    snr_series,
)

ACF_TOL = 0.02  # realized-autocorrelation bound at the Bessel first zero
COV_TOL = 0.02  # equal-time covariance entry bound at 1e6 samples
POWER_RTOL = 0.05  # per-element time-average power
LCR_RAYLEIGH_RTOL = 0.03  # empirical vs closed form at >=1000-crossing thresholds
PDF_RTOL = 0.05
IDENTITY_RTOL = 1e-10  # matrix-cascade vs closed-form SNR


def _unit_scalar_corr():
    return CorrelationMatrix.identity(1)


class TestConfigValidation:
    def test_accepts_defaults(self):
        cfg = FadingProcessConfig(n_samples=20_000)
        assert cfg.dt == pytest.approx(1.0 / 64.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_samples=20_000, sample_rate=16),
            dict(n_samples=20_000, n_sinusoids=8),
            dict(n_samples=5_000),
            dict(n_samples=20_000, doppler=0.0),
        ],
    )
    def test_rejects_out_of_contract(self, kwargs):
        with pytest.raises(DomainError):
            FadingProcessConfig(**kwargs)

    def test_dt_tracks_doppler(self):
        cfg = FadingProcessConfig(n_samples=20_000, doppler=25.0, sample_rate=32)
        assert cfg.dt == pytest.approx(1.0 / 800.0)


class TestDeterminism:
    def test_same_seed_and_stream_bit_identical(self):
        corr = spatial_correlation(ArrayGeometry(2, 1, 0.4))
        cfg = FadingProcessConfig(n_samples=10_000, seed=123)
        a = gen_correlated_fading(corr, 1.0, cfg, stream_id=5)
        b = gen_correlated_fading(corr, 1.0, cfg, stream_id=5)
        assert np.array_equal(a.samples, b.samples)

    def test_stream_id_changes_the_draw(self):
        corr = _unit_scalar_corr()
        cfg = FadingProcessConfig(n_samples=10_000, seed=123)
        a = gen_correlated_fading(corr, 1.0, cfg, stream_id=0)
        b = gen_correlated_fading(corr, 1.0, cfg, stream_id=1)
        assert not np.allclose(a.samples, b.samples)

    def test_chunking_is_invisible(self):
        # samples are pure functions of their absolute index, so any chunk
        # size must reproduce the materialized series bit for bit
        corr = spatial_correlation(ArrayGeometry(3, 1, 0.2))
        cfg = FadingProcessConfig(n_samples=12_345, seed=9)
        whole = gen_correlated_fading(corr, 0.8, cfg, stream_id=2).samples
        chunked = np.concatenate(
            list(iter_fading_chunks(corr, 0.8, cfg, stream_id=2, chunk_size=1000)),
            axis=1,
        )
        assert np.array_equal(whole, chunked)

    def test_rejects_bad_chunk_and_gain(self):
        corr = _unit_scalar_corr()
        cfg = FadingProcessConfig(n_samples=10_000)
        with pytest.raises(DomainError):
            next(iter_fading_chunks(corr, 1.0, cfg, 0, chunk_size=0))
        with pytest.raises(DomainError):
            next(iter_fading_chunks(corr, -1.0, cfg, 0))


class TestFadingStatistics:
    def test_per_element_power(self):
        corr = spatial_correlation(ArrayGeometry(2, 1, 0.3))
        cfg = FadingProcessConfig(n_samples=1_000_000, sample_rate=64, seed=7)
        fading = gen_correlated_fading(corr, 2.5, cfg, stream_id=0)
        power = np.mean(np.abs(fading.samples) ** 2, axis=1)
        assert np.all(np.abs(power / 2.5 - 1.0) < POWER_RTOL)

    def test_acf_vanishes_at_bessel_zero(self):
        # first zero of the autocorrelation sits at 2*pi*f*tau = 2.4048;
        # with 128 samples per cycle that is lag 49 (f*tau = 0.3828)
        cfg = FadingProcessConfig(
            n_samples=1_000_000, sample_rate=128, seed=0, n_sinusoids=64
        )
        g = gen_correlated_fading(_unit_scalar_corr(), 1.0, cfg, stream_id=0).samples[0]
        power = np.mean(np.abs(g) ** 2)
        lag = 49
        acf = np.mean(g[lag:] * np.conj(g[:-lag])) / power
        assert abs(acf) < ACF_TOL

    def test_acf_tracks_bessel_at_short_lag(self):
        from ris_lcr.special import bessel_j0

        cfg = FadingProcessConfig(
            n_samples=1_000_000, sample_rate=128, seed=0, n_sinusoids=64
        )
        g = gen_correlated_fading(_unit_scalar_corr(), 1.0, cfg, stream_id=0).samples[0]
        power = np.mean(np.abs(g) ** 2)
        lag = 16  # f*tau = 0.125
        acf = np.mean(g[lag:] * np.conj(g[:-lag])) / power
        assert abs(acf - bessel_j0(2.0 * math.pi * lag / 128.0)) < ACF_TOL

    def test_equal_time_covariance_matches_colored_target(self):
        corr = spatial_correlation(ArrayGeometry(4, 1, 0.3))
        cfg = FadingProcessConfig(n_samples=1_000_000, sample_rate=32, seed=4)
        h = gen_correlated_fading(corr, 1.0, cfg, stream_id=0).samples
        cov = (h @ h.conj().T) / h.shape[1]
        assert np.abs(cov - corr.entries).max() < COV_TOL


class TestPhaseCascade:
    def test_single_element(self):
        assert ris_phase_cascade(np.array([1.0 + 0j]), np.ones(1)) == pytest.approx(1.0)

    def test_envelope_sum(self):
        y = ris_phase_cascade(np.array([3.0 + 4.0j, 0.0 + 1.0j]), np.ones(2))
        assert y == pytest.approx(6.0)

    def test_vectorized_over_time(self):
        h = np.array([[1.0 + 0j, 3.0 + 4.0j], [0 + 1.0j, 0 - 1.0j]])
        np.testing.assert_allclose(ris_phase_cascade(h, np.ones(2)), [2.0, 6.0])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            ris_phase_cascade(np.ones(3, dtype=complex), np.ones(2))
        with pytest.raises(DomainError):
            ris_reflection_matrix(np.ones(3, dtype=complex), np.ones(2), 1.0 + 0j)

    def test_matrix_cascade_equals_closed_form(self):
        # the optimality algebra: with the explicit diagonal reflection
        # matrix and nu aligned to the combined direct path, the effective
        # channel norm reproduces the three-term closed form exactly
        rng = np.random.default_rng(42)
        m, n, beta_rb, scale = 4, 8, 0.37, 2.0
        a_b = steering_vector(ArrayGeometry(2, 2, 0.5), math.pi / 3, math.pi / 4)
        a_r = steering_vector(ArrayGeometry(4, 2, 0.1), math.pi / 2.5, math.pi / 5)
        h_rb = math.sqrt(beta_rb) * np.outer(a_b, np.conj(a_r))
        for _ in range(50):
            h_d = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2)
            h_ur = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
            nu = np.exp(1j * np.angle(np.conj(a_b) @ h_d))
            phi = ris_reflection_matrix(h_ur, a_r, nu)
            lhs = scale * np.linalg.norm(h_d + h_rb @ phi @ h_ur) ** 2
            y = ris_phase_cascade(h_ur, a_r)
            rhs = scale * (
                np.linalg.norm(h_d) ** 2
                + 2.0 * math.sqrt(beta_rb) * y * abs(np.conj(a_b) @ h_d)
                + m * beta_rb * y**2
            )
            assert lhs == pytest.approx(rhs, rel=IDENTITY_RTOL)


class TestSnrSeries:
    def _series(self, values):
        return FadingSeries(samples=np.asarray(values), dt=1.0, doppler=1.0)

    def test_hand_example(self):
        s = snr_series(
            self._series([[1.0 + 0j]]),
            self._series([[1.0 + 0j]]),
            LinkGains(1.0, 1.0, 1.0),
            np.ones(1),
            np.ones(1),
            1.0,
        )
        assert s.values[0] == pytest.approx(4.0)

    def test_blocked_reflection_collapses_to_direct(self):
        s = snr_series(
            self._series([[1.0 + 0j, 2.0j]]),
            self._series([[1.0 + 0j, 1.0 + 0j]]),
            LinkGains(1.0, 0.0, 1.0),
            np.ones(1),
            np.ones(1),
            3.0,
        )
        np.testing.assert_allclose(s.values, [3.0, 12.0])

    def test_absent_direct_collapses_to_quadratic(self):
        s = snr_series(
            None,
            self._series([[1.0 + 0j]]),
            LinkGains(1.0, 1.0, 1.0),
            np.ones(2),  # M = 2
            np.ones(1),
            3.0,
        )
        assert s.values[0] == pytest.approx(6.0)

    def test_input_validation(self):
        g = LinkGains(1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            snr_series(None, None, g, np.ones(1), np.ones(1), 1.0)
        direct = self._series([[1.0 + 0j]])
        slow = FadingSeries(samples=np.ones((1, 1), dtype=complex), dt=2.0, doppler=1.0)
        with pytest.raises(DomainError):
            snr_series(direct, slow, g, np.ones(1), np.ones(1), 1.0)
        longer = self._series([[1.0 + 0j, 1.0 + 0j]])
        with pytest.raises(DomainError):
            snr_series(direct, longer, g, np.ones(1), np.ones(1), 1.0)
        with pytest.raises(DomainError):
            snr_series(direct, None, g, np.ones(2), np.ones(1), 1.0)

    def test_snr_values_must_be_sane(self):
        with pytest.raises(DomainError):
            SnrSeries(values=np.array([1.0, -0.5]), dt=1.0, doppler_norm=1.0)
        with pytest.raises(DomainError):
            SnrSeries(values=np.array([1.0, np.nan]), dt=1.0, doppler_norm=1.0)
        with pytest.raises(DomainError):
            SnrSeries(values=np.ones((2, 2)), dt=1.0, doppler_norm=1.0)


class TestCrossingCounts:
    def test_alternating(self):
        s = SnrSeries(values=np.array([0.5, 1.5, 0.5, 1.5]), dt=1.0, doppler_norm=1.0)
        assert count_upcrossings(s, 1.0) == 2

    def test_constant(self):
        s = SnrSeries(values=np.full(4, 2.0), dt=1.0, doppler_norm=1.0)
        assert count_upcrossings(s, 1.0) == 0

    def test_monotone_single_crossing(self):
        s = SnrSeries(values=np.linspace(0.1, 3.0, 50), dt=1.0, doppler_norm=1.0)
        assert count_upcrossings(s, 1.0) == 1

    def test_touch_from_below_counts_once(self):
        s = SnrSeries(values=np.array([0.5, 1.0, 0.5]), dt=1.0, doppler_norm=1.0)
        assert count_upcrossings(s, 1.0) == 1


class TestEmpiricalEstimators:
    def _offset_sinusoid(self, cycles, rate=512):
        t = np.arange(rate * cycles + 1) / rate
        values = 1.2 + np.sin(2.0 * math.pi * t + 0.37)
        return SnrSeries(values=values, dt=1.0 / rate, doppler_norm=1.0)

    def test_sinusoid_crosses_once_per_cycle(self):
        series = self._offset_sinusoid(150)
        # threshold at the midline, where the sinusoid rises once per cycle
        curve = empirical_lcr(series, [10.0 * math.log10(1.2)])
        assert curve.n_crossings[0] == 150
        assert curve.values[0] == pytest.approx(1.0, rel=1e-12)
        assert not curve.flagged[0]

    def test_sparse_crossings_are_flagged_not_dropped(self):
        series = self._offset_sinusoid(50)
        curve = empirical_lcr(series, [10.0 * math.log10(1.2)])
        assert curve.flagged[0]
        assert curve.values[0] == pytest.approx(1.0, rel=1e-12)

    def test_sinusoid_mean_speed(self):
        # mean |d/dt (A sin)| = 4 A f; central differences at 512 samples
        # per cycle recover it to a few 1e-5
        rate, amp = 512, 1.5
        t = np.arange(rate * 40 + 1) / rate
        s = SnrSeries(
            values=2.0 + amp * np.sin(2.0 * math.pi * t),
            dt=1.0 / rate,
            doppler_norm=1.0,
        )
        assert empirical_mean_speed(s) == pytest.approx(4.0 * amp, rel=1e-3)

    def test_moments_of_plain_samples(self):
        mean, var = empirical_moments(np.array([1.0, 2.0, 3.0, 4.0]))
        assert mean == pytest.approx(2.5)
        assert var == pytest.approx(5.0 / 3.0)

    def test_degenerate_series_rejected(self):
        flat = SnrSeries(values=np.full(100, 2.0), dt=1.0, doppler_norm=1.0)
        with pytest.raises(DomainError):
            empirical_lcr(flat, [0.0])
        with pytest.raises(DomainError):
            empirical_pdf(flat, 10)
        with pytest.raises(DomainError):
            empirical_mean_speed(flat)
        with pytest.raises(DomainError):
            empirical_moments(np.array([1.0]))


@pytest.fixture(scope="module")
def rayleigh_snr():
    cfg = FadingProcessConfig(n_samples=1_000_000, sample_rate=64, seed=0)
    h_ur = gen_correlated_fading(_unit_scalar_corr(), 1.0, cfg, stream_id=1)
    return snr_series(
        None, h_ur, LinkGains(0.0, 1.0, 1.0), np.ones(1), np.ones(1), 1.0
    )


class TestAgainstRayleighClosedForm:
    """Single-element reflected-only chain: SNR is exponential, the
    crossing rate has the classical sqrt(2 pi T/g) exp(-T/g) form."""

    def test_lcr_matches_closed_form(self, rayleigh_snr):
        gbar = rayleigh_snr.values.mean()
        thresholds = np.array([0.1, 0.5, 1.0, 2.0]) * gbar
        curve = empirical_lcr(rayleigh_snr, 10.0 * np.log10(thresholds))
        assert np.all(curve.n_crossings >= 1000)
        exact = np.sqrt(2.0 * math.pi * thresholds / gbar) * np.exp(-thresholds / gbar)
        np.testing.assert_allclose(curve.values, exact, rtol=LCR_RAYLEIGH_RTOL)

    def test_pdf_matches_exponential(self, rayleigh_snr):
        gbar = rayleigh_snr.values.mean()
        edges = np.linspace(0.2 * gbar, 1.5 * gbar, 16)
        centers, density = empirical_pdf(rayleigh_snr, edges)
        exact = np.exp(-centers / gbar) / gbar
        np.testing.assert_allclose(density, exact, rtol=PDF_RTOL)
