"""Tests for the shared experiment engine.

The heavy statistical claims live in the acceptance battery; here we verify
the orchestration itself: variant composition matches hand-built SNR series
sample for sample, chunked/threaded execution changes nothing, and the
analytic curve helpers behave.
"""

import numpy as np
import pytest

from ris_lcr.analytic import lcr_ris, y_moments
from ris_lcr.channel import ArrayGeometry, SceneConfig, build_scene
from ris_lcr.errors import DomainError
from ris_lcr.experiments import (
    ChannelVariant,
    analytic_direct_curve,
    analytic_ris_curve,
    auto_grid,
    curve_crossings,
    direct_mode_db,
    direct_spectrum,
    ris_mode_db,
    scene_ris_params,
    simulate_scene,
)
from ris_lcr.montecarlo import (
    FadingProcessConfig,
    LcrCurve,
    empirical_lcr,
    gen_correlated_fading,
    snr_series,
)

# engine output must agree with a hand-composed series to float noise only
COMPOSE_RTOL = 1e-12

SCENE = SceneConfig(bs=ArrayGeometry(2, 1, 0.4), ris=ArrayGeometry(2, 1, 0.3))
MC = FadingProcessConfig(n_samples=30_000, sample_rate=64, n_sinusoids=32, seed=11)
GRID = np.linspace(-18.0, 6.0, 13)


def _hand_series(scene, mc, replicate=0, direct_power=1.0, cascade_power=1.0):
    arrays = build_scene(scene)
    gains = arrays.gains
    h_d = gen_correlated_fading(arrays.corr_bs, gains.beta_d * direct_power, mc, 2 * replicate)
    h_ur = gen_correlated_fading(
        arrays.corr_ris, gains.beta_ur * cascade_power, mc, 2 * replicate + 1
    )
    return arrays, h_d, h_ur


class TestVariantComposition:
    def test_full_matches_hand_built_series(self):
        arrays, h_d, h_ur = _hand_series(SCENE, MC)
        ref = empirical_lcr(
            snr_series(
                h_d, h_ur, arrays.gains, arrays.a_b, arrays.a_r, SCENE.snr_scale
            ),
            GRID,
        )
        out = simulate_scene(
            SCENE, [ChannelVariant("full", mode="full")], GRID, MC, 1
        )
        np.testing.assert_array_equal(out["full"].curve.n_crossings, ref.n_crossings)
        np.testing.assert_allclose(out["full"].curve.values, ref.values, rtol=COMPOSE_RTOL)

    def test_single_link_variants_match(self):
        arrays, h_d, h_ur = _hand_series(SCENE, MC)
        ref_d = empirical_lcr(
            snr_series(h_d, None, arrays.gains, arrays.a_b, arrays.a_r, SCENE.snr_scale),
            GRID,
        )
        ref_r = empirical_lcr(
            snr_series(None, h_ur, arrays.gains, arrays.a_b, arrays.a_r, SCENE.snr_scale),
            GRID,
        )
        out = simulate_scene(
            SCENE,
            [ChannelVariant("direct", mode="direct"), ChannelVariant("ris", mode="ris")],
            GRID,
            MC,
            1,
        )
        np.testing.assert_array_equal(out["direct"].curve.n_crossings, ref_d.n_crossings)
        np.testing.assert_array_equal(out["ris"].curve.n_crossings, ref_r.n_crossings)

    def test_power_scaling_equals_scaled_gains(self):
        # scaling a variant's link powers must equal scaling the field amplitudes
        arrays, h_d, h_ur = _hand_series(SCENE, MC, direct_power=0.25, cascade_power=0.5)
        ref = empirical_lcr(
            snr_series(
                h_d, h_ur, arrays.gains, arrays.a_b, arrays.a_r, SCENE.snr_scale
            ),
            GRID,
        )
        out = simulate_scene(
            SCENE,
            [ChannelVariant("shadow", mode="full", direct_power=0.25, cascade_power=0.5)],
            GRID,
            MC,
            1,
        )
        np.testing.assert_array_equal(out["shadow"].curve.n_crossings, ref.n_crossings)

    def test_variants_share_fading(self):
        # same pass, so the full variant majorizes the ris-only one pointwise
        out = simulate_scene(
            SCENE,
            [ChannelVariant("ris", mode="ris"), ChannelVariant("full", mode="full")],
            GRID,
            MC,
            1,
            collect_y=True,
        )
        assert out["full"].snr_mean > out["ris"].snr_mean


class TestDeterminism:
    def test_threads_do_not_change_counts(self):
        kwargs = dict(scene=SCENE, variants=[ChannelVariant("full", mode="full")],
                      thresholds_db=GRID, mc=MC, n_replicates=3)
        seq = simulate_scene(**kwargs, threads=1)
        par = simulate_scene(**kwargs, threads=3)
        np.testing.assert_array_equal(
            seq["full"].curve.n_crossings, par["full"].curve.n_crossings
        )
        np.testing.assert_array_equal(seq["full"].curve.values, par["full"].curve.values)
        np.testing.assert_array_equal(seq["full"].curve.ci_low, par["full"].curve.ci_low)

    def test_chunk_size_does_not_change_counts(self):
        a = simulate_scene(
            SCENE, [ChannelVariant("full", mode="full")], GRID, MC, 1, chunk_size=7_001
        )
        b = simulate_scene(
            SCENE, [ChannelVariant("full", mode="full")], GRID, MC, 1, chunk_size=30_000
        )
        np.testing.assert_array_equal(
            a["full"].curve.n_crossings, b["full"].curve.n_crossings
        )

    def test_base_stream_changes_draw(self):
        a = simulate_scene(SCENE, [ChannelVariant("full", mode="full")], GRID, MC, 1)
        b = simulate_scene(
            SCENE, [ChannelVariant("full", mode="full")], GRID, MC, 1, base_stream=5
        )
        assert not np.array_equal(
            a["full"].curve.n_crossings, b["full"].curve.n_crossings
        )


class TestReplicateAggregation:
    def test_ci_brackets_pooled_rate(self):
        out = simulate_scene(
            SCENE, [ChannelVariant("ris", mode="ris")], GRID, MC, 3
        )
        curve = out["ris"].curve
        assert curve.ci_low is not None and curve.ci_high is not None
        sel = curve.values > 0
        assert np.all(curve.ci_low[sel] <= curve.values[sel])
        assert np.all(curve.values[sel] <= curve.ci_high[sel])

    def test_single_replicate_has_no_ci(self):
        out = simulate_scene(SCENE, [ChannelVariant("ris", mode="ris")], GRID, MC, 1)
        assert out["ris"].curve.ci_low is None

    def test_collected_moments_near_analytic(self):
        arrays = build_scene(SCENE)
        mean, var = y_moments(arrays.corr_ris, arrays.gains.beta_ur)
        out = simulate_scene(
            SCENE, [ChannelVariant("ris", mode="ris")], GRID, MC, 2, collect_y=True
        )
        assert out.y_mean == pytest.approx(mean, rel=0.05)
        assert out.y_var == pytest.approx(var, rel=0.30)
        assert out.y_fd_var > 0


class TestValidation:
    def test_rejects_empty_variants(self):
        with pytest.raises(DomainError):
            simulate_scene(SCENE, [], GRID, MC, 1)

    def test_rejects_duplicate_labels(self):
        with pytest.raises(DomainError):
            simulate_scene(
                SCENE,
                [ChannelVariant("x", mode="ris"), ChannelVariant("x", mode="full")],
                GRID,
                MC,
                1,
            )

    def test_rejects_bad_replicates(self):
        with pytest.raises(DomainError):
            simulate_scene(SCENE, [ChannelVariant("ris", mode="ris")], GRID, MC, 0)

    def test_collect_y_needs_reflected_variant(self):
        with pytest.raises(DomainError):
            simulate_scene(
                SCENE,
                [ChannelVariant("direct", mode="direct")],
                GRID,
                MC,
                1,
                collect_y=True,
            )

    def test_variant_rejects_bad_mode(self):
        with pytest.raises(DomainError):
            ChannelVariant("x", mode="sideways")

    def test_variant_rejects_negative_power(self):
        with pytest.raises(DomainError):
            ChannelVariant("x", mode="full", direct_power=-0.5)


class TestAnalyticHelpers:
    def test_ris_curve_matches_pointwise_formula(self):
        params = scene_ris_params(SCENE)
        grid = np.linspace(-20.0, 0.0, 9)
        curve = analytic_ris_curve(SCENE, grid)
        ref = [lcr_ris(10 ** (db / 10), params) for db in grid]
        np.testing.assert_allclose(curve.values, ref, rtol=1e-12)
        assert curve.source == "analytic"

    def test_modes_are_local_maxima(self):
        params = scene_ris_params(SCENE)
        mode_db = ris_mode_db(SCENE)
        for delta in (-0.3, 0.3):
            assert lcr_ris(10 ** ((mode_db + delta) / 10), params) < lcr_ris(
                10 ** (mode_db / 10), params
            )
        spectrum = direct_spectrum(SCENE)
        dmode = direct_mode_db(spectrum, SCENE.f_d)
        curve, _ = analytic_direct_curve(
            SCENE, np.array([dmode - 0.3, dmode, dmode + 0.3])
        )
        assert curve.values[1] == max(curve.values)

    def test_auto_grid_shape(self):
        grid = auto_grid(3.2, span_below=5.0, span_above=2.0, step=0.5)
        assert np.all(np.diff(grid) > 0)
        np.testing.assert_allclose(np.diff(grid), 0.5)
        assert grid[0] <= 3.2 - 5.0 + 0.5 and grid[-1] >= 3.2 + 2.0 - 0.5

    def test_curve_crossings_interpolates(self):
        curve = LcrCurve(
            thresholds_db=np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
            values=np.array([0.0, 0.5, 1.0, 0.5, 0.0]),
            source="analytic",
        )
        lo, hi = curve_crossings(curve, 0.25)
        assert lo == pytest.approx(0.5)
        assert hi == pytest.approx(3.5)

    def test_curve_crossings_needs_bracketing(self):
        curve = LcrCurve(
            thresholds_db=np.array([0.0, 1.0, 2.0]),
            values=np.array([0.2, 0.4, 0.3]),
            source="analytic",
        )
        with pytest.raises(DomainError):
            curve_crossings(curve, 0.9)  # peak below the level
        with pytest.raises(DomainError):
            curve_crossings(curve, 0.25)  # left flank never drops below
