"""Acceptance battery: one check per reproduction target.

Each check function is self-contained, returns a :class:`CheckResult`, and is
consumed both by the test suite and by the CLI ``validate`` scenario.  Monte
Carlo checks use pinned seeds and sample budgets sized so the expected
statistical error sits at less than half the stated tolerance; the tolerances
themselves are the acceptance contract and are not tuned to the draws.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .analytic import (
    group_eigenvalues,
    lcr_direct_exact,
    lcr_direct_numeric_cf,
    lcr_direct_stable,
    lcr_ris,
    lcr_ris_exact_form,
    mean_snr_speed_direct,
    mean_snr_speed_ris,
    omega_sq,
    y_moments,
)
from .channel import (
    ArrayGeometry,
    CorrelationMatrix,
    LinkGains,
    SceneConfig,
    build_scene,
    scaled_eigenvalues,
)
from .errors import DomainError
from .experiments import (
    ChannelVariant,
    analytic_ris_curve,
    auto_grid,
    curve_crossings,
    direct_mode_db,
    direct_spectrum,
    ris_mode_db,
    scene_ris_params,
    simulate_scene,
)
from .montecarlo import (
    FadingProcessConfig,
    SnrSeries,
    empirical_lcr,
    empirical_mean_speed,
    gen_correlated_fading,
    ris_phase_cascade,
    ris_reflection_matrix,
    snr_series,
)


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    description: str
    passed: bool
    measured: str
    tolerance: str
    runtime_s: float


def _finish(
    check_id: str,
    description: str,
    passed: bool,
    measured: str,
    tolerance: str,
    t0: float,
) -> CheckResult:
    return CheckResult(
        check_id=check_id,
        description=description,
        passed=bool(passed),
        measured=measured,
        tolerance=tolerance,
        runtime_s=time.time() - t0,
    )


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

_BS_DEFAULT = ArrayGeometry(8, 4, 0.5)
_RIS_DEFAULT = ArrayGeometry(16, 8, 0.1)

_RIS_GEOMETRY = {2: (2, 1), 4: (2, 2), 16: (4, 4), 64: (8, 8), 128: (16, 8)}


def _ris_scene(n: int, spacing: float) -> SceneConfig:
    nx, nz = _RIS_GEOMETRY[n]
    return SceneConfig(bs=_BS_DEFAULT, ris=ArrayGeometry(nx, nz, spacing))


def _narrow_bin_edges(t_lin: np.ndarray, half_width: float = 0.05) -> np.ndarray:
    """Histogram edges forming a +-5% bin around each threshold plus gap bins;
    the density read at even bin indices estimates the PDF at the thresholds."""
    edges = np.sort(np.concatenate([t_lin * (1 - half_width), t_lin * (1 + half_width)]))
    if np.any(np.diff(edges) <= 0):
        raise DomainError("threshold spacing too tight for disjoint pdf bins")
    return edges


def _iid_snr_series(
    weights: np.ndarray, config: FadingProcessConfig, stream_id: int
) -> SnrSeries:
    """SNR trajectory sum_i w_i |g_i(t)|^2 with iid unit-power fading rays."""
    fading = gen_correlated_fading(
        CorrelationMatrix.identity(len(weights)), 1.0, config, stream_id
    )
    values = weights @ (np.abs(fading.samples) ** 2)
    return SnrSeries(values=values, dt=fading.dt, doppler_norm=fading.doppler)


# ---------------------------------------------------------------------------
# the checks
# ---------------------------------------------------------------------------


def check_single_element_chain() -> CheckResult:
    """Single-element reflected path: closed form, density-fed form, and
    simulation all coincide."""
    t0 = time.time()
    # analytic half: density-fed crossing rate against the closed form
    c, beta_ur, f = 2.0, 3.0, 1.0
    gamma_bar = c * beta_ur
    omega2 = math.pi**2 * f**2 * beta_ur
    ts = np.geomspace(gamma_bar / 100, 10 * gamma_bar, 60)
    closed = np.sqrt(2 * math.pi * ts / gamma_bar) * np.exp(-ts / gamma_bar)
    fed = np.array(
        [
            lcr_ris_exact_form(t, c, omega2, math.exp(-t / gamma_bar) / gamma_bar, f)
            for t in ts
        ]
    )
    dev_analytic = float(np.max(np.abs(fed - closed) / closed))

    # simulation half: unit-mean exponential SNR, 1e6 samples
    config = FadingProcessConfig(
        n_samples=1_000_000, sample_rate=64, n_sinusoids=64, seed=0
    )
    h_ur = gen_correlated_fading(CorrelationMatrix.identity(1), 1.0, config, 4)
    series = snr_series(
        None,
        h_ur,
        LinkGains(beta_d=0.0, beta_rb=1.0, beta_ur=1.0),
        a_b=np.ones(1, dtype=complex),
        a_r=np.ones(1, dtype=complex),
        snr_scale=1.0,
    )
    levels = np.array([0.1, 0.5, 1.0, 2.0])
    curve = empirical_lcr(series, 10 * np.log10(levels))
    target = np.sqrt(2 * math.pi * levels) * np.exp(-levels)
    dev_mc = float(np.max(np.abs(curve.values - target) / target))
    min_cross = int(curve.n_crossings.min())

    runtime = time.time() - t0
    passed = (
        dev_analytic <= 1e-12 and dev_mc <= 0.03 and min_cross >= 1000 and runtime < 60
    )
    return _finish(
        "single-element-chain",
        "N=1 reflected path: density-fed form vs closed form (1e-12) and vs "
        "simulation (3%)",
        passed,
        f"analytic dev {dev_analytic:.2e}; mc dev {dev_mc*100:.2f}%; "
        f"min crossings {min_cross}; runtime {runtime:.0f}s",
        "1e-12 relative; 3% with >=1000 crossings; < 60 s",
        t0,
    )


_C2_SEED = 0
_C2_BUDGET = {16: (3_000_000, 6), 64: (1_500_000, 3)}  # total samples, replicates


def check_ris_gamma_vs_mc() -> CheckResult:
    """Gamma-fit reflected-path crossing rate against simulation at scale; the
    density-fed variant must do better than the gamma fit.

    The comparison band (simulated normalized rate >= 0.05) is read off the
    simulated curve itself so an analytic tail error cannot move the goal
    posts.  Known honest failure at strong spatial correlation: the constant
    conditional-slope assumption behind both analytic variants breaks down
    (the measured mean positive slope given the envelope level swings roughly
    +-30% around its unconditional value at N=16, spacing 0.1), so the stated
    tolerances are not attainable there; the check reports the measured
    deviations per combination.
    """
    t0 = time.time()
    worst_gamma = 0.0
    worst_fed = 0.0
    details = []
    for n, (total, reps) in _C2_BUDGET.items():
        for spacing in (0.1, 0.5):
            scene = _ris_scene(n, spacing)
            params = scene_ris_params(scene)
            grid = auto_grid(
                ris_mode_db(scene), span_below=20.0, span_above=6.0, step=0.5
            )
            t_lin = 10 ** (grid / 10)
            edges = _narrow_bin_edges(t_lin)
            mc = FadingProcessConfig(
                n_samples=total // reps, sample_rate=64, n_sinusoids=32, seed=_C2_SEED
            )
            out = simulate_scene(
                scene,
                [ChannelVariant("ris", mode="ris")],
                grid,
                mc,
                reps,
                pdf_edges=edges,
            )
            stats = out["ris"]
            in_band = stats.curve.values >= 0.05
            mc_vals = stats.curve.values[in_band]
            gamma = np.array([lcr_ris(t, params) for t in t_lin[in_band]])
            fed = np.array(
                [
                    lcr_ris_exact_form(t, params.c, params.omega2, p, params.f_ur)
                    for t, p in zip(t_lin[in_band], stats.pdf_density[::2][in_band])
                ]
            )
            dev_g = float(np.max(np.abs(gamma - mc_vals) / mc_vals))
            dev_f = float(np.max(np.abs(fed - mc_vals) / mc_vals))
            worst_gamma = max(worst_gamma, dev_g)
            worst_fed = max(worst_fed, dev_f)
            details.append(f"N={n},d={spacing}: {dev_g*100:.1f}%/{dev_f*100:.1f}%")
    runtime = time.time() - t0
    passed = worst_gamma <= 0.10 and worst_fed <= 0.04 and runtime < 600
    return _finish(
        "ris-gamma-vs-mc",
        "reflected-path gamma fit vs simulation, N in {16,64}, spacing in "
        "{0.1,0.5}, band where simulated normalized rate >= 0.05",
        passed,
        f"gamma/density-fed devs: {'; '.join(details)}; runtime {runtime:.0f}s",
        "10% gamma fit; 4% density-fed; < 10 min",
        t0,
    )


_C3_SEED = 0
_C3_RATE = 128  # halves the finite-difference smoothing bias seen at 64


def check_slope_variance() -> CheckResult:
    """Analytic envelope-sum slope variance against a finite-difference
    estimate from simulation."""
    t0 = time.time()
    worst = 0.0
    details = []
    for n in (4, 16):
        for spacing in (0.1, 0.5):
            scene = _ris_scene(n, spacing)
            arrays = build_scene(scene)
            target = omega_sq(arrays.corr_ris, arrays.gains.beta_ur, scene.f_ur)
            mc = FadingProcessConfig(
                n_samples=500_000, sample_rate=_C3_RATE, n_sinusoids=64, seed=_C3_SEED
            )
            out = simulate_scene(
                scene,
                [ChannelVariant("ris", mode="ris")],
                np.array([0.0]),
                mc,
                4,
                collect_y=True,
            )
            dev = abs(out.y_fd_var - target) / target
            worst = max(worst, dev)
            details.append(f"N={n},d={spacing}: {dev*100:.2f}%")
    passed = worst <= 0.03
    return _finish(
        "slope-variance",
        "envelope-sum slope variance vs finite-difference simulation, "
        "N in {4,16}, spacing in {0.1,0.5}",
        passed,
        "; ".join(details),
        "3% relative",
        t0,
    )


_C4_SEED = 0


def check_envelope_moments() -> CheckResult:
    """Closed-form envelope-sum mean and variance against sample moments."""
    t0 = time.time()
    worst_mean = 0.0
    worst_var = 0.0
    details = []
    for n in (2, 16, 128):
        scene = _ris_scene(n, 0.1)
        arrays = build_scene(scene)
        mean, var = y_moments(arrays.corr_ris, arrays.gains.beta_ur)
        mc = FadingProcessConfig(
            n_samples=500_000, sample_rate=64, n_sinusoids=32, seed=_C4_SEED
        )
        out = simulate_scene(
            scene,
            [ChannelVariant("ris", mode="ris")],
            np.array([0.0]),
            mc,
            2,
            collect_y=True,
        )
        dev_m = abs(out.y_mean - mean) / mean
        dev_v = abs(out.y_var - var) / var
        worst_mean = max(worst_mean, dev_m)
        worst_var = max(worst_var, dev_v)
        details.append(f"N={n}: mean {dev_m*100:.2f}% var {dev_v*100:.2f}%")
    passed = worst_mean <= 0.01 and worst_var <= 0.03
    return _finish(
        "envelope-moments",
        "envelope-sum mean/variance vs sample moments at 1e6 samples, "
        "N in {2,16,128}",
        passed,
        "; ".join(details),
        "1% mean; 3% variance",
        t0,
    )


_C5_SPECTRA = {
    2: (3.0, 1.5),
    3: (3.0, 1.5, 0.7),
    4: (3.0, 1.6, 0.8, 0.4),
    5: (3.2, 1.7, 0.9, 0.45, 0.22),
    6: (3.5, 1.8, 0.9, 0.45, 0.22, 0.11),
}
_C5_SEED = 0


def check_direct_exact_small() -> CheckResult:
    """Per-eigenvalue direct-path form against the characteristic-function
    oracle and against simulation on well-separated small spectra."""
    t0 = time.time()
    worst_cf = 0.0
    worst_mc = 0.0
    for m, theta in _C5_SPECTRA.items():
        theta = np.array(theta)
        spectrum = group_eigenvalues(theta, m - 1)
        trace = theta.sum()
        for mult in (0.3, 1.0, 3.0):
            t = trace * mult
            exact = lcr_direct_exact(t, theta, 1.0).value
            cf = lcr_direct_numeric_cf(t, spectrum, 1.0)
            worst_cf = max(worst_cf, abs(exact - cf) / cf)
        # simulation near the curve peak
        scan = np.geomspace(0.05 * trace, 5 * trace, 200)
        vals = np.array([lcr_direct_exact(t, theta, 1.0).value for t in scan])
        t_peak = scan[int(np.argmax(vals))]
        levels = t_peak * np.array([0.7, 1.0, 1.4])
        config = FadingProcessConfig(
            n_samples=1_000_000, sample_rate=64, n_sinusoids=32, seed=_C5_SEED
        )
        series = _iid_snr_series(theta, config, stream_id=m)
        curve = empirical_lcr(series, 10 * np.log10(levels))
        ref = np.array([lcr_direct_exact(t, theta, 1.0).value for t in levels])
        worst_mc = max(worst_mc, float(np.max(np.abs(curve.values - ref) / ref)))
    passed = worst_cf <= 1e-5 and worst_mc <= 0.05
    return _finish(
        "direct-exact-small",
        "per-eigenvalue direct form vs CF oracle (1e-5) and vs simulation "
        "near the peak (5%), M in {2..6}",
        passed,
        f"max CF dev {worst_cf:.2e}; max MC dev {worst_mc*100:.2f}%",
        "1e-5 vs oracle; 5% vs simulation",
        t0,
    )


_C6A_CASES = (
    (2.0, 0.7, 0.7),
    (3.0, 1.5, 0.5, 0.5, 0.5),
    (0.8, 0.8, 0.8, 0.8),
    (4.0, 2.0, 1.0, 0.3, 0.3, 0.3),
)
_C6B_SEED = 0


def check_grouped_form() -> CheckResult:
    """Grouped direct-path form: exact on repeated tails, and the two-lead
    grouping of the 32-antenna spectrum against simulation.

    The comparison band (simulated normalized rate >= 0.05) is read off the
    simulated curve.  Known honest failure: the 32-antenna spectrum decays
    smoothly from 1.58 down to 0.03 with no dominant-pair-plus-flat-tail
    structure, so replacing the 30 trailing eigenvalues (a 38x spread) by
    their average misses the band-edge crossing rates by roughly 20-30%.
    The evaluator itself is not at fault: it matches the
    characteristic-function oracle on the grouped spectrum to ~1e-12, and
    the same oracle run on all 32 eigenvalues matches simulation to better
    than 1% across the interior of the band.  The two-lead operating point
    is kept because it is the configuration under test; the check reports
    the measured deviation.
    """
    t0 = time.time()
    worst_cf = 0.0
    for theta in _C6A_CASES:
        theta = np.array(theta)
        spectrum = group_eigenvalues(theta, int(np.sum(theta != theta[-1])))
        trace = theta.sum()
        for mult in (0.3, 1.0, 3.0):
            t = trace * mult
            stable = lcr_direct_stable(t, spectrum, 1.0)
            cf = lcr_direct_numeric_cf(t, spectrum, 1.0)
            worst_cf = max(worst_cf, abs(stable - cf) / cf)

    scene = SceneConfig(bs=_BS_DEFAULT, ris=_RIS_DEFAULT)
    spectrum = direct_spectrum(scene, 2)
    grid = auto_grid(
        direct_mode_db(spectrum, scene.f_d), span_below=5.0, span_above=5.0, step=0.25
    )
    mc = FadingProcessConfig(
        n_samples=500_000, sample_rate=64, n_sinusoids=32, seed=_C6B_SEED
    )
    out = simulate_scene(
        scene, [ChannelVariant("direct", mode="direct")], grid, mc, 4
    )
    sim = out["direct"].curve.values
    ref = np.array(
        [lcr_direct_stable(10 ** (db / 10), spectrum, scene.f_d) for db in grid]
    )
    in_band = sim >= 0.05
    dev_mc = float(np.max(np.abs(ref[in_band] - sim[in_band]) / sim[in_band]))
    passed = worst_cf <= 1e-6 and dev_mc <= 0.05
    return _finish(
        "grouped-form",
        "grouped direct form: repeated tails vs CF oracle (1e-6); two leading "
        "eigenvalues on the 32-antenna spectrum vs simulation (5%)",
        passed,
        f"max CF dev {worst_cf:.2e}; MC dev {dev_mc*100:.2f}%",
        "1e-6 vs oracle; 5% vs simulation where simulated rate >= 0.05",
        t0,
    )


def check_exact_form_instability() -> CheckResult:
    """The per-eigenvalue form collapses on the 32-antenna clustered spectrum
    while the grouped form stays clean."""
    t0 = time.time()
    scene = SceneConfig(bs=_BS_DEFAULT, ris=_RIS_DEFAULT)
    arrays = build_scene(scene)
    theta = scaled_eigenvalues(arrays.corr_bs, arrays.gains.beta_d, scene.snr_scale)
    spectrum = direct_spectrum(scene, 2)
    grid = auto_grid(direct_mode_db(spectrum, scene.f_d))
    n_bad = 0
    worst_cond = 0.0
    stable_vals = np.empty(grid.size)
    for i, db in enumerate(grid):
        t = 10 ** (db / 10)
        res = lcr_direct_exact(t, theta, scene.f_d)
        cond = res.condition if math.isfinite(res.condition) else math.inf
        worst_cond = max(worst_cond, cond)
        if not math.isfinite(res.value) or res.value <= 0.0 or cond > 1e12:
            n_bad += 1
        stable_vals[i] = lcr_direct_stable(t, spectrum, scene.f_d)
    diffs = np.diff(stable_vals)
    peak = int(np.argmax(stable_vals))
    unimodal = bool(np.all(diffs[:peak] > 0) and np.all(diffs[peak:] < 0))
    stable_ok = bool(np.all(np.isfinite(stable_vals)) and np.all(stable_vals > 0))
    passed = n_bad >= 1 and stable_ok and unimodal
    return _finish(
        "exact-form-instability",
        "per-eigenvalue form ill-conditioned on the 32-antenna spectrum while "
        "the grouped form is finite, positive, unimodal",
        passed,
        f"bad thresholds {n_bad}/{grid.size} (worst condition {worst_cond:.1e}); "
        f"grouped finite/positive {stable_ok}, unimodal {unimodal}",
        "condition > 1e12 or invalid output at >= 1 threshold",
        t0,
    )


_C8_SEED = 0


def check_mean_speed() -> CheckResult:
    """Mean absolute SNR slope formulas against simulation under identity
    correlation, plus the large-array simplification."""
    t0 = time.time()
    worst = 0.0
    details = []
    config = FadingProcessConfig(
        n_samples=1_000_000, sample_rate=64, n_sinusoids=64, seed=_C8_SEED
    )
    for i, m in enumerate((1, 4, 16)):
        series = _iid_snr_series(np.ones(m), config, stream_id=30 + i)
        target = mean_snr_speed_direct(m, 1.0, 1.0, 1.0)
        dev = abs(empirical_mean_speed(series) - target) / target
        worst = max(worst, dev)
        details.append(f"direct M={m}: {dev*100:.2f}%")
    for i, n in enumerate((1, 4, 16)):
        fading = gen_correlated_fading(
            CorrelationMatrix.identity(n), 1.0, config, stream_id=20 + i
        )
        y = ris_phase_cascade(fading.samples, np.ones(n, dtype=complex))
        series = SnrSeries(values=y**2, dt=fading.dt, doppler_norm=fading.doppler)
        target = mean_snr_speed_ris(1, n, 1.0, 1.0, 1.0, 1.0)
        dev = abs(empirical_mean_speed(series) - target) / target
        worst = max(worst, dev)
        details.append(f"ris N={n}: {dev*100:.2f}%")
    ratio = mean_snr_speed_direct(64, 1.0, 1.0, 1.0) / mean_snr_speed_direct(
        64, 1.0, 1.0, 1.0, asymptotic=True
    )
    ratio_dev = abs(ratio - 1.0)
    passed = worst <= 0.03 and ratio_dev <= 0.01
    return _finish(
        "mean-speed",
        "mean |dSNR/dt| formulas vs simulation (identity correlation, sizes "
        "{1,4,16}); exact/asymptotic ratio at M=64",
        passed,
        f"{'; '.join(details)}; ratio dev {ratio_dev*100:.3f}%",
        "3% vs simulation; ratio within 1% of 1",
        t0,
    )


_C9_SEED = 0
_C9_LEVEL = 0.05  # matched crossing-rate level on the falling flank


def check_dominant_power_shift() -> CheckResult:
    """Combined channel sits right of the dominant link alone; halving the
    dominant link's power slides the curve ~3 dB left with its shape kept."""
    t0 = time.time()
    scene = SceneConfig(
        bs=_BS_DEFAULT,
        ris=_RIS_DEFAULT,
        layout=_layout_c(),
    )
    grid = auto_grid(ris_mode_db(scene), span_below=14.0, span_above=8.0, step=0.25)
    mc = FadingProcessConfig(
        n_samples=500_000, sample_rate=64, n_sinusoids=32, seed=_C9_SEED
    )
    variants = [
        ChannelVariant("ris", mode="ris"),
        ChannelVariant("full", mode="full"),
        ChannelVariant("shadowed", mode="full", cascade_power=0.5),
    ]
    out = simulate_scene(scene, variants, grid, mc, 2)
    ris_curve = out["ris"].curve
    full_curve = out["full"].curve
    shadow_curve = out["shadowed"].curve

    _, ris_right = curve_crossings(ris_curve, _C9_LEVEL)
    _, full_right = curve_crossings(full_curve, _C9_LEVEL)
    _, shadow_right = curve_crossings(shadow_curve, _C9_LEVEL)
    shift = full_right - shadow_right
    right_of = full_right > ris_right
    peak_change = abs(shadow_curve.values.max() - full_curve.values.max()) / (
        full_curve.values.max()
    )
    passed = right_of and 2.5 <= shift <= 3.5 and peak_change < 0.10
    return _finish(
        "dominant-power-shift",
        "combined channel right of dominant-only; 50% dominant-power loss "
        "shifts the curve ~3 dB left with < 10% peak change",
        passed,
        f"combined right of dominant: {right_of}; shift {shift:.2f} dB; "
        f"peak change {peak_change*100:.1f}%",
        "shift in [2.5, 3.5] dB; peak change < 10%",
        t0,
    )


def _layout_c():
    from .channel import Layout

    return Layout(d_x=35.0)


def check_correlation_narrowing() -> CheckResult:
    """Wider element spacing (lower correlation) narrows the reflected-path
    crossing-rate curve."""
    t0 = time.time()
    spreads = {}
    for spacing in (0.1, 0.5):
        scene = _ris_scene(128, spacing)
        grid = auto_grid(ris_mode_db(scene), step=0.1)
        lo, hi = curve_crossings(analytic_ris_curve(scene, grid), 0.1)
        spreads[spacing] = hi - lo
    passed = spreads[0.5] < spreads[0.1]
    return _finish(
        "correlation-narrowing",
        "N=128 reflected path: spacing 0.1 -> 0.5 narrows the band where the "
        "normalized rate exceeds 0.1",
        passed,
        f"spread {spreads[0.1]:.2f} dB at 0.1 vs {spreads[0.5]:.2f} dB at 0.5",
        "strictly smaller spread at 0.5",
        t0,
    )


_C11_DRAWS = 10_000


def check_cascade_identity() -> CheckResult:
    """Matrix composite channel with aligned reflection phases equals the
    scalar envelope-sum form, draw by draw."""
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst = 0.0
    m = 4
    for n in (1, 8, 64):
        scene = SceneConfig(bs=ArrayGeometry(m, 1, 0.5), ris=ArrayGeometry(n, 1, 0.1))
        arrays = build_scene(scene)
        a_b, a_r = arrays.a_b, arrays.a_r
        beta_rb = arrays.gains.beta_rb
        scale = scene.snr_scale
        h_d = (
            rng.standard_normal((m, _C11_DRAWS)) + 1j * rng.standard_normal((m, _C11_DRAWS))
        ) * math.sqrt(arrays.gains.beta_d / 2)
        h_ur = (
            rng.standard_normal((n, _C11_DRAWS)) + 1j * rng.standard_normal((n, _C11_DRAWS))
        ) * math.sqrt(arrays.gains.beta_ur / 2)
        u = a_b.conj() @ h_d
        nu = u / np.abs(u)
        y = ris_phase_cascade(h_ur, a_r)
        # matrix path, never simplifying |a_r| = 1 analytically
        phases = nu[None, :] * np.exp(1j * np.angle(a_r))[:, None] * np.exp(
            -1j * np.angle(h_ur)
        )
        cascade = math.sqrt(beta_rb) * np.outer(a_b, np.ones(_C11_DRAWS)) * (
            a_r.conj() @ (phases * h_ur)
        )[None, :]
        snr_matrix = scale * np.sum(np.abs(h_d + cascade) ** 2, axis=0)
        snr_closed = scale * (
            np.sum(np.abs(h_d) ** 2, axis=0)
            + 2 * math.sqrt(beta_rb) * y * np.abs(u)
            + m * beta_rb * y**2
        )
        worst = max(worst, float(np.max(np.abs(snr_matrix - snr_closed) / snr_closed)))
        # a handful of draws through the explicit reflection-matrix operation
        h_rb = math.sqrt(beta_rb) * np.outer(a_b, a_r.conj())
        for k in range(10):
            phi = ris_reflection_matrix(h_ur[:, k], a_r, nu[k])
            g = h_d[:, k] + h_rb @ phi @ h_ur[:, k]
            s = scale * float(np.sum(np.abs(g) ** 2))
            worst = max(worst, abs(s - snr_closed[k]) / snr_closed[k])
    passed = worst <= 1e-10
    return _finish(
        "cascade-identity",
        "matrix composite channel equals the scalar envelope-sum form on 1e4 "
        "draws, N in {1,8,64}",
        passed,
        f"max relative deviation {worst:.2e}",
        "1e-10 relative",
        t0,
    )


ALL_CHECKS: tuple[tuple[str, Callable[[], CheckResult]], ...] = (
    ("single-element-chain", check_single_element_chain),
    ("ris-gamma-vs-mc", check_ris_gamma_vs_mc),
    ("slope-variance", check_slope_variance),
    ("envelope-moments", check_envelope_moments),
    ("direct-exact-small", check_direct_exact_small),
    ("grouped-form", check_grouped_form),
    ("exact-form-instability", check_exact_form_instability),
    ("mean-speed", check_mean_speed),
    ("dominant-power-shift", check_dominant_power_shift),
    ("correlation-narrowing", check_correlation_narrowing),
    ("cascade-identity", check_cascade_identity),
)


def run_all(progress: Optional[Callable[[str], None]] = None) -> list[CheckResult]:
    """Execute the full battery in order; returns one result per check."""
    results = []
    for check_id, fn in ALL_CHECKS:
        result = fn()
        results.append(result)
        if progress is not None:
            status = "pass" if result.passed else "FAIL"
            progress(f"{check_id}: {status} ({result.runtime_s:.0f}s) {result.measured}")
    return results
