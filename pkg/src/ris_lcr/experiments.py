"""Experiment orchestration: streamed multi-replicate crossing-rate runs and
their analytic counterparts on a shared threshold grid.

One pass over the synthesized fading feeds every requested channel variant
(direct-only, reflected-only, combined, power-scaled), so paired comparisons
such as "same channel with the dominant link shadowed" share their
randomness and differ only in the physics.  Replicates are independent work
units with their own RNG streams; aggregation reduces them in fixed order,
which keeps results identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analytic import (
    GroupedSpectrum,
    RisLcrParams,
    group_eigenvalues,
    lcr_direct_stable,
    lcr_ris,
    lcr_ris_mode,
    ris_lcr_params,
)
from .channel import SceneConfig, build_scene, scaled_eigenvalues
from .errors import DomainError
from .montecarlo import (
    DEFAULT_CHUNK,
    FadingProcessConfig,
    LcrCurve,
    iter_fading_chunks,
)

__all__ = [
    "ChannelVariant",
    "VariantStats",
    "SimulationOutput",
    "simulate_scene",
    "scene_ris_params",
    "analytic_ris_curve",
    "analytic_direct_curve",
    "direct_spectrum",
    "ris_mode_db",
    "direct_mode_db",
    "auto_grid",
    "curve_crossings",
]

Z_99 = 2.5758293035489004  # two-sided 99% normal quantile for replicate CIs


@dataclass(frozen=True)
class ChannelVariant:
    """One SNR assembly evaluated from the shared fading pass.

    ``direct_power`` / ``cascade_power`` scale the direct gain beta_d and the
    reflected-link gain beta_rb; 1.0 means the scene's own values.
    """

    label: str
    mode: str = "full"  # "direct" | "ris" | "full"
    direct_power: float = 1.0
    cascade_power: float = 1.0

    def __post_init__(self):
        if self.mode not in ("direct", "ris", "full"):
            raise DomainError(f"unknown variant mode: {self.mode!r}")
        if self.direct_power < 0.0 or self.cascade_power < 0.0:
            raise DomainError("variant power scales must be nonnegative")


@dataclass
class VariantStats:
    label: str
    curve: LcrCurve
    per_replicate_rates: np.ndarray  # (n_replicates, n_thresholds)
    snr_mean: float
    mean_speed: Optional[float] = None  # E|d SNR/dt|
    pdf_centers: Optional[np.ndarray] = None
    pdf_density: Optional[np.ndarray] = None


@dataclass
class SimulationOutput:
    variants: dict  # label -> VariantStats, insertion-ordered
    config: FadingProcessConfig
    n_replicates: int
    y_mean: Optional[float] = None  # cascade envelope sum statistics
    y_var: Optional[float] = None
    y_fd_var: Optional[float] = None  # Var of central-difference dY/dt

    def __getitem__(self, label: str) -> VariantStats:
        return self.variants[label]


def _replicate_pass(
    scene_arrays,
    scene: SceneConfig,
    variants: Sequence[ChannelVariant],
    thresholds: np.ndarray,
    mc: FadingProcessConfig,
    replicate: int,
    chunk_size: int,
    pdf_edges: Optional[np.ndarray],
    collect_speed: bool,
    collect_y: bool,
    base_stream: int,
):
    """Stream one replicate and accumulate every requested statistic.

    Returns plain dicts of accumulators; the caller reduces replicates in
    index order so the result is independent of scheduling.
    """
    gains = scene_arrays.gains
    need_direct = any(v.mode != "ris" for v in variants)
    need_ris = any(v.mode != "direct" for v in variants)
    m = len(scene_arrays.a_b)
    dt = mc.dt

    stream = base_stream + replicate
    d_iter = (
        iter_fading_chunks(
            scene_arrays.corr_bs, gains.beta_d, mc, 2 * stream, chunk_size
        )
        if need_direct
        else None
    )
    u_iter = (
        iter_fading_chunks(
            scene_arrays.corr_ris, gains.beta_ur, mc, 2 * stream + 1, chunk_size
        )
        if need_ris
        else None
    )

    nv = len(variants)
    counts = np.zeros((nv, thresholds.size), dtype=np.int64)
    hist = np.zeros((nv, pdf_edges.size - 1)) if pdf_edges is not None else None
    snr_sum = np.zeros(nv)
    speed_sum = np.zeros(nv)
    speed_n = 0
    tails = [None] * nv  # last two SNR samples per variant, for carries
    y_acc = np.zeros(3)  # sum, sum of squares, count
    y_fd_acc = np.zeros(3)
    y_tail = None

    n_chunks = -(-mc.n_samples // chunk_size)
    for _ in range(n_chunks):
        q_d = q_x = y = None
        if d_iter is not None:
            d_chunk = next(d_iter)
            q_d = np.sum(np.abs(d_chunk) ** 2, axis=0)
            q_x = np.abs(np.conj(scene_arrays.a_b) @ d_chunk)
        if u_iter is not None:
            u_chunk = next(u_iter)
            y = np.abs(u_chunk).sum(axis=0)
            if collect_y:
                y_acc += (y.sum(), (y**2).sum(), y.size)
                ext = y if y_tail is None else np.concatenate((y_tail, y))
                if ext.size >= 3:
                    d = (ext[2:] - ext[:-2]) / (2.0 * dt)
                    y_fd_acc += ((d.sum()), (d**2).sum(), d.size)
                y_tail = ext[-2:].copy()

        for i, v in enumerate(variants):
            if v.mode == "direct":
                values = scene.snr_scale * (v.direct_power * q_d)
            elif v.mode == "ris":
                values = scene.snr_scale * (m * gains.beta_rb * v.cascade_power * y**2)
            else:
                values = v.direct_power * q_d + m * gains.beta_rb * v.cascade_power * y**2
                cross_gain = gains.beta_rb * v.cascade_power * v.direct_power
                if cross_gain > 0.0:
                    values = values + 2.0 * math.sqrt(cross_gain) * y * q_x
                values = scene.snr_scale * values

            snr_sum[i] += values.sum()
            if hist is not None:
                hist[i] += np.histogram(values, bins=pdf_edges)[0]
            tail = tails[i]
            ext = values if tail is None else np.concatenate((tail, values))
            if tail is not None:
                span = ext[tail.size - 1 :]
            else:
                span = ext
            counts[i] += np.count_nonzero(
                (span[:-1, None] < thresholds) & (span[1:, None] >= thresholds), axis=0
            )
            if collect_speed and ext.size >= 3:
                d = np.abs(ext[2:] - ext[:-2])
                speed_sum[i] += d.sum()
                if i == 0:
                    speed_n += d.size
            tails[i] = ext[-2:].copy()

    return {
        "counts": counts,
        "hist": hist,
        "snr_sum": snr_sum,
        "speed_sum": speed_sum,
        "speed_n": speed_n,
        "y": y_acc,
        "y_fd": y_fd_acc,
    }


def simulate_scene(
    scene: SceneConfig,
    variants: Sequence[ChannelVariant],
    thresholds_db: np.ndarray,
    mc: FadingProcessConfig,
    n_replicates: int,
    *,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    pdf_edges: Optional[np.ndarray] = None,
    collect_speed: bool = False,
    collect_y: bool = False,
    base_stream: int = 0,
) -> SimulationOutput:
    """Run the scene's Monte Carlo once and report every variant's curve.

    Each replicate owns two RNG streams (direct and reflected links), indexed
    by ``base_stream + replicate``, so disjoint experiments can reserve
    disjoint stream ranges under one seed.
    """
    if n_replicates < 1:
        raise DomainError("n_replicates must be positive")
    if not variants:
        raise DomainError("at least one channel variant is required")
    labels = [v.label for v in variants]
    if len(set(labels)) != len(labels):
        raise DomainError("variant labels must be unique")
    if collect_y and all(v.mode == "direct" for v in variants):
        raise DomainError("envelope-sum statistics need a reflected-link variant")
    thresholds_db = np.asarray(thresholds_db, dtype=float)
    thresholds = 10.0 ** (thresholds_db / 10.0)
    arrays = build_scene(scene)

    def job(r):
        return _replicate_pass(
            arrays,
            scene,
            variants,
            thresholds,
            mc,
            r,
            chunk_size,
            pdf_edges,
            collect_speed,
            collect_y,
            base_stream,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(n_replicates)))
    else:
        results = [job(r) for r in range(n_replicates)]

    duration = (mc.n_samples - 1) * mc.dt
    doppler_norm = mc.doppler
    total_samples = n_replicates * mc.n_samples

    out = {}
    for i, v in enumerate(variants):
        counts = np.stack([res["counts"][i] for res in results])  # (R, K)
        rates = counts / (duration * doppler_norm)
        pooled = rates.mean(axis=0)
        if n_replicates > 1:
            half = Z_99 * rates.std(axis=0, ddof=1) / math.sqrt(n_replicates)
            ci_low, ci_high = pooled - half, pooled + half
        else:
            ci_low = ci_high = None
        curve = LcrCurve(
            thresholds_db=thresholds_db,
            values=pooled,
            source="simulation",
            ci_low=ci_low,
            ci_high=ci_high,
            n_crossings=counts.sum(axis=0),
        )
        snr_mean = sum(res["snr_sum"][i] for res in results) / total_samples
        stats = VariantStats(
            label=v.label,
            curve=curve,
            per_replicate_rates=rates,
            snr_mean=snr_mean,
        )
        if collect_speed:
            speed_n = sum(res["speed_n"] for res in results)
            stats.mean_speed = sum(res["speed_sum"][i] for res in results) / (
                speed_n * 2.0 * mc.dt
            )
        if pdf_edges is not None:
            dens = sum(res["hist"][i] for res in results)
            stats.pdf_centers = 0.5 * (pdf_edges[:-1] + pdf_edges[1:])
            stats.pdf_density = dens / (total_samples * np.diff(pdf_edges))
        out[v.label] = stats

    result = SimulationOutput(
        variants=out, config=mc, n_replicates=n_replicates
    )
    if collect_y:
        s, sq, n = np.sum([res["y"] for res in results], axis=0)
        result.y_mean = s / n
        result.y_var = sq / n - result.y_mean**2
        ds, dsq, dn = np.sum([res["y_fd"] for res in results], axis=0)
        result.y_fd_var = dsq / dn - (ds / dn) ** 2
    return result


# ---------------------------------------------------------------------------
# analytic counterparts and grid placement
# ---------------------------------------------------------------------------


def scene_ris_params(scene: SceneConfig) -> RisLcrParams:
    """Reflected-only channel parameters (gamma fit and slope variance)
    assembled from the scene's gains, arrays, and normalization."""
    arrays = build_scene(scene)
    return ris_lcr_params(
        arrays.corr_ris,
        arrays.gains.beta_ur,
        scene.f_ur,
        len(arrays.a_b),
        arrays.gains.beta_rb,
        scene.snr_scale,
    )


def analytic_ris_curve(scene: SceneConfig, thresholds_db: np.ndarray) -> LcrCurve:
    """Gamma-approximation crossing-rate curve of the reflected-only channel
    on the scene's own gains and reflected-array correlation."""
    params = scene_ris_params(scene)
    thresholds_db = np.asarray(thresholds_db, dtype=float)
    values = np.array(
        [lcr_ris(10.0 ** (db / 10.0), params) for db in thresholds_db]
    )
    return LcrCurve(thresholds_db=thresholds_db, values=values, source="analytic")


def ris_mode_db(scene: SceneConfig) -> float:
    """Threshold (dB) of the reflected-only analytic curve's maximum."""
    return 10.0 * math.log10(lcr_ris_mode(scene_ris_params(scene)))


def direct_spectrum(scene: SceneConfig, n_lead: Optional[int] = None) -> GroupedSpectrum:
    """Grouped eigenvalue spectrum of the direct-link SNR on this scene."""
    arrays = build_scene(scene)
    eig = scaled_eigenvalues(arrays.corr_bs, arrays.gains.beta_d, scene.snr_scale)
    return group_eigenvalues(eig, n_lead)


def analytic_direct_curve(
    scene: SceneConfig,
    thresholds_db: np.ndarray,
    n_lead: Optional[int] = None,
) -> tuple[LcrCurve, GroupedSpectrum]:
    """Stable direct-link curve together with the grouping it used."""
    spectrum = direct_spectrum(scene, n_lead)
    thresholds_db = np.asarray(thresholds_db, dtype=float)
    values = np.array(
        [
            lcr_direct_stable(10.0 ** (db / 10.0), spectrum, scene.f_d)
            for db in thresholds_db
        ]
    )
    curve = LcrCurve(thresholds_db=thresholds_db, values=values, source="analytic")
    return curve, spectrum


def direct_mode_db(spectrum: GroupedSpectrum, f_d: float) -> float:
    """Threshold (dB) of the stable curve's maximum, by golden-section search
    seeded from a coarse scan around the mean SNR."""
    trace = spectrum.trace
    grid = trace * 10.0 ** np.linspace(-2.0, 0.8, 57)
    values = [lcr_direct_stable(t, spectrum, f_d) for t in grid]
    k = int(np.argmax(values))
    lo, hi = grid[max(0, k - 1)], grid[min(grid.size - 1, k + 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc = lcr_direct_stable(math.exp(c), spectrum, f_d)
    fd_ = lcr_direct_stable(math.exp(d), spectrum, f_d)
    for _ in range(40):
        if fc > fd_:
            b, d, fd_ = d, c, fc
            c = b - phi * (b - a)
            fc = lcr_direct_stable(math.exp(c), spectrum, f_d)
        else:
            a, c, fc = c, d, fd_
            d = a + phi * (b - a)
            fd_ = lcr_direct_stable(math.exp(d), spectrum, f_d)
    return 10.0 * math.log10(math.exp(0.5 * (a + b)))


def auto_grid(
    mode_db: float, *, span_below: float = 25.0, span_above: float = 8.0, step: float = 0.5
) -> np.ndarray:
    """Ascending dB threshold grid centered on a curve mode, snapped to one
    decimal so file output is tidy."""
    lo = round(mode_db - span_below, 1)
    hi = round(mode_db + span_above, 1)
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


def curve_crossings(curve: LcrCurve, level: float) -> tuple[float, float]:
    """Thresholds (dB) where a unimodal curve crosses ``level`` on its rising
    and falling flanks, by linear interpolation on the grid."""
    db, v = curve.thresholds_db, curve.values
    k = int(np.argmax(v))
    if v[k] <= level:
        raise DomainError("curve peak is below the requested level")

    def interp(i, j):
        # crossing between grid points i and j
        w = (level - v[i]) / (v[j] - v[i])
        return db[i] + w * (db[j] - db[i])

    left = None
    for i in range(k, 0, -1):
        if v[i - 1] < level <= v[i]:
            left = interp(i - 1, i)
            break
    right = None
    for i in range(k, v.size - 1):
        if v[i + 1] < level <= v[i]:
            right = interp(i + 1, i)
            break
    if left is None or right is None:
        raise DomainError("curve does not cross the level on both flanks")
    return left, right
