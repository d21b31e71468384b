"""Command-line experiment runner.

Reproduces the reference experiment families at desk scale: crossing-rate
curves for the direct-only, reflected-only, and combined channels across
array sizes, link-power balances, and element spacings, plus a validation
scenario that executes the full acceptance battery.  Every run writes one
CSV per curve and a ``run.json`` manifest capturing the fully resolved
configuration; identical configuration and seed reproduce the files byte for
byte regardless of thread count.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .channel import ArrayGeometry, Layout, SceneConfig, build_scene
from .errors import DomainError, NumericError
from .experiments import (
    ChannelVariant,
    analytic_direct_curve,
    analytic_ris_curve,
    auto_grid,
    direct_mode_db,
    direct_spectrum,
    ris_mode_db,
    scene_ris_params,
    simulate_scene,
)
from .montecarlo import FadingProcessConfig, LcrCurve

SCENARIOS = (
    "fig3a",
    "fig3b",
    "fig4a",
    "fig4b",
    "fig5a",
    "fig5b",
    "validate",
    "custom",
)

LAYOUT_PRESETS = {"A": 29.0, "B": 20.0, "C": 35.0}  # d_x in meters

CSV_HEADER = "threshold_db,lcr_normalized,source,ci_low,ci_high"

_DEFAULT_LAYOUT = {"fig4a": "B", "fig4b": "C", "fig5b": "C"}  # others use A

# desk-scale simulation defaults; scale up with --samples / --replicates
_DEFAULTS = {
    "seed": 1234,
    "samples": 120_000,
    "replicates": 2,
    "sample_rate": 64,
    "n_sinusoids": 32,
    "threads": 1,
    "layout": None,
    "out": None,
    "shadow_dominant": None,
    "grid": None,  # {"min": db, "max": db, "step": db}
    "scene": None,
}


class UsageError(Exception):
    """Invalid configuration; reported with the offending field path."""


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    scene: SceneConfig
    mc: FadingProcessConfig
    n_replicates: int
    out_dir: Path
    threads: int = 1
    grid_db: Optional[np.ndarray] = None  # None -> auto-centered on the mode
    shadow_dominant: Optional[float] = None
    n_lead: int = 2  # leading eigenvalues kept by the stable direct form


# ---------------------------------------------------------------------------
# configuration ingestion: defaults < config file < flags
# ---------------------------------------------------------------------------


def _check_keys(mapping: dict, allowed: dict, path: str):
    for key in mapping:
        if key not in allowed:
            raise UsageError(f"unknown config key: {path}{key}")


def _parse_grid(raw, path: str) -> dict:
    if not isinstance(raw, dict):
        raise UsageError(f"{path} must be an object with min/max/step")
    _check_keys(raw, {"min": 0, "max": 0, "step": 0}, path + ".")
    try:
        lo, hi, step = float(raw["min"]), float(raw["max"]), float(raw["step"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path} needs numeric min, max, step") from exc
    if not lo <= hi:
        raise UsageError(f"{path}.min must not exceed {path}.max")
    if not step > 0.0:
        raise UsageError(f"{path}.step must be positive")
    return {"min": lo, "max": hi, "step": step}


def _parse_geometry(raw, path: str) -> dict:
    if not isinstance(raw, dict):
        raise UsageError(f"{path} must be an object")
    _check_keys(raw, {"n_x": 0, "n_z": 0, "spacing": 0}, path + ".")
    return raw


def _parse_scene(raw, path: str = "scene") -> dict:
    if not isinstance(raw, dict):
        raise UsageError(f"{path} must be an object")
    allowed = {
        "bs": 0,
        "ris": 0,
        "snr_scale": 0,
        "f_d": 0,
        "f_ur": 0,
        "layout": 0,
    }
    _check_keys(raw, allowed, path + ".")
    out = dict(raw)
    for arr in ("bs", "ris"):
        if arr in out:
            out[arr] = _parse_geometry(out[arr], f"{path}.{arr}")
    if "layout" in out:
        lay = out["layout"]
        if not isinstance(lay, dict):
            raise UsageError(f"{path}.layout must be an object")
        lay_allowed = {k: 0 for k in (
            "d_rb", "d_x", "d_y", "alpha_d", "alpha_rb", "alpha_ur", "c0_db", "d0"
        )}
        _check_keys(lay, lay_allowed, f"{path}.layout.")
    return out


def load_config_file(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a JSON object")
    _check_keys(raw, {**_DEFAULTS, "scenario": 0}, "")
    if "grid" in raw and raw["grid"] is not None:
        raw["grid"] = _parse_grid(raw["grid"], "grid")
    if "scene" in raw and raw["scene"] is not None:
        raw["scene"] = _parse_scene(raw["scene"])
    if "layout" in raw and raw["layout"] is not None:
        if raw["layout"] not in LAYOUT_PRESETS:
            raise UsageError("layout must be one of A, B, C")
    return raw


def _base_scene(scenario: str, layout_letter: str, overrides: Optional[dict]) -> SceneConfig:
    layout = Layout(d_x=LAYOUT_PRESETS[layout_letter])
    scene = SceneConfig(
        bs=ArrayGeometry(8, 4, 0.5),
        ris=ArrayGeometry(16, 8, 0.1),
        layout=layout,
    )
    if scenario == "fig5b":
        scene = replace(
            scene, bs=ArrayGeometry(8, 4, 0.5), ris=ArrayGeometry(8, 4, 0.5)
        )
    if overrides:
        kwargs = {}
        for arr in ("bs", "ris"):
            if arr in overrides:
                base = getattr(scene, arr)
                geo = overrides[arr]
                kwargs[arr] = ArrayGeometry(
                    n_x=int(geo.get("n_x", base.n_x)),
                    n_z=int(geo.get("n_z", base.n_z)),
                    spacing=float(geo.get("spacing", base.spacing)),
                )
        for name in ("snr_scale", "f_d", "f_ur"):
            if name in overrides:
                kwargs[name] = float(overrides[name])
        if "layout" in overrides:
            kwargs["layout"] = replace(
                scene.layout, **{k: float(v) for k, v in overrides["layout"].items()}
            )
        scene = replace(scene, **kwargs)
    return scene


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    """Merge defaults, config file, and flags into a runnable spec."""
    cfg = dict(_DEFAULTS)
    if args.config is not None:
        file_cfg = load_config_file(Path(args.config))
        scenario = file_cfg.pop("scenario", args.scenario)
        cfg.update(file_cfg)
    else:
        scenario = args.scenario
    if scenario != args.scenario:
        raise UsageError(
            f"config file scenario {scenario!r} conflicts with {args.scenario!r}"
        )

    for flag in ("seed", "threads", "samples", "replicates", "layout", "out",
                 "shadow_dominant"):
        value = getattr(args, flag)
        if value is not None:
            cfg[flag] = value
    if args.grid is not None:
        cfg["grid"] = _parse_grid(
            dict(zip(("min", "max", "step"), args.grid)), "grid"
        )

    layout_letter = cfg["layout"] or _DEFAULT_LAYOUT.get(scenario, "A")
    scene = _base_scene(scenario, layout_letter, cfg["scene"])

    try:
        mc = FadingProcessConfig(
            n_samples=int(cfg["samples"]),
            sample_rate=int(cfg["sample_rate"]),
            n_sinusoids=int(cfg["n_sinusoids"]),
            seed=int(cfg["seed"]),
        )
    except DomainError as exc:
        raise UsageError(f"simulation config: {exc}") from exc

    grid_db = None
    if cfg["grid"] is not None:
        g = cfg["grid"]
        n = int(round((g["max"] - g["min"]) / g["step"])) + 1
        grid_db = np.round(g["min"] + g["step"] * np.arange(n), 10)

    shadow = cfg["shadow_dominant"]
    if shadow is not None:
        shadow = float(shadow)
        if not 0.0 < shadow <= 1.0:
            raise UsageError("shadow-dominant must lie in (0, 1]")

    out_dir = Path(cfg["out"]) if cfg["out"] else Path("out") / scenario
    threads = int(cfg["threads"])
    if threads < 1:
        raise UsageError("threads must be positive")
    replicates = int(cfg["replicates"])
    if replicates < 1:
        raise UsageError("replicates must be positive")

    return ExperimentSpec(
        scenario=scenario,
        scene=scene,
        mc=mc,
        n_replicates=replicates,
        out_dir=out_dir,
        threads=threads,
        grid_db=grid_db,
        shadow_dominant=shadow,
    )


# ---------------------------------------------------------------------------
# artifact emission
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_curve_csv(path: Path, curve: LcrCurve):
    lines = [CSV_HEADER]
    for i, db in enumerate(curve.thresholds_db):
        lo = _fmt(curve.ci_low[i]) if curve.ci_low is not None else ""
        hi = _fmt(curve.ci_high[i]) if curve.ci_high is not None else ""
        lines.append(
            f"{_fmt(db)},{_fmt(curve.values[i])},{curve.source},{lo},{hi}"
        )
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _scene_manifest(scene: SceneConfig) -> dict:
    arrays = build_scene(scene)
    return {
        "bs": {"n_x": scene.bs.n_x, "n_z": scene.bs.n_z, "spacing": scene.bs.spacing},
        "ris": {"n_x": scene.ris.n_x, "n_z": scene.ris.n_z, "spacing": scene.ris.spacing},
        "layout": {
            "d_rb": scene.layout.d_rb,
            "d_x": scene.layout.d_x,
            "d_y": scene.layout.d_y,
        },
        "gains": {
            "beta_d": arrays.gains.beta_d,
            "beta_rb": arrays.gains.beta_rb,
            "beta_ur": arrays.gains.beta_ur,
        },
        "snr_scale": scene.snr_scale,
        "f_d": scene.f_d,
        "f_ur": scene.f_ur,
    }


class RunWriter:
    """Collects curves and writes CSVs plus the run manifest."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.curve_records = []

    def emit(self, name: str, curve: LcrCurve, scene: SceneConfig, formula: dict):
        path = self.spec.out_dir / f"{name}.csv"
        write_curve_csv(path, curve)
        self.curve_records.append(
            {
                "file": path.name,
                "label": name,
                "source": curve.source,
                "scene": _scene_manifest(scene),
                "formula": formula,
            }
        )

    def finish(self, grid_db: np.ndarray):
        manifest = {
            "tool": "ris-lcr",
            "version": __version__,
            "scenario": self.spec.scenario,
            "seed": self.spec.mc.seed,
            "mc": {
                "n_samples": self.spec.mc.n_samples,
                "sample_rate": self.spec.mc.sample_rate,
                "n_sinusoids": self.spec.mc.n_sinusoids,
                "doppler": self.spec.mc.doppler,
                "n_replicates": self.spec.n_replicates,
            },
            "threads": self.spec.threads,
            "shadow_dominant": self.spec.shadow_dominant,
            "grid_db": {
                "min": float(grid_db[0]),
                "max": float(grid_db[-1]),
                "points": int(grid_db.size),
            },
            "curves": self.curve_records,
        }
        path = self.spec.out_dir / "run.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


_SIM_FORMULA = {"kind": "sum-of-sinusoids/1"}


def _direct_formula(spectrum) -> dict:
    return {
        "kind": "direct-grouped-residue/1",
        "n_lead": spectrum.n_lead,
        "tail_count": spectrum.tail_count,
    }


_RIS_FORMULA = {"kind": "ris-gamma-fit/1"}


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------


def _shared_grid(spec: ExperimentSpec, modes_db: Sequence[float]) -> np.ndarray:
    if spec.grid_db is not None:
        return spec.grid_db
    lo = min(modes_db) - 22.0
    hi = max(modes_db) + 8.0
    return auto_grid(0.5 * (lo + hi), span_below=(hi - lo) / 2, span_above=(hi - lo) / 2)


def _mean_snr(scene: SceneConfig) -> tuple[float, float]:
    """(direct, reflected) mean SNR for dominance decisions."""
    arrays = build_scene(scene)
    m = len(arrays.a_b)
    direct = scene.snr_scale * arrays.gains.beta_d * m
    params = scene_ris_params(scene)
    reflected = params.c * (params.var_y + params.mean_y**2)
    return direct, reflected


def _run_fig3a(spec: ExperimentSpec, writer: RunWriter) -> np.ndarray:
    sizes = [(4, 2), (8, 4)]  # 8 and 32 receive antennas
    scenes = [replace(spec.scene, bs=ArrayGeometry(nx, nz, spec.scene.bs.spacing))
              for nx, nz in sizes]
    spectra = [direct_spectrum(s, spec.n_lead) for s in scenes]
    grid = _shared_grid(
        spec, [direct_mode_db(sp, s.f_d) for sp, s in zip(spectra, scenes)]
    )
    for scene, spectrum in zip(scenes, spectra):
        m = scene.bs.n_x * scene.bs.n_z
        curve, _ = analytic_direct_curve(scene, grid, spec.n_lead)
        writer.emit(f"direct_m{m}_analytic", curve, scene, _direct_formula(spectrum))
    for i, scene in enumerate(scenes):
        m = scene.bs.n_x * scene.bs.n_z
        out = simulate_scene(
            scene,
            [ChannelVariant("direct", mode="direct")],
            grid,
            spec.mc,
            spec.n_replicates,
            threads=spec.threads,
            base_stream=i * spec.n_replicates,
        )
        writer.emit(f"direct_m{m}_sim", out["direct"].curve, scene, _SIM_FORMULA)
    return grid


def _run_fig3b(spec: ExperimentSpec, writer: RunWriter) -> np.ndarray:
    sizes = [(8, 8), (16, 8)]  # 64 and 128 reflecting elements
    scenes = [replace(spec.scene, ris=ArrayGeometry(nx, nz, spec.scene.ris.spacing))
              for nx, nz in sizes]
    grid = _shared_grid(spec, [ris_mode_db(s) for s in scenes])
    for scene in scenes:
        n = scene.ris.n_x * scene.ris.n_z
        writer.emit(
            f"ris_n{n}_analytic", analytic_ris_curve(scene, grid), scene, _RIS_FORMULA
        )
    for i, scene in enumerate(scenes):
        n = scene.ris.n_x * scene.ris.n_z
        out = simulate_scene(
            scene,
            [ChannelVariant("ris", mode="ris")],
            grid,
            spec.mc,
            spec.n_replicates,
            threads=spec.threads,
            base_stream=i * spec.n_replicates,
        )
        writer.emit(f"ris_n{n}_sim", out["ris"].curve, scene, _SIM_FORMULA)
    return grid


def _run_fig4(spec: ExperimentSpec, writer: RunWriter) -> np.ndarray:
    scene = spec.scene
    spectrum = direct_spectrum(scene, spec.n_lead)
    grid = _shared_grid(spec, [direct_mode_db(spectrum, scene.f_d), ris_mode_db(scene)])

    curve, _ = analytic_direct_curve(scene, grid, spec.n_lead)
    writer.emit("direct_analytic", curve, scene, _direct_formula(spectrum))
    writer.emit("ris_analytic", analytic_ris_curve(scene, grid), scene, _RIS_FORMULA)

    variants = [
        ChannelVariant("direct", mode="direct"),
        ChannelVariant("ris", mode="ris"),
        ChannelVariant("full", mode="full"),
    ]
    if spec.shadow_dominant is not None:
        direct_snr, ris_snr = _mean_snr(scene)
        if direct_snr >= ris_snr:
            shadowed = ChannelVariant(
                "full_shadowed", mode="full", direct_power=spec.shadow_dominant
            )
        else:
            shadowed = ChannelVariant(
                "full_shadowed", mode="full", cascade_power=spec.shadow_dominant
            )
        variants.append(shadowed)
    out = simulate_scene(
        scene, variants, grid, spec.mc, spec.n_replicates, threads=spec.threads
    )
    for v in variants:
        writer.emit(f"{v.label}_sim", out[v.label].curve, scene, _SIM_FORMULA)
    return grid


def _run_fig5a(spec: ExperimentSpec, writer: RunWriter) -> np.ndarray:
    ris_scenes = [
        (spacing, replace(spec.scene, ris=replace(spec.scene.ris, spacing=spacing)))
        for spacing in (0.1, 0.5)
    ]
    direct_scenes = [
        (spacing, replace(spec.scene, bs=replace(spec.scene.bs, spacing=spacing)))
        for spacing in (0.5, 1.0)
    ]
    spectra = {sp: direct_spectrum(s, spec.n_lead) for sp, s in direct_scenes}
    modes = [ris_mode_db(s) for _, s in ris_scenes]
    modes += [direct_mode_db(spectra[sp], s.f_d) for sp, s in direct_scenes]
    grid = _shared_grid(spec, modes)

    stream = 0
    for spacing, scene in ris_scenes:
        tag = f"ris_dr{spacing:g}".replace(".", "p")
        writer.emit(
            f"{tag}_analytic", analytic_ris_curve(scene, grid), scene, _RIS_FORMULA
        )
        out = simulate_scene(
            scene,
            [ChannelVariant("ris", mode="ris")],
            grid,
            spec.mc,
            spec.n_replicates,
            threads=spec.threads,
            base_stream=stream,
        )
        writer.emit(f"{tag}_sim", out["ris"].curve, scene, _SIM_FORMULA)
        stream += spec.n_replicates
    for spacing, scene in direct_scenes:
        tag = f"direct_db{spacing:g}".replace(".", "p")
        curve, _ = analytic_direct_curve(scene, grid, spec.n_lead)
        writer.emit(f"{tag}_analytic", curve, scene, _direct_formula(spectra[spacing]))
        out = simulate_scene(
            scene,
            [ChannelVariant("direct", mode="direct")],
            grid,
            spec.mc,
            spec.n_replicates,
            threads=spec.threads,
            base_stream=stream,
        )
        writer.emit(f"{tag}_sim", out["direct"].curve, scene, _SIM_FORMULA)
        stream += spec.n_replicates
    return grid


def _run_fig5b(spec: ExperimentSpec, writer: RunWriter) -> np.ndarray:
    scenes = []
    for spacing in (0.5, 1.0):
        scene = replace(
            spec.scene,
            bs=replace(spec.scene.bs, spacing=spacing),
            ris=replace(spec.scene.ris, spacing=spacing),
        )
        scenes.append((spacing, scene))
    spectra = {sp: direct_spectrum(s, spec.n_lead) for sp, s in scenes}
    modes = []
    for sp, s in scenes:
        modes.append(ris_mode_db(s))
        modes.append(direct_mode_db(spectra[sp], s.f_d))
    grid = _shared_grid(spec, modes)

    stream = 0
    for spacing, scene in scenes:
        tag = f"d{spacing:g}".replace(".", "p")
        curve, _ = analytic_direct_curve(scene, grid, spec.n_lead)
        writer.emit(
            f"direct_{tag}_analytic", curve, scene, _direct_formula(spectra[spacing])
        )
        writer.emit(
            f"ris_{tag}_analytic", analytic_ris_curve(scene, grid), scene, _RIS_FORMULA
        )
        out = simulate_scene(
            scene,
            [
                ChannelVariant("direct", mode="direct"),
                ChannelVariant("ris", mode="ris"),
            ],
            grid,
            spec.mc,
            spec.n_replicates,
            threads=spec.threads,
            base_stream=stream,
        )
        writer.emit(f"direct_{tag}_sim", out["direct"].curve, scene, _SIM_FORMULA)
        writer.emit(f"ris_{tag}_sim", out["ris"].curve, scene, _SIM_FORMULA)
        stream += spec.n_replicates
    return grid


def _run_custom(spec: ExperimentSpec, writer: RunWriter) -> np.ndarray:
    scene = spec.scene
    spectrum = direct_spectrum(scene, spec.n_lead)
    grid = _shared_grid(spec, [direct_mode_db(spectrum, scene.f_d), ris_mode_db(scene)])
    curve, _ = analytic_direct_curve(scene, grid, spec.n_lead)
    writer.emit("direct_analytic", curve, scene, _direct_formula(spectrum))
    writer.emit("ris_analytic", analytic_ris_curve(scene, grid), scene, _RIS_FORMULA)
    out = simulate_scene(
        scene,
        [
            ChannelVariant("direct", mode="direct"),
            ChannelVariant("ris", mode="ris"),
            ChannelVariant("full", mode="full"),
        ],
        grid,
        spec.mc,
        spec.n_replicates,
        threads=spec.threads,
    )
    for label in ("direct", "ris", "full"):
        writer.emit(f"{label}_sim", out[label].curve, scene, _SIM_FORMULA)
    return grid


def _run_validate(spec: ExperimentSpec) -> int:
    from .validation import run_all

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    results = run_all(progress=lambda line: print(line, flush=True))
    rows = ["check_id,passed,measured,tolerance,runtime_s,description"]
    for r in results:
        rows.append(
            f"{r.check_id},{'pass' if r.passed else 'FAIL'},"
            f"\"{r.measured}\",\"{r.tolerance}\",{r.runtime_s:.1f},\"{r.description}\""
        )
    (spec.out_dir / "validation.csv").write_text("\n".join(rows) + "\n")
    failed = [r.check_id for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        print("failed:", ", ".join(failed))
    return 1 if failed else 0


_RUNNERS = {
    "fig3a": _run_fig3a,
    "fig3b": _run_fig3b,
    "fig4a": _run_fig4,
    "fig4b": _run_fig4,
    "fig5a": _run_fig5a,
    "fig5b": _run_fig5b,
    "custom": _run_custom,
}


def run(spec: ExperimentSpec) -> int:
    """Execute a resolved experiment spec; returns a process exit status."""
    if spec.scenario == "validate":
        return _run_validate(spec)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    writer = RunWriter(spec)
    grid = _RUNNERS[spec.scenario](spec, writer)
    writer.finish(grid)
    print(
        f"{spec.scenario}: wrote {len(writer.curve_records)} curves to {spec.out_dir}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-lcr",
        description="Crossing-rate experiments for RIS-aided uplink channels.",
    )
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--samples", type=int, help="samples per replicate")
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--layout", choices=sorted(LAYOUT_PRESETS))
    parser.add_argument("--out", help="output directory")
    parser.add_argument(
        "--shadow-dominant",
        type=float,
        dest="shadow_dominant",
        help="power fraction kept on the dominant link (adds a shadowed curve)",
    )
    parser.add_argument(
        "--grid",
        nargs=3,
        type=float,
        metavar=("MIN", "MAX", "STEP"),
        help="threshold grid in dB",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        spec = resolve_spec(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(spec)
    except (DomainError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
