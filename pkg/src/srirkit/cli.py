"""Command-line front end.

Commands (all driven by a JSON config):

- ``simulate``: render a scene's SRIR, FOA, and reference BRIR plus an
  image list CSV and a checksum manifest.
- ``render``: run system conditions on a scene or imported signals, one
  BRIR per condition (``--dump-intermediates`` adds trajectory/field CSVs
  and loudspeaker-signal WAVs).
- ``compare``: score system BRIRs against a reference (JSON + CSV reports).
- ``metrics``: metric report for a single BRIR.
- ``ess``: generate an exponential sweep pair or deconvolve a recording.

Exit codes: 0 success, 1 runtime failure, 2 configuration error. Outputs
are byte-identical for identical config and seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import wavio
from .arrays import builtin_array
from .doa import DoaConfig, DoaTrajectory
from .errors import ConfigurationError
from .grids import fibonacci_grid, load_grid_csv, save_grid_csv
from .hrir import load_hrir_set, spherical_head_hrir_set
from .ism import Scene, scene_from_json, scene_to_json_dict
from .metrics import JND, MetricReport, error_summary_paired, measure_brir
from .pipelines import (
    AnalysisInput,
    SystemCondition,
    render_intermediates,
    run_condition,
    simulate,
    validate_condition_inputs,
)
from .presets import DEFAULT_GRID_SIZE, SCENE_POSITIONS, scene as preset_scene
from .signals import BinauralIr, MonoIr, MultichannelIr
from .sweep import deconvolve_ess, generate_ess


def _check_keys(cfg: dict, where: str, required: set, optional: set = frozenset()) -> None:
    unknown = set(cfg) - required - set(optional)
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(cfg)
    if missing:
        raise ConfigurationError(f"{where}: missing keys {sorted(missing)}")


def _existing(path_str: str, where: str) -> Path:
    path = Path(path_str)
    if not path.exists():
        raise ConfigurationError(f"{where}: file not found: {path}")
    return path


def _write_manifest(out_dir: Path, command: str, seed: int, files: list) -> Path:
    entries = {}
    for f in sorted(files):
        digest = hashlib.sha256((out_dir / f).read_bytes()).hexdigest()
        entries[f] = digest
    manifest = {"command": command, "seed": seed, "outputs": entries}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _read_brir(path, where: str) -> BinauralIr:
    data, rate = wavio.read_wav(_existing(path, where))
    if data.shape[0] != 2:
        raise ConfigurationError(f"{where}: {path} must be a stereo WAV")
    return BinauralIr(MonoIr(data[0], rate), MonoIr(data[1], rate))


def _load_scene(cfg: dict, where: str, receiver) -> tuple[Scene, float, int]:
    if "scene_preset" in cfg:
        name = cfg["scene_preset"]
        if name not in SCENE_POSITIONS:
            raise ConfigurationError(
                f"{where}: unknown scene preset {name!r} "
                f"(available: {', '.join(SCENE_POSITIONS)})"
            )
        sc = preset_scene(name, receiver=receiver, max_order=int(cfg.get("max_order", 30)))
        rate = float(cfg.get("sample_rate", 48000.0))
        length = int(round(float(cfg.get("length_s", 0.4)) * rate))
        return sc, rate, length
    if "scene_json" in cfg:
        sc, rate, length = scene_from_json(_existing(cfg["scene_json"], where), receiver)
        rate = float(cfg.get("sample_rate", rate))
        if "length_s" in cfg:
            length = int(round(float(cfg["length_s"]) * rate))
        return sc, rate, length
    raise ConfigurationError(f"{where}: need scene_preset or scene_json")


def _grid_and_hrirs(cfg: dict, where: str, sample_rate: float):
    if "grid_csv" in cfg:
        grid = load_grid_csv(_existing(cfg["grid_csv"], where))
    else:
        grid = fibonacci_grid(int(cfg.get("grid_size", DEFAULT_GRID_SIZE)))
    if "hrir_index" in cfg:
        hrirs = load_hrir_set(
            _existing(cfg["hrir_index"], where), cfg.get("hrir_wav")
        )
        if hrirs.sample_rate != sample_rate:
            raise ConfigurationError(
                f"{where}: HRIR sample rate {hrirs.sample_rate} != {sample_rate}"
            )
    else:
        hrirs = spherical_head_hrir_set(grid.directions, sample_rate=sample_rate)
    return grid, hrirs


_SCENE_KEYS = {"scene_preset", "scene_json", "sample_rate", "length_s", "max_order"}
_GRID_KEYS = {"grid_size", "grid_csv", "hrir_index", "hrir_wav"}


def cmd_simulate(cfg: dict, out_dir: Path, args) -> int:
    _check_keys(cfg, "simulate", set(), _SCENE_KEYS | _GRID_KEYS | {"array"})
    geometry = builtin_array(cfg.get("array", "om6"))
    sc, rate, length = _load_scene(cfg, "simulate", geometry)
    grid, hrirs = _grid_and_hrirs(cfg, "simulate", rate)

    rendering = simulate(sc, rate, length, geometry=geometry, hrirs=hrirs)
    wavio.write_wav(out_dir / "srir.wav", rendering.analysis_input.srir.as_matrix(), int(rate))
    wavio.write_wav(out_dir / "foa.wav", rendering.analysis_input.foa.as_matrix(), int(rate))
    wavio.write_wav(out_dir / "reference_brir.wav", rendering.reference.as_matrix(), int(rate))
    rendering.images.to_csv(out_dir / "images.csv")
    (out_dir / "scene.json").write_text(
        json.dumps(scene_to_json_dict(sc, rate, length), indent=2, sort_keys=True) + "\n"
    )
    files = ["srir.wav", "foa.wav", "reference_brir.wav", "images.csv", "scene.json"]
    _write_manifest(out_dir, "simulate", args.seed, files)
    print(f"simulate: wrote {len(files)} files to {out_dir}")
    return 0


_CONDITION_KEYS = {
    "id", "analysis", "pressure_source", "synthesis", "knn",
    "window_size", "band_low", "band_high", "smoothing_window",
    "tf_averaging_frames", "psi_override",
}


def _build_condition(entry: dict, grid, hrirs, seed: int) -> SystemCondition:
    _check_keys(entry, f"condition {entry.get('id', '?')!r}",
                {"id", "analysis", "pressure_source", "synthesis"},
                _CONDITION_KEYS)
    doa_cfg = DoaConfig(
        window_size=int(entry.get("window_size", 64)),
        band_low=float(entry.get("band_low", 200.0)),
        band_high=float(entry.get("band_high", 2400.0)),
        smoothing_window=int(entry.get("smoothing_window", 64)),
    )
    psi = entry.get("psi_override")
    return SystemCondition(
        id=str(entry["id"]),
        analysis=entry["analysis"],
        pressure_source=entry["pressure_source"],
        synthesis=entry["synthesis"],
        grid=grid,
        hrirs=hrirs,
        doa_config=doa_cfg,
        knn=int(entry.get("knn", 1)),
        seed=seed,
        tf_averaging_frames=int(entry.get("tf_averaging_frames", 8)),
        psi_override=None if psi is None else float(psi),
    )


def _load_analysis_input(cfg: dict, where: str) -> AnalysisInput:
    _check_keys(cfg, where, set(), {"srir_wav", "array", "foa_wav"})
    srir = geometry = foa = None
    if "srir_wav" in cfg:
        data, rate = wavio.read_wav(_existing(cfg["srir_wav"], where))
        geometry = builtin_array(cfg.get("array", "om6"))
        if data.shape[0] != geometry.capsule_count:
            raise ConfigurationError(
                f"{where}: SRIR has {data.shape[0]} channels, array "
                f"{geometry.name!r} expects {geometry.capsule_count}"
            )
        srir = MultichannelIr(
            tuple(MonoIr(ch, rate) for ch in data), geometry_id=geometry.name
        )
    if "foa_wav" in cfg:
        data, rate = wavio.read_wav(_existing(cfg["foa_wav"], where))
        if data.shape[0] != 4:
            raise ConfigurationError(f"{where}: FOA WAV must have 4 channels (w,x,y,z)")
        from .arrays import FoaSignal

        foa = FoaSignal(*(MonoIr(ch, rate) for ch in data))
    return AnalysisInput(srir=srir, geometry=geometry, foa=foa)


def cmd_render(cfg: dict, out_dir: Path, args) -> int:
    _check_keys(cfg, "render", {"conditions"},
                _SCENE_KEYS | _GRID_KEYS | {"array", "input"})
    if not cfg["conditions"]:
        raise ConfigurationError("render: conditions list is empty")

    if "input" in cfg:
        inputs = _load_analysis_input(cfg["input"], "render.input")
        rate = inputs.sample_rate
        length = len(inputs.srir) if inputs.srir is not None else len(inputs.foa)
    else:
        geometry = builtin_array(cfg.get("array", "om6"))
        sc, rate, length = _load_scene(cfg, "render", geometry)
        inputs = None  # simulated below once grid/hrirs exist

    grid, hrirs = _grid_and_hrirs(cfg, "render", rate)
    if inputs is None:
        inputs = simulate(sc, rate, length, hrirs=hrirs).analysis_input

    conditions = [_build_condition(e, grid, hrirs, args.seed) for e in cfg["conditions"]]
    ids = [c.id for c in conditions]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"render: condition ids must be unique, got {ids}")
    for cond in conditions:
        validate_condition_inputs(inputs, cond)

    def render_one(cond):
        try:
            return run_condition(inputs, cond, sample_rate=rate, length=length)
        except Exception as exc:  # noqa: BLE001 - enumerated below
            return exc

    if args.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            brirs = list(pool.map(render_one, conditions))
    else:
        brirs = [render_one(c) for c in conditions]

    files = []
    failures = []
    for cond, brir in zip(conditions, brirs):
        if isinstance(brir, Exception):
            failures.append(f"{cond.id}: {brir}")
            continue
        name = f"{cond.id}.wav"
        wavio.write_wav(out_dir / name, brir.as_matrix(), int(rate))
        files.append(name)
        if args.dump_intermediates:
            meta, vls = render_intermediates(inputs, cond)
            meta_name = (
                f"{cond.id}_trajectory.csv"
                if isinstance(meta, DoaTrajectory)
                else f"{cond.id}_tf_field.csv"
            )
            meta.to_csv(out_dir / meta_name)
            vls_name = f"{cond.id}_vls.wav"
            wavio.write_wav(out_dir / vls_name, vls.samples, int(rate))
            grid_name = f"{cond.id}_grid.csv"
            save_grid_csv(vls.grid, out_dir / grid_name)
            files += [meta_name, vls_name, grid_name]
    _write_manifest(out_dir, "render", args.seed, files)
    if failures:
        print("render: failed conditions:", file=sys.stderr)
        for line in failures:
            print(f"  {line}", file=sys.stderr)
        return 1
    print(f"render: wrote {len(files)} files to {out_dir}")
    return 0


def _compare_rows(batch: list, where: str) -> tuple[list, list, list]:
    names, systems, references = [], [], []
    for i, entry in enumerate(batch):
        _check_keys(entry, f"{where}[{i}]", {"reference_wav", "systems"}, {"scene"})
        ref = _read_brir(entry["reference_wav"], where)
        for sys_entry in entry["systems"]:
            _check_keys(sys_entry, f"{where}[{i}].systems", {"id", "brir_wav"})
            names.append((str(sys_entry["id"]), str(entry.get("scene", i))))
            systems.append(_read_brir(sys_entry["brir_wav"], where))
            references.append(ref)
    return names, systems, references


def cmd_compare(cfg: dict, out_dir: Path, args) -> int:
    _check_keys(cfg, "compare", set(), {"reference_wav", "systems", "batch"})
    if "batch" in cfg:
        batch = cfg["batch"]
    else:
        _check_keys(cfg, "compare", {"reference_wav", "systems"}, {"batch"})
        batch = [{"reference_wav": cfg["reference_wav"], "systems": cfg["systems"]}]
    if not batch:
        raise ConfigurationError("compare: nothing to compare")

    names, system_brirs, reference_brirs = _compare_rows(batch, "compare.batch")
    if not names:
        raise ConfigurationError("compare: at least one system is required")

    ref_cache: dict[int, MetricReport] = {}
    sys_reports, ref_reports = [], []
    for brir, ref in zip(system_brirs, reference_brirs):
        sys_reports.append(measure_brir(brir))
        key = id(ref)
        if key not in ref_cache:
            ref_cache[key] = measure_brir(ref)
        ref_reports.append(ref_cache[key])

    by_condition: dict[str, list[int]] = {}
    for i, (cond_id, _) in enumerate(names):
        by_condition.setdefault(cond_id, []).append(i)

    report = {"rows": [], "pooled": {}}
    csv_rows = []
    for i, (cond_id, scene_id) in enumerate(names):
        row = {
            "condition": cond_id,
            "scene": scene_id,
            "metrics": sys_reports[i].to_dict(),
            "reference": ref_reports[i].to_dict(),
        }
        report["rows"].append(row)
        csv_rows.append(row)
    for cond_id, idxs in sorted(by_condition.items()):
        summary = error_summary_paired(
            [sys_reports[i] for i in idxs], [ref_reports[i] for i in idxs]
        )
        report["pooled"][cond_id] = json.loads(summary.to_json())

    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    metric_names = MetricReport.metric_names()
    with (out_dir / "report.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["condition", "scene"]
            + metric_names
            + [f"err_{m}" for m in metric_names]
            + [f"jnd_pass_{m}" for m in metric_names]
        )
        for row in csv_rows:
            errs = {
                m: row["metrics"][m] - row["reference"][m] for m in metric_names
            }
            flags = []
            for m in metric_names:
                threshold = JND[m] * row["reference"][m] if m == "t30_mid_s" else JND[m]
                flags.append(int(abs(errs[m]) <= threshold))
            writer.writerow(
                [row["condition"], row["scene"]]
                + [f"{row['metrics'][m]:.9g}" for m in metric_names]
                + [f"{errs[m]:.9g}" for m in metric_names]
                + flags
            )
    _write_manifest(out_dir, "compare", args.seed, ["report.json", "report.csv"])
    print(f"compare: wrote report.json and report.csv to {out_dir}")
    return 0


def cmd_metrics(cfg: dict, out_dir: Path, args) -> int:
    _check_keys(cfg, "metrics", {"brir_wav"}, {"include_full_itd"})
    brir = _read_brir(cfg["brir_wav"], "metrics")
    report = measure_brir(brir)
    payload = json.loads(report.to_json())
    if cfg.get("include_full_itd"):
        from .dsp import normalize_direct_energy
        from .metrics import itd as itd_metric

        payload["itd_full_us"] = itd_metric(normalize_direct_energy(brir), segment_s=None)
    text = json.dumps(payload, indent=2, sort_keys=True)
    (out_dir / "metrics.json").write_text(text + "\n")
    _write_manifest(out_dir, "metrics", args.seed, ["metrics.json"])
    print(text)
    return 0


def cmd_ess(cfg: dict, out_dir: Path, args) -> int:
    _check_keys(cfg, "ess", {"mode"},
                {"sample_rate", "f_start", "f_end", "duration_s", "fade_s",
                 "recorded_wav", "inverse_wav", "trim_distortion"})
    mode = cfg["mode"]
    if mode == "generate":
        rate = float(cfg.get("sample_rate", 48000.0))
        sweep, inverse = generate_ess(
            rate,
            float(cfg.get("f_start", 20.0)),
            float(cfg.get("f_end", 20000.0)),
            float(cfg.get("duration_s", 20.0)),
            float(cfg.get("fade_s", 0.01)),
        )
        wavio.write_wav(out_dir / "sweep.wav", sweep.samples[None, :], int(rate))
        wavio.write_wav(out_dir / "inverse.wav", inverse.samples[None, :], int(rate))
        _write_manifest(out_dir, "ess", args.seed, ["sweep.wav", "inverse.wav"])
        print(f"ess: wrote sweep.wav and inverse.wav to {out_dir}")
        return 0
    if mode == "deconvolve":
        for key in ("recorded_wav", "inverse_wav"):
            if key not in cfg:
                raise ConfigurationError(f"ess deconvolve: missing {key}")
        rec_data, rate = wavio.read_wav(_existing(cfg["recorded_wav"], "ess"))
        inv_data, inv_rate = wavio.read_wav(_existing(cfg["inverse_wav"], "ess"))
        if inv_data.shape[0] != 1:
            raise ConfigurationError("ess: inverse_wav must be mono")
        inverse = MonoIr(inv_data[0], inv_rate)
        trim = bool(cfg.get("trim_distortion", True))
        channels = [
            deconvolve_ess(MonoIr(ch, rate), inverse, trim).samples for ch in rec_data
        ]
        wavio.write_wav(out_dir / "ir.wav", np.stack(channels), int(rate))
        _write_manifest(out_dir, "ess", args.seed, ["ir.wav"])
        print(f"ess: wrote ir.wav to {out_dir}")
        return 0
    raise ConfigurationError(f"ess: unknown mode {mode!r} (generate | deconvolve)")


_COMMANDS = {
    "simulate": cmd_simulate,
    "render": cmd_render,
    "compare": cmd_compare,
    "metrics": cmd_metrics,
    "ess": cmd_ess,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srirkit",
        description="Spatial room impulse response analysis, resynthesis, and evaluation",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    parser.add_argument("--output", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--dump-intermediates", action="store_true",
                        help="also write trajectories and loudspeaker signals")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config_path = Path(args.config)
        if not config_path.exists():
            raise ConfigurationError(f"config not found: {config_path}")
        try:
            cfg = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{config_path}: invalid JSON ({exc})") from exc
        if not isinstance(cfg, dict):
            raise ConfigurationError(f"{config_path}: top level must be an object")
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
