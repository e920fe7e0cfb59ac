"""End-to-end system conditions: analysis, synthesis, binaural rendering,
and metric comparison against a reference.

A condition names an analysis front end (TDOA, broadband intensity, or
time-frequency intensity), a pressure-signal source, and a synthesis back
end (per-sample loudspeaker mapping or direct/diffuse time-frequency
synthesis). Conditions compose deterministically: the same inputs, seed,
and thread count-independent scheduling give bit-identical BRIRs.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .arrays import FoaSignal, MicArrayGeometry
from .doa import (
    DoaConfig,
    DoaTrajectory,
    TfDoaField,
    piv_broadband_doa,
    tdoa_ls_doa,
    tf_piv_analysis,
)
from .dsp import normalize_direct_energy, stft
from .errors import ConfigurationError
from .grids import LoudspeakerGrid
from .hrir import HrirSet
from .ism import (
    ImageSourceList,
    Scene,
    enumerate_images,
    render_array_srir,
    render_foa_srir,
    render_reference_brir,
)
from .metrics import error_summary_paired, measure_brir
from .signals import BinauralIr, MonoIr, MultichannelIr
from .synthesis import (
    VirtualLoudspeakerSignals,
    binaural_render,
    sdm_synthesize,
    sirr_synthesize,
)

ANALYSES = ("tdoa", "piv-broadband", "tf-piv")
PRESSURE_SOURCES = ("center-mic", "zeroth-order", "channel-average")
SYNTHESES = ("sdm", "sirr")


@dataclass(frozen=True)
class AnalysisInput:
    """Everything a condition may consume for one scene or measurement."""

    srir: MultichannelIr | None = None
    geometry: MicArrayGeometry | None = None
    foa: FoaSignal | None = None

    def __post_init__(self):
        if self.srir is None and self.foa is None:
            raise ConfigurationError("AnalysisInput needs an SRIR or a FOA signal")
        if self.srir is not None and self.geometry is not None:
            if self.srir.channel_count != self.geometry.capsule_count:
                raise ConfigurationError(
                    "SRIR channel count does not match the geometry"
                )
        if self.srir is not None and self.foa is not None:
            if len(self.srir) != len(self.foa) or self.srir.sample_rate != self.foa.sample_rate:
                raise ConfigurationError("SRIR and FOA must share rate and length")

    @property
    def sample_rate(self) -> float:
        return self.srir.sample_rate if self.srir is not None else self.foa.sample_rate


@dataclass(frozen=True)
class SceneRendering:
    """All receiver renderings of one simulated scene."""

    images: ImageSourceList
    analysis_input: AnalysisInput
    reference: BinauralIr
    sample_rate: float
    length: int


def simulate(scene: Scene, sample_rate: float, length: int,
             geometry: MicArrayGeometry | None = None,
             hrirs: HrirSet | None = None) -> SceneRendering:
    """Render a scene for every receiver the pipelines consume.

    The scene's own receiver is used where it applies; ``geometry`` and
    ``hrirs`` fill the gaps (an array SRIR and a reference BRIR are always
    produced, the ideal-FOA rendering likewise).
    """
    if isinstance(scene.receiver, MicArrayGeometry) and geometry is None:
        geometry = scene.receiver
    if isinstance(scene.receiver, HrirSet) and hrirs is None:
        hrirs = scene.receiver
    if geometry is None:
        from .presets import om6

        geometry = om6()
    if hrirs is None:
        from .presets import default_hrirs

        hrirs = default_hrirs(sample_rate=sample_rate)

    images = enumerate_images(scene)
    srir = render_array_srir(images, geometry, sample_rate, length)
    foa = render_foa_srir(images, sample_rate, length)
    reference = render_reference_brir(images, hrirs, sample_rate, length)
    return SceneRendering(
        images=images,
        analysis_input=AnalysisInput(srir=srir, geometry=geometry, foa=foa),
        reference=reference,
        sample_rate=sample_rate,
        length=length,
    )


@dataclass(frozen=True)
class SystemCondition:
    """One rendering system under test."""

    id: str
    analysis: str
    pressure_source: str
    synthesis: str
    grid: LoudspeakerGrid
    hrirs: HrirSet
    doa_config: DoaConfig = field(default_factory=DoaConfig)
    knn: int = 1
    seed: int = 0
    tf_averaging_frames: int = 8
    psi_override: float | None = None

    def __post_init__(self):
        if self.analysis not in ANALYSES:
            raise ConfigurationError(f"unknown analysis {self.analysis!r}")
        if self.pressure_source not in PRESSURE_SOURCES:
            raise ConfigurationError(f"unknown pressure_source {self.pressure_source!r}")
        if self.synthesis not in SYNTHESES:
            raise ConfigurationError(f"unknown synthesis {self.synthesis!r}")
        if self.synthesis == "sirr" and self.analysis != "tf-piv":
            raise ConfigurationError(
                f"{self.id}: sirr synthesis requires tf-piv analysis"
            )
        if self.synthesis == "sdm" and self.analysis == "tf-piv":
            raise ConfigurationError(
                f"{self.id}: sdm synthesis needs a per-sample trajectory "
                "(tdoa or piv-broadband analysis)"
            )
        if self.psi_override is not None and not 0.0 <= self.psi_override <= 1.0:
            raise ConfigurationError("psi_override must lie in [0, 1]")


def _pressure_signal(inputs: AnalysisInput, condition: SystemCondition) -> MonoIr:
    source = condition.pressure_source
    if source == "center-mic":
        if inputs.srir is None or inputs.geometry is None:
            raise ConfigurationError(
                f"{condition.id}: center-mic pressure needs an SRIR with geometry"
            )
        if inputs.geometry.center_index is None:
            raise ConfigurationError(
                f"{condition.id}: geometry {inputs.geometry.name!r} has no center capsule"
            )
        return inputs.srir.channels[inputs.geometry.center_index]
    if source == "zeroth-order":
        if inputs.foa is None:
            raise ConfigurationError(
                f"{condition.id}: zeroth-order pressure needs a FOA signal"
            )
        return inputs.foa.w
    if inputs.srir is None:
        raise ConfigurationError(
            f"{condition.id}: channel-average pressure needs an SRIR"
        )
    return MonoIr(inputs.srir.as_matrix().mean(axis=0), inputs.srir.sample_rate)


def analyze_trajectory(inputs: AnalysisInput, condition: SystemCondition) -> DoaTrajectory:
    """Per-sample DOA trajectory for sdm-style synthesis."""
    if condition.analysis == "tdoa":
        if inputs.srir is None or inputs.geometry is None:
            raise ConfigurationError(
                f"{condition.id}: tdoa analysis needs an SRIR bound to a geometry"
            )
        return tdoa_ls_doa(inputs.srir, inputs.geometry, condition.doa_config)
    if condition.analysis == "piv-broadband":
        if inputs.foa is None:
            raise ConfigurationError(
                f"{condition.id}: piv-broadband analysis needs a FOA signal"
            )
        return piv_broadband_doa(inputs.foa, condition.doa_config)
    raise ConfigurationError(f"{condition.id}: {condition.analysis} has no trajectory")


def _tf_field(inputs: AnalysisInput, condition: SystemCondition) -> TfDoaField:
    if inputs.foa is None:
        raise ConfigurationError(f"{condition.id}: tf-piv analysis needs a FOA signal")
    window = condition.doa_config.window_size
    hop = window // 2
    frames = [stft(ch, window, hop) for ch in
              (inputs.foa.w, inputs.foa.x, inputs.foa.y, inputs.foa.z)]
    f = tf_piv_analysis(*frames, averaging_frames=condition.tf_averaging_frames)
    if condition.psi_override is not None:
        f = TfDoaField(
            f.directions, np.full_like(f.psi, condition.psi_override),
            f.window_size, f.hop, f.sample_rate,
        )
    return f


def validate_condition_inputs(inputs: AnalysisInput, condition: SystemCondition) -> None:
    """Raise ConfigurationError (naming the condition and the gap) when the
    inputs lack a channel the condition requires. Cheap; used for pre-flight
    validation before any rendering work starts."""
    _pressure_signal(inputs, condition)
    if condition.analysis == "tdoa":
        if inputs.srir is None or inputs.geometry is None:
            raise ConfigurationError(
                f"{condition.id}: tdoa analysis needs an SRIR bound to a geometry"
            )
    elif inputs.foa is None:
        raise ConfigurationError(
            f"{condition.id}: {condition.analysis} analysis needs a FOA signal"
        )


def run_condition(inputs, condition: SystemCondition,
                  sample_rate: float = 48000.0, length: int = 14400) -> BinauralIr:
    """Run one condition end to end, returning the normalized BRIR.

    ``inputs`` may be a :class:`Scene` (simulated on the fly), a
    :class:`SceneRendering`, or an :class:`AnalysisInput`.
    """
    if isinstance(inputs, Scene):
        inputs = simulate(inputs, sample_rate, length, hrirs=condition.hrirs)
    if isinstance(inputs, SceneRendering):
        inputs = inputs.analysis_input
    if not isinstance(inputs, AnalysisInput):
        raise ConfigurationError(f"cannot run a condition on {type(inputs).__name__}")

    pressure = _pressure_signal(inputs, condition)
    if condition.synthesis == "sdm":
        trajectory = analyze_trajectory(inputs, condition)
        vls = sdm_synthesize(pressure, trajectory, condition.grid, condition.knn)
    else:
        field_tf = _tf_field(inputs, condition)
        window = condition.doa_config.window_size
        pressure_frames = stft(pressure, window, window // 2)
        vls = sirr_synthesize(pressure_frames, field_tf, condition.grid, condition.seed)
    brir = binaural_render(vls, condition.hrirs)
    return normalize_direct_energy(brir)


def render_intermediates(inputs, condition: SystemCondition
                         ) -> tuple[DoaTrajectory | TfDoaField, VirtualLoudspeakerSignals]:
    """Analysis metadata and loudspeaker signals, for --dump-intermediates."""
    if isinstance(inputs, SceneRendering):
        inputs = inputs.analysis_input
    pressure = _pressure_signal(inputs, condition)
    if condition.synthesis == "sdm":
        trajectory = analyze_trajectory(inputs, condition)
        return trajectory, sdm_synthesize(pressure, trajectory, condition.grid, condition.knn)
    field_tf = _tf_field(inputs, condition)
    window = condition.doa_config.window_size
    pressure_frames = stft(pressure, window, window // 2)
    return field_tf, sirr_synthesize(pressure_frames, field_tf, condition.grid, condition.seed)


@dataclass(frozen=True)
class ComparisonRun:
    """Scenes (or imported inputs) x conditions, scored against references.

    ``inputs`` maps a scene id to a SceneRendering or AnalysisInput;
    ``references`` maps the same ids to reference BRIRs. SceneRendering
    entries may omit the explicit reference (their own is used).
    """

    inputs: dict
    conditions: tuple
    references: dict = field(default_factory=dict)
    sample_rate: float = 48000.0

    def __post_init__(self):
        if not self.inputs:
            raise ConfigurationError("at least one scene input is required")
        if not self.conditions:
            raise ConfigurationError("at least one condition is required")
        ids = [c.id for c in self.conditions]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"condition ids must be unique, got {ids}")
        for name, inp in self.inputs.items():
            if not isinstance(inp, SceneRendering) and name not in self.references:
                raise ConfigurationError(
                    f"scene {name!r} needs an explicit reference BRIR"
                )
        for cond in self.conditions:
            if cond.hrirs.sample_rate != self.sample_rate:
                raise ConfigurationError(
                    f"condition {cond.id!r}: HRIR rate {cond.hrirs.sample_rate} "
                    f"differs from the run rate {self.sample_rate}"
                )
        for name in self.inputs:
            if self.reference_for(name).sample_rate != self.sample_rate:
                raise ConfigurationError(
                    f"scene {name!r}: reference rate differs from the run rate"
                )
        object.__setattr__(self, "conditions", tuple(self.conditions))

    def reference_for(self, name: str) -> BinauralIr:
        if name in self.references:
            return self.references[name]
        return self.inputs[name].reference

    def reference_source(self, name: str) -> str:
        """Label of where the reference came from, carried into reports."""
        if name in self.references:
            return "external"
        return "ism-nearest-hrir"


@dataclass(frozen=True)
class ComparisonResult:
    """Per-condition, per-scene metric reports plus pooled error summaries."""

    condition_reports: dict  # condition id -> {scene id -> MetricReport}
    reference_reports: dict  # scene id -> MetricReport
    summaries: dict  # condition id -> ErrorSummary
    brirs: dict  # (condition id, scene id) -> BinauralIr
    reference_sources: dict = field(default_factory=dict)  # scene id -> label

    def to_json(self) -> str:
        payload = {
            "reference_sources": dict(sorted(self.reference_sources.items())),
            "reference": {
                scene: report.to_dict()
                for scene, report in sorted(self.reference_reports.items())
            },
            "conditions": {
                cond: {
                    "reports": {
                        scene: report.to_dict() for scene, report in sorted(reports.items())
                    },
                    "summary": json.loads(self.summaries[cond].to_json()),
                }
                for cond, reports in sorted(self.condition_reports.items())
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def run_comparison(run: ComparisonRun, threads: int = 1) -> ComparisonResult:
    """Evaluate every condition on every scene against the references.

    Work items are independent; with ``threads > 1`` they execute in a
    thread pool and are collected in a fixed order, so results are
    byte-identical for any thread count.
    """
    scene_names = sorted(run.inputs)
    tasks = [
        (cond, name) for cond in run.conditions for name in scene_names
    ]

    def render(task):
        cond, name = task
        try:
            return run_condition(run.inputs[name], cond, sample_rate=run.sample_rate)
        except ConfigurationError:
            raise  # already names the condition
        except Exception as exc:
            raise RuntimeError(
                f"condition {cond.id!r} on scene {name!r} failed: {exc}"
            ) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rendered = list(pool.map(render, tasks))
    else:
        rendered = [render(t) for t in tasks]

    reference_reports = {
        name: measure_brir(run.reference_for(name)) for name in scene_names
    }
    brirs = {}
    condition_reports = {cond.id: {} for cond in run.conditions}
    for (cond, name), brir in zip(tasks, rendered):
        brirs[(cond.id, name)] = brir
        condition_reports[cond.id][name] = measure_brir(brir)

    summaries = {}
    for cond in run.conditions:
        systems = [condition_reports[cond.id][name] for name in scene_names]
        refs = [reference_reports[name] for name in scene_names]
        summaries[cond.id] = error_summary_paired(systems, refs)

    return ComparisonResult(
        condition_reports=condition_reports,
        reference_reports=reference_reports,
        summaries=summaries,
        brirs=brirs,
        reference_sources={name: run.reference_source(name) for name in scene_names},
    )


def with_pressure_source(condition: SystemCondition, pressure_source: str) -> SystemCondition:
    """The same condition with only the pressure path changed."""
    return replace(
        condition,
        id=f"{condition.id}-{pressure_source}",
        pressure_source=pressure_source,
    )
