"""Scenario orchestration: design, simulate, reconstruct, measure, export."""

from __future__ import annotations

import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from opentelemetry import trace
from opentelemetry.trace.status import Status, StatusCode

from nsi3d.audit import ArtifactEvent
from nsi3d.context import current_stage, make_run_id, set_run_id
from nsi3d.exceptions import ConfigurationError, MetricError
from nsi3d.export.writer import ArtifactWriter
from nsi3d.imaging import beamform, beampattern, forward_sim, metrics, tx_sequence
from nsi3d.imaging.aperture_design import design_aperture, nsi_windows
from nsi3d.imaging.array_geometry import build_matrix_array, channel_conflicts
from nsi3d.logging_config import get_logger
from nsi3d.models.acquisition import Phantom, Pulse, RfDataset
from nsi3d.models.aperture import (
    DC1,
    DC2,
    STANDARD_APERTURES,
    RECT,
    WINDOW_LABELS,
    ZM,
    ApertureKind,
    ApertureMask,
    ApodizationSet,
)
from nsi3d.models.geometry import ArrayGeometry
from nsi3d.models.metrics import ProfileAxis, ResolutionSummary
from nsi3d.models.sequence import AcquisitionPlan
from nsi3d.models.volume import EnvelopeVolume, VolumeLabel, VoxelGrid
from nsi3d.schemas.experiment import ExperimentConfig, config_hash
from nsi3d.settings import RunSettings, get_settings

logger = get_logger("nsi3d.runner")

tracer = trace.get_tracer(__name__)

MM = 1e-3
REFERENCE_DEPTH_MM = 40.0
MAX_DEPTH_HALF_WINDOW_MM = 5.0


@dataclass
class ScenarioResult:
    """What one invocation produced."""

    name: str
    config_hash: str
    run_id: str
    output_dir: Path
    artifacts: list[Path] = field(default_factory=list)
    summary: list[dict[str, object]] = field(default_factory=list)
    elapsed_s: float = 0.0


@dataclass(frozen=True)
class BenchReport:
    """Wall-clock of DAS-only versus full NSI reconstruction on one dataset."""

    n_voxels: int
    das_seconds: float
    nsi_seconds: float
    nsi_separate_seconds: float

    @property
    def ratio(self) -> float:
        return self.nsi_seconds / self.das_seconds

    @property
    def ratio_separate(self) -> float:
        return self.nsi_separate_seconds / self.das_seconds


def _mm(value: float) -> float:
    return value / MM


class ScenarioRunner:
    """Runs one configured scenario.

    Every stage opens a span; a failing stage records the exception on its
    span before re-raising.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        settings: RunSettings | None = None,
        dump_rf: bool = False,
    ) -> None:
        self.config = config
        self.settings = settings or get_settings()
        self.dump_rf = dump_rf
        self.config_hash = config_hash(config)
        self._geometry: ArrayGeometry | None = None

    # ------------------------------------------------------------------
    # shared building blocks

    @contextmanager
    def _stage(self, name: str, **attributes) -> Iterator[trace.Span]:
        started = time.perf_counter()
        with tracer.start_as_current_span(name) as span, current_stage(name):
            for key, value in attributes.items():
                span.set_attribute(key, value)
            try:
                yield span
            except Exception as exc:
                span.record_exception(exc)
                span.set_status(Status(StatusCode.ERROR, f"{name} failed"))
                raise
            elapsed_ms = int((time.perf_counter() - started) * 1000)
            span.set_attribute("elapsed_ms", elapsed_ms)
            logger.debug("Stage finished", extra={"stage": name, "elapsed_ms": elapsed_ms})

    def _begin(self, name: str) -> tuple[str, ArtifactWriter]:
        run_id = make_run_id(name, self.config_hash)
        set_run_id(run_id)
        base = Path(self.config.output_dir) if self.config.output_dir else self.settings.output_dir
        writer = ArtifactWriter(base / run_id, self.config)
        writer.config_file()
        logger.info(
            "Scenario started",
            extra={
                "scenario": name,
                "preset": self.config.preset,
                "aperture": self.config.aperture.kind,
                "config_hash": self.config_hash,
                "workers": self.settings.workers,
            },
        )
        return run_id, writer

    def _finish(
        self, name: str, run_id: str, writer: ArtifactWriter, started: float,
        summary: list[dict[str, object]],
    ) -> ScenarioResult:
        elapsed = time.perf_counter() - started
        logger.info(
            "Scenario finished",
            extra={"scenario": name, "artifacts": len(writer.written), "elapsed_s": elapsed},
        )
        return ScenarioResult(
            name=name,
            config_hash=self.config_hash,
            run_id=run_id,
            output_dir=writer.output_dir,
            artifacts=list(writer.written),
            summary=summary,
            elapsed_s=elapsed,
        )

    @property
    def geometry(self) -> ArrayGeometry:
        if self._geometry is None:
            self._geometry = build_matrix_array(sound_speed=self.config.sequence.sound_speed)
        return self._geometry

    @property
    def pulse(self) -> Pulse:
        p = self.config.pulse
        return Pulse(
            center_frequency=p.center_frequency_hz,
            fractional_bandwidth=p.fractional_bandwidth,
            sampling_rate=p.sampling_rate_hz,
            oversample=p.oversample,
        )

    def aperture_kinds(self, include_rectangular: bool = False) -> list[ApertureKind]:
        kind = self.config.aperture.kind
        if kind == "all":
            kinds = list(STANDARD_APERTURES)
            if include_rectangular:
                kinds.append(ApertureKind.RECTANGULAR)
            return kinds
        return [ApertureKind(kind)]

    def design(self, kind: ApertureKind) -> tuple[ApertureMask, ApodizationSet]:
        a = self.config.aperture
        geom = self.geometry
        with self._stage("design_aperture", aperture=kind.value) as span:
            mask = design_aperture(
                kind,
                geom,
                r_out_pitches=a.r_out_pitches,
                r_in_pitches=a.r_in_pitches,
                n_spiral=a.n_spiral,
                sigma_d=a.sigma_d,
                max_candidate_distance=a.max_candidate_pitches,
                rect_inner_size=a.rect_inner_size,
            )
            apod = nsi_windows(mask, dc=a.dc, zm_outer_sign=a.zm_outer_sign)
            span.set_attribute("n_elements", mask.n_elements)
            span.set_attribute("n_inner", mask.n_inner)
        return mask, apod

    def plan(self, mask: ApertureMask) -> AcquisitionPlan:
        s = self.config.sequence
        with self._stage("build_plan", aperture=mask.kind.value) as span:
            sources = tx_sequence.virtual_sources(s.standoff_mm * MM, s.tilt_deg)
            plan = tx_sequence.build_plan(mask, self.geometry, sources)
            plan = tx_sequence.with_accounting(
                plan, s.depth_mm * MM, s.sound_speed, self.config.pulse.sampling_rate_hz
            )
            span.set_attribute("n_events", plan.n_events)
        return plan

    def grid(self, plane: str | None = None) -> VoxelGrid:
        """Configured voxel grid, or its y = cy (`"xz"`) or x = cx (`"yz"`) plane."""
        g = self.config.grid
        ranges = [
            (lo * MM, hi * MM) for lo, hi in (g.x_range_mm, g.y_range_mm, g.z_range_mm)
        ]
        if g.dims is not None:
            dims = list(g.dims)
        else:
            spacing = (
                g.spacing_mm * MM
                if g.spacing_mm
                else 0.5 * self.config.sequence.sound_speed / self.config.pulse.center_frequency_hz
            )
            dims = list(VoxelGrid.with_spacing(*ranges, spacing).dims)
        if plane is not None:
            cx, cy, _ = (v * MM for v in self.config.phantom.cyst_center_mm)
            axis = {"xz": 1, "yz": 0}[plane]
            centre = cy if plane == "xz" else cx
            ranges[axis] = (centre, centre)
            dims[axis] = 1
        return VoxelGrid.from_extents(*ranges, tuple(dims))

    def simulate(self, plan: AcquisitionPlan, phantom: Phantom) -> RfDataset:
        with self._stage(
            "simulate_acquisition",
            aperture=plan.aperture.kind.value,
            n_scatterers=phantom.n_scatterers,
        ):
            return forward_sim.simulate_acquisition(
                plan,
                phantom,
                self.geometry,
                self.pulse,
                workers=self.settings.workers,
                noise_std=self.config.phantom.noise_std,
                batch=self.settings.scatterer_batch,
            )

    def reconstruct(
        self,
        dataset: RfDataset | beamform.AnalyticChannels,
        apod: ApodizationSet,
        grid: VoxelGrid,
        include_das: bool = True,
    ) -> dict[VolumeLabel, EnvelopeVolume]:
        with self._stage(
            "beamform", aperture=apod.mask.kind.value, n_voxels=grid.n_voxels
        ):
            return beamform.reconstruct(
                dataset,
                apod,
                grid,
                self.geometry,
                compound=self.config.imaging.compound,
                include_das=include_das,
                workers=self.settings.workers,
                voxel_chunk=self.settings.voxel_chunk,
                rx_block=self.settings.rx_block,
            )

    # ------------------------------------------------------------------
    # subcommands

    def run(self) -> ScenarioResult:
        scenario = self.config.scenario
        with tracer.start_as_current_span("run_scenario") as span:
            span.set_attribute("scenario", scenario)
            span.set_attribute("config_hash", self.config_hash)
            try:
                if scenario == "points":
                    result = self.run_points()
                elif scenario == "cyst":
                    result = self.run_cyst()
                else:
                    result = self.run_beampattern()
            except Exception as exc:
                logger.exception("Scenario failed", extra={"scenario": scenario})
                span.record_exception(exc)
                span.set_status(Status(StatusCode.ERROR, "Scenario failed"))
                raise
            span.set_attribute("artifacts", len(result.artifacts))
            span.set_status(Status(StatusCode.OK))
            return result

    def export_design(self) -> ScenarioResult:
        """Element table, masks and window maps of every requested aperture."""
        started = time.perf_counter()
        run_id, writer = self._begin("design")
        geom = self.geometry
        with self._stage("export"):
            writer.table(
                "geometry.csv",
                ("element_id", "col", "active_row", "physical_row", "x_mm", "y_mm",
                 "bank", "channel", "radial_pitches"),
                (
                    (e.element_id, e.col, e.active_row, e.physical_row, _mm(e.position[0]),
                     _mm(e.position[1]), e.bank, e.channel, e.radial_distance / geom.pitch)
                    for e in geom.elements
                ),
                ArtifactEvent.GEOMETRY_EXPORTED,
            )
        summary = []
        for kind in self.aperture_kinds(include_rectangular=True):
            mask, apod = self.design(kind)
            conflicts = channel_conflicts(geom, mask.element_ids)
            summary.append(
                {
                    "aperture": kind.value,
                    "n_elements": mask.n_elements,
                    "n_inner": mask.n_inner,
                    "n_outer": mask.n_outer,
                    "zm_sum": float(apod.w_zm.sum()),
                    "conflict_free": not conflicts,
                    "shared_channels": len(conflicts),
                }
            )
            with self._stage("export", aperture=kind.value):
                weights = apod.element_weights(geom.n_elements)
                inner = mask.inner_flags()
                writer.table(
                    f"aperture_{kind.value}.csv",
                    ("element_id", "col", "active_row", "bank", "channel", "inner",
                     *WINDOW_LABELS),
                    (
                        (i, geom.cols[i], geom.active_rows[i], geom.banks[i], geom.channels[i],
                         bool(inner[n]), *(weights[label][i] for label in WINDOW_LABELS))
                        for n, i in enumerate(mask.element_ids)
                    ),
                    ArtifactEvent.APODIZATION_EXPORTED,
                )
                for label in WINDOW_LABELS:
                    writer.weight_map(f"weights_{kind.value}_{label}.pgm", weights[label], geom)
        writer.table(
            "apertures.csv",
            tuple(summary[0]),
            (tuple(row.values()) for row in summary),
            ArtifactEvent.APODIZATION_EXPORTED,
        )
        return self._finish("design", run_id, writer, started, summary)

    def export_rates(self) -> ScenarioResult:
        """Event counts, volume rates and RF sizes of every requested aperture."""
        started = time.perf_counter()
        run_id, writer = self._begin("rates")
        summary = []
        for kind in self.aperture_kinds():
            mask, _ = self.design(kind)
            plan = self.plan(mask)
            summary.append(
                {
                    "aperture": kind.value,
                    "n_elements": mask.n_elements,
                    "n_angles": plan.n_angles,
                    "events_per_angle": plan.events_per_angle,
                    "n_events": plan.n_events,
                    "volume_rate_hz": plan.max_volume_rate,
                    "rf_megabytes": plan.rf_bytes_per_volume / 1e6,
                }
            )
            writer.table(
                f"plan_{kind.value}.csv",
                ("event_index", "angle_index", "azimuth_tilt_deg", "elevation_tilt_deg",
                 "tx_bank", "rx_bank", "n_tx", "n_rx"),
                (
                    (ev.event_index, ev.angle_index, ev.source.azimuth_tilt,
                     ev.source.elevation_tilt, ev.tx_bank, ev.rx_bank, len(ev.tx_elements),
                     len(ev.rx_elements))
                    for ev in plan.events
                ),
                ArtifactEvent.PLAN_EXPORTED,
            )
        writer.table(
            "rates.csv",
            tuple(summary[0]),
            (tuple(row.values()) for row in summary),
            ArtifactEvent.RATES_EXPORTED,
        )
        return self._finish("rates", run_id, writer, started, summary)

    # ------------------------------------------------------------------
    # points

    def _depth_windows(self) -> list[tuple[float, tuple[float, float] | None]]:
        depths = sorted(self.config.phantom.point_depths_mm)
        z_lo, z_hi = self.config.grid.z_range_mm
        windows = []
        for i, depth in enumerate(depths):
            if not z_lo <= depth <= z_hi:
                logger.warning(
                    "Point outside the voxel grid, skipped", extra={"depth_mm": depth}
                )
                continue
            if len(depths) == 1:
                windows.append((depth, None))
                continue
            gaps = [abs(depth - d) for j, d in enumerate(depths) if j != i]
            half = min(MAX_DEPTH_HALF_WINDOW_MM, 0.5 * min(gaps))
            windows.append((depth, ((depth - half) * MM, (depth + half) * MM)))
        return windows

    def _reference_depth(self, windows: Sequence[tuple[float, object]]) -> float:
        depths = [d for d, _ in windows]
        return min(depths, key=lambda d: abs(d - REFERENCE_DEPTH_MM))

    def _export_slices(
        self,
        writer: ArtifactWriter,
        prefix: str,
        volumes: dict[VolumeLabel, EnvelopeVolume],
        z_window: tuple[float, float] | None,
        c_depth_mm: float,
    ) -> None:
        dr = self.config.imaging.dynamic_range_db
        das = volumes[VolumeLabel.DAS].values
        search = das
        if z_window is not None:
            z = volumes[VolumeLabel.DAS].grid.z
            keep = (z >= z_window[0]) & (z <= z_window[1])
            search = np.where(keep[None, None, :], das, -np.inf)
        ix, iy, _ = np.unravel_index(int(np.argmax(search)), das.shape)
        for label in (VolumeLabel.DAS, VolumeLabel.NSI):
            vol = volumes[label]
            db = beamform.log_compress(vol, dr)
            iz = vol.grid.nearest_index((0.0, 0.0, c_depth_mm * MM))[2]
            name = f"{prefix}_{label.value.lower()}"
            writer.db_image(f"{name}_xz.pgm", db[:, iy, :].T, dr)
            writer.db_image(f"{name}_yz.pgm", db[ix, :, :].T, dr)
            writer.db_image(f"{name}_c{c_depth_mm:g}mm.pgm", db[:, :, iz].T, dr)
            writer.volume(name, vol, dr)

    def run_points(self) -> ScenarioResult:
        """Point-target PSFs: FWHM and SMER per depth for DAS and NSI."""
        started = time.perf_counter()
        run_id, writer = self._begin("points")
        windows = self._depth_windows()
        if not windows:
            raise ConfigurationError(
                "no point depth lies inside the voxel grid",
                field="phantom.point_depths_mm",
                value=self.config.phantom.point_depths_mm,
            )
        reference = self._reference_depth(windows)
        ref_window = dict(windows)[reference]
        phantom = forward_sim.make_point_phantom([d * MM for d, _ in windows])
        grid = self.grid()

        per_depth_rows = []
        table_columns: dict[str, ResolutionSummary] = {}
        for kind in self.aperture_kinds():
            mask, apod = self.design(kind)
            plan = self.plan(mask)
            dataset = self.simulate(plan, phantom)
            if self.dump_rf:
                writer.rf(f"rf_{kind.value}", dataset)
            volumes = self.reconstruct(dataset, apod, grid)

            with self._stage("measure", aperture=kind.value):
                for depth, z_window in windows:
                    das = metrics.summarize_resolution(volumes[VolumeLabel.DAS], z_window)
                    nsi = metrics.summarize_resolution(volumes[VolumeLabel.NSI], z_window)
                    reduction = metrics.resolution_area_reduction(das, nsi)
                    for method, s in (("das", das), ("nsi", nsi)):
                        per_depth_rows.append(
                            (kind.value, depth, method, _mm(s.fwhm_azimuth),
                             _mm(s.fwhm_elevation), s.smer_azimuth, s.smer_elevation,
                             s.smer_clamped, reduction if method == "nsi" else 0.0)
                        )
                    if depth == reference:
                        if kind is ApertureKind.CIRCULAR or len(self.aperture_kinds()) == 1:
                            table_columns[f"{kind.value}_das"] = das
                        table_columns[f"{kind.value}_nsi"] = nsi
                        self._export_profiles(writer, kind, volumes, z_window)

            with self._stage("export", aperture=kind.value):
                c_depth = self.config.imaging.c_plane_depth_mm or reference
                self._export_slices(writer, kind.value, volumes, ref_window, c_depth)

        writer.table(
            "resolution_by_depth.csv",
            ("aperture", "depth_mm", "method", "fwhm_azimuth_mm", "fwhm_elevation_mm",
             "smer_azimuth_db", "smer_elevation_db", "smer_clamped", "area_reduction"),
            per_depth_rows,
        )
        columns = list(table_columns)
        writer.table(
            "resolution_table.csv",
            ("metric", *columns),
            [
                ("depth_mm", *(reference for _ in columns)),
                ("fwhm_azimuth_mm", *(_mm(table_columns[c].fwhm_azimuth) for c in columns)),
                ("fwhm_elevation_mm", *(_mm(table_columns[c].fwhm_elevation) for c in columns)),
                ("smer_azimuth_db", *(table_columns[c].smer_azimuth for c in columns)),
                ("smer_elevation_db", *(table_columns[c].smer_elevation for c in columns)),
            ],
        )
        summary = [
            {
                "column": column,
                "fwhm_azimuth_mm": _mm(s.fwhm_azimuth),
                "fwhm_elevation_mm": _mm(s.fwhm_elevation),
                "smer_azimuth_db": s.smer_azimuth,
                "smer_elevation_db": s.smer_elevation,
            }
            for column, s in table_columns.items()
        ]
        return self._finish("points", run_id, writer, started, summary)

    def _export_profiles(
        self,
        writer: ArtifactWriter,
        kind: ApertureKind,
        volumes: dict[VolumeLabel, EnvelopeVolume],
        z_window: tuple[float, float] | None,
    ) -> None:
        for label in (VolumeLabel.DAS, VolumeLabel.NSI):
            for axis in (ProfileAxis.AZIMUTH, ProfileAxis.ELEVATION):
                profile = metrics.profile_through_max(volumes[label], axis, z_window)
                writer.table(
                    f"profile_{kind.value}_{label.value.lower()}_{axis.value}.csv",
                    ("coordinate_mm", "amplitude", "db"),
                    zip(_mm_array(profile.coordinates), profile.amplitudes, profile.db()),
                    ArtifactEvent.PROFILE_EXPORTED,
                )

    # ------------------------------------------------------------------
    # cyst

    def cyst_phantom(self) -> Phantom:
        p = self.config.phantom
        circular, _ = self.design(ApertureKind.CIRCULAR)
        return forward_sim.make_default_cyst_phantom(
            circular,
            self.geometry,
            self.pulse,
            seed=self.config.seed,
            box=tuple(v * MM for v in p.box_mm),
            box_center=tuple(v * MM for v in p.box_center_mm),
            cyst_center=tuple(v * MM for v in p.cyst_center_mm),
            cyst_diameter=p.cyst_diameter_mm * MM,
            density=p.density,
            inside_amp_ratio=p.inside_amp_ratio,
        )

    def run_cyst(self) -> ScenarioResult:
        """CR and CNR of DAS and NSI in the X-Z and Y-Z planes through the cyst."""
        started = time.perf_counter()
        run_id, writer = self._begin("cyst")
        p = self.config.phantom
        center = tuple(v * MM for v in p.cyst_center_mm)
        inside, outside = metrics.cyst_regions(center, 0.5 * p.cyst_diameter_mm * MM)
        phantom = self.cyst_phantom()
        dr = self.config.imaging.dynamic_range_db

        rows = []
        summary = []
        for kind in self.aperture_kinds():
            mask, apod = self.design(kind)
            plan = self.plan(mask)
            dataset = self.simulate(plan, phantom)
            if self.dump_rf:
                writer.rf(f"rf_{kind.value}", dataset)
            channels = beamform.prepare_channels(dataset)
            for plane in ("xz", "yz"):
                grid = self.grid(plane)
                volumes = self.reconstruct(channels, apod, grid)
                with self._stage("measure", aperture=kind.value, plane=plane):
                    for label in (VolumeLabel.DAS, VolumeLabel.NSI):
                        stats = metrics.contrast(volumes[label], inside, outside)
                        method = "das" if label is VolumeLabel.DAS else "nsi"
                        rows.append(
                            (kind.value, plane, method, stats.cr, stats.cnr, stats.mu_inside,
                             stats.mu_outside, stats.sigma_inside, stats.sigma_outside,
                             stats.n_inside, stats.n_outside)
                        )
                        summary.append(
                            {"aperture": kind.value, "plane": plane, "method": method,
                             "cr": stats.cr, "cnr": stats.cnr}
                        )
                with self._stage("export", aperture=kind.value, plane=plane):
                    for label in (VolumeLabel.DAS, VolumeLabel.NSI):
                        vol = volumes[label]
                        db = beamform.log_compress(vol, dr)
                        image = db[:, 0, :].T if plane == "xz" else db[0, :, :].T
                        name = f"cyst_{kind.value}_{label.value.lower()}_{plane}"
                        writer.db_image(f"{name}.pgm", image, dr)
                        writer.volume(name, vol, dr)

        writer.table(
            "contrast.csv",
            ("aperture", "plane", "method", "cr", "cnr", "mu_inside", "mu_outside",
             "sigma_inside", "sigma_outside", "n_inside", "n_outside"),
            rows,
        )
        return self._finish("cyst", run_id, writer, started, summary)

    # ------------------------------------------------------------------
    # beampattern

    def run_beampattern(self) -> ScenarioResult:
        """CW patterns of every window, NSI pattern and the -6 dB lobe-width table."""
        started = time.perf_counter()
        run_id, writer = self._begin("beampattern")
        im = self.config.imaging
        depth = im.beampattern_depth_mm * MM
        pattern_dr = max(im.dynamic_range_db, 60.0)

        rows = []
        summary = []
        for kind in self.aperture_kinds(include_rectangular=True):
            _, apod = self.design(kind)
            with self._stage("beampattern", aperture=kind.value):
                patterns = beampattern.nsi_patterns(
                    apod,
                    self.geometry,
                    depth,
                    im.beampattern_half_angle_deg,
                    im.beampattern_points,
                    self.pulse.center_frequency,
                )
            with self._stage("measure", aperture=kind.value):
                rect = beampattern.lobe_widths(patterns[RECT])
                nsi = beampattern.lobe_widths(patterns[beampattern.NSI])
                null_db = 20.0 * np.log10(
                    max(patterns[ZM].reference, 1e-300)
                    / max(patterns[DC1].reference, patterns[DC2].reference)
                )
                for label, widths in ((RECT, rect), (beampattern.NSI, nsi)):
                    rows.append(
                        (kind.value, label, _mm(widths.azimuth), _mm(widths.elevation),
                         widths.azimuth / rect.azimuth, widths.elevation / rect.elevation,
                         null_db)
                    )
                summary.append(
                    {"aperture": kind.value, "azimuth_ratio": nsi.azimuth / rect.azimuth,
                     "elevation_ratio": nsi.elevation / rect.elevation, "zm_null_db": null_db}
                )
            with self._stage("export", aperture=kind.value):
                for label in (RECT, ZM, DC1, DC2, beampattern.NSI):
                    pattern = patterns[label]
                    db = pattern.normalized_db(-pattern_dr)
                    name = f"pattern_{kind.value}_{label}"
                    writer.db_image(f"{name}.pgm", db.T, pattern_dr,
                                    ArtifactEvent.PATTERN_EXPORTED)
                    xx, yy = np.meshgrid(pattern.x, pattern.y, indexing="ij")
                    writer.table(
                        f"{name}.csv",
                        ("x_mm", "y_mm", "magnitude", "db"),
                        zip(_mm_array(xx.ravel()), _mm_array(yy.ravel()),
                            pattern.magnitude.ravel(), db.ravel()),
                        ArtifactEvent.PATTERN_EXPORTED,
                    )

        writer.table(
            "lobe_widths.csv",
            ("aperture", "window", "azimuth_mm", "elevation_mm", "azimuth_ratio",
             "elevation_ratio", "zm_null_db"),
            rows,
        )
        return self._finish("beampattern", run_id, writer, started, summary)

    # ------------------------------------------------------------------
    # bench and offline metrics

    def bench(self, repeats: int = 1) -> tuple[ScenarioResult, BenchReport]:
        """Time DAS-only against full NSI reconstruction of the same point dataset."""
        started = time.perf_counter()
        run_id, writer = self._begin("bench")
        kind = self.aperture_kinds()[0]
        mask, apod = self.design(kind)
        plan = self.plan(mask)
        windows = self._depth_windows()
        depths = [d * MM for d, _ in windows] or [REFERENCE_DEPTH_MM * MM]
        dataset = self.simulate(plan, forward_sim.make_point_phantom(depths))
        channels = beamform.prepare_channels(dataset)
        grid = self.grid()
        geom = self.geometry
        options = dict(
            compound=self.config.imaging.compound,
            workers=self.settings.workers,
            voxel_chunk=self.settings.voxel_chunk,
            rx_block=self.settings.rx_block,
        )
        weights = apod.element_weights(geom.n_elements)

        def _das() -> None:
            beamform.beamform_envelopes(channels, {RECT: weights[RECT]}, grid, geom, **options)

        def _nsi() -> None:
            beamform.reconstruct(channels, apod, grid, geom, include_das=False, **options)

        def _nsi_separate() -> None:
            envs = {
                label: beamform.beamform_envelopes(
                    channels, {label: weights[label]}, grid, geom, **options
                )[label]
                for label in (ZM, DC1, DC2)
            }
            beamform.nsi_combine(envs[ZM], envs[DC1], envs[DC2], apod.dc)

        with self._stage("bench", n_voxels=grid.n_voxels, repeats=repeats):
            timings = {
                name: _best_of(fn, repeats)
                for name, fn in (("das", _das), ("nsi", _nsi), ("nsi_separate", _nsi_separate))
            }
        report = BenchReport(
            n_voxels=grid.n_voxels,
            das_seconds=timings["das"],
            nsi_seconds=timings["nsi"],
            nsi_separate_seconds=timings["nsi_separate"],
        )
        writer.table(
            "bench.csv",
            ("aperture", "n_voxels", "workers", "das_s", "nsi_s", "ratio", "nsi_separate_s",
             "ratio_separate"),
            [(kind.value, report.n_voxels, self.settings.workers, report.das_seconds,
              report.nsi_seconds, report.ratio, report.nsi_separate_seconds,
              report.ratio_separate)],
            ArtifactEvent.BENCH_EXPORTED,
        )
        logger.info(
            "Bench finished",
            extra={"ratio": report.ratio, "ratio_separate": report.ratio_separate},
        )
        result = self._finish(
            "bench", run_id, writer, started,
            [{"das_s": report.das_seconds, "nsi_s": report.nsi_seconds, "ratio": report.ratio,
              "ratio_separate": report.ratio_separate}],
        )
        return result, report

    def measure_volumes(
        self, volumes: Sequence[EnvelopeVolume], names: Sequence[str]
    ) -> ScenarioResult:
        """Resolution metrics, plus contrast around the configured cyst, of dumped volumes."""
        started = time.perf_counter()
        run_id, writer = self._begin("metrics")
        p = self.config.phantom
        inside, outside = metrics.cyst_regions(
            tuple(v * MM for v in p.cyst_center_mm), 0.5 * p.cyst_diameter_mm * MM
        )
        res_rows = []
        con_rows = []
        with self._stage("measure", n_volumes=len(volumes)):
            for name, volume in zip(names, volumes):
                if volume.grid.dims[0] > 1 and volume.grid.dims[1] > 1:
                    s = metrics.summarize_resolution(volume)
                    res_rows.append(
                        (name, volume.label_name, _mm(s.fwhm_azimuth), _mm(s.fwhm_elevation),
                         s.smer_azimuth, s.smer_elevation, s.smer_clamped)
                    )
                try:
                    stats = metrics.contrast(volume, inside, outside)
                except MetricError as exc:
                    logger.info(
                        "Contrast not measurable", extra={"volume": name, "reason": exc.reason}
                    )
                    continue
                con_rows.append((name, volume.label_name, stats.cr, stats.cnr))
        writer.table(
            "resolution.csv",
            ("volume", "label", "fwhm_azimuth_mm", "fwhm_elevation_mm", "smer_azimuth_db",
             "smer_elevation_db", "smer_clamped"),
            res_rows,
        )
        writer.table("contrast.csv", ("volume", "label", "cr", "cnr"), con_rows)
        summary = [{"volume": r[0], "label": r[1]} for r in res_rows + con_rows]
        return self._finish("metrics", run_id, writer, started, summary)


def _mm_array(values: np.ndarray) -> np.ndarray:
    return np.asarray(values) / MM


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(max(1, repeats)):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best
