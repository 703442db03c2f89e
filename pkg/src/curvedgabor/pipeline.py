"""End-to-end orchestration: configuration, single-image enhancement and
batch processing.

The stage order is: global normalization, two gradient-based orientation
estimates at different smoothing scales, fusion, gap reconstruction and
outward extrapolation (whose validity mask becomes the segmentation),
ridge frequency estimation, contextual filtering, locally adaptive
normalization. Every stage's products are kept in the result.
"""

from __future__ import annotations

import dataclasses
import json
import multiprocessing
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as cgio
from .frequency import RidgeFrequencyMap, rf_image, rf_image_xsignature
from .gabor import GABOR_PRESETS, PRESET_GRAY_INTERP, GaborParams, WindowShape, enhance_curved, enhance_straight
from .image import GrayImage, InterpolationMethod, normalize_global
from .orientation import (
    FusionConfig,
    OrientationField,
    estimate_gradient_of,
    fuse_orientation_fields,
    reconstruct_and_extrapolate,
)
from .regions import RegionConfig, curvature_map


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage identity."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class InterpConfig:
    gray: str = "bilinear"
    orientation: str = "bilinear"

    def gray_method(self) -> InterpolationMethod:
        return InterpolationMethod(self.gray)

    def orientation_method(self) -> InterpolationMethod:
        return InterpolationMethod(self.orientation)


@dataclass
class NormalizationConfig:
    target_mean: float = 127.5
    target_std: float = 100.0
    radius: float = 16.0


@dataclass
class RfConfig:
    method: str = "curved"  # curved | xsig
    p_maxmin_threshold: float = 1.5
    max_smoothing: int = 3
    min_valid_fraction: float = 0.5
    smoothing_window: int = 49
    profile_kernel_size: int = 7
    profile_sigma: float = 1.0


@dataclass
class PipelineConfig:
    fusion: FusionConfig = field(default_factory=FusionConfig)
    region: RegionConfig = field(default_factory=RegionConfig)
    rf: RfConfig = field(default_factory=RfConfig)
    gabor: GaborParams = field(default_factory=GaborParams)
    interpolation: InterpConfig = field(default_factory=InterpConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    filter_method: str = "curved"  # curved | straight

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gabor"]["window"] = self.gabor.window.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        gb = dict(d.get("gabor", {}))
        if "window" in gb:
            gb["window"] = WindowShape(gb["window"])
        return cls(
            fusion=FusionConfig(**d.get("fusion", {})),
            region=RegionConfig(**d.get("region", {})),
            rf=RfConfig(**d.get("rf", {})),
            gabor=GaborParams(**gb),
            interpolation=InterpConfig(**d.get("interpolation", {})),
            normalization=NormalizationConfig(**d.get("normalization", {})),
            filter_method=d.get("filter_method", "curved"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_json(Path(path).read_text())


def apply_preset(config: PipelineConfig, name: str) -> PipelineConfig:
    """Return a config with the named filter parameter set applied."""
    if name not in GABOR_PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(GABOR_PRESETS)}")
    cfg = replace(config, gabor=replace(GABOR_PRESETS[name]))
    if name in PRESET_GRAY_INTERP:
        cfg = replace(cfg, interpolation=replace(
            config.interpolation, gray=PRESET_GRAY_INTERP[name].value))
    return cfg


@dataclass
class Diagnostics:
    timings: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    rf_rejections: dict = field(default_factory=dict)


@dataclass
class EnhancementResult:
    enhanced: GrayImage
    of: OrientationField
    rf: RidgeFrequencyMap
    curvature: np.ndarray
    diagnostics: Diagnostics


class _StageTimer:
    def __init__(self, diag: Diagnostics, stage: str):
        self.diag = diag
        self.stage = stage

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.diag.timings[self.stage] = time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.stage, exc) from exc
        return False


def enhance(img: GrayImage, config: PipelineConfig | None = None) -> EnhancementResult:
    """Run the full pipeline on one image and return all intermediates.

    Stage failures re-raise as StageError with the stage identity attached.
    """
    config = config or PipelineConfig()
    diag = Diagnostics()
    norm = config.normalization
    with _StageTimer(diag, "normalize"):
        work = normalize_global(img, norm.target_mean, norm.target_std ** 2)
    with _StageTimer(diag, "orientation"):
        of_fine = estimate_gradient_of(work, config.fusion.smoothing_window)
        of_coarse = estimate_gradient_of(work, config.fusion.coarse_window)
        fused = fuse_orientation_fields(of_fine, of_coarse, config.fusion)
        diag.counts["of_invalid_after_fusion"] = int((~fused.valid).sum())
    with _StageTimer(diag, "reconstruct"):
        of = reconstruct_and_extrapolate(fused, config.fusion.extrapolation_radius)
        fg = of.valid & img.mask
        diag.counts["foreground_pixels"] = int(fg.sum())
    with _StageTimer(diag, "curvature"):
        curv = curvature_map(work, of, config.region,
                             interp=config.interpolation.orientation_method())
    with _StageTimer(diag, "rf"):
        rf_diag: dict = {}
        if config.rf.method == "xsig":
            # The baseline keeps its own integer-grid sampling default.
            rf = rf_image_xsignature(work, of)
        else:
            rf = rf_image(
                work, of, config.region, config.rf.smoothing_window,
                interp_gray=config.interpolation.gray_method(),
                interp_of=config.interpolation.orientation_method(),
                min_valid_fraction=config.rf.min_valid_fraction,
                p_maxmin_threshold=config.rf.p_maxmin_threshold,
                max_smoothing=config.rf.max_smoothing,
                kernel_size=config.rf.profile_kernel_size,
                kernel_sigma=config.rf.profile_sigma,
                diagnostics=rf_diag,
            )
        diag.rf_rejections = rf_diag.get("rf_rejections", {})
    with _StageTimer(diag, "filter"):
        gdiag: dict = {}
        if config.filter_method == "straight":
            enhanced = enhance_straight(
                work, of, rf, config.gabor,
                target_mean=norm.target_mean, target_std=norm.target_std,
                norm_radius=norm.radius, diagnostics=gdiag)
        else:
            enhanced = enhance_curved(
                work, of, rf, config.gabor, config.region,
                interp_gray=config.interpolation.gray_method(),
                interp_of=config.interpolation.orientation_method(),
                target_mean=norm.target_mean, target_std=norm.target_std,
                norm_radius=norm.radius, diagnostics=gdiag)
        diag.counts.update(gdiag)
    return EnhancementResult(enhanced, of, rf, curv, diag)


_EMITTABLE = ("of", "rf", "curvature")


def _emit_outputs(result: EnhancementResult, out_path: Path, emit: tuple[str, ...],
                  source: GrayImage) -> dict:
    written = {"enhanced": str(out_path)}
    cgio.save_image(result.enhanced, out_path, background=255.0)
    stem = out_path.with_suffix("")
    if "of" in emit:
        p = Path(f"{stem}.of.txt")
        cgio.write_orientation_text(result.of, p)
        written["of"] = str(p)
    if "rf" in emit:
        p = Path(f"{stem}.rf.txt")
        cgio.write_rf_text(result.rf, p)
        written["rf"] = str(p)
    if "curvature" in emit:
        p_txt = Path(f"{stem}.curv.txt")
        cgio.write_curvature_text(result.curvature, p_txt)
        p_png = Path(f"{stem}.curv.png")
        cgio.write_curvature_overlay_png(source, result.curvature, p_png)
        written["curvature"] = str(p_txt)
        written["curvature_png"] = str(p_png)
    return written


def _summary_record(name: str, status: str, **extra) -> dict:
    # Stable field order: file, status, then the extras in insertion order.
    rec = {"file": name, "status": status}
    rec.update(extra)
    return rec


def _process_file(args) -> dict:
    in_path, out_path, config, emit = args
    t0 = time.perf_counter()
    try:
        img = cgio.load_image(in_path)
    except Exception as exc:
        return _summary_record(Path(in_path).name, "error", stage="load",
                               error=str(exc), seconds=time.perf_counter() - t0)
    try:
        result = enhance(img, config)
    except StageError as exc:
        return _summary_record(Path(in_path).name, "error", stage=exc.stage,
                               error=str(exc.cause), seconds=time.perf_counter() - t0)
    except Exception as exc:  # pragma: no cover - defensive
        return _summary_record(Path(in_path).name, "error", stage="unknown",
                               error="".join(traceback.format_exception_only(exc)).strip(),
                               seconds=time.perf_counter() - t0)
    written = _emit_outputs(result, Path(out_path), emit, img)
    return _summary_record(
        Path(in_path).name, "ok",
        seconds=time.perf_counter() - t0,
        stage_seconds={k: round(v, 4) for k, v in result.diagnostics.timings.items()},
        foreground_pixels=result.diagnostics.counts.get("foreground_pixels", 0),
        rf_rejections=result.diagnostics.rf_rejections,
        flagged_low_presence=result.diagnostics.counts.get("low_presence_pixels", 0),
        outputs=written,
    )


def batch(
    input_dir,
    output_dir,
    config: PipelineConfig | None = None,
    emit: tuple[str, ...] = (),
    jobs: int = 1,
) -> list[dict]:
    """Process every PGM/PNG in a directory; per-file failures are recorded
    in the summary and do not abort the batch.

    Writes `summary.jsonl` (one JSON record per file, stable field order)
    into the output directory and returns the records.
    """
    config = config or PipelineConfig()
    for e in emit:
        if e not in _EMITTABLE:
            raise ValueError(f"unknown emit target {e!r}; expected subset of {_EMITTABLE}")
    in_dir = Path(input_dir)
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(
        p for p in in_dir.iterdir()
        if p.is_file() and p.suffix.lower() in (".pgm", ".png")
    )
    tasks = [(str(p), str(out_dir / p.name), config, tuple(emit)) for p in files]
    if jobs > 1 and len(tasks) > 1:
        # spawn: forking after the OpenMP runtime has started deadlocks the
        # compiled kernels in the children.
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            records = list(pool.map(_process_file, tasks))
    else:
        records = [_process_file(t) for t in tasks]
    summary_path = out_dir / "summary.jsonl"
    with open(summary_path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return records
