"""File formats.

Images: binary PGM (P5, 8-bit, maxval 255) and 8-bit grayscale PNG; a
foreground mask can travel as a separate PGM (0 = background, 255 =
foreground). Orientation and frequency rasters use a line-oriented text
format: a header `OF <width> <height>` (or `RF`), then one line per pixel
row of space-separated values with 6 decimals, `*` marking invalid
pixels. Curvature rasters reuse the OF text format with the curvature in
place of the angle.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .frequency import RidgeFrequencyMap
from .image import GrayImage, to_uint8
from .orientation import OrientationField


def read_pgm(path) -> GrayImage:
    """Binary 8-bit P5 reader; header comments are honored."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    width, height, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM (maxval <= 255) is supported")
    pos += 1  # single whitespace after maxval
    raw = data[pos : pos + width * height]
    if len(raw) != width * height:
        raise ValueError(f"{path}: truncated PGM pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return GrayImage.from_uint8(pixels)


def write_pgm(img: GrayImage, path, background: float | None = None) -> None:
    data = to_uint8(img, background)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def read_png(path) -> GrayImage:
    with PILImage.open(path) as im:
        return GrayImage.from_uint8(np.asarray(im.convert("L")))


def write_png(img: GrayImage, path, background: float | None = None) -> None:
    PILImage.fromarray(to_uint8(img, background), mode="L").save(path, format="PNG")


def load_image(path) -> GrayImage:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    raise ValueError(f"{path}: unsupported image format (use .pgm or .png)")


def save_image(img: GrayImage, path, background: float | None = None) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        write_pgm(img, path, background)
    elif suffix == ".png":
        write_png(img, path, background)
    else:
        raise ValueError(f"{path}: unsupported image format (use .pgm or .png)")


def write_mask_pgm(mask: np.ndarray, path) -> None:
    write_pgm(GrayImage(np.where(mask, 255.0, 0.0)), path)


def read_mask_pgm(path) -> np.ndarray:
    return read_pgm(path).pixels >= 128.0


def _write_raster_text(header: str, values: np.ndarray, valid: np.ndarray, path) -> None:
    h, w = values.shape
    lines = [f"{header} {w} {h}"]
    for y in range(h):
        row = [f"{values[y, x]:.6f}" if valid[y, x] else "*" for x in range(w)]
        lines.append(" ".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_raster_text(expect_header: str, path) -> tuple[np.ndarray, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty raster file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != expect_header:
        raise ValueError(f"{path}: expected `{expect_header} <width> <height>` header")
    w, h = int(head[1]), int(head[2])
    if len(lines) < h + 1:
        raise ValueError(f"{path}: expected {h} data rows")
    values = np.zeros((h, w))
    valid = np.zeros((h, w), dtype=bool)
    for y in range(h):
        toks = lines[1 + y].split()
        if len(toks) != w:
            raise ValueError(f"{path}: row {y} has {len(toks)} values, expected {w}")
        for x, tok in enumerate(toks):
            if tok == "*":
                continue
            values[y, x] = float(tok)
            valid[y, x] = True
    return values, valid


def write_orientation_text(of: OrientationField, path) -> None:
    _write_raster_text("OF", of.theta, of.valid, path)


def read_orientation_text(path) -> OrientationField:
    values, valid = _read_raster_text("OF", path)
    return OrientationField(values, valid)


def write_rf_text(rf: RidgeFrequencyMap, path) -> None:
    _write_raster_text("RF", rf.freq, rf.valid, path)


def read_rf_text(path) -> RidgeFrequencyMap:
    values, valid = _read_raster_text("RF", path)
    return RidgeFrequencyMap(values, valid)


def write_curvature_text(curv: np.ndarray, path) -> None:
    _write_raster_text("OF", np.nan_to_num(curv), np.isfinite(curv), path)


def read_curvature_text(path) -> np.ndarray:
    values, valid = _read_raster_text("OF", path)
    return np.where(valid, values, np.nan)


def write_curvature_png(curv: np.ndarray, path) -> None:
    """Grayscale export: value = min(255, round(curvature / pi * 255))."""
    v = np.nan_to_num(curv, nan=0.0) / math.pi * 255.0
    data = np.minimum(255.0, np.floor(np.maximum(v, 0.0) + 0.5)).astype(np.uint8)
    PILImage.fromarray(data, mode="L").save(path, format="PNG")


def write_curvature_overlay_png(img: GrayImage, curv: np.ndarray, path) -> None:
    """Red-intensity overlay: high curvature tints the image red."""
    gray = to_uint8(img).astype(np.float64)
    c = np.clip(np.nan_to_num(curv, nan=0.0) / math.pi, 0.0, 1.0)
    red = gray + (255.0 - gray) * c
    rest = gray * (1.0 - c)
    rgb = np.stack([red, rest, rest], axis=-1)
    PILImage.fromarray(np.floor(rgb + 0.5).astype(np.uint8), mode="RGB").save(path, format="PNG")


def write_orientation_quiver_png(of: OrientationField, path, img: GrayImage | None = None,
                                 step: int = 8) -> None:
    """Sparse line-segment overlay of the orientation field, for visual
    inspection. Requires matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    h, w = of.theta.shape
    fig, ax = plt.subplots(figsize=(w / 100.0, h / 100.0), dpi=100)
    if img is not None:
        ax.imshow(to_uint8(img), cmap="gray", vmin=0, vmax=255)
    ys, xs = np.mgrid[step // 2 : h : step, step // 2 : w : step]
    sel = of.valid[ys, xs]
    t = of.theta[ys, xs]
    ax.quiver(xs[sel], ys[sel], np.cos(t[sel]), -np.sin(t[sel]),
              angles="xy", pivot="mid", headwidth=0, headlength=0,
              headaxislength=0, color="red", width=0.002)
    ax.set_xlim(0, w)
    ax.set_ylim(h, 0)
    ax.axis("off")
    fig.savefig(path, bbox_inches="tight", pad_inches=0)
    plt.close(fig)


def write_rf_falsecolor_png(rf: RidgeFrequencyMap, path) -> None:
    """False-color frequency export (viridis); invalid pixels black.
    Requires matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import cm

    from .frequency import FREQ_MAX, FREQ_MIN

    norm = np.clip((rf.freq - FREQ_MIN) / (FREQ_MAX - FREQ_MIN), 0.0, 1.0)
    rgba = cm.viridis(norm)
    rgba[~rf.valid] = (0.0, 0.0, 0.0, 1.0)
    data = np.floor(rgba[..., :3] * 255.0 + 0.5).astype(np.uint8)
    PILImage.fromarray(data, mode="RGB").save(path, format="PNG")
