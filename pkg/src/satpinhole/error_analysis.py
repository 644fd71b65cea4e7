"""Quantify and predict the pixel error of a pinhole stand-in for an RPC.

The error of interest is the Euclidean pixel distance between a ground
point's rational-model projection and its pinhole projection. Reports
aggregate it as per-axis RMSE plus the combined value; the spatial structure
over the image is exported as a raster of per-cell means; a closed-form
first-order predictor relates the error to depth variation about the mean
scene depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .kvio import KvFormatError, fmt, get_float, read_kv
from .raster import Raster
from .rpc import RpcModel, project_forward

if TYPE_CHECKING:
    from .equivalence import PinholeCamera, VirtualGrid


@dataclass(frozen=True)
class EquivalenceReport:
    """Summary of pinhole-vs-rational projection residuals.

    The combined rmse satisfies rmse**2 == samp_rmse**2 + line_rmse**2, and
    max_error is the largest per-point Euclidean pixel distance.
    """

    samp_rmse: float
    line_rmse: float
    rmse: float
    max_error: float
    n_points: int

    @classmethod
    def from_residuals(cls, dsamp: np.ndarray, dline: np.ndarray) -> "EquivalenceReport":
        dsamp = np.asarray(dsamp, dtype=np.float64).ravel()
        dline = np.asarray(dline, dtype=np.float64).ravel()
        if dsamp.size == 0:
            raise ValueError("cannot summarize an empty residual set")
        samp_rmse = float(np.sqrt(np.mean(dsamp**2)))
        line_rmse = float(np.sqrt(np.mean(dline**2)))
        return cls(
            samp_rmse=samp_rmse,
            line_rmse=line_rmse,
            rmse=float(np.hypot(samp_rmse, line_rmse)),
            max_error=float(np.max(np.hypot(dsamp, dline))),
            n_points=int(dsamp.size),
        )


def format_equivalence_report(report: EquivalenceReport) -> str:
    lines = [
        f"SAMP_RMSE_PX: {fmt(report.samp_rmse)}",
        f"LINE_RMSE_PX: {fmt(report.line_rmse)}",
        f"RMSE_PX: {fmt(report.rmse)}",
        f"MAX_ERROR_PX: {fmt(report.max_error)}",
        f"N_POINTS: {report.n_points}",
    ]
    return "\n".join(lines) + "\n"


def parse_equivalence_report(text: str) -> EquivalenceReport:
    try:
        kv = read_kv(text)
        return EquivalenceReport(
            samp_rmse=get_float(kv, "SAMP_RMSE_PX"),
            line_rmse=get_float(kv, "LINE_RMSE_PX"),
            rmse=get_float(kv, "RMSE_PX"),
            max_error=get_float(kv, "MAX_ERROR_PX"),
            n_points=int(get_float(kv, "N_POINTS")),
        )
    except KvFormatError as exc:
        raise ValueError(str(exc)) from None


def measure_equivalence_error(
    model: RpcModel,
    camera: "PinholeCamera",
    grid: "VirtualGrid",
    warp=None,
) -> EquivalenceReport:
    """Compare rational and pinhole projections over a virtual grid.

    When *warp* is given (any object with an ``apply(x, y)`` method), the
    pinhole projections are pushed through it before differencing, so the
    result measures the post-refinement residual.
    """
    samp, line = project_forward(model, grid.lat, grid.lon, grid.alt)
    psamp, pline = camera.project(grid.enu)
    if warp is not None:
        psamp, pline = warp.apply(psamp, pline)
    return EquivalenceReport.from_residuals(samp - psamp, line - pline)


def predict_error(x, z_cam, z_mean):
    """First-order pixel error of assuming all points sit at the mean depth.

    Args:
        x: pixel offset from the principal point along the axis of interest.
        z_cam: camera-frame depth of the point, meters.
        z_mean: mean camera-frame depth of the scene, meters.

    Returns:
        Signed predicted error in pixels: -x * (z_cam - z_mean) / z_mean.
    """
    x = np.asarray(x, dtype=np.float64)
    z_cam = np.asarray(z_cam, dtype=np.float64)
    return -x * (z_cam - np.float64(z_mean)) / np.float64(z_mean)


def error_field(
    model: RpcModel,
    camera: "PinholeCamera",
    image_size: tuple[int, int],
    cell_px: float,
    n_alt: int = 5,
    grid: "VirtualGrid | None" = None,
) -> Raster:
    """Rasterize the mean projection discrepancy over the image plane.

    A dense staggered grid spanning the full rated volume is projected
    through both models; each point's Euclidean pixel error accumulates into
    the image cell containing its rational-model projection. Cells that
    receive no points are nodata.

    Args:
        model: rational polynomial model.
        camera: its pinhole stand-in.
        image_size: (width, height) in pixels.
        cell_px: edge length of the square aggregation cells, pixels.
        n_alt: altitude layers of the sampling grid (ignored if *grid* given).
        grid: optional explicit correspondence grid to aggregate instead.

    Returns:
        Raster in image coordinates: origin (0, 0), cell_size == cell_px.
    """
    from .equivalence import build_virtual_grid

    if not cell_px > 0:
        raise ValueError(f"cell size must be positive, got {cell_px}")
    w, h = image_size
    if grid is None:
        n_side = int(np.clip(2 * int(np.ceil(max(w, h) / cell_px)), 8, 256))
        grid = build_virtual_grid(
            model, image_size, (n_side, n_side, max(3, n_alt)), stagger=True,
            anchor=camera.anchor,
        )

    samp, line = project_forward(model, grid.lat, grid.lon, grid.alt)
    psamp, pline = camera.project(grid.enu)
    err = np.hypot(samp - psamp, line - pline)

    ncols = int(np.ceil(w / cell_px))
    nrows = int(np.ceil(h / cell_px))
    col = np.clip((samp / cell_px).astype(np.intp), 0, ncols - 1)
    row = np.clip((line / cell_px).astype(np.intp), 0, nrows - 1)
    total = np.zeros((nrows, ncols))
    count = np.zeros((nrows, ncols))
    np.add.at(total, (row, col), err)
    np.add.at(count, (row, col), 1.0)
    nodata = -9999.0
    with np.errstate(invalid="ignore"):
        values = np.where(count > 0, total / np.maximum(count, 1.0), nodata)
    return Raster(values=values, cell_size=float(cell_px), origin=(0.0, 0.0), nodata=nodata)


def size_sweep(
    model: RpcModel,
    image_size: tuple[int, int],
    crop_sizes,
    dims: tuple[int, int, int] | None = None,
):
    """Re-estimate the pinhole camera over centered crops of shrinking size.

    Each crop re-anchors the rational model to the crop origin and reruns the
    full estimation, so the sequence shows how the pinhole approximation
    improves as image extent shrinks.

    Args:
        model: rational polynomial model for the full image.
        image_size: (width, height) of the full image.
        crop_sizes: iterable of square crop edge lengths in pixels; values
            are clamped to the image dimensions.
        dims: virtual grid node counts (defaults to the standard grid).

    Returns:
        List of (crop_size, EquivalenceReport), in input order.
    """
    from .equivalence import DEFAULT_GRID_DIMS, equate
    from .tiling import crop_rpc

    if dims is None:
        dims = DEFAULT_GRID_DIMS
    w, h = image_size
    results = []
    for size in crop_sizes:
        cw = int(min(int(size), w))
        ch = int(min(int(size), h))
        if cw < 1 or ch < 1:
            raise ValueError(f"crop size must be positive, got {size}")
        origin = ((w - cw) // 2, (h - ch) // 2)
        cropped = crop_rpc(model, origin)
        _, report = equate(cropped, (cw, ch), dims)
        results.append((size, report))
    return results


# A compact blue-to-red ramp for previews: (position, r, g, b).
_RAMP = (
    (0.0, 20, 20, 120),
    (0.35, 0, 170, 255),
    (0.65, 255, 220, 0),
    (1.0, 200, 20, 20),
)


def write_field_preview(field: Raster, path) -> None:
    """Write an 8-bit color preview of an error field as binary PPM.

    Valid cells are normalized by the field maximum and mapped through a
    fixed blue-to-red ramp; nodata cells render black.
    """
    values = np.asarray(field.values, dtype=np.float64)
    valid = field.valid_mask()
    top = float(values[valid].max()) if valid.any() else 1.0
    if top <= 0:
        top = 1.0
    norm = np.clip(np.where(valid, values / top, 0.0), 0.0, 1.0)

    rgb = np.zeros(values.shape + (3,), dtype=np.float64)
    for (p0, r0, g0, b0), (p1, r1, g1, b1) in zip(_RAMP[:-1], _RAMP[1:]):
        span = max(p1 - p0, 1e-12)
        w = np.clip((norm - p0) / span, 0.0, 1.0)
        seg = (norm >= p0) if p0 > 0 else np.ones_like(norm, dtype=bool)
        for ch, (c0, c1) in enumerate(((r0, r1), (g0, g1), (b0, b1))):
            rgb[..., ch] = np.where(seg, c0 + w * (c1 - c0), rgb[..., ch])
    rgb[~valid] = 0.0
    data = np.floor(rgb + 0.5).astype(np.uint8)

    header = f"P6\n{field.ncols} {field.nrows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())
