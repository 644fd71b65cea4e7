"""Scene partitioning into uniform overlapping tiles, plus per-tile helpers.

Tiles form a regular grid; when the stride does not divide the image exactly,
the last row/column of tiles is shifted inward instead of shrunk, so every
tile has identical dimensions and the image is covered exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .raster import Raster
from .rpc import RpcModel


class Tile(NamedTuple):
    """Pixel-space placement of one tile inside the parent image."""

    col: int
    row: int
    width: int
    height: int


@dataclass(frozen=True)
class TilePlan:
    tiles: tuple[Tile, ...]
    tile_size: tuple[int, int]
    overlap: int
    parent_size: tuple[int, int]


class ManifestFormatError(ValueError):
    """A tile manifest document is malformed."""


def _axis_starts(extent: int, tile: int, overlap: int) -> list[int]:
    if tile >= extent:
        return [0]
    stride = tile - overlap
    starts = list(range(0, extent - tile + 1, stride))
    if starts[-1] != extent - tile:
        starts.append(extent - tile)
    return starts


def plan_tiles(image_size: tuple[int, int], tile_size: int, overlap: int) -> TilePlan:
    """Lay out identically sized tiles covering the whole image.

    Args:
        image_size: (width, height) of the parent image.
        tile_size: square tile edge length in pixels; clamped to the image
            dimensions, so an oversized request yields a single tile.
        overlap: minimum pixel overlap between adjacent tiles; must satisfy
            0 <= overlap < tile_size.

    Returns:
        TilePlan with tiles ordered row-major (top-left first).
    """
    w, h = int(image_size[0]), int(image_size[1])
    tile_size = int(tile_size)
    overlap = int(overlap)
    if w < 1 or h < 1:
        raise ValueError(f"image size must be positive, got {image_size}")
    if tile_size < 1:
        raise ValueError(f"tile size must be positive, got {tile_size}")
    if not 0 <= overlap < tile_size:
        raise ValueError(f"overlap must satisfy 0 <= overlap < tile_size, got {overlap}")
    tw = min(tile_size, w)
    th = min(tile_size, h)
    cols = _axis_starts(w, tw, min(overlap, tw - 1) if tw > 1 else 0)
    rows = _axis_starts(h, th, min(overlap, th - 1) if th > 1 else 0)
    tiles = tuple(Tile(c, r, tw, th) for r in rows for c in cols)
    return TilePlan(tiles=tiles, tile_size=(tw, th), overlap=overlap, parent_size=(w, h))


def crop_rpc(model: RpcModel, origin: tuple[float, float]) -> RpcModel:
    """Re-anchor a rational model to an image crop.

    Only the pixel offsets change: the crop's (col, row) origin is subtracted
    so that projecting a ground point through the result yields coordinates in
    the cropped image. Ground normalizers and coefficients are untouched.
    """
    return model.shifted(float(origin[0]), float(origin[1]))


def crop_raster(image: Raster, tile: Tile) -> Raster:
    """Extract one tile's pixels (pixel-coordinate raster, origin reset)."""
    sub = image.values[tile.row : tile.row + tile.height, tile.col : tile.col + tile.width]
    return Raster(values=sub.copy(), cell_size=image.cell_size, origin=(0.0, 0.0), nodata=image.nodata)


def enhance_brightness(
    image: Raster,
    trigger_percentile: float = 0.95,
    threshold: float = 200.0,
    dn_max: float | None = None,
) -> Raster:
    """Conditionally stretch a dark image's histogram.

    If the *trigger_percentile* quantile of valid pixel values exceeds
    *threshold*, the image is returned unchanged. Otherwise values are
    clipped to their [2nd, 98th] percentile range and rescaled linearly to
    [0, dn_max]. For integer rasters the result is rounded half away from
    zero and dn_max defaults to the dtype maximum; floating rasters keep full
    precision and default to dn_max = 255.

    Args:
        trigger_percentile: fraction in (0, 1).
        threshold: DN value the trigger quantile is compared against.
        dn_max: top of the output range; default depends on dtype as above.
    """
    if not 0.0 < trigger_percentile < 1.0:
        raise ValueError(f"trigger percentile must be in (0, 1), got {trigger_percentile}")
    valid = image.valid_mask()
    if not valid.any():
        return image
    sample = image.values[valid].astype(np.float64)
    if np.percentile(sample, 100.0 * trigger_percentile) > threshold:
        return image

    p2, p98 = np.percentile(sample, [2.0, 98.0])
    if p98 <= p2:
        return image
    integral = np.issubdtype(image.values.dtype, np.integer)
    if dn_max is None:
        dn_max = float(np.iinfo(image.values.dtype).max) if integral else 255.0

    stretched = (np.clip(image.values.astype(np.float64), p2, p98) - p2) / (p98 - p2) * dn_max
    if integral:
        stretched = np.floor(stretched + 0.5).astype(image.values.dtype)
    out = np.where(valid, stretched, image.values)
    return image.like(out)


def format_manifest(plan: TilePlan, image_paths, rpc_paths) -> str:
    """Serialize a tile layout and its per-tile file paths.

    One line per tile: index, column, row, width, height, image path, RPC
    sidecar path. Paths must not contain whitespace.
    """
    if len(image_paths) != len(plan.tiles) or len(rpc_paths) != len(plan.tiles):
        raise ValueError("path list lengths must match the tile count")
    lines = [
        "# index col row width height image rpc",
        f"# parent {plan.parent_size[0]} {plan.parent_size[1]} overlap {plan.overlap}",
    ]
    for i, (tile, img, rpc) in enumerate(zip(plan.tiles, image_paths, rpc_paths)):
        img = str(img)
        rpc = str(rpc)
        if " " in img or " " in rpc:
            raise ValueError(f"manifest paths must not contain spaces: {img!r}, {rpc!r}")
        lines.append(f"{i} {tile.col} {tile.row} {tile.width} {tile.height} {img} {rpc}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str):
    """Parse manifest text into (TilePlan, image_paths, rpc_paths)."""
    tiles: list[Tile] = []
    image_paths: list[str] = []
    rpc_paths: list[str] = []
    parent = (0, 0)
    overlap = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 5 and parts[0] == "parent":
                parent = (int(parts[1]), int(parts[2]))
                overlap = int(parts[4])
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ManifestFormatError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            idx, col, row, width, height = (int(p) for p in parts[:5])
        except ValueError:
            raise ManifestFormatError(f"line {lineno}: non-integer geometry field") from None
        if idx != len(tiles):
            raise ManifestFormatError(f"line {lineno}: tile index {idx} out of order")
        tiles.append(Tile(col, row, width, height))
        image_paths.append(parts[5])
        rpc_paths.append(parts[6])
    if not tiles:
        raise ManifestFormatError("manifest contains no tiles")
    size = (tiles[0].width, tiles[0].height)
    plan = TilePlan(tiles=tuple(tiles), tile_size=size, overlap=overlap, parent_size=parent)
    return plan, image_paths, rpc_paths
