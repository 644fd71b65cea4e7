"""Multi-view DSM fusion with outlier rejection, mosaicking, and accuracy metrics.

Per-cell fusion collects each view's height sample, rejects values far from
the cell median on a median-absolute-deviation criterion, and aggregates the
survivors. A radius filter then clears isolated cells. Metrics compare an
estimated DSM against truth over their common valid cells, with completeness
charged against all truth-valid cells.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .kvio import fmt
from .raster import Raster

MAD_CONSISTENCY = 1.4826  # scales MAD to a Gaussian sigma estimate


class LatticeMismatchError(ValueError):
    """Input rasters do not share a cell lattice."""


class EmptyOverlapError(ValueError):
    """Two rasters have no cell where both carry valid data."""


@dataclass(frozen=True)
class FusionConfig:
    """Tuning knobs for fuse_views.

    Attributes:
        mad_k: rejection threshold in robust-sigma units.
        mad_floor: lower bound on the MAD (same units as the heights) so a
            degenerate spread never rejects everything.
        radius: neighborhood radius for the isolation filter, in the raster's
            georeference units; None means 3 cells.
        min_neighbors: valid cells required within the radius (the cell
            itself counts) for a fused cell to survive.
        aggregator: "median" or "mean" over the surviving samples.
    """

    mad_k: float = 3.0
    mad_floor: float = 0.1
    radius: float | None = None
    min_neighbors: int = 4
    aggregator: str = "median"

    def __post_init__(self) -> None:
        if not self.mad_k > 0:
            raise ValueError(f"mad_k must be positive, got {self.mad_k}")
        if not self.mad_floor >= 0:
            raise ValueError(f"mad_floor must be non-negative, got {self.mad_floor}")
        if self.radius is not None and not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.min_neighbors < 1:
            raise ValueError(f"min_neighbors must be >= 1, got {self.min_neighbors}")
        if self.aggregator not in ("median", "mean"):
            raise ValueError(f"aggregator must be 'median' or 'mean', got {self.aggregator!r}")


def _check_cells(rasters) -> float:
    cell = rasters[0].cell_size
    for r in rasters[1:]:
        if abs(r.cell_size - cell) > 1e-9 * cell:
            raise LatticeMismatchError(
                f"cell sizes differ: {cell} vs {r.cell_size}"
            )
    return cell


def _overlay(rasters):
    """Union grid for lattice-aligned rasters.

    Returns (origin, nrows, ncols, offsets) where offsets[v] is the (row, col)
    of raster v's top-left cell inside the union grid.
    """
    cell = _check_cells(rasters)
    x0 = min(r.origin[0] for r in rasters)
    y0 = min(r.origin[1] for r in rasters)
    top = max(r.origin[1] + r.nrows * cell for r in rasters)
    x1 = max(r.origin[0] + r.ncols * cell for r in rasters)
    ncols = int(round((x1 - x0) / cell))
    nrows = int(round((top - y0) / cell))
    offsets = []
    for r in rasters:
        fc = (r.origin[0] - x0) / cell
        fr = (top - (r.origin[1] + r.nrows * cell)) / cell
        col = int(round(fc))
        row = int(round(fr))
        if abs(fc - col) > 1e-6 or abs(fr - row) > 1e-6:
            raise LatticeMismatchError(
                f"raster origin off-lattice by ({fc - col:.3g}, {fr - row:.3g}) cells"
            )
        offsets.append((row, col))
    return (x0, y0), nrows, ncols, offsets


def mosaic_tiles(tiles) -> Raster:
    """Merge lattice-aligned rasters, averaging where they overlap.

    The output spans the union of the inputs; cells covered by no valid input
    are nodata. Inputs must agree in cell size and sit on a common lattice
    (origins within 1e-6 cell of integer offsets).
    """
    tiles = list(tiles)
    if not tiles:
        raise ValueError("need at least one raster to mosaic")
    origin, nrows, ncols, offsets = _overlay(tiles)
    cell = tiles[0].cell_size
    nodata = tiles[0].nodata
    total = np.zeros((nrows, ncols))
    count = np.zeros((nrows, ncols))
    for r, (row, col) in zip(tiles, offsets):
        valid = r.valid_mask()
        sl = (slice(row, row + r.nrows), slice(col, col + r.ncols))
        total[sl] += np.where(valid, r.values, 0.0)
        count[sl] += valid
    values = np.where(count > 0, total / np.maximum(count, 1.0), nodata)
    return Raster(values=values, cell_size=cell, origin=origin, nodata=nodata)


def fuse_views(dsms, config: FusionConfig = FusionConfig()) -> Raster:
    """Fuse per-view DSMs into one surface with robust outlier rejection.

    For each cell, the per-view heights are compared against their median m
    and MAD; samples with |h - m| > mad_k * 1.4826 * max(MAD, mad_floor) are
    rejected and the survivors aggregated (median by default). Afterwards a
    radius filter clears any cell with fewer than min_neighbors valid cells
    (itself included) within the configured radius.

    Args:
        dsms: rasters on a shared lattice (extents may differ).
        config: FusionConfig; config.radius of None means 3 cells.

    Returns:
        Fused raster spanning the union of the inputs.
    """
    dsms = list(dsms)
    if not dsms:
        raise ValueError("need at least one DSM to fuse")
    origin, nrows, ncols, offsets = _overlay(dsms)
    cell = dsms[0].cell_size
    nodata = dsms[0].nodata

    stack = np.full((len(dsms), nrows, ncols), np.nan)
    for i, (r, (row, col)) in enumerate(zip(dsms, offsets)):
        layer = np.where(r.valid_mask(), r.values.astype(np.float64), np.nan)
        stack[i, row : row + r.nrows, col : col + r.ncols] = layer

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(stack, axis=0)
        mad = np.nanmedian(np.abs(stack - med), axis=0)
        thresh = config.mad_k * MAD_CONSISTENCY * np.maximum(mad, config.mad_floor)
        keep = np.abs(stack - med) <= thresh
        survivors = np.where(keep, stack, np.nan)
        if config.aggregator == "median":
            fused = np.nanmedian(survivors, axis=0)
        else:
            fused = np.nanmean(survivors, axis=0)

    valid = np.isfinite(fused)
    values = np.where(valid, fused, nodata)

    radius = config.radius if config.radius is not None else 3.0 * cell
    radius_cells = radius / cell
    reach = int(np.floor(radius_cells))
    dy, dx = np.mgrid[-reach : reach + 1, -reach : reach + 1]
    kernel = (dy * dy + dx * dx) <= radius_cells * radius_cells
    counts = scipy.ndimage.convolve(
        valid.astype(np.int64), kernel.astype(np.int64), mode="constant", cval=0
    )
    values = np.where(valid & (counts >= config.min_neighbors), values, nodata)
    return Raster(values=values, cell_size=cell, origin=origin, nodata=nodata)


@dataclass(frozen=True)
class DsmMetrics:
    """Accuracy and completeness of an estimated DSM against truth.

    comp holds (threshold, fraction) pairs; the fraction's denominator is the
    number of truth-valid cells, so estimate nodata hurts completeness.
    """

    rmse: float
    me: float
    mae: float
    comp: tuple[tuple[float, float], ...]
    n_overlap: int
    n_truth: int


def dsm_metrics(estimate: Raster, truth: Raster, thresholds) -> DsmMetrics:
    """Compare an estimated DSM against truth on their shared lattice.

    RMSE and MAE are the usual quadratic/absolute means of the residuals over
    cells valid in both rasters; ME is the median absolute residual.
    Completeness at threshold t is the fraction of truth-valid cells whose
    estimate exists and errs by less than t.

    Raises:
        LatticeMismatchError: grids are not lattice-aligned.
        EmptyOverlapError: no cell is valid in both inputs.
    """
    thresholds = tuple(float(t) for t in thresholds)
    if any(t <= 0 for t in thresholds):
        raise ValueError(f"thresholds must be positive, got {thresholds}")
    origin, nrows, ncols, offsets = _overlay([estimate, truth])

    def lift(r: Raster, offset) -> np.ndarray:
        row, col = offset
        out = np.full((nrows, ncols), np.nan)
        out[row : row + r.nrows, col : col + r.ncols] = np.where(
            r.valid_mask(), r.values.astype(np.float64), np.nan
        )
        return out

    est = lift(estimate, offsets[0])
    tru = lift(truth, offsets[1])
    both = np.isfinite(est) & np.isfinite(tru)
    n_truth = int(np.isfinite(tru).sum())
    n_overlap = int(both.sum())
    if n_overlap == 0:
        raise EmptyOverlapError("estimate and truth share no valid cell")

    resid = est[both] - tru[both]
    abs_resid = np.abs(resid)
    comp = tuple(
        (t, float((abs_resid < t).sum()) / n_truth) for t in thresholds
    )
    return DsmMetrics(
        rmse=float(np.sqrt(np.mean(resid**2))),
        me=float(np.median(abs_resid)),
        mae=float(np.mean(abs_resid)),
        comp=comp,
        n_overlap=n_overlap,
        n_truth=n_truth,
    )


def format_metrics_report(metrics: DsmMetrics) -> str:
    lines = [
        f"RMSE_M: {fmt(metrics.rmse)}",
        f"ME_M: {fmt(metrics.me)}",
        f"MAE_M: {fmt(metrics.mae)}",
        f"N_OVERLAP: {metrics.n_overlap}",
        f"N_TRUTH: {metrics.n_truth}",
    ]
    for t, frac in metrics.comp:
        lines.append(f"COMP_{fmt(t)}: {fmt(frac)}")
    return "\n".join(lines) + "\n"
