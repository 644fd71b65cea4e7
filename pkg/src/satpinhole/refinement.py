"""Least-squares image warps that shrink the pinhole approximation residual.

A warp maps corrected-image coordinates to original-image coordinates. It is
fit on (pinhole projection, rational projection) correspondence pairs, so
resampling the original image through it yields an image consistent with the
pinhole camera. Two families are supported: a 12-coefficient bivariate
quadratic (two independent 6-term polynomials) and a plane homography
baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .kvio import KvFormatError, fmt, get_float, get_floats, read_kv
from .raster import Raster
from .rpc import project_forward

if TYPE_CHECKING:
    from .equivalence import PinholeCamera, VirtualGrid
    from .rpc import RpcModel

# Coefficients of the identity quadratic warp: x' = x, y' = y.
IDENTITY_COEFFS = (0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)


class DegenerateCorrespondencesError(ValueError):
    """Correspondences do not pin down the warp (too few or degenerate)."""


class WarpFormatError(ValueError):
    """A warp document is malformed."""


@dataclass(frozen=True)
class PolynomialWarp:
    """Bivariate quadratic warp with coefficients in raw pixel coordinates.

    x' = m0 + m1 x + m2 y + m3 x y + m4 x^2 + m5 y^2 and the same pattern in
    m6..m11 for y'. norm_center/norm_scale record the source normalization
    used during fitting.
    """

    m: np.ndarray
    fit_rms_px: float = 0.0
    norm_center: tuple[float, float] = (0.0, 0.0)
    norm_scale: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        arr = np.asarray(self.m, dtype=np.float64).reshape(12)
        object.__setattr__(self, "m", arr)

    def apply(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        m = self.m
        xo = m[0] + m[1] * x + m[2] * y + m[3] * x * y + m[4] * x * x + m[5] * y * y
        yo = m[6] + m[7] * x + m[8] * y + m[9] * x * y + m[10] * x * x + m[11] * y * y
        return xo, yo


@dataclass(frozen=True)
class Homography:
    """Projective plane warp, normalized so h[2, 2] == 1."""

    h: np.ndarray
    fit_rms_px: float = 0.0

    def __post_init__(self) -> None:
        arr = np.asarray(self.h, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "h", arr)

    def apply(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        h = self.h
        w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
        xo = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w
        yo = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w
        return xo, yo


def _compose_affine(m6: np.ndarray, a: float, b: float, c: float, d: float) -> np.ndarray:
    """Coefficients of p(a x + b, c y + d) given those of p(x, y)."""
    m0, m1, m2, m3, m4, m5 = m6
    return np.array(
        [
            m0 + m1 * b + m2 * d + m3 * b * d + m4 * b * b + m5 * d * d,
            m1 * a + m3 * a * d + 2.0 * m4 * a * b,
            m2 * c + m3 * b * c + 2.0 * m5 * c * d,
            m3 * a * c,
            m4 * a * a,
            m5 * c * c,
        ]
    )


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (N, 2) point array, got shape {arr.shape}")
    return arr


def fit_polynomial(src, dst) -> PolynomialWarp:
    """Fit the quadratic warp minimizing sum ||warp(src) - dst||^2.

    Source coordinates are shifted and scaled to [-1, 1]^2 before solving the
    two independent linear systems, and the coefficients are mapped back to
    raw pixel coordinates afterwards, so evaluation needs no normalization
    state.

    Raises:
        DegenerateCorrespondencesError: fewer than 6 points, or source points
            lying on a single conic (rank-deficient design).
    """
    src = _as_points(src)
    dst = _as_points(dst)
    if src.shape != dst.shape:
        raise ValueError(f"source/destination shapes differ: {src.shape} vs {dst.shape}")
    n = src.shape[0]
    if n < 6:
        raise DegenerateCorrespondencesError(f"need at least 6 correspondences, got {n}")

    lo = src.min(axis=0)
    hi = src.max(axis=0)
    center = (hi + lo) / 2.0
    scale = np.maximum((hi - lo) / 2.0, 1e-12)
    xn = (src[:, 0] - center[0]) / scale[0]
    yn = (src[:, 1] - center[1]) / scale[1]

    a = np.column_stack([np.ones(n), xn, yn, xn * yn, xn * xn, yn * yn])
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise DegenerateCorrespondencesError(
            "source points lie on a single conic; quadratic warp is not determined"
        )
    coeffs, _, _, _ = np.linalg.lstsq(a, dst, rcond=None)

    ax, bx = 1.0 / scale[0], -center[0] / scale[0]
    ay, by = 1.0 / scale[1], -center[1] / scale[1]
    mx = _compose_affine(coeffs[:, 0], ax, bx, ay, by)
    my = _compose_affine(coeffs[:, 1], ax, bx, ay, by)

    trial = PolynomialWarp(m=np.concatenate([mx, my]))
    px, py = trial.apply(src[:, 0], src[:, 1])
    rms = float(np.sqrt(np.mean((px - dst[:, 0]) ** 2 + (py - dst[:, 1]) ** 2)))
    return PolynomialWarp(
        m=trial.m,
        fit_rms_px=rms,
        norm_center=(float(center[0]), float(center[1])),
        norm_scale=(float(scale[0]), float(scale[1])),
    )


def fit_homography(src, dst) -> Homography:
    """Fit a plane homography by normalized direct linear transform.

    Raises:
        DegenerateCorrespondencesError: fewer than 4 points or a collinear
            source configuration.
    """
    src = _as_points(src)
    dst = _as_points(dst)
    if src.shape != dst.shape:
        raise ValueError(f"source/destination shapes differ: {src.shape} vs {dst.shape}")
    n = src.shape[0]
    if n < 4:
        raise DegenerateCorrespondencesError(f"need at least 4 correspondences, got {n}")

    def conditioner(pts):
        c = pts.mean(axis=0)
        s = np.sqrt(2.0) / max(np.sqrt(np.mean(np.sum((pts - c) ** 2, axis=1))), 1e-12)
        t = np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]])
        return t, (pts - c) * s

    t1, sn = conditioner(src)
    t2, dn = conditioner(dst)

    a = np.zeros((max(2 * n, 9), 9))
    sh = np.column_stack([sn, np.ones(n)])
    a[0 : 2 * n : 2, 0:3] = sh
    a[0 : 2 * n : 2, 6:9] = -dn[:, 0][:, None] * sh
    a[1 : 2 * n : 2, 3:6] = sh
    a[1 : 2 * n : 2, 6:9] = -dn[:, 1][:, None] * sh
    _, sv, vt = np.linalg.svd(a, full_matrices=False)
    if sv[7] < 1e-8 * sv[0]:
        raise DegenerateCorrespondencesError(
            "source points are collinear; homography is not determined"
        )
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t2) @ hn @ t1
    if abs(h[2, 2]) < 1e-12 * np.abs(h).max():
        raise DegenerateCorrespondencesError("homography is degenerate (h22 vanishes)")
    h = h / h[2, 2]

    trial = Homography(h=h)
    px, py = trial.apply(src[:, 0], src[:, 1])
    rms = float(np.sqrt(np.mean((px - dst[:, 0]) ** 2 + (py - dst[:, 1]) ** 2)))
    return Homography(h=trial.h, fit_rms_px=rms)


def build_refinement(
    model: "RpcModel",
    camera: "PinholeCamera",
    grid: "VirtualGrid",
    kind: str = "polynomial",
):
    """Fit the warp taking pinhole projections onto rational projections.

    Args:
        model: rational polynomial model.
        camera: equivalent pinhole camera.
        grid: correspondence grid (typically the fit grid from equate).
        kind: "polynomial" or "homography".

    Returns:
        PolynomialWarp or Homography with fit_rms_px filled in.
    """
    psamp, pline = camera.project(grid.enu)
    rsamp, rline = project_forward(model, grid.lat, grid.lon, grid.alt)
    src = np.column_stack([psamp, pline])
    dst = np.column_stack([rsamp, rline])
    if kind == "polynomial":
        return fit_polynomial(src, dst)
    if kind == "homography":
        return fit_homography(src, dst)
    raise ValueError(f"unknown refinement kind: {kind!r}")


def resample(image: Raster, warp) -> Raster:
    """Produce the corrected image by backward bilinear resampling.

    Each output pixel (x, y) takes the value of the input image at warp(x, y).
    Mapped positions up to half a pixel outside the sample domain clamp to the
    border; farther out, the output is nodata, as is any interpolation that
    would touch a nodata input pixel.
    """
    h, w = image.values.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    mx, my = warp.apply(xs, ys)

    inside = (mx >= -0.5) & (mx <= w - 0.5) & (my >= -0.5) & (my <= h - 0.5)
    cx = np.clip(mx, 0.0, w - 1.0)
    cy = np.clip(my, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(cx).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(cy).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = cx - x0
    wy = cy - y0

    v = np.asarray(image.values, dtype=np.float64)
    v00 = v[y0, x0]
    v01 = v[y0, x1]
    v10 = v[y1, x0]
    v11 = v[y1, x1]
    w00 = (1 - wy) * (1 - wx)
    w01 = (1 - wy) * wx
    w10 = wy * (1 - wx)
    w11 = wy * wx
    out = v00 * w00 + v01 * w01 + v10 * w10 + v11 * w11
    nd = image.nodata
    # A nodata input pixel only poisons outputs whose stencil actually
    # weights it; landing exactly on a valid sample next to a hole is fine.
    bad = (
        ~inside
        | ((v00 == nd) & (w00 > 0))
        | ((v01 == nd) & (w01 > 0))
        | ((v10 == nd) & (w10 > 0))
        | ((v11 == nd) & (w11 > 0))
    )
    out = np.where(bad, nd, out)
    return image.like(out)


def format_warp(warp) -> str:
    """Serialize a warp (either family) to key-value text."""
    if isinstance(warp, PolynomialWarp):
        lines = [
            "KIND: polynomial",
            "M: " + " ".join(fmt(v) for v in warp.m),
            f"FIT_RMS_PX: {fmt(warp.fit_rms_px)}",
            f"NORM_CENTER: {fmt(warp.norm_center[0])} {fmt(warp.norm_center[1])}",
            f"NORM_SCALE: {fmt(warp.norm_scale[0])} {fmt(warp.norm_scale[1])}",
        ]
    elif isinstance(warp, Homography):
        lines = [
            "KIND: homography",
            "H: " + " ".join(fmt(v) for v in warp.h.ravel()),
            f"FIT_RMS_PX: {fmt(warp.fit_rms_px)}",
        ]
    else:
        raise TypeError(f"cannot serialize warp of type {type(warp).__name__}")
    return "\n".join(lines) + "\n"


def parse_warp(text: str):
    """Parse warp text written by format_warp."""
    try:
        kv = read_kv(text)
    except KvFormatError as exc:
        raise WarpFormatError(str(exc)) from None
    kind = kv.get("KIND")
    try:
        if kind == "polynomial":
            m = get_floats(kv, "M", 12)
            rms = get_float(kv, "FIT_RMS_PX")
            center = get_floats(kv, "NORM_CENTER", 2)
            scale = get_floats(kv, "NORM_SCALE", 2)
            return PolynomialWarp(
                m=np.array(m),
                fit_rms_px=rms,
                norm_center=(center[0], center[1]),
                norm_scale=(scale[0], scale[1]),
            )
        if kind == "homography":
            hv = get_floats(kv, "H", 9)
            rms = get_float(kv, "FIT_RMS_PX")
            return Homography(h=np.array(hv).reshape(3, 3), fit_rms_px=rms)
    except KvFormatError as exc:
        raise WarpFormatError(str(exc)) from None
    raise WarpFormatError(f"unknown warp kind: {kind!r}")


def load_warp(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_warp(fh.read())


def save_warp(warp, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_warp(warp))
