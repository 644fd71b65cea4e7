"""Estimate the pinhole camera that best reproduces a rational camera model.

The approach samples a virtual 3D grid across the model's rated volume,
projects it through the rational model, keeps the points landing inside the
image, and solves for a 3x4 projection matrix by direct linear transform over
(ENU ground, pixel) correspondences. RQ factorization then splits the matrix
into intrinsics, rotation, and translation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geodesy import GeoPoint, geodetic_to_enu
from .kvio import KvFormatError, fmt, get_float, get_floats, read_kv
from .rpc import RpcModel, project_forward

DEFAULT_GRID_DIMS = (20, 20, 10)


class DegenerateGridError(ValueError):
    """Too few usable grid points, or a geometrically degenerate set."""


class IllConditionedError(ValueError):
    """The projection system does not pin down a unique solution."""


class DecompositionError(ValueError):
    """The projection matrix does not factor into a physical camera."""


class CameraFormatError(ValueError):
    """A camera document is missing keys or malformed."""


@dataclass(frozen=True)
class VirtualGrid:
    """Ground/image correspondences sampled from a rational model.

    Attributes:
        lat, lon, alt: surviving grid coordinates, shape (N,).
        enu: the same points in the anchor's east-north-up frame, (N, 3).
        pixels: rational-model projections as (samp, line), (N, 2).
        dims: requested (n_lat, n_lon, n_alt) node counts.
        anchor: geodetic origin of the ENU frame.
    """

    lat: np.ndarray
    lon: np.ndarray
    alt: np.ndarray
    enu: np.ndarray
    pixels: np.ndarray
    dims: tuple[int, int, int]
    anchor: GeoPoint

    @property
    def n_points(self) -> int:
        return self.lat.shape[0]


@dataclass(frozen=True)
class ProjectionMatrix:
    """A direct-linear-transform solution with its quality figures."""

    p: np.ndarray
    cond: float
    residual_rms_px: float

    def project(self, enu: np.ndarray):
        """Apply the raw 3x4 matrix to (N, 3) ENU points."""
        x = np.column_stack([enu, np.ones(len(enu))]) @ self.p.T
        return x[:, 0] / x[:, 2], x[:, 1] / x[:, 2]


@dataclass(frozen=True)
class PinholeCamera:
    """Calibrated pinhole camera in a local east-north-up frame.

    K is upper triangular with positive focal lengths and k[2, 2] == 1, R is a
    proper rotation, and a ground point X projects to K (R X + t) followed by
    the perspective divide.
    """

    k: np.ndarray
    r: np.ndarray
    t: np.ndarray
    anchor: GeoPoint
    image_size: tuple[int, int]
    residual_rms_px: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", np.asarray(self.k, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))

    def project(self, enu: np.ndarray):
        """Project (N, 3) ENU points to (samp, line) pixel arrays."""
        enu = np.asarray(enu, dtype=np.float64)
        cam = enu @ self.r.T + self.t
        pix = cam @ self.k.T
        return pix[:, 0] / pix[:, 2], pix[:, 1] / pix[:, 2]

    def depths(self, enu: np.ndarray) -> np.ndarray:
        """Camera-frame depth (Z) of each ENU point."""
        enu = np.asarray(enu, dtype=np.float64)
        return enu @ self.r.T[:, 2] + self.t[2]

    def localize_at_height(self, samp, line, u):
        """Intersect pixel rays with the horizontal plane at ENU height u."""
        samp = np.asarray(samp, dtype=np.float64)
        line = np.asarray(line, dtype=np.float64)
        center = -self.r.T @ self.t
        rays = np.linalg.inv(self.k) @ np.stack(
            [samp.ravel(), line.ravel(), np.ones(samp.size)]
        )
        d = self.r.T @ rays
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = (np.asarray(u, dtype=np.float64).ravel() - center[2]) / d[2]
        e = center[0] + lam * d[0]
        n = center[1] + lam * d[1]
        return e.reshape(samp.shape), n.reshape(samp.shape)

    @property
    def projection_matrix(self) -> np.ndarray:
        return self.k @ np.column_stack([self.r, self.t])


def _axis_nodes(lo: float, hi: float, n: int, stagger: bool) -> np.ndarray:
    if stagger:
        # Nodes at cell centers of a 2x-refined lattice: never coincide with
        # the plain linspace nodes, so validation points are held out.
        step = (hi - lo) / n
        return lo + (np.arange(n) + 0.5) * step
    return np.linspace(lo, hi, n)


def build_virtual_grid(
    model: RpcModel,
    image_size: tuple[int, int],
    dims: tuple[int, int, int] = DEFAULT_GRID_DIMS,
    stagger: bool = False,
    anchor: GeoPoint | None = None,
) -> VirtualGrid:
    """Sample the model's rated volume and keep points that hit the image.

    The grid spans offset +- scale on each ground axis. Points projecting
    outside [0, width) x [0, height) are discarded, mirroring how image
    extent masks ground coverage. The survivors are converted to ENU at the
    model's offset point (or an explicit *anchor*).

    Raises:
        DegenerateGridError: if any dim < 2, fewer than 6 points survive,
            fewer than 3 distinct altitude layers survive, or the surviving
            points are numerically coplanar.
    """
    n_lat, n_lon, n_alt = (int(d) for d in dims)
    if min(n_lat, n_lon, n_alt) < 2:
        raise DegenerateGridError(f"grid dims must each be >= 2, got {dims}")
    lats = _axis_nodes(model.lat_off - model.lat_scale, model.lat_off + model.lat_scale, n_lat, stagger)
    lons = _axis_nodes(model.lon_off - model.lon_scale, model.lon_off + model.lon_scale, n_lon, stagger)
    alts = _axis_nodes(model.alt_off - model.alt_scale, model.alt_off + model.alt_scale, n_alt, stagger)
    lat, lon, alt = (a.ravel() for a in np.meshgrid(lats, lons, alts, indexing="ij"))

    samp, line = project_forward(model, lat, lon, alt)
    w, h = image_size
    keep = (samp >= 0.0) & (samp < w) & (line >= 0.0) & (line < h)
    lat, lon, alt = lat[keep], lon[keep], alt[keep]
    samp, line = samp[keep], line[keep]

    if lat.size < 6:
        raise DegenerateGridError(
            f"only {lat.size} grid points project inside the image; need >= 6"
        )
    if np.unique(alt).size < 3:
        raise DegenerateGridError(
            f"only {np.unique(alt).size} altitude layers survive; need >= 3"
        )
    if anchor is None:
        anchor = GeoPoint(model.lat_off, model.lon_off, model.alt_off)
    e, n, u = geodetic_to_enu(lat, lon, alt, anchor)
    enu = np.column_stack([e, n, u])

    centered = enu - enu.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[2] < 1e-9 * sv[0]:
        raise DegenerateGridError("surviving grid points are coplanar")

    return VirtualGrid(
        lat=lat,
        lon=lon,
        alt=alt,
        enu=enu,
        pixels=np.column_stack([samp, line]),
        dims=(n_lat, n_lon, n_alt),
        anchor=anchor,
    )


def solve_projection(grid: VirtualGrid) -> ProjectionMatrix:
    """Solve for the 3x4 projection matrix by normalized DLT.

    Pixels are shifted to their centroid and scaled to RMS radius sqrt(2);
    ENU points likewise to RMS radius sqrt(3). The homogeneous system is
    solved by SVD and the conditioning of the solution checked via the ratio
    of the two smallest singular values.
    """
    pix = grid.pixels
    enu = grid.enu
    n = grid.n_points

    pc = pix.mean(axis=0)
    pix_rms = np.sqrt(np.mean(np.sum((pix - pc) ** 2, axis=1)))
    xc = enu.mean(axis=0)
    enu_rms = np.sqrt(np.mean(np.sum((enu - xc) ** 2, axis=1)))
    if pix_rms <= 0.0 or enu_rms <= 0.0:
        raise IllConditionedError("correspondences collapse to a single point")
    ps = np.sqrt(2.0) / pix_rms
    t2 = np.array([[ps, 0, -ps * pc[0]], [0, ps, -ps * pc[1]], [0, 0, 1]])

    xs = np.sqrt(3.0) / enu_rms
    t3 = np.eye(4)
    t3[:3, :3] *= xs
    t3[:3, 3] = -xs * xc

    xn = (enu - xc) * xs
    un = (pix[:, 0] - pc[0]) * ps
    vn = (pix[:, 1] - pc[1]) * ps
    xh = np.column_stack([xn, np.ones(n)])

    a = np.zeros((2 * n, 12))
    a[0::2, 0:4] = xh
    a[0::2, 8:12] = -un[:, None] * xh
    a[1::2, 4:8] = xh
    a[1::2, 8:12] = -vn[:, None] * xh

    _, sv, vt = np.linalg.svd(a, full_matrices=False)
    # Well-posedness: the nullspace direction must stand clear of the rest.
    if sv[10] < 10.0 * sv[11]:
        raise IllConditionedError(
            f"projection system is rank deficient (sigma11/sigma12 = {sv[10] / max(sv[11], 1e-300):.3g} < 10)"
        )
    pn = vt[-1].reshape(3, 4)
    p = np.linalg.inv(t2) @ pn @ t3

    p = p / np.linalg.norm(p)
    det = np.linalg.det(p[:, :3])
    if det < 0:
        p = -p
    elif det == 0.0:
        raise IllConditionedError("left 3x3 of the projection matrix is singular")

    x = np.column_stack([enu, np.ones(n)]) @ p.T
    du = x[:, 0] / x[:, 2] - pix[:, 0]
    dv = x[:, 1] / x[:, 2] - pix[:, 1]
    rms = float(np.sqrt(np.mean(du * du + dv * dv)))
    cond = float(np.linalg.cond(p[:, :3]))
    return ProjectionMatrix(p=p, cond=cond, residual_rms_px=rms)


def decompose_projection(
    pm: ProjectionMatrix,
    grid: VirtualGrid,
    image_size: tuple[int, int],
) -> PinholeCamera:
    """Factor a projection matrix into K (intrinsics), R, and t.

    RQ factorization of the left 3x3 block, with signs arranged so the focal
    lengths are positive, k[2, 2] == 1, and det(R) == +1. The grid fixes the
    remaining global sign: points must sit in front of the camera.

    Raises:
        DecompositionError: if cheirality cannot be satisfied or the
            factorization fails to reproduce the matrix.
    """
    p = pm.p
    m = p[:, :3]
    k, r = scipy.linalg.rq(m)
    signs = np.where(np.diag(k) < 0, -1.0, 1.0)
    s = np.diag(signs)
    k = k @ s
    r = s @ r
    t = np.linalg.solve(k, p[:, 3])
    if np.linalg.det(r) < 0:
        r = -r
        t = -t
    scale = k[2, 2]
    k = k / scale

    depths = grid.enu @ r.T[:, 2] + t[2]
    behind = depths <= 0
    if behind.all():
        raise DecompositionError(
            "cheirality unsatisfiable: the best-fit camera is a mirror image "
            "(the source pixel frame is left-handed)"
        )
    if behind.any():
        raise DecompositionError(
            f"cheirality unsatisfiable: {int(behind.sum())} of {len(depths)} "
            "grid points fall behind the camera"
        )

    rebuilt = k @ np.column_stack([r, t])
    rebuilt = rebuilt / np.linalg.norm(rebuilt)
    reference = p / np.linalg.norm(p)
    mismatch = min(
        np.max(np.abs(rebuilt - reference)), np.max(np.abs(rebuilt + reference))
    )
    if mismatch > 1e-10:
        raise DecompositionError(
            f"factorization does not reproduce the projection matrix (max dev {mismatch:.3g})"
        )

    return PinholeCamera(
        k=k,
        r=r,
        t=t,
        anchor=grid.anchor,
        image_size=image_size,
        residual_rms_px=pm.residual_rms_px,
    )


def equate(
    model: RpcModel,
    image_size: tuple[int, int],
    dims: tuple[int, int, int] = DEFAULT_GRID_DIMS,
):
    """Compute the equivalent pinhole camera and its approximation error.

    The camera is fit on a virtual grid of *dims* nodes; the reported error
    comes from an independent validation grid at twice the density, offset by
    half a cell so no node is shared.

    Returns:
        (PinholeCamera, EquivalenceReport)
    """
    from .error_analysis import measure_equivalence_error

    fit_grid = build_virtual_grid(model, image_size, dims)
    pm = solve_projection(fit_grid)
    camera = decompose_projection(pm, fit_grid, image_size)
    val_dims = (2 * dims[0], 2 * dims[1], 2 * dims[2])
    val_grid = build_virtual_grid(model, image_size, val_dims, stagger=True)
    report = measure_equivalence_error(model, camera, val_grid)
    return camera, report


def format_camera(cam: PinholeCamera) -> str:
    """Serialize a pinhole camera to key-value text."""
    lines = [
        f"IMAGE_SIZE: {cam.image_size[0]} {cam.image_size[1]}",
        f"ANCHOR_LAT: {fmt(cam.anchor.lat)}",
        f"ANCHOR_LON: {fmt(cam.anchor.lon)}",
        f"ANCHOR_ALT: {fmt(cam.anchor.alt)}",
        "K: " + " ".join(fmt(v) for v in cam.k.ravel()),
        "R: " + " ".join(fmt(v) for v in cam.r.ravel()),
        "T: " + " ".join(fmt(v) for v in cam.t.ravel()),
        f"RESIDUAL_RMS_PX: {fmt(cam.residual_rms_px)}",
    ]
    return "\n".join(lines) + "\n"


def parse_camera(text: str) -> PinholeCamera:
    """Parse key-value camera text written by format_camera."""
    try:
        kv = read_kv(text)
        size = get_floats(kv, "IMAGE_SIZE", 2)
        anchor = GeoPoint(
            get_float(kv, "ANCHOR_LAT"),
            get_float(kv, "ANCHOR_LON"),
            get_float(kv, "ANCHOR_ALT"),
        )
        k = np.array(get_floats(kv, "K", 9)).reshape(3, 3)
        r = np.array(get_floats(kv, "R", 9)).reshape(3, 3)
        t = np.array(get_floats(kv, "T", 3))
        rms = get_float(kv, "RESIDUAL_RMS_PX")
    except (KvFormatError, ValueError) as exc:
        raise CameraFormatError(str(exc)) from None
    return PinholeCamera(
        k=k, r=r, t=t, anchor=anchor,
        image_size=(int(size[0]), int(size[1])),
        residual_rms_px=rms,
    )


def load_camera(path) -> PinholeCamera:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_camera(fh.read())


def save_camera(cam: PinholeCamera, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_camera(cam))
