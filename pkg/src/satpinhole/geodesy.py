"""WGS-84 geodetic <-> ECEF <-> local east-north-up conversions.

All functions are vectorized over numpy arrays; scalars work transparently.
Latitudes and longitudes are in degrees, altitudes (ellipsoidal heights) and
cartesian coordinates in meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# WGS-84 ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)  # first eccentricity squared


@dataclass(frozen=True)
class GeoPoint:
    """A single geodetic point, used as the anchor of local ENU frames."""

    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range [-90, 90]: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range [-180, 180]: {self.lon}")


def geodetic_to_ecef(lat, lon, alt):
    """Convert geodetic coordinates to earth-centered earth-fixed XYZ.

    Args:
        lat, lon: degrees.
        alt: meters above the ellipsoid.

    Returns:
        Tuple of arrays (x, y, z) in meters.
    """
    lat = np.deg2rad(np.asarray(lat, dtype=np.float64))
    lon = np.deg2rad(np.asarray(lon, dtype=np.float64))
    alt = np.asarray(alt, dtype=np.float64)
    slat = np.sin(lat)
    clat = np.cos(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * slat * slat)
    x = (n + alt) * clat * np.cos(lon)
    y = (n + alt) * clat * np.sin(lon)
    z = (n * (1.0 - WGS84_E2) + alt) * slat
    return x, y, z


def ecef_to_geodetic(x, y, z):
    """Convert ECEF XYZ to geodetic (lat, lon, alt).

    Uses a Bowring-style starting value followed by fixed-point refinement of
    the exact relation; converges to well below a micrometer. Longitude at the
    poles is reported as 0.

    Raises:
        ValueError: if any point lies within 1 m of the Earth's center.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    r = np.sqrt(x * x + y * y + z * z)
    if np.any(r < 1.0):
        raise ValueError("point within 1 m of Earth center has no geodetic image")

    p = np.hypot(x, y)
    lon = np.arctan2(y, x)  # atan2(0, 0) == 0 at the poles

    # Bowring's parametric-latitude seed.
    ep2 = (WGS84_A * WGS84_A - WGS84_B * WGS84_B) / (WGS84_B * WGS84_B)
    theta = np.arctan2(z * WGS84_A, p * WGS84_B)
    st, ct = np.sin(theta), np.cos(theta)
    lat = np.arctan2(z + ep2 * WGS84_B * st**3, p - WGS84_E2 * WGS84_A * ct**3)

    alt = np.zeros_like(lat)
    for _ in range(8):
        slat = np.sin(lat)
        clat = np.cos(lat)
        n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * slat * slat)
        # Height from whichever axis is better conditioned at this latitude.
        use_p = np.abs(lat) < np.deg2rad(67.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            alt_p = p / clat - n
            alt_z = z / slat - n * (1.0 - WGS84_E2)
        alt_new = np.where(use_p, alt_p, alt_z)
        lat_new = np.arctan2(z, p * (1.0 - WGS84_E2 * n / (n + alt_new)))
        converged = np.all(np.abs(lat_new - lat) < 1e-14)
        lat = lat_new
        alt = alt_new
        if converged:
            break
    return np.rad2deg(lat), np.rad2deg(lon), alt


def enu_rotation(anchor: GeoPoint) -> np.ndarray:
    """Rotation matrix taking ECEF deltas to (east, north, up) at *anchor*."""
    lat = np.deg2rad(anchor.lat)
    lon = np.deg2rad(anchor.lon)
    slat, clat = np.sin(lat), np.cos(lat)
    slon, clon = np.sin(lon), np.cos(lon)
    return np.array(
        [
            [-slon, clon, 0.0],
            [-slat * clon, -slat * slon, clat],
            [clat * clon, clat * slon, slat],
        ]
    )


def geodetic_to_enu(lat, lon, alt, anchor: GeoPoint):
    """Convert geodetic points to local east-north-up meters at *anchor*."""
    x, y, z = geodetic_to_ecef(lat, lon, alt)
    x0, y0, z0 = geodetic_to_ecef(anchor.lat, anchor.lon, anchor.alt)
    rot = enu_rotation(anchor)
    dx, dy, dz = x - x0, y - y0, z - z0
    e = rot[0, 0] * dx + rot[0, 1] * dy + rot[0, 2] * dz
    n = rot[1, 0] * dx + rot[1, 1] * dy + rot[1, 2] * dz
    u = rot[2, 0] * dx + rot[2, 1] * dy + rot[2, 2] * dz
    return e, n, u


def enu_to_geodetic(e, n, u, anchor: GeoPoint):
    """Inverse of geodetic_to_enu: local ENU meters back to (lat, lon, alt)."""
    e = np.asarray(e, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    rot = enu_rotation(anchor)
    x0, y0, z0 = geodetic_to_ecef(anchor.lat, anchor.lon, anchor.alt)
    # Transpose of the ENU rotation maps local deltas back to ECEF.
    dx = rot[0, 0] * e + rot[1, 0] * n + rot[2, 0] * u
    dy = rot[0, 1] * e + rot[1, 1] * n + rot[2, 1] * u
    dz = rot[0, 2] * e + rot[1, 2] * n + rot[2, 2] * u
    return ecef_to_geodetic(x0 + dx, y0 + dy, z0 + dz)
