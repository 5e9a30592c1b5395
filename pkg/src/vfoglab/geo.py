"""Spherical geometry helpers shared by the simulator, routing and eval."""

import numpy as np
import shapely

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters. Broadcasts over numpy arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dp / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def meters_per_degree(lat):
    """(m per degree latitude, m per degree longitude) at latitude `lat`."""
    m_lat = np.pi * EARTH_RADIUS_M / 180.0
    return m_lat, m_lat * np.cos(np.radians(lat))


def offset(lat, lon, north_m, east_m):
    """Shift a position by a local metric offset (equirectangular)."""
    m_lat, m_lon = meters_per_degree(lat)
    return lat + north_m / m_lat, lon + east_m / m_lon


def rectangle(lat_min, lon_min, lat_max, lon_max):
    """Closed lat/lon rectangle as a list of (lat, lon) vertices."""
    return [(lat_min, lon_min), (lat_min, lon_max), (lat_max, lon_max), (lat_max, lon_min)]


def make_polygon(vertices):
    """Build a shapely polygon from (lat, lon) vertices; x=lon, y=lat."""
    poly = shapely.Polygon([(lon, lat) for lat, lon in vertices])
    if not poly.is_valid or poly.area <= 0.0:
        raise ValueError("polygon is degenerate or self-intersecting")
    return poly


def contains(polygons, lat, lon):
    """Boolean mask: point inside (or on the edge of) any polygon."""
    lat = np.atleast_1d(np.asarray(lat, dtype=float))
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    out = np.zeros(lat.shape, dtype=bool)
    for poly in polygons:
        out |= shapely.intersects_xy(poly, lon, lat)
    return out
