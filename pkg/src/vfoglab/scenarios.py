"""Desk-scale presets: map, fog layout, and the canned experiment geometries."""

from __future__ import annotations

from . import geo
from .fogsim import CostParams, FogNetwork, FogNode, ObstacleRegion, SimConfig
from .traces import TraceGenConfig

CENTER = (31.15, 121.46)
URBAN_POLYGON = geo.rectangle(31.13, 121.44, 31.17, 121.48)


def desk_trace_config(**overrides):
    cfg = TraceGenConfig(
        lat_min=31.10, lat_max=31.20, lon_min=121.40, lon_max=121.52,
        grid_spacing_m=250.0, n_vehicles=20, duration_s=8 * 3600, shift_s=5400,
        mean_speed_mps=10.0, speed_sd_mps=2.0, max_speed_mps=16.0,
        urban_polygon=list(URBAN_POLYGON), urban_bias=0.5,
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def desk_fog_network():
    """Five clustered urban fogs and three sparse suburban ones."""
    lat, lon = CENTER
    urban = [(0.0, 0.0), (1400.0, 0.0), (-1400.0, 0.0), (0.0, 1400.0), (0.0, -1400.0)]
    nodes = []
    for k, (dn, de) in enumerate(urban):
        flat, flon = geo.offset(lat, lon, dn, de)
        nodes.append(FogNode(k, flat, flon, 3000.0, 10.0, "urban"))
    suburban = [(31.182, 121.418), (31.118, 121.500), (31.186, 121.504)]
    for k, (flat, flon) in enumerate(suburban, start=len(nodes)):
        nodes.append(FogNode(k, flat, flon, 6000.0, 10.0, "suburban"))
    return FogNetwork(nodes)


def desk_sim_config(obstacles=()):
    return SimConfig(desk_fog_network(), CostParams(), list(obstacles))


def obstacle_trace_config(**overrides):
    """Compact 3.3 km x 3.8 km map with a dense road grid around the tunnel."""
    cfg = TraceGenConfig(
        lat_min=31.13, lat_max=31.16, lon_min=121.44, lon_max=121.48,
        grid_spacing_m=100.0, n_vehicles=20, duration_s=8 * 3600, shift_s=5400,
        mean_speed_mps=10.0, speed_sd_mps=2.0, max_speed_mps=16.0, urban_bias=0.0,
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def obstacle_fog_network():
    sites = [(31.137, 121.449), (31.137, 121.471), (31.154, 121.460)]
    return FogNetwork([FogNode(k, lat, lon, 3000.0, 10.0, "urban") for k, (lat, lon) in enumerate(sites)])


def tunnel_obstacle():
    """~1 km x 0.3 km east-west null-coverage strip in the obstacle map."""
    lat, lon = 31.145, 121.460
    lat_lo, lon_lo = geo.offset(lat, lon, -150.0, -500.0)
    lat_hi, lon_hi = geo.offset(lat, lon, 150.0, 500.0)
    return ObstacleRegion.rectangle(lat_lo, lon_lo, lat_hi, lon_hi)


def transition_trace_config(**overrides):
    """6 km x 4 km map around CENTER; no road lies on the two-fog bisector."""
    lat, lon = CENTER
    lat_min, lon_min = geo.offset(lat, lon, -2000.0, -3125.0)
    lat_max, lon_max = geo.offset(lat, lon, 2000.0, 3125.0)
    cfg = TraceGenConfig(
        lat_min=lat_min, lat_max=lat_max, lon_min=lon_min, lon_max=lon_max,
        grid_spacing_m=250.0, n_vehicles=15, duration_s=8 * 3600, shift_s=5400,
        mean_speed_mps=10.0, speed_sd_mps=2.0, max_speed_mps=16.0, urban_bias=0.0,
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def two_fog_network(separation_m=2000.0, radius_m=5000.0):
    """Two fogs on an east-west line centred on CENTER."""
    lat, lon = CENTER
    a = geo.offset(lat, lon, 0.0, -separation_m / 2)
    b = geo.offset(lat, lon, 0.0, separation_m / 2)
    return FogNetwork([FogNode(0, a[0], a[1], radius_m, 10.0, "urban"),
                       FogNode(1, b[0], b[1], radius_m, 10.0, "urban")])
