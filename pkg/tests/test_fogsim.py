import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vfoglab import geo, scenarios
from vfoglab.fogsim import (
    NO_COVERAGE,
    RECORD_FIELDS,
    CostParams,
    FogNetwork,
    FogNode,
    InteractionRecord,
    ObstacleRegion,
    SimConfig,
    associate_trajectory,
    mean_service_cost,
    nearest_fog,
    nearest_fogs,
    read_records,
    service_cost,
    simulate,
    write_records,
)
from vfoglab.traces import TraceGenConfig, TracePoint, Trajectory, synthesize_traces


def line(vid, start, east_step_m, n, t0=0, dt=1):
    pts = []
    for k in range(n):
        la, lo = geo.offset(start[0], start[1], 0.0, k * east_step_m)
        pts.append(TracePoint(vid, t0 + k * dt, float(la), float(lo), True))
    return Trajectory(vid, tuple(pts))


def exhaustive_nearest(lat, lon, net):
    best, best_d = None, math.inf
    for node in net.nodes:
        d = float(geo.haversine_m(lat, lon, node.lat, node.lon))
        if d < best_d:
            best, best_d = node, d
    return best.fog_id if best_d <= best.coverage_radius_m else NO_COVERAGE


def test_haversine_known_values():
    # one degree of latitude on a 6 371 km sphere
    assert geo.haversine_m(0.0, 0.0, 1.0, 0.0) == pytest.approx(6_371_000 * math.pi / 180, rel=1e-12)
    assert geo.haversine_m(31.0, 121.0, 31.0, 121.0) == 0.0


def test_nearest_fog_at_site_and_out_of_range():
    net = scenarios.desk_fog_network()
    ids, d = nearest_fogs([net[3].lat], [net[3].lon], net)
    assert ids[0] == 3 and d[0] == 0.0
    lone = FogNetwork([FogNode(0, 31.0, 121.0, 2000.0)])
    far = geo.offset(31.0, 121.0, 10_000.0, 0.0)
    assert nearest_fog(*far, lone) == NO_COVERAGE


def test_nearest_fog_tie_prefers_smaller_id():
    net = FogNetwork([FogNode(k, 31.0, 121.0, 2000.0) for k in range(3)])
    assert nearest_fog(31.001, 121.001, net) == 0


def test_nearest_fog_matches_exhaustive_scan():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        net = FogNetwork([
            FogNode(k, float(rng.uniform(31.0, 31.2)), float(rng.uniform(121.3, 121.6)),
                    float(rng.uniform(500, 8000)))
            for k in range(n)
        ])
        qlat = rng.uniform(30.95, 31.25, 20)
        qlon = rng.uniform(121.25, 121.65, 20)
        ids, _ = nearest_fogs(qlat, qlon, net)
        assert ids.tolist() == [exhaustive_nearest(a, b, net) for a, b in zip(qlat, qlon)]


def test_bisector_switch_on_straight_path():
    net = scenarios.two_fog_network(2000.0, 5000.0)
    start = (float(net.lats[0]), float(net.lons[0]))
    traj = line("p", start, 7.0, 300)
    ids = associate_trajectory(traj, net)
    d0 = geo.haversine_m(traj.lats, traj.lons, net.lats[0], net.lons[0])
    d1 = geo.haversine_m(traj.lats, traj.lons, net.lats[1], net.lons[1])
    first_past = int(np.argmax(d1 < d0))
    assert ids[:first_past] == [0] * first_past
    assert ids[first_past:] == [1] * (len(ids) - first_past)
    assert ids == [exhaustive_nearest(a, b, net) for a, b in zip(traj.lats, traj.lons)]


def test_associate_constant_inside_one_cell():
    net = scenarios.desk_fog_network()
    traj = line("p", (net[0].lat, net[0].lon), 2.0, 50)
    assert set(associate_trajectory(traj, net)) == {0}


def test_service_cost_exact_and_errors():
    p = CostParams(sigma_ms=0.0)
    assert service_cost(0.0, 0.0, params=p) == 10.0
    assert service_cost(100.0, 0.5, params=p) == pytest.approx(10 + 2 + 5)
    with pytest.raises(ValueError):
        service_cost(-1.0, 0.0, params=p)
    with pytest.raises(ValueError):
        service_cost(1.0, 1.5, params=p)
    with pytest.raises(ValueError):
        service_cost(1.0, 0.5)  # noisy default needs an rng


@given(st.floats(0, 1e5), st.floats(0, 1e5), st.floats(0, 1))
def test_service_cost_monotone_in_distance(d1, d2, load):
    p = CostParams(sigma_ms=0.0)
    lo, hi = sorted((d1, d2))
    assert service_cost(lo, load, params=p) <= service_cost(hi, load, params=p)


def test_service_cost_monte_carlo_mean():
    rng = np.random.default_rng(42)
    p = CostParams()
    samples = np.array([service_cost(350.0, 0.3, rng, params=p) for _ in range(10_000)])
    analytic = mean_service_cost(350.0, 0.3, params=p)
    assert abs(samples.mean() - analytic) <= 3 * p.sigma_ms / math.sqrt(10_000)


def test_service_cost_clamp():
    p = CostParams(sigma_ms=0.0, k_distance=0.0)
    assert service_cost(0.0, 0.0, base_cost_ms=0.0, params=p) == pytest.approx(0.1)


def small_fleet(seed=3, n=6, duration=900):
    cfg = TraceGenConfig(lat_min=31.13, lat_max=31.17, lon_min=121.44, lon_max=121.48, n_vehicles=n,
                         duration_s=duration, shift_s=duration // 2, p_occupied_to_free=0.01)
    return synthesize_traces(cfg, seed)


def test_single_vehicle_single_fog():
    net = FogNetwork([FogNode(0, 31.15, 121.46, 50_000.0)])
    (traj,) = small_fleet(n=1)
    recs = simulate([traj], net, CostParams(), [], seed=1)
    assert len(recs) == len(traj)
    assert {r.fog_id for r in recs} == {0}


def test_whole_map_obstacle():
    net = scenarios.desk_fog_network()
    obs = ObstacleRegion.rectangle(30.0, 120.0, 32.0, 123.0)
    recs = simulate(small_fleet(), net, CostParams(), [obs], seed=1)
    assert recs and all(r.no_coverage and r.cost_ms is None for r in recs)


def test_record_invariants_and_obstacle_dominance():
    net = scenarios.desk_fog_network()
    obs = ObstacleRegion.rectangle(31.145, 121.45, 31.155, 121.47)
    timed = ObstacleRegion.rectangle(31.13, 121.44, 31.14, 121.48, active_interval=(100, 400))
    trajs = small_fleet()
    recs = simulate(trajs, net, CostParams(), [obs, timed], seed=1)
    assert len(recs) == sum(len(t) for t in trajs)
    for r in recs:
        blocked = bool(obs.covers(r.vlat, r.vlon, r.t)[0] or timed.covers(r.vlat, r.vlon, r.t)[0])
        if blocked:
            assert r.no_coverage
        if not r.no_coverage:
            d = float(geo.haversine_m(r.vlat, r.vlon, r.flat, r.flon))
            assert abs(d - r.dist_m) <= 1e-6 * max(d, 1.0)
            assert r.cost_ms >= 0.1
        assert (r.fog_id is None) == r.no_coverage == (r.cost_ms is None)


def test_load_matches_independent_count():
    net = scenarios.desk_fog_network()
    trajs = small_fleet(n=8)
    p = CostParams(sigma_ms=0.0, capacity=3)
    recs = simulate(trajs, net, p, [], seed=0)
    by_vehicle = {}
    for r in recs:
        by_vehicle.setdefault(r.vehicle_id, []).append(r)

    def serving(vrecs, t):
        if t > vrecs[-1].t or t < vrecs[0].t:
            return None
        cur = None
        for r in vrecs:
            if r.t > t:
                break
            cur = r.fog_id
        return cur

    for r in recs[::7]:
        if r.no_coverage:
            continue
        n_on = sum(serving(v, r.t) == r.fog_id for v in by_vehicle.values())
        load = min(1.0, n_on / p.capacity)
        assert r.cost_ms == pytest.approx(mean_service_cost(r.dist_m, load, params=p), abs=1e-9)


def test_simulation_cost_monotone_without_noise():
    net = FogNetwork([FogNode(0, 31.15, 121.46, 50_000.0)])
    traj = line("p", (31.15, 121.46), 25.0, 80)
    recs = simulate([traj], net, CostParams(sigma_ms=0.0), [], seed=0)
    costs = [r.cost_ms for r in recs]
    assert costs == sorted(costs)


def test_determinism_and_jsonl_roundtrip(tmp_path):
    net = scenarios.desk_fog_network()
    trajs = small_fleet(n=20)
    a = simulate(trajs, net, CostParams(), [], seed=11)
    b = simulate(trajs, net, CostParams(), [], seed=11)
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_records(a, pa)
    write_records(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert read_records(pa) == a
    first = json.loads(pa.read_text().splitlines()[0])
    assert tuple(first) == RECORD_FIELDS


def test_record_rejects_inconsistent_sentinel():
    with pytest.raises(ValueError):
        InteractionRecord("v", 0, 31.0, 121.0, None, None, None, None, 5.0, True)
    with pytest.raises(ValueError):
        InteractionRecord("v", 0, 31.0, 121.0, 1, 31.0, 121.0, 0.0, None, False)


def test_network_validation():
    with pytest.raises(ValueError):
        FogNetwork([])
    with pytest.raises(ValueError):
        FogNetwork([FogNode(1, 31.0, 121.0, 100.0)])
    with pytest.raises(ValueError):
        FogNode(0, 31.0, 121.0, 0.0)
    with pytest.raises(ValueError):
        ObstacleRegion([(31.0, 121.0), (31.0, 121.1), (31.0, 121.2)])


def test_sim_config_roundtrip():
    cfg = scenarios.desk_sim_config([scenarios.tunnel_obstacle()])
    again = SimConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()
