import io
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vfoglab import geo
from vfoglab.traces import (
    TraceFormatError,
    TraceGenConfig,
    TracePoint,
    Trajectory,
    normalize_epoch,
    parse_traces,
    synthesize_traces,
    traces_to_csv,
)

HEADER = "vehicle_id,timestamp_s,lat,lon,occupied\n"


def parse_text(text):
    return parse_traces(io.StringIO(text))


def test_header_only_and_empty():
    assert parse_text(HEADER) == []
    assert parse_text("") == []


def test_rows_are_time_sorted():
    (traj,) = parse_text(HEADER + "v1,10,31.0,121.4,1\nv1,5,31.1,121.5,0\n")
    assert [p.timestamp for p in traj.points] == [5, 10]
    assert traj.points[0].lat == 31.1 and not traj.points[0].occupied


def test_duplicate_timestamp_keeps_last():
    (traj,) = parse_text(HEADER + "v1,5,31.0,121.4,1\nv1,5,31.2,121.3,0\n")
    assert len(traj) == 1
    assert traj.points[0].lat == 31.2


def test_group_and_sort_matches_naive_oracle():
    rng = random.Random(3)
    rows = []
    for v in ("a", "b", "c"):
        for t in rng.sample(range(10_000), 100):
            rows.append((v, t, round(rng.uniform(31, 32), 6), round(rng.uniform(121, 122), 6), rng.randint(0, 1)))
    rng.shuffle(rows)
    text = HEADER + "".join(f"{v},{t},{la},{lo},{o}\n" for v, t, la, lo, o in rows)
    got = {tr.vehicle_id: [(p.timestamp, p.lat, p.lon) for p in tr.points] for tr in parse_text(text)}
    oracle = {}
    for v, t, la, lo, _ in rows:
        oracle.setdefault(v, []).append((t, la, lo))
    assert set(got) == {"a", "b", "c"}
    for v in oracle:
        assert got[v] == sorted(oracle[v])
        assert len(got[v]) == 100


@pytest.mark.parametrize("row, line_fragment", [
    ("v1,5,31.0,121.4\n", "line 3"),
    ("v1,abc,31.0,121.4,1\n", "line 3"),
    ("v1,5,95.0,121.4,1\n", "line 3"),
    ("v1,5,31.0,190.0,1\n", "line 3"),
    ("v1,5,31.0,121.4,yes\n", "line 3"),
    (",5,31.0,121.4,1\n", "line 3"),
])
def test_malformed_rows_name_the_line(row, line_fragment):
    with pytest.raises(TraceFormatError) as exc:
        parse_text(HEADER + "v1,1,31.0,121.4,1\n" + row)
    assert exc.value.line == 3
    assert line_fragment in str(exc.value)


def test_bad_header():
    with pytest.raises(TraceFormatError):
        parse_text("id,t,lat,lon,occ\n")


def test_trajectory_invariants():
    p = TracePoint("a", 1, 31.0, 121.0, True)
    with pytest.raises(ValueError):
        Trajectory("a", ())
    with pytest.raises(ValueError):
        Trajectory("a", (p, p))
    with pytest.raises(ValueError):
        Trajectory("a", (p, TracePoint("b", 2, 31.0, 121.0, True)))
    with pytest.raises(ValueError):
        TracePoint("a", -1, 31.0, 121.0, True)


_points = st.lists(
    st.tuples(
        st.integers(0, 10**7),
        st.floats(-90, 90, allow_nan=False),
        st.floats(-180, 180, allow_nan=False),
        st.booleans(),
    ),
    min_size=1, max_size=20, unique_by=lambda r: r[0],
)


@given(st.lists(_points, min_size=1, max_size=4))
def test_parse_serialize_roundtrip(per_vehicle):
    trajs = []
    for k, rows in enumerate(per_vehicle):
        vid = f"veh{k}"
        pts = tuple(TracePoint(vid, t, la, lo, o) for t, la, lo, o in sorted(rows))
        trajs.append(Trajectory(vid, pts))
    assert parse_text(traces_to_csv(trajs)) == trajs


def test_normalize_epoch_shifts_to_zero():
    trajs = parse_text(HEADER + "a,100,31,121,1\na,101,31,121,1\nb,150,31,121,0\n")
    out = normalize_epoch(trajs)
    assert out[0].points[0].timestamp == 0
    assert out[1].points[0].timestamp == 50


def _small_cfg(**kw):
    base = dict(lat_min=31.10, lat_max=31.12, lon_min=121.40, lon_max=121.42, grid_spacing_m=200.0,
                n_vehicles=2, duration_s=600)
    base.update(kw)
    return TraceGenConfig(**base)


def test_always_occupied_interval_arithmetic():
    cfg = _small_cfg(n_vehicles=1, duration_s=60, p_initial_occupied=1.0, p_occupied_to_free=0.0)
    (traj,) = synthesize_traces(cfg, seed=1)
    assert len(traj) == 61
    assert np.all(np.diff(traj.timestamps) == 1)


def test_always_free_interval_arithmetic():
    cfg = _small_cfg(n_vehicles=3, duration_s=3600, p_initial_occupied=0.0, p_free_to_occupied=0.0)
    for traj in synthesize_traces(cfg, seed=2):
        assert len(traj) == 3600 // 15 + 1


def test_generator_determinism():
    cfg = _small_cfg()
    assert synthesize_traces(cfg, 9) == synthesize_traces(cfg, 9)
    assert synthesize_traces(cfg, 9) != synthesize_traces(cfg, 10)


@pytest.mark.parametrize("field", ["n_vehicles", "duration_s"])
def test_generator_rejects_zero(field):
    with pytest.raises(ValueError):
        synthesize_traces(replace(_small_cfg(), **{field: 0}), 0)


def test_mixed_fleet_gaps_bounds_and_speed():
    cfg = TraceGenConfig(n_vehicles=50, duration_s=7200, p_occupied_to_free=0.01, p_free_to_occupied=0.02)
    trajs = synthesize_traces(cfg, seed=5)
    assert len(trajs) == 50
    gaps = set()
    for traj in trajs:
        dt = np.diff(traj.timestamps)
        gaps.update(dt.tolist())
        lat, lon = traj.lats, traj.lons
        assert np.all((lat >= cfg.lat_min - 1e-9) & (lat <= cfg.lat_max + 1e-9))
        assert np.all((lon >= cfg.lon_min - 1e-9) & (lon <= cfg.lon_max + 1e-9))
        # Manhattan legs: straight-line distance never exceeds distance travelled
        d = geo.haversine_m(lat[:-1], lon[:-1], lat[1:], lon[1:])
        assert np.all(d / dt <= cfg.max_speed_mps * (1 + 1e-6))
    assert gaps == {1, 15}


@given(st.integers(0, 2**32 - 1))
def test_seeded_generator_respects_speed_cap(seed):
    cfg = _small_cfg(n_vehicles=1, duration_s=300, max_speed_mps=12.0, mean_speed_mps=11.0, speed_sd_mps=4.0)
    (traj,) = synthesize_traces(cfg, seed)
    d = geo.haversine_m(traj.lats[:-1], traj.lons[:-1], traj.lats[1:], traj.lons[1:])
    assert np.all(d / np.diff(traj.timestamps) <= 12.0 * (1 + 1e-6))


def test_shift_window_inside_duration():
    cfg = _small_cfg(n_vehicles=5, duration_s=3600, shift_s=600)
    for traj in synthesize_traces(cfg, 4):
        assert 0 <= traj.timestamps[0] and traj.timestamps[-1] <= 3600
        assert traj.timestamps[-1] - traj.timestamps[0] <= 600
