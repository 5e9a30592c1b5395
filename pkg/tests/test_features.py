import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from factories import random_records, record
from vfoglab.features import (
    FOG_FEATURES,
    REAL_FEATURES,
    STEP_FEATURES,
    FeatureScaler,
    apply_scaler,
    build_cost_windows,
    build_fog_dataset,
    dumps_layout,
    fit_scaler,
    geo_to_cartesian,
    load_layout,
    split_dataset,
    split_indices,
    time_features,
    window_spans,
)


def test_cartesian_fixed_points():
    assert geo_to_cartesian(0.0, 0.0) == (1.0, 0.0, 0.0)
    x, y, z = geo_to_cartesian(90.0, 37.0)
    assert abs(x) < 1e-16 and abs(y) < 1e-16 and z == 1.0


def test_cartesian_against_direct_trig():
    lat, lon = 31.23, 121.47
    phi, lam = math.radians(lat), math.radians(lon)
    expect = (math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi))
    for a, b in zip(geo_to_cartesian(lat, lon), expect):
        assert abs(a - b) <= 1e-12


@pytest.mark.parametrize("lat, lon", [(91.0, 0.0), (0.0, -181.0), (float("nan"), 0.0)])
def test_cartesian_rejects_out_of_range(lat, lon):
    with pytest.raises(ValueError):
        geo_to_cartesian(lat, lon)


@given(st.floats(-90, 90), st.floats(-180, 180))
def test_cartesian_unit_norm(lat, lon):
    x, y, z = geo_to_cartesian(lat, lon)
    assert abs(x * x + y * y + z * z - 1.0) <= 1e-12


def test_time_feature_examples():
    s, c, dow = time_features(0, epoch_weekday=2)
    assert (s, c) == (0.0, 1.0) and dow.argmax() == 2
    s, c, _ = time_features(21_600)
    assert s == pytest.approx(1.0, abs=1e-15) and c == pytest.approx(0.0, abs=1e-15)
    s, c, dow = time_features(86_400 * 3 + 43_200, epoch_weekday=5)
    assert s == pytest.approx(0.0, abs=1e-12) and c == pytest.approx(-1.0)
    assert dow.argmax() == (5 + 3) % 7


@given(st.integers(0, 10**9), st.integers(0, 6))
def test_time_features_circle_and_onehot(t, wd):
    s, c, dow = time_features(t, wd)
    assert abs(s * s + c * c - 1.0) <= 1e-12
    assert dow.sum() == 1.0 and dow.argmax() == (wd + t // 86_400) % 7


def test_scaler_examples():
    sc = FeatureScaler(("a", "b"), [10.0, 5.0], [20.0, 5.0])
    assert apply_scaler(sc, [15.0, 5.0]).tolist() == [0.5, 0.0]
    assert apply_scaler(sc, [30.0, 7.0]).tolist() == [1.0, 0.0]
    assert apply_scaler(sc, [-3.0, 1.0]).tolist() == [0.0, 0.0]


@given(st.integers(0, 2**31))
def test_scaler_inverse_roundtrip(seed):
    rng = np.random.default_rng(seed)
    lo = rng.normal(0, 100, 5)
    hi = lo + rng.uniform(0.1, 50, 5)
    sc = FeatureScaler(tuple("abcde"), lo, hi)
    vals = lo + rng.uniform(0, 1, (20, 5)) * (hi - lo)
    assert np.allclose(sc.inverse_transform(sc.transform(vals)), vals, atol=1e-9, rtol=0)


def test_fit_scaler_train_values_in_unit_interval_and_empty():
    recs = random_records(np.random.default_rng(0), p_uncovered=0.2)
    sc = fit_scaler(recs)
    assert sc.names == REAL_FEATURES
    assert np.all(sc.maxs >= sc.mins)
    with pytest.raises(ValueError):
        fit_scaler([])


def test_fog_dataset_labels_and_histogram():
    rng = np.random.default_rng(1)
    recs = random_records(rng, n_vehicles=5, p_uncovered=0.3)
    sc = fit_scaler(recs)
    ds = build_fog_dataset(recs, sc, n_fogs=3)
    assert ds.X.shape == (len(recs), len(FOG_FEATURES))
    assert np.all((ds.X >= 0) & (ds.X <= 1))
    assert np.all(ds.targets.sum(axis=1) == 1)
    expect = {0: sum(not r.no_coverage for r in recs), 3: sum(r.no_coverage for r in recs)}
    got = dict(zip(*np.unique(ds.labels, return_counts=True)))
    assert {int(k): int(v) for k, v in got.items()} == {k: v for k, v in expect.items() if v}
    one = build_fog_dataset([record("a", 0, 31.15, 121.46, (31.15, 121.46), 10.0)], sc, 3)
    assert one.targets[0].tolist() == [1.0, 0.0, 0.0, 0.0]


def _direct_step(rec, sc):
    if rec.no_coverage:
        return np.zeros(len(STEP_FEATURES)), 0.0
    phi, lam = math.radians(rec.vlat), math.radians(rec.vlon)
    fphi, flam = math.radians(rec.flat), math.radians(rec.flon)
    raw = [math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi),
           math.cos(fphi) * math.cos(flam), math.cos(fphi) * math.sin(flam), math.sin(fphi),
           rec.dist_m, rec.cost_ms]
    scaled = []
    for v, lo, hi in zip(raw, sc.mins, sc.maxs):
        scaled.append(0.0 if hi == lo else min(1.0, max(0.0, (v - lo) / (hi - lo))))
    ang = 2 * math.pi * (rec.t % 86_400) / 86_400
    dow = [0.0] * 7
    dow[(rec.t // 86_400) % 7] = 1.0
    row = scaled[:7] + [(math.sin(ang) + 1) / 2, (math.cos(ang) + 1) / 2] + dow + [scaled[7]]
    return np.array(row), 1.0


def test_window_counts_small_cases():
    sc = FeatureScaler(REAL_FEATURES, np.zeros(8), np.ones(8) * 100)
    one = [record("a", 0, 31.1, 121.4, (31.1, 121.4), 5.0)]
    assert len(build_cost_windows(one, sc)) == 0
    eleven = [record("a", t, 31.1, 121.4 + t * 1e-4, (31.1, 121.4), 5.0 + t) for t in range(11)]
    ws = build_cost_windows(eleven, sc)
    assert len(ws) == 10
    assert ws.mask[0].tolist() == [0.0] * 9 + [1.0]
    assert np.all(ws.X[0, :9] == 0.0)
    assert ws.mask[-1].tolist() == [1.0] * 10


def test_window_reconstruction_by_direct_lookup():
    for seed in range(200):
        rng = np.random.default_rng(seed)
        recs = random_records(rng, n_vehicles=int(rng.integers(1, 4)), length=(1, 30),
                              p_uncovered=0.15 if seed % 2 else 0.0)
        sc = fit_scaler(recs)
        ws = build_cost_windows(recs, sc, window=10)
        by_v = {}
        for i, r in enumerate(recs):
            by_v.setdefault(r.vehicle_id, []).append(i)
        expected = []
        for vid in sorted(by_v):
            idx = sorted(by_v[vid], key=lambda i: recs[i].t)
            for j in range(1, len(idx)):
                if not recs[idx[j]].no_coverage:
                    expected.append((idx[j], idx[max(0, j - 10):j]))
        assert ws.target_index.tolist() == [e[0] for e in expected]
        if seed % 2 == 0:
            assert len(ws) == sum(len(v) - 1 for v in by_v.values())
        for k, (tgt, steps) in enumerate(expected):
            pad = 10 - len(steps)
            assert np.all(ws.X[k, :pad] == 0.0) and np.all(ws.mask[k, :pad] == 0.0)
            for s, i in enumerate(steps):
                row, m = _direct_step(recs[i], sc)
                assert np.allclose(ws.X[k, pad + s], row, atol=1e-12, rtol=0)
                assert ws.mask[k, pad + s] == m
            c = recs[tgt].cost_ms
            lo, hi = sc.mins[7], sc.maxs[7]
            assert ws.y[k] == pytest.approx((c - lo) / (hi - lo), abs=1e-12)


def test_window_spans_order_is_vehicle_then_time():
    recs = random_records(np.random.default_rng(5), n_vehicles=4)
    keys = [(recs[t].vehicle_id, recs[t].t) for t, _ in window_spans(recs)]
    assert keys == sorted(keys)


def test_split_sizes_determinism_and_errors():
    tr, va, te = split_indices(100, (0.7, 0.15, 0.15), seed=3)
    assert (len(tr), len(va), len(te)) == (70, 15, 15)
    assert sorted(np.concatenate([tr, va, te]).tolist()) == list(range(100))
    again = split_indices(100, (0.7, 0.15, 0.15), seed=3)
    assert all(np.array_equal(a, b) for a, b in zip((tr, va, te), again))
    with pytest.raises(ValueError):
        split_indices(10, (0.5, 0.3, 0.3))


def test_stratified_split_keeps_proportions():
    labels = np.array([0] * 900 + [1] * 100)
    parts = split_indices(len(labels), (0.7, 0.15, 0.15), seed=1, strata=labels)
    for part, ratio in zip(parts, (0.7, 0.15, 0.15)):
        for cls, total in ((0, 900), (1, 100)):
            assert abs(int(np.sum(labels[part] == cls)) - total * ratio) <= 1
    tr, va, te = split_dataset(list(range(1000)), seed=1, strata=labels)
    assert len(tr) + len(va) + len(te) == 1000


def test_layout_roundtrip():
    sc = FeatureScaler(REAL_FEATURES, np.arange(8.0), np.arange(8.0) + 2)
    doc = json.loads(dumps_layout(sc, 10, 3))
    back, window, wd = load_layout(doc)
    assert window == 10 and wd == 3
    assert np.array_equal(back.mins, sc.mins) and np.array_equal(back.maxs, sc.maxs)
    doc["version"] = 99
    with pytest.raises(ValueError):
        load_layout(doc)
