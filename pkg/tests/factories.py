"""Small synthetic inputs shared by several test modules."""

import numpy as np

from vfoglab import geo
from vfoglab.fogsim import InteractionRecord


def record(vid, t, lat, lon, fog=None, cost=None):
    if fog is None:
        return InteractionRecord(vid, int(t), float(lat), float(lon), None, None, None, None, None, True)
    flat, flon = fog
    d = float(geo.haversine_m(lat, lon, flat, flon))
    return InteractionRecord(vid, int(t), float(lat), float(lon), 0, float(flat), float(flon), d, float(cost), False)


def random_records(rng, n_vehicles=3, length=(1, 40), p_uncovered=0.0, fog=(31.15, 121.46)):
    """Records for a few vehicles, deliberately shuffled out of vehicle/time order."""
    recs = []
    for v in range(n_vehicles):
        n = int(rng.integers(length[0], length[1] + 1))
        ts = np.sort(rng.choice(100_000, size=n, replace=False))
        for t in ts:
            lat = float(rng.uniform(31.10, 31.20))
            lon = float(rng.uniform(121.40, 121.52))
            if rng.random() < p_uncovered:
                recs.append(record(f"veh{v}", t, lat, lon))
            else:
                recs.append(record(f"veh{v}", t, lat, lon, fog, float(rng.uniform(5, 80))))
    order = rng.permutation(len(recs))
    return [recs[i] for i in order]
