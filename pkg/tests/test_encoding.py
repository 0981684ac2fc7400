import math
import random

import numpy as np
import pytest
from hypothesis import given, settings

from trajshield.data import Dataset, EmptyDatasetError, Trajectory, TrajectoryPoint, compute_centroid
from trajshield.encoding import (ContractError, LengthError, decode_trajectory, encode_and_pad,
                                 encode_batch, encode_point)

from conftest import trajectories


def _t(points, tid=1, uid=1):
    return Trajectory(tid, uid, tuple(TrajectoryPoint(*p) for p in points))


def test_centroid_two_points():
    assert compute_centroid([_t([(0, 0, 0, 0, 0), (2, 2, 0, 0, 0)])]) == (1.0, 1.0)


def test_centroid_identical_points():
    lat, lon = compute_centroid([_t([(40.7, -74.0, 0, 0, 0)] * 3)])
    assert lat == pytest.approx(40.7, abs=1e-12) and lon == pytest.approx(-74.0, abs=1e-12)


def test_centroid_independent_summation():
    pts = [(40.1, -73.5, 0, 0, 0), (40.9, -74.2, 1, 1, 1), (40.33, -73.71, 2, 2, 0), (40.52, -74.05, 3, 3, 1)]
    trajs = [_t(pts[:1], 1), _t(pts[1:], 2)]
    shuffled = pts[:]
    random.Random(3).shuffle(shuffled)
    lat = math.fsum(p[0] for p in shuffled) / 4
    lon = math.fsum(p[1] for p in shuffled) / 4
    got = compute_centroid(trajs)
    assert abs(got[0] - lat) < 1e-12 and abs(got[1] - lon) < 1e-12


def test_centroid_empty():
    with pytest.raises(EmptyDatasetError):
        compute_centroid([])


def test_monday_one_hot():
    e = encode_point(TrajectoryPoint(40.7, -74.0, 0, 23, 1), (40.7, -74.0), 10)
    assert e.day_onehot.tolist() == [1, 0, 0, 0, 0, 0, 0]
    assert e.dlat == 0 and e.dlon == 0
    assert e.hour_onehot.sum() == 1 and e.hour_onehot[23] == 1
    assert len(e.cat_onehot) == 10


def test_pre_padding_mask():
    t = _t([(40.7, -74.0, 0, 1, 0)] * 3)
    enc = encode_and_pad(t, (40.7, -74.0), 5, 3)
    assert enc.mask.tolist() == [0, 0, 1, 1, 1]
    assert enc.true_length == 3
    assert encode_and_pad(t, (40.7, -74.0), 3, 3).mask.tolist() == [1, 1, 1]


def test_length_one_in_144_slots():
    p = TrajectoryPoint(40.8, -73.9, 4, 17, 2)
    enc = encode_and_pad(Trajectory(1, 1, (p,)), (40.7, -74.0), 144, 3)
    for slot in enc.slots[:143]:
        assert slot.dlat == 0 and slot.dlon == 0
        assert not slot.day_onehot.any() and not slot.hour_onehot.any() and not slot.cat_onehot.any()
    last = enc.slots[143]
    expected = encode_point(p, (40.7, -74.0), 3)
    assert last.dlat == expected.dlat and last.dlon == expected.dlon
    assert np.array_equal(last.day_onehot, expected.day_onehot)
    assert np.array_equal(last.hour_onehot, expected.hour_onehot)
    assert np.array_equal(last.cat_onehot, expected.cat_onehot)
    assert enc.mask.sum() == 1 and enc.mask[143] == 1


def test_too_long():
    with pytest.raises(LengthError):
        encode_and_pad(_t([(0, 0, 0, 0, 0)] * 4), (0, 0), 3, 1)


def test_decode_ties_and_centroid():
    t = decode_trajectory(np.zeros((1, 2)), np.full((1, 7), 1 / 7), np.full((1, 24), 1 / 24),
                          np.full((1, 3), 1 / 3), np.ones(1), (40.7, -74.0))
    p = t.points[0]
    assert (p.day, p.hour, p.category) == (0, 0, 0)
    assert (p.lat, p.lon) == (40.7, -74.0)


def test_decode_rejects_unnormalised():
    with pytest.raises(ContractError):
        decode_trajectory(np.zeros((1, 2)), np.full((1, 7), 0.2), np.full((1, 24), 1 / 24),
                          np.full((1, 3), 1 / 3), np.ones(1), (0.0, 0.0))


def _round_trip(t, centroid, max_length, n_cat=5):
    b = encode_batch([t], centroid, max_length, n_cat)
    return decode_trajectory(b.dev[0], b.day[0], b.hour[0], b.cat[0], b.mask[0], centroid, t.tid, t.uid)


def _assert_same(a, b):
    assert (a.tid, a.uid, len(a)) == (b.tid, b.uid, len(b))
    for p, q in zip(a.points, b.points):
        assert (p.day, p.hour, p.category) == (q.day, q.hour, q.category)
        assert abs(p.lat - q.lat) <= 1e-12 and abs(p.lon - q.lon) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(trajectories(max_len=12))
def test_round_trip_property(t):
    _assert_same(_round_trip(t, (40.75, -73.95), 12), t)


@settings(max_examples=60, deadline=None)
@given(trajectories(max_len=10))
def test_mask_and_padding_invariants(t):
    b = encode_batch([t], (40.7, -74.0), 10, 5)
    k = len(t)
    assert b.mask.sum() == k
    pad = slice(0, 10 - k)
    for arr in (b.dev, b.day, b.hour, b.cat):
        assert np.all(arr[0, pad] == 0)
    for arr in (b.day, b.hour, b.cat):
        assert np.all(arr[0, 10 - k:].sum(axis=-1) == 1)
