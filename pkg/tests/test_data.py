import io
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajshield.data import (Dataset, EmptyDatasetError, RowError, SchemaError, Trajectory,
                             ValidationError, load_csv, parse_csv, split_dataset, summarize,
                             write_csv)

from conftest import make_dataset, trajectories


def _parse(text, **kw):
    return parse_csv(io.StringIO(textwrap.dedent(text).lstrip()), **kw)


def test_two_rows_one_trajectory():
    ds = _parse("""
        tid,uid,lat,lon,day,hour,category
        1,7,40.7,-74.0,0,9,Food
        1,7,40.8,-73.9,Tuesday,10,Shop
    """)
    assert len(ds.trajectories) == 1
    assert ds.users == {7}
    assert ds.max_length == 2
    assert ds.category_vocab == ("Food", "Shop")
    assert ds.trajectories[0].points[1].day == 1


def test_hour_out_of_range_names_line():
    with pytest.raises(ValidationError, match="line 3"):
        _parse("""
            tid,uid,lat,lon,day,hour,category
            1,7,40.7,-74.0,0,9,Food
            1,7,40.7,-74.0,0,24,Food
        """)


def test_missing_column():
    with pytest.raises(SchemaError, match="hour"):
        _parse("""
            tid,uid,lat,lon,day,category
            1,7,40.7,-74.0,0,Food
        """)


def test_unparsable_number():
    with pytest.raises(RowError, match="line 2"):
        _parse("""
            tid,uid,lat,lon,day,hour,category
            1,7,abc,-74.0,0,9,Food
        """)


def test_latitude_out_of_range():
    with pytest.raises(ValidationError):
        _parse("""
            tid,uid,lat,lon,day,hour,category
            1,7,95.0,-74.0,0,9,Food
        """)


def test_empty_file():
    with pytest.raises(EmptyDatasetError):
        _parse("")
    with pytest.raises(EmptyDatasetError):
        _parse("tid,uid,lat,lon,day,hour,category\n")


def test_tid_with_two_users_rejected():
    with pytest.raises(ValidationError, match="several users"):
        _parse("""
            tid,uid,lat,lon,day,hour,category
            1,7,40.7,-74.0,0,9,Food
            1,8,40.7,-74.0,0,9,Food
        """)


def test_schema_mapping_and_seq_ordering():
    ds = _parse("""
        traj,user,latitude,longitude,weekday,hr,cat,seq
        5,1,40.2,-74.0,mon,3,B,2
        5,1,40.1,-74.0,mon,2,A,1
    """, schema={"tid": "traj", "uid": "user", "lat": "latitude", "lon": "longitude",
                 "day": "weekday", "hour": "hr", "category": "cat"})
    t = ds.trajectories[0]
    assert [p.hour for p in t.points] == [2, 3]
    assert ds.category_vocab == ("B", "A")


def test_integer_categories_and_vocabulary_override():
    text = """
        tid,uid,lat,lon,day,hour,category
        1,7,40.7,-74.0,0,9,3
        2,8,40.7,-74.0,0,9,1
    """
    ds = _parse(text)
    assert ds.category_vocab == ("0", "1", "2", "3")
    assert ds.trajectories[0].points[0].category == 3
    ds2 = _parse("""
        tid,uid,lat,lon,day,hour,category
        1,7,40.7,-74.0,0,9,Shop
    """, vocabulary=["Food", "Shop"])
    assert ds2.trajectories[0].points[0].category == 1


def test_round_trip_via_file(tmp_path):
    ds = make_dataset(30, seed=3)
    path = tmp_path / "d.csv"
    write_csv(ds.trajectories, ds.category_vocab, path)
    back = load_csv(path, vocabulary=ds.category_vocab)
    assert back == ds


@settings(max_examples=30, deadline=None)
@given(st.lists(trajectories(), min_size=1, max_size=8, unique_by=lambda t: t.tid))
def test_round_trip_property(trajs):
    vocab = tuple(f"c{i}" for i in range(5))
    ds = Dataset(tuple(trajs), vocab)
    back = parse_csv(io.StringIO(write_csv(ds.trajectories, vocab)), vocabulary=vocab)
    assert back.trajectories == ds.trajectories
    assert back.category_vocab == ds.category_vocab


def test_split_three():
    ds = make_dataset(3)
    for seed in range(5):
        s = split_dataset(ds, 2 / 3, seed)
        assert sorted(s.split.values()) == ["test", "train", "train"]


def test_split_paper_size():
    rng = np.random.default_rng(0)
    from trajshield.data import TrajectoryPoint
    trajs = tuple(Trajectory(i, i % 193, (TrajectoryPoint(40.7, -74.0, 0, 0, 0),)) for i in range(3079))
    s = split_dataset(Dataset(trajs, ("x",)), 2 / 3, seed=int(rng.integers(100)))
    n_train = sum(v == "train" for v in s.split.values())
    assert abs(n_train - 2053) <= 1
    assert len(s.split) - n_train == 3079 - n_train


@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
@settings(max_examples=25, deadline=None)
def test_split_partitions_and_is_deterministic(seed, frac):
    ds = make_dataset(25, seed=1)
    a = split_dataset(ds, frac, seed)
    b = split_dataset(ds, frac, seed)
    assert a.split == b.split
    assert set(a.split) == {t.tid for t in ds.trajectories}
    assert abs(sum(v == "train" for v in a.split.values()) - frac * 25) <= 1


def test_split_bad_fraction():
    with pytest.raises(ValueError):
        split_dataset(make_dataset(3), 1.0, 0)


def test_summary_consistency():
    ds = make_dataset(15)
    s = summarize(ds)
    assert s["points"] == sum(len(t) for t in ds.trajectories)
    assert s["users"] == len({t.uid for t in ds.trajectories})
    assert (s["day_vocab"], s["hour_vocab"], s["category_vocab"]) == (7, 24, 5)
    one = Dataset(ds.trajectories[:1], ds.category_vocab)
    assert summarize(one)["trajectories"] == 1 and summarize(one)["users"] == 1


def test_centroid_is_mean_of_all_points():
    ds = make_dataset(10)
    coords = np.concatenate([t.coords() for t in ds.trajectories])
    assert np.allclose(ds.centroid, coords.mean(axis=0), atol=1e-12, rtol=0)
