"""Semantic trajectory data model, CSV ingestion/writing and splitting."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

REQUIRED_COLUMNS = ("tid", "uid", "lat", "lon", "day", "hour", "category")
N_DAYS = 7
N_HOURS = 24
WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")


class DataError(ValueError):
    """Base class for ingestion problems."""


class SchemaError(DataError):
    pass


class RowError(DataError):
    pass


class ValidationError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


@dataclass(frozen=True)
class TrajectoryPoint:
    lat: float
    lon: float
    day: int
    hour: int
    category: int

    def validate(self, n_categories: int | None = None):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"lat {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"lon {self.lon} outside [-180, 180]")
        if not 0 <= self.day < N_DAYS:
            raise ValidationError(f"day {self.day} outside 0..6")
        if not 0 <= self.hour < N_HOURS:
            raise ValidationError(f"hour {self.hour} outside 0..23")
        if self.category < 0 or (n_categories is not None and self.category >= n_categories):
            raise ValidationError(f"category index {self.category} outside vocabulary of size {n_categories}")


@dataclass(frozen=True)
class Trajectory:
    tid: int
    uid: int
    points: tuple[TrajectoryPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise ValidationError(f"trajectory {self.tid} has no points")
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self):
        return len(self.points)

    def coords(self) -> np.ndarray:
        return np.array([(p.lat, p.lon) for p in self.points], dtype=np.float64)


@dataclass(frozen=True)
class Dataset:
    trajectories: tuple[Trajectory, ...]
    category_vocab: tuple[str, ...]
    centroid: tuple[float, float] = field(default=None)
    max_length: int = field(default=None)
    split: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        object.__setattr__(self, "trajectories", trajs)
        object.__setattr__(self, "category_vocab", tuple(self.category_vocab))
        if not trajs:
            raise EmptyDatasetError("dataset has no trajectories")
        seen = set()
        for t in trajs:
            if t.tid in seen:
                raise ValidationError(f"duplicate trajectory id {t.tid}")
            seen.add(t.tid)
            for p in t.points:
                p.validate(len(self.category_vocab))
        if self.centroid is None:
            object.__setattr__(self, "centroid", compute_centroid(trajs))
        if self.max_length is None:
            object.__setattr__(self, "max_length", max(len(t) for t in trajs))
        object.__setattr__(self, "split", dict(self.split))

    @property
    def users(self) -> frozenset[int]:
        return frozenset(t.uid for t in self.trajectories)

    @property
    def n_categories(self) -> int:
        return len(self.category_vocab)

    @property
    def n_points(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def by_tid(self) -> dict[int, Trajectory]:
        return {t.tid: t for t in self.trajectories}

    def part(self, name: str) -> list[Trajectory]:
        """Trajectories tagged ``name`` (``train``/``test``)."""
        if not self.split:
            raise DataError("dataset has not been split")
        return [t for t in self.trajectories if self.split[t.tid] == name]

    def with_trajectories(self, trajectories: Iterable[Trajectory]) -> "Dataset":
        """Same vocabulary and centroid, different trajectories."""
        trajs = tuple(trajectories)
        split = {t.tid: self.split[t.tid] for t in trajs if t.tid in self.split}
        return Dataset(trajs, self.category_vocab, centroid=self.centroid,
                       max_length=max(len(t) for t in trajs), split=split)


def compute_centroid(trajectories: Sequence[Trajectory] | Dataset) -> tuple[float, float]:
    if isinstance(trajectories, Dataset):
        trajectories = trajectories.trajectories
    if not trajectories:
        raise EmptyDatasetError("cannot compute the centroid of an empty dataset")
    coords = np.concatenate([t.coords() for t in trajectories])
    lat, lon = coords.mean(axis=0)
    return float(lat), float(lon)


# ------------------------------------------------------------------ parsing

def _parse_day(raw: str) -> int:
    text = raw.strip()
    try:
        return int(text)
    except ValueError:
        pass
    low = text.lower()
    for i, name in enumerate(WEEKDAYS):
        if low == name or (len(low) >= 3 and name.startswith(low)):
            return i
    raise ValueError(f"unrecognised day {raw!r}")


def _is_int(text: str) -> bool:
    try:
        int(text)
    except ValueError:
        return False
    return True


def read_vocabulary(path: str | os.PathLike) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n\r") for line in fh if line.strip()]


def write_vocabulary(vocab: Sequence[str], path: str | os.PathLike):
    Path(path).write_text("".join(f"{v}\n" for v in vocab), encoding="utf-8")


def load_csv(path: str | os.PathLike, schema: Mapping[str, str] | None = None,
             vocabulary: Sequence[str] | None = None) -> Dataset:
    """Read a trajectory CSV.

    ``schema`` maps canonical column names to header names in the file.
    ``vocabulary`` pins category indices; otherwise string categories are
    indexed in first-appearance order and integer categories are used as is.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh, schema=schema, vocabulary=vocabulary, source=str(path))


def parse_csv(fh: io.TextIOBase, schema: Mapping[str, str] | None = None,
              vocabulary: Sequence[str] | None = None, source: str = "<csv>") -> Dataset:
    schema = dict(schema or {})
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyDatasetError(f"{source}: empty file") from None
    cols = {}
    for name in REQUIRED_COLUMNS + ("seq",):
        col = schema.get(name, name)
        if col in header:
            cols[name] = header.index(col)
        elif name != "seq":
            raise SchemaError(f"{source}: missing column {col!r}")

    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            rec = {
                "tid": int(row[cols["tid"]]),
                "uid": int(row[cols["uid"]]),
                "lat": float(row[cols["lat"]]),
                "lon": float(row[cols["lon"]]),
                "day": _parse_day(row[cols["day"]]),
                "hour": int(row[cols["hour"]]),
                "category": row[cols["category"]].strip(),
            }
            if "seq" in cols:
                rec["seq"] = float(row[cols["seq"]])
        except (ValueError, IndexError) as exc:
            raise RowError(f"{source}: line {lineno}: {exc}") from None
        if not (np.isfinite(rec["lat"]) and np.isfinite(rec["lon"])):
            raise RowError(f"{source}: line {lineno}: non-finite coordinate")
        rec["line"] = lineno
        rows.append(rec)
    if not rows:
        raise EmptyDatasetError(f"{source}: no data rows")

    if vocabulary is not None:
        vocab = list(vocabulary)
        index = {name: i for i, name in enumerate(vocab)}
    elif all(_is_int(r["category"]) for r in rows):
        vocab = [str(i) for i in range(max(int(r["category"]) for r in rows) + 1)]
        index = {name: i for i, name in enumerate(vocab)}
    else:
        vocab, index = [], {}
        for r in rows:
            if r["category"] not in index:
                index[r["category"]] = len(vocab)
                vocab.append(r["category"])

    grouped: dict[int, list] = {}
    owner: dict[int, int] = {}
    for r in rows:
        cat = r["category"]
        if cat in index:
            ci = index[cat]
        elif _is_int(cat) and 0 <= int(cat) < len(vocab):
            ci = int(cat)
        else:
            raise ValidationError(f"{source}: line {r['line']}: category {cat!r} not in vocabulary")
        point = TrajectoryPoint(r["lat"], r["lon"], r["day"], r["hour"], ci)
        try:
            point.validate(len(vocab))
        except ValidationError as exc:
            raise ValidationError(f"{source}: line {r['line']}: {exc}") from None
        if owner.setdefault(r["tid"], r["uid"]) != r["uid"]:
            raise ValidationError(f"{source}: line {r['line']}: trajectory {r['tid']} has several users")
        grouped.setdefault(r["tid"], []).append((r.get("seq", 0.0), len(grouped.get(r["tid"], ())), point))

    trajectories = []
    for tid, items in grouped.items():
        items.sort(key=lambda it: (it[0], it[1]))
        trajectories.append(Trajectory(tid, owner[tid], tuple(it[2] for it in items)))
    return Dataset(tuple(trajectories), tuple(vocab))


def write_csv(trajectories: Iterable[Trajectory], vocab: Sequence[str],
              path: str | os.PathLike | None = None, float_format: str = "{!r}") -> str:
    """Serialise trajectories in the standard schema; returns the CSV text.

    Coordinates are written with ``repr`` so a reload is bit-exact.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REQUIRED_COLUMNS + ("seq",))
    for t in trajectories:
        for i, p in enumerate(t.points):
            w.writerow([t.tid, t.uid, float_format.format(float(p.lat)), float_format.format(float(p.lon)),
                        p.day, p.hour, vocab[p.category], i])
    text = buf.getvalue()
    if path is not None:
        atomic_write_text(path, text)
    return text


def atomic_write_bytes(path: str | os.PathLike, data: bytes):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def atomic_write_text(path: str | os.PathLike, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


# -------------------------------------------------------------- split/summary

def split_dataset(ds: Dataset, train_fraction: float = 2 / 3, seed: int = 0) -> Dataset:
    """Tag whole trajectories train/test by a seeded shuffle of tids."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    tids = sorted(t.tid for t in ds.trajectories)
    order = np.random.default_rng(seed).permutation(len(tids))
    n_train = int(round(train_fraction * len(tids)))
    split = {}
    for rank, pos in enumerate(order):
        split[tids[pos]] = "train" if rank < n_train else "test"
    return replace(ds, split=split)


def summarize(ds: Dataset) -> dict:
    coords = np.concatenate([t.coords() for t in ds.trajectories])
    summary = {
        "users": len(ds.users),
        "trajectories": len(ds.trajectories),
        "points": ds.n_points,
        "lat_range": (float(coords[:, 0].min()), float(coords[:, 0].max())),
        "lon_range": (float(coords[:, 1].min()), float(coords[:, 1].max())),
        "day_vocab": N_DAYS,
        "hour_vocab": N_HOURS,
        "category_vocab": ds.n_categories,
        "max_length": ds.max_length,
        "centroid": ds.centroid,
    }
    if ds.split:
        summary["train"] = sum(1 for v in ds.split.values() if v == "train")
        summary["test"] = sum(1 for v in ds.split.values() if v == "test")
    return summary
