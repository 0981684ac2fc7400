"""Network-ready trajectory encoding: centroid deviations, one-hots, pre-padding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import N_DAYS, N_HOURS, Trajectory, TrajectoryPoint


class LengthError(ValueError):
    pass


class ContractError(ValueError):
    pass


def one_hot(index: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


@dataclass(frozen=True)
class EncodedPoint:
    dlat: float
    dlon: float
    day_onehot: np.ndarray
    hour_onehot: np.ndarray
    cat_onehot: np.ndarray


def encode_point(p: TrajectoryPoint, centroid, n_categories: int) -> EncodedPoint:
    return EncodedPoint(
        dlat=p.lat - centroid[0],
        dlon=p.lon - centroid[1],
        day_onehot=one_hot(p.day, N_DAYS),
        hour_onehot=one_hot(p.hour, N_HOURS),
        cat_onehot=one_hot(p.category, n_categories),
    )


@dataclass
class EncodedBatch:
    """Pre-padded batch. Arrays are batch x T (x feature)."""

    tids: list
    uids: list
    dev: np.ndarray
    day: np.ndarray
    hour: np.ndarray
    cat: np.ndarray
    mask: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1).astype(int)

    @property
    def size(self):
        return self.mask.shape[0]

    @property
    def steps(self):
        return self.mask.shape[1]

    def take(self, rows) -> "EncodedBatch":
        rows = np.asarray(rows)
        return EncodedBatch([self.tids[i] for i in rows], [self.uids[i] for i in rows],
                            self.dev[rows], self.day[rows], self.hour[rows], self.cat[rows],
                            self.mask[rows])

    def trimmed(self) -> "EncodedBatch":
        """Drop leading slots that are padding for every row."""
        lead = self.steps - int(self.lengths.max())
        if lead == 0:
            return self
        return EncodedBatch(self.tids, self.uids, self.dev[:, lead:], self.day[:, lead:],
                            self.hour[:, lead:], self.cat[:, lead:], self.mask[:, lead:])

    def trajectory(self, row: int) -> "EncodedTrajectory":
        slots = [EncodedPoint(self.dev[row, t, 0], self.dev[row, t, 1], self.day[row, t],
                              self.hour[row, t], self.cat[row, t]) for t in range(self.steps)]
        return EncodedTrajectory(self.tids[row], self.uids[row], slots, self.mask[row].copy(),
                                 int(self.mask[row].sum()))


@dataclass
class EncodedTrajectory:
    tid: int
    uid: int
    slots: list
    mask: np.ndarray
    true_length: int


def encode_batch(trajectories: Sequence[Trajectory], centroid, max_length: int,
                 n_categories: int) -> EncodedBatch:
    """Encode and zero pre-pad; real points fill the last slots in order."""
    n = len(trajectories)
    dev = np.zeros((n, max_length, 2))
    day = np.zeros((n, max_length, N_DAYS))
    hour = np.zeros((n, max_length, N_HOURS))
    cat = np.zeros((n, max_length, n_categories))
    mask = np.zeros((n, max_length))
    for b, t in enumerate(trajectories):
        k = len(t.points)
        if k > max_length:
            raise LengthError(f"trajectory {t.tid} has {k} points, max_length is {max_length}")
        start = max_length - k
        for j, p in enumerate(t.points):
            s = start + j
            dev[b, s] = (p.lat - centroid[0], p.lon - centroid[1])
            day[b, s, p.day] = 1.0
            hour[b, s, p.hour] = 1.0
            cat[b, s, p.category] = 1.0
        mask[b, start:] = 1.0
    return EncodedBatch([t.tid for t in trajectories], [t.uid for t in trajectories],
                        dev, day, hour, cat, mask)


def encode_and_pad(t: Trajectory, centroid, max_length: int, n_categories: int) -> EncodedTrajectory:
    return encode_batch([t], centroid, max_length, n_categories).trajectory(0)


def _argmax_checked(probs: np.ndarray, what: str) -> int:
    total = float(np.sum(probs))
    if abs(total - 1.0) > 1e-6:
        raise ContractError(f"{what} probabilities sum to {total}, not 1")
    return int(np.argmax(probs))  # first maximum wins ties


def decode_trajectory(dev, day_probs, hour_probs, cat_probs, mask, centroid,
                      tid: int = 0, uid: int = 0) -> Trajectory:
    """Turn one trajectory's soft generator output back into points.

    Arrays are per-slot (T x ...); slots with mask 0 are dropped.
    """
    points = []
    for s in range(len(mask)):
        if mask[s] == 0:
            continue
        points.append(TrajectoryPoint(
            lat=float(centroid[0] + dev[s][0]),
            lon=float(centroid[1] + dev[s][1]),
            day=_argmax_checked(day_probs[s], "day"),
            hour=_argmax_checked(hour_probs[s], "hour"),
            category=_argmax_checked(cat_probs[s], "category"),
        ))
    return Trajectory(tid, uid, tuple(points))


def decode_batch(dev, day, hour, cat, batch: EncodedBatch, centroid) -> list[Trajectory]:
    return [decode_trajectory(dev[b], day[b], hour[b], cat[b], batch.mask[b], centroid,
                              tid=batch.tids[b], uid=batch.uids[b])
            for b in range(batch.size)]
