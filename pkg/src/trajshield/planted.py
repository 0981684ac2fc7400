"""Seeded synthetic "planted" check-in corpus for desk-scale experiments.

Users come in pairs ("twins") that share preferred hours, preferred POI
categories and active days; twins differ only by home anchors a short
distance apart. Visits scatter around the anchor, so telling twins apart
needs fine spatial detail while other users differ in time and category.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Trajectory, TrajectoryPoint

CATEGORY_NAMES = ("Food", "Travel & Transport", "Residence", "Professional & Other Places",
                  "Shop & Service", "Outdoors & Recreation", "College & University",
                  "Arts & Entertainment", "Nightlife Spot", "Event")


@dataclass(frozen=True)
class PlantedConfig:
    n_users: int = 20
    trajectories_per_user: int = 10
    min_length: int = 8
    max_length: int = 24
    center: tuple = (40.75, -73.95)
    region_deg: float = 0.16       # side of the square holding user anchors
    spread_deg: float = 0.003      # per-axis std of visits around an anchor
    twin_offset_deg: float = 0.012 # anchor separation inside a twin pair
    n_preferred_hours: int = 3
    hour_jitter: int = 1
    n_preferred_categories: int = 2
    p_preferred_category: float = 0.85
    seed: int = 7


def planted_dataset(cfg: PlantedConfig = PlantedConfig()) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    n_cat = len(CATEGORY_NAMES)
    trajectories = []
    tid = 0
    for u in range(cfg.n_users):
        if u % 2 == 0:
            pair_center = np.asarray(cfg.center) + rng.uniform(-cfg.region_deg / 2, cfg.region_deg / 2, size=2)
            angle = rng.uniform(0, 2 * np.pi)
            half = 0.5 * cfg.twin_offset_deg * np.array([np.cos(angle), np.sin(angle)])
            hours = rng.choice(24, size=cfg.n_preferred_hours, replace=False)
            cats = rng.choice(n_cat, size=cfg.n_preferred_categories, replace=False)
            home_day = int(rng.integers(7))
            anchor = pair_center + half
        else:
            anchor = pair_center - half
        for _ in range(cfg.trajectories_per_user):
            length = int(rng.integers(cfg.min_length, cfg.max_length + 1))
            points = []
            for _ in range(length):
                lat, lon = anchor + rng.normal(0.0, cfg.spread_deg, size=2)
                hour = int(hours[rng.integers(len(hours))] + rng.integers(-cfg.hour_jitter, cfg.hour_jitter + 1)) % 24
                if rng.uniform() < cfg.p_preferred_category:
                    cat = int(cats[rng.integers(len(cats))])
                else:
                    cat = int(rng.integers(n_cat))
                day = (home_day + int(rng.integers(0, 3))) % 7
                points.append(TrajectoryPoint(float(lat), float(lon), day, hour, cat))
            trajectories.append(Trajectory(tid, u, tuple(points)))
            tid += 1
    return Dataset(tuple(trajectories), CATEGORY_NAMES)
