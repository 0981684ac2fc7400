"""Geomasking baselines: random perturbation and Gaussian noise, optional time shift."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .data import N_DAYS, N_HOURS, Trajectory, TrajectoryPoint

METERS_PER_DEGREE = 111_320.0
EARTH_RADIUS_KM = 6371.0088
METHODS = ("random_perturbation", "gaussian")
METHOD_ALIASES = {"rp": "random_perturbation", "random": "random_perturbation",
                  "random_perturbation": "random_perturbation", "gaussian": "gaussian",
                  "gauss": "gaussian"}


class UnsupportedLatitude(ValueError):
    pass


@dataclass(frozen=True)
class MaskConfig:
    method: str = "random_perturbation"
    spatial_radius_km: float = 1.0
    gaussian_sigma_deg: float = 0.001
    temporal: bool = False
    temporal_window_h: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; valid: {', '.join(METHODS)}")
        if self.spatial_radius_km <= 0 or self.gaussian_sigma_deg <= 0:
            raise ValueError("radius and sigma must be positive")
        if not 1 <= self.temporal_window_h <= 24:
            raise ValueError("temporal window must be within 1..24 hours")


def haversine_km(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(a, 1.0)))


def disk_offset(lat: float, radius_m: float, theta: float):
    """Tangent-plane (dlat, dlon) in degrees for a displacement of ``radius_m`` at bearing ``theta``."""
    if abs(lat) >= 89.0:
        raise UnsupportedLatitude(f"latitude {lat} too close to a pole for tangent-plane displacement")
    dlat = radius_m * math.cos(theta) / METERS_PER_DEGREE
    dlon = radius_m * math.sin(theta) / (METERS_PER_DEGREE * math.cos(math.radians(lat)))
    return dlat, dlon


def random_perturb_point(p: TrajectoryPoint, cfg: MaskConfig, rng: np.random.Generator) -> TrajectoryPoint:
    # uniform over the disk: r = R * sqrt(u)
    theta = rng.uniform(0.0, 2 * math.pi)
    r = cfg.spatial_radius_km * 1000.0 * math.sqrt(rng.uniform())
    dlat, dlon = disk_offset(p.lat, r, theta)
    return replace(p, lat=p.lat + dlat, lon=p.lon + dlon)


def gaussian_perturb_point(p: TrajectoryPoint, cfg: MaskConfig, rng: np.random.Generator) -> TrajectoryPoint:
    dlat, dlon = rng.normal(0.0, cfg.gaussian_sigma_deg, size=2)
    return replace(p, lat=p.lat + float(dlat), lon=p.lon + float(dlon))


def shift_hour(p: TrajectoryPoint, offset: int) -> TrajectoryPoint:
    total = p.hour + offset
    return replace(p, hour=total % N_HOURS, day=(p.day + total // N_HOURS) % N_DAYS)


def temporal_perturb(p: TrajectoryPoint, cfg: MaskConfig, rng: np.random.Generator) -> TrajectoryPoint:
    w = cfg.temporal_window_h
    offset = int(rng.integers(-(w - 1), w)) if w > 1 else 0
    return shift_hour(p, offset)


def _clamp_point(p: TrajectoryPoint) -> TrajectoryPoint:
    lon = (p.lon + 180.0) % 360.0 - 180.0 if not -180.0 <= p.lon <= 180.0 else p.lon
    return replace(p, lat=min(90.0, max(-90.0, p.lat)), lon=lon)


def mask_trajectory(t: Trajectory, cfg: MaskConfig) -> Trajectory:
    rng = np.random.default_rng([cfg.seed, t.tid % (1 << 63)])
    spatial = random_perturb_point if cfg.method == "random_perturbation" else gaussian_perturb_point
    points = []
    for p in t.points:
        q = spatial(p, cfg, rng)
        if cfg.temporal:
            q = temporal_perturb(q, cfg, rng)
        points.append(_clamp_point(q))
    return Trajectory(t.tid, t.uid, tuple(points))


def mask_dataset(trajectories: Iterable[Trajectory], cfg: MaskConfig) -> list[Trajectory]:
    """Per-trajectory random streams keyed by (seed, tid)."""
    return [mask_trajectory(t, cfg) for t in trajectories]
