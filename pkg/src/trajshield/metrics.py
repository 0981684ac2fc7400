"""Spatial, temporal and categorical similarity measures."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .data import N_HOURS, Trajectory


# ------------------------------------------------------------------ Hausdorff

def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance, Euclidean in degree space."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("hausdorff distance of an empty point set")
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# ------------------------------------------------------- convex hull Jaccard

def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list[tuple[float, float]]:
    """Andrew's monotone chain; counter-clockwise, no repeated end point."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=np.float64).reshape(-1, 2).tolist())))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    x = np.array([p[0] for p in poly])
    y = np.array([p[1] for p in poly])
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_convex(subject, clip) -> list:
    """Sutherland-Hodgman: intersection of two counter-clockwise convex polygons."""
    out = list(subject)
    n = len(clip)
    for i in range(n):
        if not out:
            break
        a, b = clip[i], clip[(i + 1) % n]
        inp, out = out, []
        for j in range(len(inp)):
            p, q = inp[j], inp[(j + 1) % len(inp)]
            p_in = _cross(a, b, p) >= 0
            q_in = _cross(a, b, q) >= 0
            if p_in:
                out.append(p)
            if p_in != q_in:
                dp = _cross(a, b, p)
                dq = _cross(a, b, q)
                t = dp / (dp - dq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def hull_jaccard(a, b) -> float:
    """Intersection-over-union of the convex hulls of two point sets.

    A zero-area hull gives 0, unless both hulls are the same degenerate set.
    """
    ha, hb = convex_hull(a), convex_hull(b)
    area_a, area_b = polygon_area(ha), polygon_area(hb)
    if area_a == 0.0 or area_b == 0.0:
        return 1.0 if area_a == area_b == 0.0 and sorted(ha) == sorted(hb) else 0.0
    inter = polygon_area(clip_convex(ha, hb))
    union = area_a + area_b - inter
    return float(min(1.0, max(0.0, inter / union)))


# ------------------------------------------------------ visit distributions

def temporal_visit_matrix(trajectories: Iterable[Trajectory], n_categories: int) -> np.ndarray:
    """C x 24 hour distribution per category (rows with no visits stay zero)."""
    counts = np.zeros((n_categories, N_HOURS))
    for t in trajectories:
        for p in t.points:
            counts[p.category, p.hour] += 1
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def frequency_distributions(trajectories: Iterable[Trajectory], n_categories: int):
    hourly = np.zeros(N_HOURS)
    categorical = np.zeros(n_categories)
    for t in trajectories:
        for p in t.points:
            hourly[p.hour] += 1
            categorical[p.category] += 1
    return hourly, categorical


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.dot(dx, dx)), np.sqrt(np.dot(dy, dy))
    if sx == 0 and sy == 0:
        raise ValueError("pearson correlation undefined: both inputs are constant")
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


def summary_stats(values: Sequence[float]) -> dict:
    v = np.asarray(values, dtype=np.float64)
    return {"min": float(v.min()), "max": float(v.max()), "std": float(v.std()), "mean": float(v.mean())}
