"""Shared builders for synthetic models and trajectories."""
from __future__ import annotations

import itertools
import random

import numpy as np

from wtaplan.assignment import DELAY, SHARED_PIP, AssignmentModel
from wtaplan.interference import PHYSICAL, CandidateId
from wtaplan.trajectory import Trajectory


def random_model(rng: random.Random, max_vars: int = 14) -> AssignmentModel:
    n = rng.randint(0, max_vars)
    n_t, n_f = rng.randint(1, 4), rng.randint(1, 3)
    tids = [f"T{k}" for k in range(n_t)]
    fids = [f"W{k}" for k in range(n_f)]
    pool = [CandidateId(f, t, i) for f in fids for t in tids for i in range(6)]
    variables = rng.sample(pool, min(n, len(pool)))
    launch = [rng.uniform(0.0, 8.0) for _ in variables]
    density = rng.uniform(0.0, 0.5)
    conflicts: dict = {}
    for i, j in itertools.combinations(range(len(variables)), 2):
        a, b = variables[i], variables[j]
        kinds = set()
        if (a.target_id, a.index) == (b.target_id, b.index):
            kinds.add(SHARED_PIP)
        if a.farm_id == b.farm_id and abs(launch[i] - launch[j]) < 1.0:
            kinds.add(DELAY)
        if rng.random() < density:
            kinds.add(PHYSICAL)
        if kinds:
            conflicts[(i, j)] = frozenset(kinds)
    return AssignmentModel(
        variables=variables,
        target_ids=tids,
        farm_ids=fids,
        launch_times=launch,
        impact_times=[t + 15.0 for t in launch],
        value_log=[2.0] * n_t,
        max_per_target=[rng.randint(1, 2) for _ in tids],
        magazine=[rng.choice([None, None, rng.randint(0, 4)]) for _ in fids],
        launch_delay=[1.0] * n_f,
        conflicts=conflicts,
    )


def free_model(counts_available, n_targets, cap=2) -> AssignmentModel:
    """Conflict-free model with ``counts_available[t]`` candidates for target t."""
    variables, launch = [], []
    for t in range(n_targets):
        for i in range(counts_available[t]):
            variables.append(CandidateId("W1", f"T{t + 1}", i))
            launch.append(10.0 * len(launch))
    return AssignmentModel(
        variables=variables,
        target_ids=[f"T{t + 1}" for t in range(n_targets)],
        farm_ids=["W1"],
        launch_times=launch,
        impact_times=[x + 15.0 for x in launch],
        value_log=[2.0] * n_targets,
        max_per_target=[cap] * n_targets,
        magazine=[None],
        launch_delay=[1.0],
    )


def linear_trajectory(p0, v, t0, t1, dt=0.01) -> Trajectory:
    """Constant-velocity track sampled every ``dt`` (end point included)."""
    p0, v = np.asarray(p0, float), np.asarray(v, float)
    n = int(round((t1 - t0) / dt))
    t = t0 + np.arange(n + 1) * dt
    t[-1] = t1
    pos = p0 + (t - t0)[:, None] * v
    return Trajectory(t, np.hstack([pos, np.broadcast_to(v, pos.shape)]))


def polyline_trajectory(times, points) -> Trajectory:
    """Piecewise-linear track through ``points`` at ``times``; velocity per leg."""
    times = np.asarray(times, float)
    pts = np.asarray(points, float)
    vel = np.diff(pts, axis=0) / np.diff(times)[:, None]
    vel = np.vstack([vel, vel[-1]])
    return Trajectory(times, np.hstack([pts, vel]))


def min_distance_oracle(ta, pa, tb, pb) -> float:
    """Closed-form minimum distance of two piecewise-linear tracks over their common window."""
    lo, hi = max(ta[0], tb[0]), min(ta[-1], tb[-1])
    if hi < lo:
        return float("inf")
    knots = sorted({lo, hi, *[t for t in ta if lo < t < hi], *[t for t in tb if lo < t < hi]})

    def rel(t):
        a = np.array([np.interp(t, ta, pa[:, j]) for j in range(3)])
        b = np.array([np.interp(t, tb, pb[:, j]) for j in range(3)])
        return b - a

    best = float("inf")
    for s, e in zip(knots, knots[1:]):
        r0, r1 = rel(s), rel(e)
        d = r1 - r0
        u = 0.0 if d @ d == 0 else min(1.0, max(0.0, -(r0 @ d) / (d @ d)))
        best = min(best, float(np.linalg.norm(r0 + u * d)))
    return min(best, float(np.linalg.norm(rel(lo))), float(np.linalg.norm(rel(hi))))


def random_polyline_pair(rng: random.Random):
    """Two roughly co-moving polylines (leg speeds differ by < 140 m/s) with
    different knot times and partially overlapping windows."""
    def legs(t0, t1, start):
        times = sorted({t0, t1, *(round(rng.uniform(t0, t1), 3) for _ in range(3))})
        pts = [np.asarray(start, float)]
        for s, e in zip(times, times[1:]):
            jitter = np.array([rng.uniform(-80, 80) for _ in range(3)])
            pts.append(pts[-1] + (e - s) * (np.array([250.0, 0.0, 0.0]) + jitter))
        return times, np.array(pts)

    ta, pa = legs(0.0, 12.0, (0.0, 0.0, -4000.0))
    offset = np.array([250.0, 0.0, -4000.0]) + np.array([rng.uniform(-120, 120) for _ in range(3)])
    tb, pb = legs(1.0, 13.0, offset)
    return ta, pa, tb, pb
