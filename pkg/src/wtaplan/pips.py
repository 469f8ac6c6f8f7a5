"""Predicted intercept points: discretize target tracks inside the intercept band
and attach per-farm launch times and feasibility."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .dynamics import ENGAGEMENT_CACHE, DynamicsParams, EngagementCache
from .scenario import Scenario, TargetTrack, TrackError, band_crossings
from .trajectory import Outcome, Trajectory

log = logging.getLogger(__name__)

# Launch windows wider than this per (farm, target) are flagged, not rejected.
LAUNCH_WINDOW_SOFT_LIMIT = 6.0


@dataclass(frozen=True)
class FarmWindow:
    feasible: bool
    launch_time: float
    time_of_flight: float


@dataclass(frozen=True)
class PipPoint:
    target_id: str
    index: int
    position: tuple[float, float, float]
    impact_time: float
    farms: dict[str, FarmWindow] = field(default_factory=dict, hash=False, compare=False)

    @property
    def altitude(self) -> float:
        return -self.position[2]

    def feasible_for(self, farm_id: str) -> bool:
        w = self.farms.get(farm_id)
        return bool(w and w.feasible)


@dataclass
class PipSet:
    pips: list[PipPoint]
    farm_ids: list[str]
    target_ids: list[str]
    trajectories: dict[tuple[str, str, int], Trajectory] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.pips)

    def __iter__(self) -> Iterator[PipPoint]:
        return iter(self.pips)

    def by_target(self, target_id: str) -> list[PipPoint]:
        return [p for p in self.pips if p.target_id == target_id]

    def lookup(self, target_id: str, index: int) -> PipPoint:
        return self._index[(target_id, index)]

    def __post_init__(self):
        self._index = {(p.target_id, p.index): p for p in self.pips}

    def feasible_candidates(self) -> list[tuple[str, PipPoint]]:
        """(farm_id, pip) for every feasible candidate, farm-major then PIP order."""
        return [(f, p) for f in self.farm_ids for p in self.pips if p.feasible_for(f)]

    def launch_windows(self) -> dict[tuple[str, str], tuple[float, float]]:
        """Min/max feasible launch time per (farm, target)."""
        out = {}
        for f in self.farm_ids:
            for t in self.target_ids:
                times = [p.farms[f].launch_time for p in self.by_target(t) if p.feasible_for(f)]
                if times:
                    out[(f, t)] = (min(times), max(times))
        return out

    def to_tsv(self) -> str:
        head = ["target_id", "i", "x", "y", "z", "impact_time"]
        for f in self.farm_ids:
            head += [f"{f}_feasible", f"{f}_launch_time", f"{f}_tof"]
        lines = ["\t".join(head)]
        for p in self.pips:
            row = [p.target_id, str(p.index)] + [f"{v:.3f}" for v in p.position] + [f"{p.impact_time:.6f}"]
            for f in self.farm_ids:
                w = p.farms[f]
                row += [str(int(w.feasible)), _num(w.launch_time), _num(w.time_of_flight)]
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def _num(x: float) -> str:
    return "nan" if np.isnan(x) else f"{x:.6f}"


def discretize_track(track: TargetTrack, band, n: int, d_pif: float | None = None) -> list[PipPoint]:
    """``n`` points spaced uniformly in arc length along the in-band descent.

    The first and last points are the band-top and band-bottom crossings.
    When ``d_pif`` is given and the spacing falls below it a warning is logged.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    traj = track.trajectory
    crossing = band_crossings(traj, band)
    if crossing is None:
        raise TrackError(f"target {track.target_id} never descends through the intercept band")
    t_hi, t_lo = crossing
    inner = (traj.times > t_hi) & (traj.times < t_lo)
    times = np.concatenate([[t_hi], traj.times[inner], [t_lo]])
    pos = np.stack([np.interp(times, traj.times, traj.positions[:, j]) for j in range(3)], axis=1)
    seg = np.sqrt(np.sum(np.diff(pos, axis=0) ** 2, axis=1))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, arc[-1], n)
    s[-1] = arc[-1]
    pts = np.stack([np.interp(s, arc, pos[:, j]) for j in range(3)], axis=1)
    tt = np.interp(s, arc, times)
    spacing = arc[-1] / (n - 1)
    if d_pif is not None and spacing < d_pif:
        log.warning("target %s: PIP spacing %.1f m below physical interference distance %.1f m",
                    track.target_id, spacing, d_pif)
    return [
        PipPoint(track.target_id, i, tuple(float(v) for v in pts[i]), float(tt[i]))
        for i in range(n)
    ]


def pip_spacing(pips: list[PipPoint]) -> np.ndarray:
    pos = np.array([p.position for p in pips])
    return np.sqrt(np.sum(np.diff(pos, axis=0) ** 2, axis=1))


def build_pip_set(
    scenario: Scenario,
    tracks: list[TargetTrack],
    params: DynamicsParams | None = None,
    cache: EngagementCache | None = None,
) -> PipSet:
    """Discretize every track and evaluate all (farm, PIP) engagements.

    A candidate is feasible when the engagement intercepts and the resulting
    launch time ``impact_time - time_of_flight`` is >= 0.  Infeasible
    candidates stay in the set, flagged, so indices match the full layout.
    """
    params = scenario.dynamics_params if params is None else params
    cache = ENGAGEMENT_CACHE if cache is None else cache
    warnings: list[str] = []

    raw: list[PipPoint] = []
    for tr in tracks:
        pts = discretize_track(tr, scenario.intercept_altitude_band, scenario.pips_per_target)
        gap = float(pip_spacing(pts).min())
        if gap < scenario.interference_params.d_pif:
            msg = f"target {tr.target_id}: PIP spacing {gap:.1f} m < D_PIF"
            log.warning(msg)
            warnings.append(msg)
        raw.extend(pts)

    farms = list(scenario.weapon_farms)
    engagements = cache.get_many(
        [f for f in farms for _ in raw], [p for _ in farms for p in raw], params
    )

    windows: dict[tuple[str, int], dict[str, FarmWindow]] = {(p.target_id, p.index): {} for p in raw}
    trajectories = {}
    for k, traj in enumerate(engagements):
        farm = farms[k // len(raw)]
        pip = raw[k % len(raw)]
        if traj is None or traj.outcome != Outcome.INTERCEPT:
            w = FarmWindow(False, float("nan"), float("nan"))
        else:
            tof = traj.flight_time
            launch = pip.impact_time - tof
            w = FarmWindow(launch >= 0.0, launch, tof)
            if w.feasible:
                trajectories[(farm.id, pip.target_id, pip.index)] = traj.shifted(launch)
        windows[(pip.target_id, pip.index)][farm.id] = w

    pips = [
        PipPoint(p.target_id, p.index, p.position, p.impact_time, windows[(p.target_id, p.index)])
        for p in raw
    ]
    out = PipSet(pips, [f.id for f in farms], [t.target_id for t in tracks], trajectories, warnings)
    for (f, t), (lo, hi) in out.launch_windows().items():
        if hi - lo > LAUNCH_WINDOW_SOFT_LIMIT:
            msg = f"launch window {f}->{t} spans {hi - lo:.2f} s (> {LAUNCH_WINDOW_SOFT_LIMIT} s)"
            log.warning(msg)
            out.warnings.append(msg)
    return out
