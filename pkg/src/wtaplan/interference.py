"""Physical and seeker interference between interceptor trajectories.

Both predicates are evaluated on one global clock, times ``k * dt`` for integer
``k``, restricted to the overlap of the two flight windows; states between
trajectory samples are linearly interpolated.  Using a shared clock makes the
pairwise checks and the table build agree bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .pips import PipSet
from .scenario import InterferenceParams
from .trajectory import Trajectory

PHYSICAL = "physical"
SEEKER = "seeker"
KINDS = (PHYSICAL, SEEKER)

_EPS = 1e-9


class CandidateId(NamedTuple):
    farm_id: str
    target_id: str
    index: int

    def __str__(self):
        return f"{self.farm_id}:{self.target_id}#{self.index}"


@dataclass(frozen=True)
class GridTrack:
    k0: int
    states: np.ndarray  # (L, 6) on times (k0 + j) * dt

    @property
    def k1(self) -> int:
        return self.k0 + len(self.states) - 1


def resample(traj: Trajectory, dt: float) -> GridTrack:
    k0 = math.ceil(traj.launch_time / dt - 1e-9)
    k1 = math.floor(traj.terminal_time / dt + 1e-9)
    if k1 < k0:
        return GridTrack(k0, np.empty((0, 6)))
    t = np.arange(k0, k1 + 1) * dt
    return GridTrack(k0, traj.sample(t))


def _pair_flags(a: np.ndarray, b: np.ndarray, ip: InterferenceParams):
    """Interference flags of track ``a`` (L, 6) against tracks ``b`` (L, m, 6).

    Rows where either side is NaN (outside a flight window) never trigger.
    The seeker cone is taken about the line of relative motion in both
    directions, so an opening pair (angle(r, v) < sigma) and a closing pair
    (angle(r, -v) < sigma) both count; swapping the two vehicles flips r and v
    together and gives the same answer.
    """
    r = b[..., :3] - a[:, None, :3]
    v = b[..., 3:] - a[:, None, 3:]
    r2 = r[..., 0] * r[..., 0] + r[..., 1] * r[..., 1] + r[..., 2] * r[..., 2]
    v2 = v[..., 0] * v[..., 0] + v[..., 1] * v[..., 1] + v[..., 2] * v[..., 2]
    rv = r[..., 0] * v[..., 0] + r[..., 1] * v[..., 1] + r[..., 2] * v[..., 2]
    physical = np.any(r2 < ip.d_pif * ip.d_pif, axis=0)
    cos2 = math.cos(ip.sigma_fov) ** 2
    degenerate = (r2 <= _EPS * _EPS) | (v2 <= _EPS * _EPS)
    in_cone = degenerate | (rv * rv > cos2 * r2 * v2)
    seeker = np.any((r2 < ip.d_sif * ip.d_sif) & in_cone, axis=0)
    return physical, seeker


def _overlap(ga: GridTrack, gb: GridTrack):
    lo, hi = max(ga.k0, gb.k0), min(ga.k1, gb.k1)
    if hi < lo:
        return None
    return ga.states[lo - ga.k0: hi - ga.k0 + 1], gb.states[lo - gb.k0: hi - gb.k0 + 1]


def _check(traj_a, traj_b, ip: InterferenceParams):
    ov = _overlap(resample(traj_a, ip.check_sample_dt), resample(traj_b, ip.check_sample_dt))
    if ov is None:
        return False, False
    phys, seek = _pair_flags(ov[0], ov[1][:, None, :], ip)
    return bool(phys[0]), bool(seek[0])


def check_physical(traj_a: Trajectory, traj_b: Trajectory, d_pif: float, dt: float) -> bool:
    """True when the two vehicles come within ``d_pif`` while both are flying."""
    ip = InterferenceParams(d_pif=d_pif, d_sif=max(d_pif, 1.0), check_sample_dt=dt)
    return _check(traj_a, traj_b, ip)[0]


def check_seeker(traj_a: Trajectory, traj_b: Trajectory, d_sif: float, sigma_fov: float, dt: float) -> bool:
    """True when, at some common instant, the pair is within ``d_sif`` and the
    relative position lies within ``sigma_fov`` of the relative-velocity line
    (either ``v`` or ``-v``, i.e. the pair is opening or closing along the LOS).

    A sample with vanishing relative position or velocity counts as inside the
    cone, so only the distance condition decides it.
    """
    ip = InterferenceParams(d_pif=min(d_sif, 1.0), d_sif=d_sif, sigma_fov=sigma_fov, check_sample_dt=dt)
    return _check(traj_a, traj_b, ip)[1]


@dataclass
class InterferenceTable:
    candidates: list[CandidateId]
    physical: frozenset[tuple[int, int]]
    seeker: frozenset[tuple[int, int]]
    include_all: bool = False
    pairs_checked: int = 0
    pairs_skipped: int = 0
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._pos = {c: i for i, c in enumerate(self.candidates)}

    def index(self, c: CandidateId) -> int:
        return self._pos[c]

    def kind_set(self, kind: str) -> frozenset[tuple[int, int]]:
        return {PHYSICAL: self.physical, SEEKER: self.seeker}[kind]

    def has(self, a: CandidateId, b: CandidateId, kind: str | None = None) -> bool:
        i, j = sorted((self._pos[a], self._pos[b]))
        kinds = KINDS if kind is None else (kind,)
        return any((i, j) in self.kind_set(k) for k in kinds)

    def pairs(self, kind: str) -> list[tuple[CandidateId, CandidateId]]:
        return [(self.candidates[i], self.candidates[j]) for i, j in sorted(self.kind_set(kind))]

    def conflict_pairs(self) -> list[tuple[CandidateId, CandidateId]]:
        union = sorted(self.physical | self.seeker)
        return [(self.candidates[i], self.candidates[j]) for i, j in union]

    def to_tsv(self) -> str:
        lines = ["kind\tfarm_a\ttarget_a\ti_a\tfarm_b\ttarget_b\ti_b"]
        for kind in KINDS:
            for a, b in self.pairs(kind):
                lines.append(f"{kind}\t{a.farm_id}\t{a.target_id}\t{a.index}\t{b.farm_id}\t{b.target_id}\t{b.index}")
        return "\n".join(lines) + "\n"

    def heatmap(self, kind: str, farm_a: str, farm_b: str, pip_set: PipSet) -> np.ndarray:
        """Binary matrix over the full PIP layout: rows farm_a PIPs, columns farm_b PIPs."""
        order = {(p.target_id, p.index): n for n, p in enumerate(pip_set.pips)}
        mat = np.zeros((len(order), len(order)), dtype=np.uint8)
        for i, j in self.kind_set(kind):
            a, b = self.candidates[i], self.candidates[j]
            for x, y in ((a, b), (b, a)):
                if x.farm_id == farm_a and y.farm_id == farm_b:
                    mat[order[(x.target_id, x.index)], order[(y.target_id, y.index)]] = 1
        return mat


def _launch_delay_blocked(a: CandidateId, b: CandidateId, launch, delays) -> bool:
    return a.farm_id == b.farm_id and abs(launch[a] - launch[b]) < delays[a.farm_id]


def build_interference_table(
    pip_set: PipSet,
    params: InterferenceParams,
    launch_delays: dict[str, float] | None = None,
    include_all: bool = False,
    workers: int = 1,
) -> InterferenceTable:
    """Evaluate both predicates for every unordered pair of feasible candidates.

    Pairs on the same farm whose launch times are closer than that farm's
    launch delay are skipped (the delay constraint already forbids them)
    unless ``include_all`` is set.  Rows are independent; with ``workers > 1``
    they run on a thread pool and are merged in candidate order.
    """
    cands = [CandidateId(f, p.target_id, p.index) for f, p in pip_set.feasible_candidates()]
    launch = {c: pip_set.lookup(c.target_id, c.index).farms[c.farm_id].launch_time for c in cands}
    delays = launch_delays or {}
    dt = params.check_sample_dt
    grids = [resample(pip_set.trajectories[c], dt) for c in cands]
    n = len(cands)
    if n < 2:
        return InterferenceTable(cands, frozenset(), frozenset(), include_all)

    kmin = min(g.k0 for g in grids)
    kmax = max(g.k1 for g in grids)
    dense = np.full((kmax - kmin + 1, n, 6), np.nan)
    for i, g in enumerate(grids):
        dense[g.k0 - kmin: g.k1 - kmin + 1, i, :] = g.states
    k0 = np.array([g.k0 for g in grids])
    k1 = np.array([g.k1 for g in grids])

    def row(a):
        ga = grids[a]
        partners = [
            b for b in range(a + 1, n)
            if k0[b] <= ga.k1 and k1[b] >= ga.k0
            and (include_all or not _launch_delay_blocked(cands[a], cands[b], launch, delays))
        ]
        skipped = sum(
            1 for b in range(a + 1, n)
            if not include_all and _launch_delay_blocked(cands[a], cands[b], launch, delays)
        )
        phys, seek = [], []
        if len(ga.states) == 0 or not partners:
            return phys, seek, len(partners), skipped
        block = dense[ga.k0 - kmin: ga.k1 - kmin + 1]
        for start in range(0, len(partners), 256):
            chunk = np.array(partners[start:start + 256])
            p, s = _pair_flags(ga.states, block[:, chunk, :], params)
            phys.extend((a, int(b)) for b in chunk[p])
            seek.extend((a, int(b)) for b in chunk[s])
        return phys, seek, len(partners), skipped

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(n)))
    else:
        rows = [row(a) for a in range(n)]

    physical = frozenset(p for r in rows for p in r[0])
    seeker = frozenset(p for r in rows for p in r[1])
    return InterferenceTable(
        cands, physical, seeker, include_all,
        pairs_checked=sum(r[2] for r in rows),
        pairs_skipped=sum(r[3] for r in rows),
    )


def interference_stats(table: InterferenceTable, pip_set: PipSet) -> dict:
    """Counts and fractions per kind.

    ``cross_farm`` fractions use the farm-vs-farm tables over the full PIP
    layout as denominator (|PIPs|^2 per farm pair); ``within_farm`` uses
    |PIPs|(|PIPs|-1)/2 per farm.
    """
    n_pips = len(pip_set)
    farms = pip_set.farm_ids
    cross_total = n_pips * n_pips * (len(farms) * (len(farms) - 1) // 2)
    within_total = len(farms) * n_pips * (n_pips - 1) // 2
    out: dict = {
        "candidates": len(table.candidates),
        "pairs_checked": table.pairs_checked,
        "pairs_skipped_launch_delay": table.pairs_skipped,
        "cross_farm_pair_total": cross_total,
        "within_farm_pair_total": within_total,
    }
    for kind in KINDS:
        cross = within = 0
        for i, j in table.kind_set(kind):
            if table.candidates[i].farm_id == table.candidates[j].farm_id:
                within += 1
            else:
                cross += 1
        out[kind] = {
            "total": cross + within,
            "cross_farm": cross,
            "within_farm": within,
            "cross_farm_fraction": cross / cross_total if cross_total else 0.0,
            "within_farm_fraction": within / within_total if within_total else 0.0,
        }
    return out
