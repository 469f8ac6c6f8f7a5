"""Scenario definition, YAML loading/dumping, built-in W-formation cases and target tracks.

Scenario files are YAML.  Distances are meters, times seconds, angles degrees
(converted to radians on load).  Positions use the simulation frame: x, y
horizontal and z positive down, so a point at 4.5 km altitude has z = -4500.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .dynamics import DynamicsParams
from .trajectory import Trajectory

SCHEMA_VERSION = 1

Vec3 = tuple[float, float, float]


class ScenarioError(ValueError):
    """Validation failure; ``errors`` lists one message per offending field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class TrackError(ValueError):
    pass


@dataclass(frozen=True)
class EnemyLauncher:
    id: str
    position: Vec3
    shot_times: tuple[float, ...] = (0.0,)
    aim_point: Vec3 = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class WeaponFarm:
    id: str
    position: Vec3
    launch_delay: float = 1.0
    magazine: int | None = None          # None = unlimited
    launch_angles: tuple[float, float] = (math.radians(60.0), math.radians(90.0))


@dataclass(frozen=True)
class InterferenceParams:
    d_pif: float = 50.0
    d_sif: float = 2000.0
    sigma_fov: float = math.radians(8.0)
    check_sample_dt: float = 0.01


@dataclass(frozen=True)
class TargetParams:
    flight_time_range: tuple[float, float] = (88.0, 92.0)
    impact_offset_radius: float = 300.0
    sample_dt: float = 0.05
    value_log: float = 2.0


@dataclass(frozen=True)
class Scenario:
    enemy_launchers: tuple[EnemyLauncher, ...]
    weapon_farms: tuple[WeaponFarm, ...]
    asset_position: Vec3 = (0.0, 0.0, 0.0)
    intercept_altitude_band: tuple[float, float] = (4000.0, 5000.0)
    pips_per_target: int = 30
    defender_launch_delay: float = 1.0
    max_weapons_per_target: int = 2
    enemy_launch_delay: float = 2.0
    interference_params: InterferenceParams = field(default_factory=InterferenceParams)
    dynamics_params: DynamicsParams = field(default_factory=DynamicsParams)
    target_params: TargetParams = field(default_factory=TargetParams)

    def __post_init__(self):
        errors = validate(self)
        if errors:
            raise ScenarioError(errors)

    @property
    def farm_ids(self) -> list[str]:
        return [f.id for f in self.weapon_farms]

    def farm(self, farm_id: str) -> WeaponFarm:
        for f in self.weapon_farms:
            if f.id == farm_id:
                return f
        raise KeyError(farm_id)


@dataclass(frozen=True, eq=False)
class TargetTrack:
    target_id: str
    source_launcher_id: str
    launch_time: float
    trajectory: Trajectory
    impact_point: Vec3
    value_log: float = 2.0


def validate(s: Scenario) -> list[str]:
    errors: list[str] = []
    if not s.enemy_launchers:
        errors.append("no enemy launchers")
    if not s.weapon_farms:
        errors.append("no weapon farms")
    lo, hi = s.intercept_altitude_band
    if not (0 < lo < hi):
        errors.append("intercept_altitude_band: need 0 < min < max")
    if s.pips_per_target < 2:
        errors.append("pips_per_target must be >= 2")
    if not s.defender_launch_delay > 0:
        errors.append("defender_launch_delay must be > 0")
    if s.max_weapons_per_target < 1:
        errors.append("max_weapons_per_target must be >= 1")

    ids = [obj.id for obj in (*s.enemy_launchers, *s.weapon_farms)]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        errors.append(f"duplicate ids: {', '.join(dupes)}")

    for ln in s.enemy_launchers:
        times = ln.shot_times
        if not times:
            errors.append(f"enemy_launchers[{ln.id}].shot_times is empty")
        gaps = [b - a for a, b in zip(times, times[1:])]
        if any(g < s.enemy_launch_delay - 1e-9 for g in gaps):
            errors.append(
                f"enemy_launchers[{ln.id}].shot_times must increase by >= {s.enemy_launch_delay} s"
            )
    for fm in s.weapon_farms:
        if not fm.launch_delay > 0:
            errors.append(f"weapon_farms[{fm.id}].launch_delay must be > 0")
        if fm.magazine is not None and fm.magazine < 0:
            errors.append(f"weapon_farms[{fm.id}].magazine must be >= 0")
        g0, p0 = fm.launch_angles
        if not (-math.pi / 2 < g0 <= math.pi / 2 and -math.pi < p0 <= math.pi):
            errors.append(f"weapon_farms[{fm.id}].launch_angles out of range")

    ip = s.interference_params
    if not ip.d_pif > 0:
        errors.append("interference.d_pif must be > 0")
    if not ip.d_sif >= ip.d_pif:
        errors.append("interference.d_sif must be >= d_pif")
    if not 0 < ip.sigma_fov < math.pi / 2:
        errors.append("interference.sigma_fov must be in (0, 90) degrees")
    if not ip.check_sample_dt > 0:
        errors.append("interference.check_sample_dt must be > 0")

    tp = s.target_params
    ft_lo, ft_hi = tp.flight_time_range
    if not 0 < ft_lo <= ft_hi:
        errors.append("targets.flight_time_range: need 0 < min <= max")
    if tp.impact_offset_radius < 0:
        errors.append("targets.impact_offset_radius must be >= 0")
    if not tp.sample_dt > 0:
        errors.append("targets.sample_dt must be > 0")
    return errors


# --------------------------------------------------------------------------
# YAML document <-> Scenario


def _vec(v, name, errors) -> Vec3:
    try:
        x = tuple(float(c) for c in v)
    except (TypeError, ValueError):
        errors.append(f"{name}: expected [x, y, z]")
        return (0.0, 0.0, 0.0)
    if len(x) != 3:
        errors.append(f"{name}: expected 3 components")
        return (0.0, 0.0, 0.0)
    return x


def _pair(v, name, errors) -> tuple[float, float]:
    try:
        a, b = (float(c) for c in v)
    except (TypeError, ValueError):
        errors.append(f"{name}: expected [a, b]")
        return (0.0, 1.0)
    return (a, b)


def _section(doc, key, cls, errors, angle_fields=()):
    raw = doc.get(key) or {}
    if not isinstance(raw, dict):
        errors.append(f"{key}: expected a mapping")
        return cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for k, v in raw.items():
        name = k
        if k.endswith("_deg") and k[:-4] in angle_fields:
            name, v = k[:-4], math.radians(float(v))
        if name not in names:
            errors.append(f"{key}.{k}: unknown field")
            continue
        if isinstance(v, list):
            v = tuple(v)
        kwargs[name] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{key}: {exc}")
        return cls()


def scenario_from_dict(doc: dict) -> Scenario:
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioError(["document: expected a mapping at top level"])
    version = doc.get("schema_version")
    if version is None:
        errors.append("schema_version: missing")
    elif version != SCHEMA_VERSION:
        errors.append(f"schema_version: unsupported version {version!r}")

    known = {
        "schema_version", "enemy_launchers", "weapon_farms", "asset_position",
        "intercept_altitude_band", "pips_per_target", "defender_launch_delay",
        "max_weapons_per_target", "enemy_launch_delay", "interference", "dynamics", "targets",
    }
    for k in doc:
        if k not in known:
            errors.append(f"{k}: unknown field")

    asset = _vec(doc.get("asset_position", [0, 0, 0]), "asset_position", errors)
    delay = float(doc.get("defender_launch_delay", 1.0))

    launchers = []
    for n, raw in enumerate(doc.get("enemy_launchers") or []):
        name = f"enemy_launchers[{n}]"
        if not isinstance(raw, dict) or "id" not in raw or "position" not in raw:
            errors.append(f"{name}: needs id and position")
            continue
        launchers.append(
            EnemyLauncher(
                id=str(raw["id"]),
                position=_vec(raw["position"], f"{name}.position", errors),
                shot_times=tuple(float(t) for t in raw.get("shot_times", [0.0])),
                aim_point=_vec(raw.get("aim_point", asset), f"{name}.aim_point", errors),
            )
        )

    farms = []
    for n, raw in enumerate(doc.get("weapon_farms") or []):
        name = f"weapon_farms[{n}]"
        if not isinstance(raw, dict) or "id" not in raw or "position" not in raw:
            errors.append(f"{name}: needs id and position")
            continue
        g0, p0 = _pair(raw.get("launch_angles_deg", [60.0, 90.0]), f"{name}.launch_angles_deg", errors)
        mag = raw.get("magazine")
        farms.append(
            WeaponFarm(
                id=str(raw["id"]),
                position=_vec(raw["position"], f"{name}.position", errors),
                launch_delay=float(raw.get("launch_delay", delay)),
                magazine=None if mag is None else int(mag),
                launch_angles=(math.radians(g0), math.radians(p0)),
            )
        )

    interference = _section(doc, "interference", InterferenceParams, errors, angle_fields=("sigma_fov",))
    dynamics = _section(doc, "dynamics", DynamicsParams, errors)
    targets = _section(doc, "targets", TargetParams, errors)

    if errors:
        raise ScenarioError(errors)
    try:
        return Scenario(
            enemy_launchers=tuple(launchers),
            weapon_farms=tuple(farms),
            asset_position=asset,
            intercept_altitude_band=_pair(doc.get("intercept_altitude_band", [4000.0, 5000.0]),
                                          "intercept_altitude_band", errors),
            pips_per_target=int(doc.get("pips_per_target", 30)),
            defender_launch_delay=delay,
            max_weapons_per_target=int(doc.get("max_weapons_per_target", 2)),
            enemy_launch_delay=float(doc.get("enemy_launch_delay", 2.0)),
            interference_params=interference,
            dynamics_params=dynamics,
            target_params=targets,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise ScenarioError(errors + exc.errors) from None
        raise ScenarioError(errors + [str(exc)]) from None


def load_scenario(text: str) -> Scenario:
    """Parse a YAML scenario document; omitted fields take the reference-case defaults."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"document: malformed YAML ({exc})"]) from None
    return scenario_from_dict(doc)


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def _deg(x: float) -> float:
    return round(math.degrees(x), 12)


def scenario_to_dict(s: Scenario) -> dict:
    ip = s.interference_params
    return {
        "schema_version": SCHEMA_VERSION,
        "asset_position": list(s.asset_position),
        "intercept_altitude_band": list(s.intercept_altitude_band),
        "pips_per_target": s.pips_per_target,
        "defender_launch_delay": s.defender_launch_delay,
        "max_weapons_per_target": s.max_weapons_per_target,
        "enemy_launch_delay": s.enemy_launch_delay,
        "enemy_launchers": [
            {
                "id": ln.id,
                "position": list(ln.position),
                "shot_times": list(ln.shot_times),
                "aim_point": list(ln.aim_point),
            }
            for ln in s.enemy_launchers
        ],
        "weapon_farms": [
            {
                "id": fm.id,
                "position": list(fm.position),
                "launch_delay": fm.launch_delay,
                "magazine": fm.magazine,
                "launch_angles_deg": [_deg(a) for a in fm.launch_angles],
            }
            for fm in s.weapon_farms
        ],
        "interference": {
            "d_pif": ip.d_pif,
            "d_sif": ip.d_sif,
            "sigma_fov_deg": _deg(ip.sigma_fov),
            "check_sample_dt": ip.check_sample_dt,
        },
        "targets": {
            k: list(v) if isinstance(v, tuple) else v
            for k, v in dataclasses.asdict(s.target_params).items()
        },
        "dynamics": dataclasses.asdict(s.dynamics_params),
    }


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)


# --------------------------------------------------------------------------
# built-in cases

# Launchers spread left (-x) to right (+x), alternating range to draw a "W".
W_FORMATION = (
    (-25_000.0, 40_000.0),
    (-15_000.0, 32_000.0),
    (-5_000.0, 40_000.0),
    (5_000.0, 32_000.0),
    (15_000.0, 40_000.0),
    (25_000.0, 32_000.0),
)


def build_w_formation_scenario(case: int) -> Scenario:
    """Six launchers in a W, two farms at x = +/-250 m, asset at the origin.

    Case 1: every launcher fires once at t = 0.  Case 2: every launcher fires
    again 2 s later.
    """
    if case not in (1, 2):
        raise ValueError(f"case must be 1 or 2, got {case!r}")
    shots = (0.0,) if case == 1 else (0.0, 2.0)
    launchers = tuple(
        EnemyLauncher(id=f"L{n + 1}", position=(x, y, 0.0), shot_times=shots)
        for n, (x, y) in enumerate(W_FORMATION)
    )
    # the launch heading points at the threat axis (+y)
    angles = (math.radians(60.0), math.radians(90.0))
    farms = (
        WeaponFarm(id="W1", position=(250.0, 0.0, 0.0), launch_angles=angles),
        WeaponFarm(id="W2", position=(-250.0, 0.0, 0.0), launch_angles=angles),
    )
    return Scenario(enemy_launchers=launchers, weapon_farms=farms)


# --------------------------------------------------------------------------
# target tracks


def target_order(s: Scenario) -> list[tuple[EnemyLauncher, int]]:
    """(launcher, shot index) pairs ordered by salvo, then launcher number."""
    n_shots = max(len(ln.shot_times) for ln in s.enemy_launchers)
    return [
        (ln, j)
        for j in range(n_shots)
        for ln in s.enemy_launchers
        if j < len(ln.shot_times)
    ]


def target_id(launcher_id: str, shot_index: int) -> str:
    return f"{launcher_id}.{shot_index + 1}"


def _ballistic_track(p0, p1, t_launch, flight_time, g, dt) -> Trajectory:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    gvec = np.array([0.0, 0.0, g])
    v0 = (p1 - p0) / flight_time - 0.5 * gvec * flight_time
    n = int(math.floor(flight_time / dt + 1e-9))
    tau = np.arange(n + 1) * dt
    if tau[-1] < flight_time - 1e-9:
        tau = np.append(tau, flight_time)
    pos = p0 + tau[:, None] * v0 + 0.5 * (tau ** 2)[:, None] * gvec
    vel = v0 + tau[:, None] * gvec
    return Trajectory(t_launch + tau, np.hstack([pos, vel]))


def band_crossings(traj: Trajectory, band) -> tuple[float, float] | None:
    """Times the descending branch crosses the band top and bottom, or None."""
    lo, hi = band
    alt = -traj.positions[:, 2]
    apogee = int(np.argmax(alt))
    if alt[apogee] < hi:
        return None
    t, a = traj.times[apogee:], alt[apogee:]

    def first_below(level):
        k = np.flatnonzero(a <= level)
        if k.size == 0:
            return None
        k = int(k[0])
        if k == 0:
            return float(t[0])
        return float(t[k - 1] + (a[k - 1] - level) / (a[k - 1] - a[k]) * (t[k] - t[k - 1]))

    t_hi, t_lo = first_below(hi), first_below(lo)
    if t_hi is None or t_lo is None:
        return None
    return t_hi, t_lo


def generate_target_tracks(s: Scenario, seed: int = 0) -> list[TargetTrack]:
    """Drag-free ballistic tracks, one per (launcher, shot), in target order.

    Flight time grows linearly with ground range across
    ``targets.flight_time_range``.  Each impact point is the launcher's aim
    point plus a seeded offset uniform over a disc of
    ``targets.impact_offset_radius``.
    """
    tp = s.target_params
    g = s.dynamics_params.gravity
    rng = np.random.default_rng(seed)
    ranges = {
        ln.id: math.dist(ln.position[:2], ln.aim_point[:2]) for ln in s.enemy_launchers
    }
    r_min, r_max = min(ranges.values()), max(ranges.values())
    ft_lo, ft_hi = tp.flight_time_range

    tracks = []
    for ln, j in target_order(s):
        u = 0.0 if r_max == r_min else (ranges[ln.id] - r_min) / (r_max - r_min)
        flight_time = ft_lo + u * (ft_hi - ft_lo)
        radius = tp.impact_offset_radius * math.sqrt(rng.random())
        angle = 2.0 * math.pi * rng.random()
        impact = (
            ln.aim_point[0] + radius * math.cos(angle),
            ln.aim_point[1] + radius * math.sin(angle),
            ln.aim_point[2],
        )
        tid = target_id(ln.id, j)
        traj = _ballistic_track(ln.position, impact, ln.shot_times[j], flight_time, g, tp.sample_dt)
        if band_crossings(traj, s.intercept_altitude_band) is None:
            raise TrackError(f"target {tid} never descends through the intercept band")
        tracks.append(TargetTrack(tid, ln.id, ln.shot_times[j], traj, impact, tp.value_log))
    return tracks
