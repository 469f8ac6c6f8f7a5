"""3-DOF point-mass interceptor flight under boost then pure proportional navigation.

Axis convention: x, y horizontal, z positive DOWN (altitude = -z), so gravity
enters the vertical acceleration as ``+g``.  Flight-path elevation ``gamma`` is
positive when climbing and heading ``psi`` is measured from +x toward +y.

The inner integration loop is written in terms of direction cosines and plain
arithmetic (no transcendental functions) so a batch of engagements produces
bitwise the same samples as the same engagement integrated alone.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .trajectory import Outcome, Trajectory

_EPS = 1e-9


class GuidanceError(ValueError):
    """Raised when guidance is undefined (zero relative range)."""


class EngagementError(ValueError):
    """Raised when an engagement is requested outside the launch envelope."""


@dataclass(frozen=True)
class DynamicsParams:
    mass: float = 150.0                 # kg, constant (no fuel burn)
    thrust: float = 30_000.0            # N during boost
    boost_time: float = 5.0             # s
    cd: float = 0.3
    cy: float = 0.0                     # trim side-force coefficient
    cn: float = 0.0                     # trim normal-force coefficient
    cy_beta: float = 20.0               # side-force slope per unit tan(beta)
    cn_alpha: float = 20.0              # normal-force slope per unit tan(alpha)
    s_ref: float = 0.05                 # m^2
    air_density: float = 1.225          # kg/m^3 at sea level
    density_model: str = "constant"     # "constant" | "exponential"
    scale_height: float = 8_500.0       # m, exponential model only
    gravity: float = 9.80665            # m/s^2
    nav_constant: float = 4.0
    dt: float = 0.01                    # s, fixed integration step
    miss_tolerance: float = 5.0         # m
    max_flight_time: float = 120.0      # s
    max_lateral_g: float = 30.0
    max_deflection_deg: float = 30.0    # bound on |alpha|, |beta|
    launch_speed: float = 30.0          # m/s leaving the rail
    max_range: float = 20_000.0         # m, engagement envelope

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if not self.mass > 0:
            errors.append("dynamics.mass must be > 0")
        if self.boost_time < 0:
            errors.append("dynamics.boost_time must be >= 0")
        if not self.nav_constant >= 2:
            errors.append("dynamics.nav_constant must be >= 2")
        if not self.dt > 0:
            errors.append("dynamics.dt must be > 0")
        if not self.miss_tolerance > 0:
            errors.append("dynamics.miss_tolerance must be > 0")
        if not self.max_flight_time > 0:
            errors.append("dynamics.max_flight_time must be > 0")
        if not 0 < self.max_deflection_deg < 90:
            errors.append("dynamics.max_deflection_deg must be in (0, 90)")
        if not self.launch_speed > 0:
            errors.append("dynamics.launch_speed must be > 0")
        if self.density_model not in ("constant", "exponential"):
            errors.append("dynamics.density_model must be 'constant' or 'exponential'")
        return errors

    def thrust_at(self, t: float) -> float:
        return self.thrust if t < self.boost_time - 1e-9 else 0.0

    def density(self, z):
        if self.density_model == "constant":
            return self.air_density
        return self.air_density * np.exp(np.minimum(z, 0.0) / self.scale_height)


@dataclass(frozen=True)
class MissileState:
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    time: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(self.position + self.velocity, dtype=float)

    @classmethod
    def from_array(cls, y, time: float = 0.0) -> "MissileState":
        y = [float(v) for v in y]
        return cls(tuple(y[:3]), tuple(y[3:]), float(time))


# --------------------------------------------------------------------------
# equations of motion


def _accel(vel, cg, sg, cp, sp, ta, tb, thrust, rho, p: DynamicsParams):
    vx, vy, vz = vel[..., 0], vel[..., 1], vel[..., 2]
    qs = 0.5 * rho * (vx * vx + vy * vy + vz * vz) * p.s_ref
    tx = thrust / np.sqrt(1.0 + ta * ta + tb * tb)
    axial = tx - p.cd * qs
    lateral = tx * tb + (p.cy + p.cy_beta * tb) * qs
    normal = -tx * ta - (p.cn + p.cn_alpha * ta) * qs
    ax = (axial * cg * cp + lateral * sp + normal * sg * cp) / p.mass
    ay = (axial * cg * sp - lateral * cp + normal * sg * sp) / p.mass
    az = (-axial * sg + normal * cg) / p.mass + p.gravity
    return np.stack([ax, ay, az], axis=-1)


def derivatives(state, attitude, params: DynamicsParams, thrust: float | None = None) -> np.ndarray:
    """Time derivative (xdot, ydot, zdot, Vxdot, Vydot, Vzdot) of ``state``.

    ``attitude`` is (gamma, psi, alpha, beta) in radians.  Forces: axial
    ``T_x - D`` along the flight direction, ``-(T_x tan(beta) + Y)`` along the
    right-wing axis (-sin psi, cos psi, 0) and ``-T_x tan(alpha) - N`` along the
    down-normal.  ``T_x = T / sqrt(1 + tan^2 alpha + tan^2 beta)`` and
    ``D, Y, N = C q S_ref`` with Y and N growing linearly in tan(beta),
    tan(alpha).  ``thrust`` defaults to ``params.thrust``.
    """
    y = np.asarray(state, dtype=float)
    att = np.asarray(attitude, dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(att))):
        raise ValueError("non-finite state or attitude")
    gamma, psi, alpha, beta = np.moveaxis(att, -1, 0)
    if np.any(np.abs(gamma) >= math.pi / 2):
        raise ValueError("gamma must lie in (-pi/2, pi/2)")
    thrust = params.thrust if thrust is None else thrust
    rho = params.density(y[..., 2])
    acc = _accel(
        y[..., 3:], np.cos(gamma), np.sin(gamma), np.cos(psi), np.sin(psi),
        np.tan(alpha), np.tan(beta), thrust, rho, params,
    )
    return np.concatenate([y[..., 3:], acc], axis=-1)


def _flight_path(vel):
    vx, vy, vz = vel[..., 0], vel[..., 1], vel[..., 2]
    h = np.sqrt(vx * vx + vy * vy)
    speed = np.sqrt(h * h + vz * vz)
    speed = np.where(speed > _EPS, speed, 1.0)
    flat = h > _EPS
    hs = np.where(flat, h, 1.0)
    cg = h / speed
    sg = -vz / speed
    cp = np.where(flat, vx / hs, 1.0)
    sp = np.where(flat, vy / hs, 0.0)
    return cg, sg, cp, sp


def _cross(a, b):
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _ppn(pos, vel, tpos, tvel, p: DynamicsParams):
    r = tpos - pos
    v = tvel - vel
    r2 = _dot(r, r)
    omega = _cross(r, v) / np.where(r2 > _EPS, r2, np.inf)[..., None]
    pn = p.nav_constant * _cross(omega, vel)
    # gravity compensation: cancel the component of g normal to the velocity
    v2 = _dot(vel, vel)
    v2 = np.where(v2 > _EPS, v2, 1.0)
    g = p.gravity
    gc = np.stack(
        [
            g * vel[..., 2] * vel[..., 0] / v2,
            g * vel[..., 2] * vel[..., 1] / v2,
            -g * (vel[..., 0] * vel[..., 0] + vel[..., 1] * vel[..., 1]) / v2,
        ],
        axis=-1,
    )
    return pn, gc


def ppn_command(missile, target_point, params: DynamicsParams) -> np.ndarray:
    """Pure proportional navigation acceleration command with gravity compensation.

    ``missile`` is a MissileState or a (position, velocity) pair; so is
    ``target_point``.  Returns ``N * Omega x V_M`` with
    ``Omega = (r x v_rel) / |r|^2``, plus the acceleration cancelling the part
    of gravity normal to the missile velocity (magnitude ``g cos(gamma)``,
    pointing up in the vertical plane).
    """
    if isinstance(missile, MissileState):
        pos, vel = np.array(missile.position, float), np.array(missile.velocity, float)
    else:
        pos, vel = (np.asarray(a, dtype=float) for a in missile)
    tpos, tvel = (np.asarray(a, dtype=float) for a in target_point)
    r = tpos - pos
    if float(_dot(r, r)) <= _EPS:
        raise GuidanceError("zero relative range")
    pn, gc = _ppn(pos, vel, tpos, tvel, params)
    return pn + gc


def _saturate(cmd, limit):
    mag = np.sqrt(_dot(cmd, cmd))
    scale = np.where(mag > limit, limit / np.where(mag > 0, mag, 1.0), 1.0)
    return cmd * scale[..., None]


def _guided_accel(y, target, thrust, p: DynamicsParams, tan_max):
    pos, vel = y[..., :3], y[..., 3:]
    pn, gc = _ppn(pos, vel, target, np.zeros_like(target), p)
    cmd = _saturate(pn + gc, p.max_lateral_g * p.gravity)
    cg, sg, cp, sp = _flight_path(vel)
    a_n = cmd[..., 0] * sg * cp + cmd[..., 1] * sg * sp + cmd[..., 2] * cg
    a_l = -cmd[..., 0] * sp + cmd[..., 1] * cp
    rho = p.density(pos[..., 2])
    qs = 0.5 * rho * _dot(vel, vel) * p.s_ref
    # small-angle inversion of the normal/lateral force relations
    den_n = np.maximum(thrust + p.cn_alpha * qs, _EPS)
    den_l = np.maximum(thrust + p.cy_beta * qs, _EPS)
    ta = np.clip(-(p.mass * a_n + p.cn * qs) / den_n, -tan_max, tan_max)
    tb = np.clip(-(p.mass * a_l + p.cy * qs) / den_l, -tan_max, tan_max)
    return _accel(vel, cg, sg, cp, sp, ta, tb, thrust, rho, p)


def _boost_accel(y, dircos, thrust, p: DynamicsParams):
    cg, sg, cp, sp = dircos
    zero = np.zeros(y.shape[:-1])
    rho = p.density(y[..., 2])
    return _accel(y[..., 3:], cg, sg, cp, sp, zero, zero, thrust, rho, p)


# --------------------------------------------------------------------------
# integration


def rk4_step(f: Callable, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = f(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(
    state,
    params: DynamicsParams,
    dt: float,
    *,
    t: float = 0.0,
    attitude: Sequence[float] | None = None,
    thrust: float | None = None,
    target=None,
) -> np.ndarray:
    """Advance ``state`` by one classic RK4 step.

    Either hold a fixed ``attitude`` (gamma, psi, alpha, beta) or, when
    ``target`` (a stationary position) is given, fly the PPN command.  With
    neither, the vehicle is ballistic at zero incidence.  ``thrust`` defaults
    to the boost schedule evaluated at ``t``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    y = np.asarray(state, dtype=float)
    T = params.thrust_at(t) if thrust is None else thrust
    tan_max = math.tan(math.radians(params.max_deflection_deg))
    if target is not None:
        tgt = np.asarray(target, dtype=float)

        def f(_t, s):
            return np.concatenate([s[..., 3:], _guided_accel(s, tgt, T, params, tan_max)], axis=-1)
    elif attitude is not None:
        g, ps, a, b = (float(v) for v in attitude)

        def f(_t, s):
            rho = params.density(s[..., 2])
            acc = _accel(s[..., 3:], math.cos(g), math.sin(g), math.cos(ps), math.sin(ps),
                         math.tan(a), math.tan(b), T, rho, params)
            return np.concatenate([s[..., 3:], acc], axis=-1)
    else:
        def f(_t, s):
            vel = s[..., 3:]
            cg, sg, cp, sp = _flight_path(vel)
            zero = np.zeros(s.shape[:-1])
            acc = _accel(vel, cg, sg, cp, sp, zero, zero, T, params.density(s[..., 2]), params)
            return np.concatenate([vel, acc], axis=-1)

    out = rk4_step(f, t, y, dt)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"integration diverged at t={t + dt:.6f}")
    return out


def launch_state(origin, launch_angles, params: DynamicsParams) -> np.ndarray:
    g0, p0 = launch_angles
    d = np.array([math.cos(g0) * math.cos(p0), math.cos(g0) * math.sin(p0), -math.sin(g0)])
    return np.concatenate([np.asarray(origin, dtype=float), params.launch_speed * d])


def in_envelope(origin, target, params: DynamicsParams) -> bool:
    origin = np.asarray(origin, dtype=float)
    target = np.asarray(target, dtype=float)
    return bool(target[2] < origin[2] and np.linalg.norm(target - origin) <= params.max_range)


def simulate_batch(origins, launch_angles, targets, params: DynamicsParams) -> list[Trajectory | None]:
    """Fly one interceptor per row toward a stationary aim point.

    Times are relative to launch.  Boost holds the launch attitude at zero
    incidence; afterwards PPN steers toward the point.  Each engagement ends at
    its closest approach once the range starts opening (``intercept`` when the
    miss distance is within tolerance, ``miss`` otherwise, also ``miss`` on
    ground impact) or at ``max_flight_time`` (``timeout``).  Rows outside the
    envelope (target not above the origin or beyond ``max_range``) give None.
    """
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    angles = np.asarray(launch_angles, dtype=float).reshape(-1, 2)
    n = len(origins)
    out: list[Trajectory | None] = [None] * n
    ok = [i for i in range(n) if in_envelope(origins[i], targets[i], params)]
    if not ok:
        return out

    idx = np.array(ok)
    y = np.stack([launch_state(origins[i], angles[i], params) for i in ok])
    tgt = targets[idx]
    ground = origins[idx, 2]
    g0, p0 = angles[idx, 0], angles[idx, 1]
    boost_dc = (np.cos(g0), np.sin(g0), np.cos(p0), np.sin(p0))
    tan_max = math.tan(math.radians(params.max_deflection_deg))
    dt = params.dt
    max_steps = int(math.ceil(params.max_flight_time / dt - 1e-9))

    m = len(idx)
    active = np.ones(m, dtype=bool)
    end_step = np.full(m, max_steps)
    end_frac = np.zeros(m)
    outcome = np.full(m, Outcome.TIMEOUT, dtype=object)
    miss = np.full(m, np.nan)
    history = [y.copy()]

    for k in range(max_steps):
        t = k * dt
        thrust = params.thrust_at(t)
        if thrust > 0 or t < params.boost_time - 1e-9:
            def f(_t, s):
                return np.concatenate([s[:, 3:], _boost_accel(s, boost_dc, thrust, params)], axis=1)
        else:
            def f(_t, s):
                return np.concatenate([s[:, 3:], _guided_accel(s, tgt, thrust, params, tan_max)], axis=1)
        y_new = rk4_step(f, t, y, dt)
        y_new = np.where(active[:, None], y_new, y)
        history.append(y_new)

        # closest approach on the segment just flown
        d = y_new[:, :3] - y[:, :3]
        w = tgt - y[:, :3]
        dd = _dot(d, d)
        s = np.clip(_dot(w, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        closest = y[:, :3] + s[:, None] * d
        dist = np.sqrt(_dot(tgt - closest, tgt - closest))
        passed = active & (s < 1.0)
        crashed = active & ~passed & (y_new[:, 2] > ground) & (t + dt > params.boost_time)
        bad = active & ~np.all(np.isfinite(y_new), axis=1)
        for j in np.flatnonzero(passed | crashed | bad):
            active[j] = False
            end_step[j] = k
            if passed[j]:
                end_frac[j] = s[j]
                miss[j] = dist[j]
                outcome[j] = Outcome.INTERCEPT if dist[j] <= params.miss_tolerance else Outcome.MISS
            else:
                end_frac[j] = 0.0
                miss[j] = float(np.sqrt(_dot(tgt[j] - y[j, :3], tgt[j] - y[j, :3])))
                outcome[j] = Outcome.MISS
        y = y_new
        if not active.any():
            break

    hist = np.stack(history)
    for j, i in enumerate(ok):
        k = int(end_step[j])
        frac = float(end_frac[j])
        states = hist[: k + 1, j, :]
        times = np.arange(k + 1) * dt
        if outcome[j] == Outcome.TIMEOUT:
            states = hist[: k + 1, j, :]
            p = tgt[j] - states[-1, :3]
            miss[j] = float(np.sqrt(_dot(p, p)))
        elif frac > 0.0:
            last = hist[k, j, :] + frac * (hist[k + 1, j, :] - hist[k, j, :])
            states = np.vstack([states, last])
            times = np.append(times, (k + frac) * dt)
        out[i] = Trajectory(times, states, outcome[j], float(miss[j]))
    return out


def _point(pip) -> tuple[float, float, float]:
    pos = getattr(pip, "position", pip)
    return tuple(float(v) for v in pos)


def simulate_engagement(farm, pip, params: DynamicsParams, launch_time: float = 0.0) -> Trajectory:
    """Single engagement from ``farm`` (position, launch_angles) to ``pip``.

    Raises EngagementError when the point is outside the envelope; a
    non-intercept is reported through ``Trajectory.outcome``.
    """
    (traj,) = simulate_batch([farm.position], [farm.launch_angles], [_point(pip)], params)
    if traj is None:
        raise EngagementError(f"aim point {_point(pip)} outside envelope of farm {farm.id}")
    return traj.shifted(launch_time) if launch_time else traj


class EngagementCache:
    """Memo of relative-time engagements keyed by geometry and parameters."""

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}

    @staticmethod
    def key(farm, pip, params):
        return (tuple(farm.position), tuple(farm.launch_angles), _point(pip), params)

    def get_many(self, farms, pips, params: DynamicsParams) -> list[Trajectory | None]:
        keys = [self.key(f, p, params) for f, p in zip(farms, pips)]
        with self._lock:
            missing = [i for i, k in enumerate(keys) if k not in self._data]
        for start in range(0, len(missing), 128):
            chunk = missing[start:start + 128]
            trajs = simulate_batch(
                [farms[i].position for i in chunk],
                [farms[i].launch_angles for i in chunk],
                [_point(pips[i]) for i in chunk],
                params,
            )
            with self._lock:
                for i, tr in zip(chunk, trajs):
                    self._data.setdefault(keys[i], tr)
        with self._lock:
            return [self._data[k] for k in keys]

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self):
        return len(self._data)


ENGAGEMENT_CACHE = EngagementCache()


def time_of_flight(farm, pip, params: DynamicsParams, cache: EngagementCache | None = None) -> float | None:
    """Flight time to intercept ``pip`` from ``farm``, or None when unreachable."""
    cache = ENGAGEMENT_CACHE if cache is None else cache
    (traj,) = cache.get_many([farm], [pip], params)
    if traj is None or traj.outcome != Outcome.INTERCEPT:
        return None
    return traj.flight_time
