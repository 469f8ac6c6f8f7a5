import math

import numpy as np
import pytest

from wtaplan.dynamics import (
    DynamicsParams,
    EngagementCache,
    EngagementError,
    GuidanceError,
    MissileState,
    _ppn,
    derivatives,
    integrate_step,
    ppn_command,
    simulate_batch,
    simulate_engagement,
    time_of_flight,
)
from wtaplan.scenario import WeaponFarm
from wtaplan.trajectory import Outcome

G = 9.80665
INERT = dict(thrust=0.0, cd=0.0, cy=0.0, cn=0.0, cy_beta=0.0, cn_alpha=0.0)
FARM = WeaponFarm("W1", (250.0, 0.0, 0.0))


# --- derivatives -----------------------------------------------------------

@pytest.mark.parametrize("attitude", [(0, 0, 0, 0), (0.5, 1.0, 0.2, -0.1), (-1.2, -2.5, 0.4, 0.3)])
def test_free_fall_acceleration(attitude):
    p = DynamicsParams(**INERT)
    d = derivatives([1, 2, -3, 40, -5, 6], attitude, p)
    assert np.array_equal(d[:3], [40, -5, 6])
    assert np.allclose(d[3:], [0, 0, G], atol=1e-12)


def test_zero_incidence_puts_full_thrust_on_axis():
    p = DynamicsParams(cd=0.0, cn_alpha=0.0, cy_beta=0.0, mass=100.0, thrust=2000.0)
    gamma = math.radians(30)
    d = derivatives([0, 0, 0, 0, 0, 0], (gamma, 0.0, 0.0, 0.0), p)
    assert np.allclose(d[3:], [20 * math.cos(gamma), 0.0, -20 * math.sin(gamma) + G], atol=1e-12)


def test_drag_only_level_flight():
    p = DynamicsParams(thrust=0.0, cd=0.3, s_ref=0.05, mass=150.0)
    v = 300.0
    drag = 0.3 * 0.5 * 1.225 * v * v * 0.05
    d = derivatives([0, 0, -1000, v, 0, 0], (0, 0, 0, 0), p)
    assert d[3] == pytest.approx(-drag / 150.0, rel=1e-12)
    assert d[4] == pytest.approx(0.0, abs=1e-12)
    assert d[5] == pytest.approx(G, rel=1e-12)


def test_planar_reduction():
    # gamma = psi = 0: axial along +x, lateral along +y, normal along +z (down)
    p = DynamicsParams(thrust=5000.0, cd=0.2, cy=0.1, cn=0.05, cy_beta=20.0, cn_alpha=20.0)
    alpha, beta = 0.1, -0.05
    vx, vy, vz = 250.0, 10.0, -20.0
    ta, tb = math.tan(alpha), math.tan(beta)
    q = 0.5 * 1.225 * (vx * vx + vy * vy + vz * vz) * p.s_ref
    tx = p.thrust / math.sqrt(1 + ta * ta + tb * tb)
    D, Y, N = p.cd * q, (p.cy + p.cy_beta * tb) * q, (p.cn + p.cn_alpha * ta) * q
    expect = [(tx - D) / p.mass, -(tx * tb + Y) / p.mass, (-tx * ta - N) / p.mass + G]
    d = derivatives([0, 0, -500, vx, vy, vz], (0, 0, alpha, beta), p)
    assert np.allclose(d[3:], expect, rtol=1e-12)


def test_derivatives_reject_bad_input():
    p = DynamicsParams()
    with pytest.raises(ValueError):
        derivatives([0, 0, 0, np.nan, 0, 0], (0, 0, 0, 0), p)
    with pytest.raises(ValueError):
        derivatives([0, 0, 0, 1, 0, 0], (math.pi / 2, 0, 0, 0), p)


def test_params_validation():
    with pytest.raises(ValueError, match="mass"):
        DynamicsParams(mass=0)
    with pytest.raises(ValueError, match="nav_constant"):
        DynamicsParams(nav_constant=1.5)


# --- ppn_command -----------------------------------------------------------

def test_ppn_collision_course_is_gravity_compensation_only():
    p = DynamicsParams()
    cmd = ppn_command(MissileState((0, 0, -1000), (100, 0, 0)), ((1000, 0, -1000), (0, 0, 0)), p)
    assert np.allclose(cmd, [0, 0, -G], atol=1e-12)


def test_ppn_gravity_term_is_normal_to_velocity():
    p = DynamicsParams()
    vel = np.array([200.0, 50.0, -150.0])
    _, gc = _ppn(np.zeros(3), vel, vel * 10, np.zeros(3), p)
    assert float(gc @ vel) == pytest.approx(0.0, abs=1e-9)
    gamma = math.asin(150.0 / np.linalg.norm(vel))
    assert np.linalg.norm(gc) == pytest.approx(G * math.cos(gamma), rel=1e-12)


def test_ppn_linear_in_nav_constant():
    geom = (((0, 0, -2000), (300, 40, -60)), ((5000, 1500, -4500), (0, 0, 0)))
    p4, p8 = DynamicsParams(nav_constant=4), DynamicsParams(nav_constant=8)
    _, gc = _ppn(np.array(geom[0][0], float), np.array(geom[0][1], float),
                 np.array(geom[1][0], float), np.zeros(3), p4)
    pn4 = ppn_command(geom[0], geom[1], p4) - gc
    pn8 = ppn_command(geom[0], geom[1], p8) - gc
    assert np.allclose(pn8, 2 * pn4, rtol=1e-12)
    assert np.linalg.norm(pn4) > 1.0


def test_ppn_matches_scalar_planar_law():
    # horizontal plane; LOS rate from a finite difference of the LOS angle
    p = DynamicsParams(nav_constant=3)
    m_pos, m_vel = np.array([0.0, 0.0, -3000.0]), np.array([250.0, 30.0, 0.0])
    t_pos, t_vel = np.array([4000.0, 1200.0, -3000.0]), np.array([-100.0, 20.0, 0.0])

    def los(h):
        r = (t_pos + h * t_vel) - (m_pos + h * m_vel)
        return math.atan2(r[1], r[0])

    h = 1e-4
    lam_dot = (los(h) - los(-h)) / (2 * h)
    cmd = ppn_command((m_pos, m_vel), (t_pos, t_vel), p)
    pn = cmd - np.array([0, 0, -G])
    assert np.linalg.norm(pn) == pytest.approx(3 * np.linalg.norm(m_vel) * abs(lam_dot), rel=1e-6)
    assert pn[2] == pytest.approx(0.0, abs=1e-12)


def test_ppn_zero_range():
    with pytest.raises(GuidanceError):
        ppn_command(((1, 2, 3), (100, 0, 0)), ((1, 2, 3), (0, 0, 0)), DynamicsParams())


# --- integrate_step --------------------------------------------------------

def test_free_fall_integration_exact():
    p = DynamicsParams(**INERT)
    y = np.zeros(6)
    for k in range(100):
        y = integrate_step(y, p, 0.01, t=k * 0.01, attitude=(0, 0, 0, 0))
    expect = 0.5 * G * 1.0 ** 2
    assert abs(y[2] - expect) / expect < 1e-9
    assert abs(y[5] - G) / G < 1e-9


def test_stationary_fixed_point():
    p = DynamicsParams(**INERT, gravity=0.0)
    y0 = np.array([10.0, -20.0, -30.0, 0.0, 0.0, 0.0])
    assert np.array_equal(integrate_step(y0, p, 0.01, attitude=(0.3, 0.2, 0.1, 0.0)), y0)


def test_energy_conserved_ballistic():
    p = DynamicsParams(**INERT)
    y = np.array([0.0, 0.0, -1000.0, 200.0, 50.0, -300.0])

    def energy(s):
        return 0.5 * float(s[3:] @ s[3:]) + G * (-s[2])

    e0 = energy(y)
    for k in range(6000):
        y = integrate_step(y, p, 0.01, t=100.0 + k * 0.01)
    assert abs(energy(y) - e0) / e0 < 1e-6


def test_convergence_order():
    p = DynamicsParams()
    y0 = np.array([0.0, 0.0, -3000.0, 300.0, 100.0, -150.0])
    tgt = np.array([6000.0, 3000.0, -4500.0])

    def run(dt):
        y = y0.copy()
        for k in range(int(round(6.0 / dt))):
            y = integrate_step(y, p, dt, t=10.0 + k * dt, target=tgt)
        return y

    a, b, c = run(0.04), run(0.02), run(0.01)
    order = math.log2(np.linalg.norm(a - b) / np.linalg.norm(b - c))
    assert order >= 3.5


def test_divergence_reported():
    with pytest.raises(FloatingPointError, match="diverged"):
        integrate_step([0, 0, 0, np.nan, 0, 0], DynamicsParams(), 0.01, attitude=(0, 0, 0, 0))
    with pytest.raises(ValueError):
        integrate_step(np.zeros(6), DynamicsParams(), 0.0)


# --- engagements -----------------------------------------------------------

def test_pip_on_boost_line_needs_no_steering():
    p = DynamicsParams()
    probe = simulate_engagement(FARM, (250.0, 5000.0, -4500.0), p)
    k = int(round(p.boost_time / p.dt))
    s = probe.states[k]
    pip = s[:3] + 2000.0 * s[3:] / np.linalg.norm(s[3:])
    tr = simulate_engagement(FARM, pip, p)
    assert tr.outcome == Outcome.INTERCEPT
    assert tr.miss_distance < 1e-6
    pn, _ = _ppn(tr.states[k:-1, :3], tr.states[k:-1, 3:], pip, np.zeros(3), p)
    assert np.abs(pn).max() < 1e-3


def test_desk_engagement_golden():
    tr = simulate_engagement(FARM, (250.0, 7000.0, -4500.0), DynamicsParams())
    assert tr.outcome == Outcome.INTERCEPT
    assert tr.miss_distance < 5.0
    assert tr.flight_time == pytest.approx(13.9748000858605, abs=1e-9)
    assert tr.times[0] == 0.0 and tr.terminal_time == tr.flight_time
    assert np.all(np.diff(tr.times) > 0)


def test_adversarial_pip_behind_is_flagged():
    tr = simulate_engagement(FARM, (250.0, -1500.0, -500.0), DynamicsParams())
    assert tr.outcome != Outcome.INTERCEPT
    assert time_of_flight(FARM, (250.0, -1500.0, -500.0), DynamicsParams(), EngagementCache()) is None


def test_outside_envelope():
    with pytest.raises(EngagementError):
        simulate_engagement(FARM, (250.0, 1000.0, 100.0), DynamicsParams())
    with pytest.raises(EngagementError):
        simulate_engagement(FARM, (250.0, 30000.0, -4500.0), DynamicsParams())
    assert time_of_flight(FARM, (250.0, 1000.0, 100.0), DynamicsParams(), EngagementCache()) is None


def test_launch_time_shift():
    p = DynamicsParams()
    a = simulate_engagement(FARM, (0.0, 6000.0, -4200.0), p)
    b = simulate_engagement(FARM, (0.0, 6000.0, -4200.0), p, launch_time=12.5)
    assert b.launch_time == 12.5
    assert np.array_equal(a.states, b.states)


def test_batch_matches_single_bitwise():
    p = DynamicsParams()
    pips = [(250.0, 7000.0, -4500.0), (-2000.0, 9000.0, -4100.0), (3000.0, 5000.0, -4900.0)]
    batch = simulate_batch([FARM.position] * 3, [FARM.launch_angles] * 3, pips, p)
    for pip, tr in zip(pips, batch):
        assert tr == simulate_engagement(FARM, pip, p)


def test_time_of_flight_cached():
    cache = EngagementCache()
    p = DynamicsParams()
    t1 = time_of_flight(FARM, (1000.0, 8000.0, -4600.0), p, cache)
    size = len(cache)
    t2 = time_of_flight(FARM, (1000.0, 8000.0, -4600.0), p, cache)
    assert t1 == t2 and len(cache) == size == 1


def test_time_of_flight_monotone_in_range():
    cache = EngagementCache()
    p = DynamicsParams()
    pips = [(250.0, float(r), -4500.0) for r in range(3000, 16001, 1000)]
    cache.get_many([FARM] * len(pips), pips, p)  # one batched pre-pass
    tofs = [time_of_flight(FARM, pip, p, cache) for pip in pips]
    assert all(t is not None for t in tofs)
    assert all(b >= a for a, b in zip(tofs, tofs[1:]))


def test_exponential_density_lower_aloft():
    p = DynamicsParams(density_model="exponential")
    assert p.density(0.0) == pytest.approx(1.225)
    assert p.density(-8500.0) == pytest.approx(1.225 / math.e)
