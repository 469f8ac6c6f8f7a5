import numpy as np
import pytest

from wtaplan.trajectory import TRAJECTORY_COLUMNS, Outcome, Trajectory


def _traj():
    t = np.array([0.0, 0.5, 1.0])
    states = np.array([[0, 0, 0, 2, 0, 0], [1, 0, 0, 2, 0, 0], [2, 0, 0, 2, 0, 0]], float)
    return Trajectory(t, states, Outcome.INTERCEPT, 0.0)


def test_properties():
    tr = _traj()
    assert tr.launch_time == 0.0
    assert tr.terminal_time == 1.0
    assert tr.flight_time == 1.0
    assert tr.positions.shape == (3, 3)
    assert np.allclose(tr.velocities[:, 0], 2.0)


def test_times_must_increase():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 6)))


def test_shift_and_sample():
    tr = _traj().shifted(10.0)
    assert tr.launch_time == 10.0
    assert np.allclose(tr.sample(10.25)[:3], [0.5, 0, 0])
    assert tr.outcome == Outcome.INTERCEPT


def test_tsv_columns():
    text = _traj().to_tsv()
    header, *rows = text.strip().split("\n")
    assert tuple(header.split("\t")) == TRAJECTORY_COLUMNS
    assert len(rows) == 3
    assert rows[1].split("\t")[:2] == ["0.5000", "1.0000"]


def test_equality():
    assert _traj() == _traj()
    assert _traj() != _traj().shifted(1.0)
