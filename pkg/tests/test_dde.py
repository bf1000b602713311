import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lvcert import dde
from lvcert.dde import (
    HistoryFunction,
    Trajectory,
    aligned_step,
    decay_amplitude,
    estimate_period,
    integrate,
    return_time,
)
from lvcert.errors import Aperiodic, BlowUp, NoCrossing, StepTooLarge
from lvcert.field import FourierLoop
from lvcert.model import LogisticSystem


def _cosine_trajectory(omega=1.0, t_end=100.0, h=0.01):
    t = np.arange(0.0, t_end + 0.5 * h, h)
    return Trajectory.from_samples(t, np.cos(omega * t), -omega * np.sin(omega * t))


def test_aligned_step_divides_the_delay():
    h = aligned_step(3.0, 0.007)
    assert h <= 0.007
    assert 3.0 / h == pytest.approx(round(3.0 / h), abs=1e-9)
    assert aligned_step(1.0, 0.01) == pytest.approx(0.01)
    assert aligned_step(0.0, 0.02) == 0.02
    with pytest.raises(ValueError):
        aligned_step(1.0, 0.0)


def test_equilibrium_history_stays_put(running_system):
    traj = integrate(running_system, HistoryFunction.constant(running_system.b), 100.0, h=0.01)
    assert np.max(np.abs(traj.y - 1.0)) < 1e-12
    assert traj.frame == "original_u"


@pytest.mark.parametrize("alpha", [1.4, 1.42])
def test_logistic_below_onset_settles(alpha):
    system = LogisticSystem(alpha=alpha, tau=1.0)
    assert alpha < system.bifurcation_alpha
    traj = integrate(system, HistoryFunction.constant([0.5]), 200.0, h=0.01)
    assert abs(traj.y[0, -1] - 1.0) < 1e-3
    assert decay_amplitude(traj, 1.0, 195.0) < 1e-3
    assert np.all(traj.y > 0.0)


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [1.7, 1.72])
def test_logistic_above_onset_oscillates(alpha):
    system = LogisticSystem(alpha=alpha, tau=1.0)
    traj = integrate(system, HistoryFunction.constant([0.5]), 200.0, h=0.01)
    crossings = np.diff(return_time(traj, 0, 1.0, "up", t_start=100.0))
    assert crossings.size >= 5
    assert np.all(np.abs(crossings - 4.0) < 0.3)
    period, confidence = estimate_period(traj, 100.0)
    assert period == pytest.approx(np.median(crossings), abs=0.05)
    assert confidence > 0.9


def test_rk4_is_fourth_order():
    system = LogisticSystem(alpha=1.0, tau=1.0)
    history = HistoryFunction.constant([0.5])

    def nodes(h, stride):
        return integrate(system, history, 10.0, h=h, tol=None).y[0, ::stride]

    reference = nodes(0.05 / 8.0, 16)
    e_coarse = np.max(np.abs(nodes(0.1, 1) - reference))
    e_fine = np.max(np.abs(nodes(0.05, 2) - reference))
    assert 12.8 < e_coarse / e_fine < 19.2


def test_frames_agree(running_system):
    p = 1e-3 * np.array([1.0, -0.5])
    u = integrate(running_system, HistoryFunction.constant(running_system.b + p), 6.0, h=0.01)
    x = integrate(running_system, HistoryFunction.constant(p), 6.0, h=0.01, frame="shifted_x")
    np.testing.assert_allclose(u.y, x.y + running_system.b[:, None], atol=1e-11)
    np.testing.assert_allclose(x.to_frame("original_u").y, u.y, atol=1e-11)


def test_running_example_equilibrium_is_unstable(running_system):
    history = HistoryFunction.constant(running_system.b * (1.0 + 1e-4 * np.array([1.0, -0.5])))
    traj = integrate(running_system, history, 15.0, h=0.01)
    assert decay_amplitude(traj, 1.0, 10.0) > 1e-3
    assert np.all(traj.y > 0.0)


def test_rescaled_frame_matches_physical_time(running_system):
    lam = 0.4
    p = 1e-3 * np.array([1.0, 0.5])
    phys = integrate(running_system, HistoryFunction.constant(p), 6.0, h=0.01, frame="shifted_x")
    resc = integrate(running_system, HistoryFunction.constant(p), 6.0 / lam, h=0.025, frame="rescaled", lam=lam)
    back = resc.to_frame("shifted_x")
    np.testing.assert_allclose(back.t[-1], phys.t[-1])
    np.testing.assert_allclose(back.y[:, -1], phys.y[:, -1], atol=1e-9)


def test_blow_up_is_detected():
    system = LogisticSystem(alpha=1.0, tau=1.0)
    with pytest.raises(BlowUp):
        integrate(system, HistoryFunction.constant([-5.0]), 3.0, h=0.01, frame="shifted_x", tol=None)


def test_return_times_of_a_cosine():
    traj = _cosine_trajectory(t_end=20.0)
    times = return_time(traj, 0, 0.0, "up")
    expected = 1.5 * math.pi + 2.0 * math.pi * np.arange(len(times))
    np.testing.assert_allclose(times, expected, atol=1e-8)
    down = return_time(traj, 0, 0.0, "down")
    assert down[0] == pytest.approx(0.5 * math.pi, abs=1e-8)


def test_constant_trajectory_has_no_crossing():
    t = np.linspace(0.0, 10.0, 101)
    traj = Trajectory.from_samples(t, np.ones_like(t), np.zeros_like(t))
    with pytest.raises(NoCrossing):
        return_time(traj, 0, 1.0)
    with pytest.raises(Aperiodic):
        estimate_period(traj, 0.0)


def test_period_of_a_pure_oscillation():
    period, confidence = estimate_period(_cosine_trajectory(omega=2.0), 0.0)
    assert period == pytest.approx(math.pi, abs=1e-6)
    assert confidence == pytest.approx(1.0, abs=1e-6)


def test_history_from_loop_reproduces_the_loop():
    loop = FourierLoop.mode(4, 1, cos=0.1) + FourierLoop.mode(4, 2, component=1, sin=0.05)
    lam, tau = 0.4, 3.0
    history = HistoryFunction.from_loop(loop, lam, tau)
    s = np.linspace(-tau, 0.0, 17)
    expected = loop.value_at(s / lam)
    got = np.array([history.value(si) for si in s]).T
    np.testing.assert_allclose(got, expected, atol=1e-10)


def test_trajectory_csv_headers(tmp_path, running_system):
    traj = integrate(running_system, HistoryFunction.constant(running_system.b), 1.0, h=0.1)
    path = tmp_path / "trajectory.csv"
    traj.write_csv(str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,u1,u2,du1,du2"
    assert len(lines) == traj.t.size + 1

    scalar = integrate(LogisticSystem(1.0), HistoryFunction.constant([1.0]), 1.0, h=0.1)
    path = tmp_path / "scalar.csv"
    scalar.write_csv(str(path))
    assert path.read_text(encoding="utf-8").splitlines()[0] == "t,u1,du1"


def test_sampling_outside_the_trajectory_is_rejected():
    traj = _cosine_trajectory(t_end=1.0)
    with pytest.raises(ValueError):
        traj.sample([2.0])
    assert traj.sample([0.5])[0, 0] == pytest.approx(math.cos(0.5), abs=1e-9)


def test_every_step_pair_is_error_checked(monkeypatch):
    starts = []
    original = dde._Stepper.check_error

    def spy(self, i, t, tol):
        starts.append(i)
        return original(self, i, t, tol)

    monkeypatch.setattr(dde._Stepper, "check_error", spy)
    system = LogisticSystem(alpha=1.0, tau=1.0)
    integrate(system, HistoryFunction.constant([0.5]), 0.11, h=0.01)
    # eleven steps: five pairs, then the last two steps again
    assert starts == [0, 2, 4, 6, 8, 9]

    starts.clear()
    integrate(system, HistoryFunction.constant([0.5]), 0.1, h=0.01)
    assert starts == [0, 2, 4, 6, 8]

    starts.clear()
    integrate(system, HistoryFunction.constant([0.5]), 0.1, h=0.01, tol=None)
    assert starts == []


def test_unstable_step_is_reported_before_it_blows_up():
    system = LogisticSystem(alpha=50.0, tau=1.0)
    with pytest.raises(StepTooLarge) as info:
        integrate(system, HistoryFunction.constant([0.5]), 3.0, h=0.1)
    assert info.value.t == 0.0


def test_blow_up_limit_defers_to_the_error_check(monkeypatch):
    monkeypatch.setattr(dde, "BLOWUP_LIMIT", 10.0)
    system = LogisticSystem(alpha=50.0, tau=1.0)
    with pytest.raises(StepTooLarge):
        integrate(system, HistoryFunction.constant([0.5]), 3.0, h=0.1)
    with pytest.raises(BlowUp) as info:
        integrate(system, HistoryFunction.constant([0.5]), 3.0, h=0.1, tol=None)
    assert info.value.t == pytest.approx(0.2)


positive_levels = arrays(np.float64, (2, 9), elements=st.floats(min_value=0.8, max_value=1.2))


@settings(max_examples=25, deadline=None)
@given(positive_levels)
def test_positive_histories_stay_positive(running_system, levels):
    tau = running_system.tau
    history = HistoryFunction.sampled(np.linspace(-tau, 0.0, levels.shape[1]), levels)
    traj = integrate(running_system, history, 2.0 * tau, h=0.005, tol=None)
    assert np.all(traj.y > 0.0)


small_coefficients = arrays(np.float64, (2, 2), elements=st.floats(min_value=-0.1, max_value=0.1))


@settings(max_examples=25, deadline=None)
@given(small_coefficients, small_coefficients, st.floats(min_value=0.3, max_value=0.45))
def test_log_coordinates_return_after_one_loop_period(running_system, cos, sin, lam):
    # log(b + x)' = -A x(t - tau); the delayed loop has zero mean over a period
    loop = FourierLoop.from_coefficients(cos, sin)
    period = 2.0 * math.pi * lam
    history = HistoryFunction.from_loop(loop, lam, running_system.tau)
    traj = integrate(running_system, history, period + 0.05, h=0.005, frame="shifted_x", tol=None)
    start = np.log(running_system.b + traj.y[:, 0])
    end = np.log(running_system.b + traj.sample([period])[:, 0])
    np.testing.assert_allclose(end, start, atol=1e-6 * period)
