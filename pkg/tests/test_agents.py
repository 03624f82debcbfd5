import numpy as np
import pytest

from symscene.agents import (Car, Quadrotor, ReachDivergence, biased_controller, make_agent, rk4_step,
                             simulate, time_grid)


class TestTimeGrid:
    def test_exact_multiple(self):
        t = time_grid(1.0, 0.25)
        assert np.allclose(t, [0, 0.25, 0.5, 0.75, 1.0])

    def test_short_last_step(self):
        t = time_grid(1.0, 0.3)
        assert t[-1] == 1.0 and t.size == 5

    @pytest.mark.parametrize("h,dt", [(0.0, 0.1), (1.0, 0.0), (-1.0, 0.1)])
    def test_rejects_nonpositive(self, h, dt):
        with pytest.raises(ValueError):
            time_grid(h, dt)


class TestRK4:
    def test_exponential_order(self):
        # x' = x over [0, 1]; global error of RK4 is O(h^4)
        errs = []
        for h in (0.1, 0.05):
            x = np.array([1.0])
            for _ in range(int(round(1 / h))):
                x = rk4_step(lambda z: z, x, h)
            errs.append(abs(x[0] - np.e))
        assert errs[0] / errs[1] == pytest.approx(16, rel=0.1)


class TestCar:
    def test_straight_line_on_track(self):
        car = Car()
        t, xs = simulate(car, [0.0, 0.0, 0.0], ([0, 0], [5, 0]), 3.0)
        assert np.allclose(xs[:, 1], 0) and np.allclose(xs[:, 2], 0)
        assert xs[-1, 0] == pytest.approx(3.0)

    def test_converges_to_line(self):
        car = Car()
        _, xs = simulate(car, [0.0, 1.0, 0.3], ([0, 0], [20, 0]), 15.0)
        assert abs(xs[-1, 1]) < 0.1 and abs(xs[-1, 2]) < 0.1

    def test_steering_saturates(self):
        car = Car()
        u = car.pd_controller(np.array([0.0, 50.0, 0.0]), [0, 0], [1, 0])
        assert u[1] == pytest.approx(-car.max_steer)

    def test_flow_matches_open_loop(self, rng):
        car = Car()
        x = rng.normal(size=(20, 3))
        src, dest = np.array([0.0, 1.0]), np.array([3.0, -2.0])
        assert np.allclose(car.flow(x, src, dest), car.open_loop(x, car.pd_controller(x, src, dest)))

    def test_periodic_in_heading(self, rng):
        car = Car()
        x = rng.normal(size=(10, 3))
        shifted = x + np.array([0, 0, 2 * np.pi])
        assert np.allclose(car.flow(x, [0, 0], [1, 1]), car.flow(shifted, [0, 0], [1, 1]))


class TestQuadrotor:
    def test_tracks_segment(self):
        q = Quadrotor()
        _, xs = simulate(q, [0, 0.5, 0.2, 0, 0, 0], ([0, 0, 0], [30, 0, 0]), 20.0)
        assert np.linalg.norm(xs[-1, 1:3]) < 0.2
        assert xs[-1, 3] == pytest.approx(q.speed, abs=0.05)

    def test_inputs_bounded(self, rng):
        q = Quadrotor()
        x = rng.normal(scale=20.0, size=(200, 6))
        u = q.pd_controller(x, np.zeros(3), np.array([1.0, 2.0, 0.5]))
        assert np.all(np.abs(u[:, :2]) <= q.max_tilt + 1e-12)
        assert np.all((u[:, 2] >= q.thrust_range[0]) & (u[:, 2] <= q.thrust_range[1]))

    def test_planar_segment_lifted(self):
        q = Quadrotor()
        _, a = simulate(q, np.zeros(6), ([0, 0], [5, 0]), 1.0)
        _, b = simulate(q, np.zeros(6), ([0, 0, 0], [5, 0, 0]), 1.0)
        assert np.array_equal(a, b)


class TestSimulate:
    def test_batch_matches_single(self, rng):
        car = Car()
        x0 = rng.normal(size=(4, 3))
        _, batch = simulate(car, x0, ([0, 0], [4, 1]), 2.0)
        for i in range(4):
            _, one = simulate(car, x0[i], ([0, 0], [4, 1]), 2.0)
            assert np.allclose(batch[:, i], one)

    def test_deterministic(self):
        a = simulate(Car(), [0.1, 0.2, 0.3], ([0, 0], [1, 0]), 1.0)[1]
        b = simulate(Car(), [0.1, 0.2, 0.3], ([0, 0], [1, 0]), 1.0)[1]
        assert np.array_equal(a, b)

    def test_divergence(self):
        blowup = Car().with_controller(lambda x, s, d: np.stack([np.full(x.shape[:-1], 1e12),
                                                                 np.zeros(x.shape[:-1])], -1))
        with pytest.raises(ReachDivergence):
            simulate(blowup, [0, 0, 0], ([0, 0], [1, 0]), 1.0, mode="m")

    def test_nonfinite_initial(self):
        with pytest.raises(ValueError):
            simulate(Car(), [np.nan, 0, 0], ([0, 0], [1, 0]), 1.0)


class TestFactory:
    def test_names(self):
        assert isinstance(make_agent("car"), Car)
        assert isinstance(make_agent("quad"), Quadrotor)
        assert make_agent("car", speed=2.0).speed == 2.0
        with pytest.raises(ValueError):
            make_agent("boat")

    def test_biased_controller_differs(self):
        car = Car()
        h = biased_controller(car, 0.1)
        x = np.array([[1.0, 2.0, 0.3]])
        assert not np.allclose(h(x, [0, 0], [1, 0]), car.pd_controller(x, [0, 0], [1, 0]))
