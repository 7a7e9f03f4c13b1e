import numpy as np
import pytest

from ksgrowup import (BarrierSpec, PhiBlend, SpecialFunctions, Snapshot,
                      certify_sign, check_boundary_matching,
                      check_lower_monotone, eval_barrier, find_time_shifts,
                      integrate_a, make_graded_grid, residual_fd,
                      residual_full, residual_reduced)
from ksgrowup.errors import ConstructionError, OrderingFailureError, RangeError


class StubPath:
    """Duck-typed path with prescribed constants (for synthetic barriers)."""

    def __init__(self, a=50.0, b=0.0, gamma=0.0, K=5.0):
        self._a, self._b, self._g = a, b, gamma
        self.K = K
        self.t_end = 1e9

    def a_at(self, t):
        return self._a

    def a_prime_at(self, t):
        return self._b * self._a ** 2

    def b_at(self, t):
        return self._b

    def gamma_at(self, t):
        return self._g

    def gamma_prime_at(self, t):
        return 0.0

    def epsilon_at(self, t):
        return self._g

    def loga_at(self, t):
        return np.log(self._a)


@pytest.fixture(scope="module")
def lower_med(path_k5, table_med, funcs_med):
    return BarrierSpec(kind="lower", path=path_k5, table=table_med, funcs=funcs_med)


@pytest.fixture(scope="module")
def upper_med(path_k6, table_med, funcs_med):
    return BarrierSpec(kind="upper", path=path_k6, table=table_med, funcs=funcs_med)


class TestEval:
    def test_vanishes_at_origin(self, lower_med, upper_med):
        for spec in (lower_med, upper_med):
            v, _ = eval_barrier(spec, np.array([0.0]), 5.0)
            assert v[0] == 0.0

    def test_lower_origin_slope(self, lower_med):
        # tabulated f'(0) = 1, g'(0) = 0: slope at x = 0 is a (1 + b),
        # asymptotically a(t)
        for t in (2.0, 20.0):
            _, s = eval_barrier(lower_med, np.array([0.0]), t)
            a = lower_med.path.a_at(t)
            b = lower_med.path.b_at(t)
            assert abs(s[0] - a * (1.0 + b)) < 1e-9 * a
            assert abs(s[0] / a - 1.0) < 2.0 * b

    def test_b_zero_reduces_to_steady_profile(self, table_med, funcs_med):
        spec = BarrierSpec(kind="lower", path=StubPath(a=50.0, b=0.0),
                           table=table_med, funcs=funcs_med)
        x = np.linspace(0, 1, 33)
        v, s = eval_barrier(spec, x, 1.0)
        assert np.max(np.abs(v - 50 * x / (50 * x + 1))) < 1e-12
        assert np.max(np.abs(s - 50.0 / (50 * x + 1) ** 2)) < 1e-9

    def test_range_error(self, lower_med):
        with pytest.raises(RangeError):
            eval_barrier(lower_med, np.array([1.0]), 100.0)  # a(100) > y_max

    def test_bad_kind(self, path_k5, table_med):
        with pytest.raises(ConstructionError):
            BarrierSpec(kind="middle", path=path_k5, table=table_med)


class TestResidual:
    def test_anchored_zero(self, lower_med, upper_med):
        assert residual_reduced(lower_med, np.array([0.0]), 3.0)[0] == 0.0
        assert residual_reduced(upper_med, np.array([0.0]), 3.0)[0] == 0.0

    def test_b_zero_residual(self, table_med, funcs_med):
        # with b = 0 and gamma = 0 the full residual a b^2 (A or B) vanishes
        for kind in ("lower", "upper"):
            spec = BarrierSpec(kind=kind, path=StubPath(b=0.0, gamma=0.0),
                               table=table_med, funcs=funcs_med)
            y = np.geomspace(1e-3, 40.0, 30)
            assert np.max(np.abs(residual_full(spec, y, 1.0))) == 0.0
            A = residual_reduced(spec, y, 1.0)
            if kind == "lower":
                assert np.max(np.abs(A)) < 1e-14
            else:
                assert np.all(A >= 0.0)  # reduces to M phi >= 0

    def test_signs_at_moderate_times(self, lower_med, upper_med):
        for t in (2.0, 10.0, 50.0):
            a = float(lower_med.path.a_at(t))
            y = np.geomspace(1e-6, a, 400)
            assert np.max(residual_reduced(lower_med, y, t)) <= 1e-11
            a = float(upper_med.path.a_at(t))
            y = np.geomspace(1e-6, a, 400)
            assert np.min(residual_reduced(upper_med, y, t)) >= -1e-11

    def test_fd_matches_grouped_algebra(self, lower_med, upper_med):
        for spec, t, x in ((lower_med, 2.0, 0.1), (lower_med, 4.0, 0.02),
                           (upper_med, 3.0, 0.05)):
            ref = float(residual_full(
                spec, np.array([spec.path.a_at(t) * x]), t, exact=True)[0])
            fd = residual_fd(spec, x, t)
            assert abs(fd - ref) < 2e-2 * abs(ref)

    def test_fd_second_order(self, lower_med):
        t, x = 2.0, 0.08
        ref = float(residual_full(
            lower_med, np.array([lower_med.path.a_at(t) * x]), t, exact=True)[0])
        e1 = abs(residual_fd(lower_med, x, t, dx_rel=2e-3, dt_rel=4e-3) - ref)
        e2 = abs(residual_fd(lower_med, x, t, dx_rel=1e-3, dt_rel=2e-3) - ref)
        assert e2 < 0.4 * e1

    def test_fd_on_steady_profile(self, table_med, funcs_med):
        # b = 0 barrier is the steady profile; P(U_a) = 0
        spec = BarrierSpec(kind="lower", path=StubPath(a=50.0, b=0.0),
                           table=table_med, funcs=funcs_med)
        fd = residual_fd(spec, 0.02, 1.0)
        assert abs(fd) < 1e-5

    def test_parabolic_operator_on_separable_solution(self):
        # P[K x / (1 - 2 K t)] = 0 identically; central differences confirm
        K = 1.0

        def v(x, t):
            return K * x / (1.0 - 2.0 * K * t)

        x, t, dx, dt = 0.5, 0.1, 1e-4, 1e-4
        u_t = (v(x, t + dt) - v(x, t - dt)) / (2 * dt)
        u_xx = (v(x + dx, t) - 2 * v(x, t) + v(x - dx, t)) / dx ** 2
        u_x = (v(x + dx, t) - v(x - dx, t)) / (2 * dx)
        assert abs(u_t - x * u_xx - 2 * v(x, t) * u_x) < 1e-6


class TestCertify:
    def test_lower_certifies(self, lower_med):
        rep = certify_sign(lower_med, (0.5, 50.0), n_t=24)
        assert rep.sign_ok
        assert rep.threshold_T <= 1.0
        assert rep.worst_value <= 1e-11

    def test_upper_certifies(self, upper_med):
        rep = certify_sign(upper_med, (0.5, 50.0), n_t=24)
        assert rep.sign_ok
        assert rep.worst_value >= -1e-11

    def test_upper_small_m_fails(self, path_k6):
        weak = SpecialFunctions(3e6, M=0.02, strict_m=False)
        spec = BarrierSpec(kind="upper", path=path_k6, table=weak.table())
        rep = certify_sign(spec, (1.0, 20.0), n_t=16)
        assert not rep.sign_ok
        # the failure sits at moderate inner coordinate, where M phi is the
        # only positive contribution once gamma (2ff'-yf') turns negative
        worst_y = rep.worst_location[0] * path_k6.a_at(rep.worst_location[1])
        assert worst_y < 100.0

    def test_refining_scan_never_rescues(self, lower_med):
        coarse = certify_sign(lower_med, (0.5, 20.0), y_resolution=10, n_t=12)
        fine = certify_sign(lower_med, (0.5, 20.0), y_resolution=80, n_t=12)
        assert fine.worst_value >= coarse.worst_value - 1e-15
        assert coarse.sign_ok and fine.sign_ok

    def test_phi_blend_sensitivity(self, path_k6):
        # the blend segment of phi below the join is free; the certified
        # threshold must not hinge on it
        thresholds = []
        for scale in (0.5, 1.0, 2.0):
            fn = SpecialFunctions(3e6, phi=PhiBlend(slope0=scale * 0.72134752),
                                  npd=20)
            spec = BarrierSpec(kind="upper", path=path_k6, table=fn.table())
            rep = certify_sign(spec, (0.5, 50.0), n_t=16)
            assert rep.sign_ok
            thresholds.append(rep.threshold_T)
        assert max(thresholds) <= 4.0 * max(min(thresholds), 0.5)


class TestMonotone:
    def test_lower_monotone_beyond_threshold(self, lower_med):
        assert check_lower_monotone(lower_med, (1.0, 50.0))

    def test_huge_b_breaks_monotonicity(self, table_med):
        spec = BarrierSpec(kind="lower", path=StubPath(a=50.0, b=5.0),
                           table=table_med)
        assert not check_lower_monotone(spec, (1.0, 2.0))

    def test_kind_guard(self, upper_med):
        with pytest.raises(ConstructionError):
            check_lower_monotone(upper_med, (1.0, 2.0))


class TestBoundaryMatching:
    def test_lower_k5_holds(self, lower_med):
        rep = check_boundary_matching(lower_med, (1.0, 50.0))
        assert rep.ok_beyond
        assert rep.onset_t < 20.0

    def test_lower_k7_fails(self, table_med):
        path = integrate_a(7.0, 60.0)
        spec = BarrierSpec(kind="lower", path=path, table=table_med)
        rep = check_boundary_matching(spec, (1.0, 50.0))
        assert not rep.ok_beyond
        assert np.all(rep.margins[-10:] < 0.0)

    def test_upper_k6_desk_scale_negative(self, upper_med):
        # the upper inequality needs the deep-asymptotic regime; margins are
        # still negative at t <= 50 and shrink toward zero
        rep = check_boundary_matching(upper_med, (1.0, 50.0))
        assert not rep.ok_beyond
        m = rep.margins
        assert np.all(m < 0.0)
        assert abs(m[-1]) < abs(m[0])

    def test_upper_k6_certifies_eventually(self, path_k6_big, table_big):
        spec = BarrierSpec(kind="upper", path=path_k6_big, table=table_big)
        rep = check_boundary_matching(spec, (1.0, 3000.0), n_t=96)
        assert rep.ok_beyond
        assert 500.0 < rep.onset_t < 2000.0

    def test_upper_k5_swap_fails(self, path_k5_big, table_big):
        spec = BarrierSpec(kind="upper", path=path_k5_big, table=table_big)
        rep = check_boundary_matching(spec, (1.0, 3000.0), n_t=96)
        assert not rep.ok_beyond
        assert np.all(rep.margins[-10:] < 0.0)


class TestTimeShifts:
    def test_barrier_as_initial_data_needs_no_shift(self, lower_med):
        # start the run from (the admissible monotone envelope of) the
        # lower barrier at its certified onset; ordering then holds with
        # T1 = 0 (the equation is autonomous, so the trajectory clock is
        # tagged to start at the onset)
        t0 = 6.0
        grid = make_graded_grid(220, 1e-7, 1.09)
        v, _ = eval_barrier(lower_med, grid.nodes, t0)
        v = np.maximum.accumulate(np.clip(v, 0.0, 1.0))
        v[-1] = 1.0
        u0 = Snapshot(grid=grid, values=v, time=0.0, left_bc=0.0, right_bc=1.0)
        from ksgrowup import SolverConfig, solve
        traj = solve(u0, SolverConfig(grid=grid, right_bc=1.0), 6.0,
                     [1.0, 2.0, 4.0, 6.0])
        shifted = [Snapshot(grid=s.grid, values=s.values, time=s.time + t0,
                            left_bc=s.left_bc, right_bc=s.right_bc)
                   for s in traj.snapshots]
        from ksgrowup.barriers import _lower_violation
        assert _lower_violation(lower_med, shifted, 0.0, t0) <= 1e-9

    def test_pre_onset_window_costs_a_shift(self, lower_med, fast_traj):
        # starting the comparison clock at 0 (barrier not yet a
        # subsolution) requires a small positive shift
        from ksgrowup.barriers import _lower_violation, _search_shift
        t1 = _search_shift(
            lambda s: _lower_violation(lower_med, fast_traj.snapshots, s, 6.0),
            shift_max=50.0, lattice=0.25, slack=1e-9)
        assert 0.0 <= t1 <= 5.0

    def test_shift_search_raises_when_capped(self, fast_traj, lower_med,
                                             upper_med):
        with pytest.raises(OrderingFailureError):
            find_time_shifts(lower_med, upper_med, fast_traj.snapshots,
                             shift_max=5.0, lattice=0.5)

    def test_path_horizon_guard(self, fast_traj, table_med, funcs_med,
                                path_k5):
        short = integrate_a(6.0, 20.0)
        spec_up = BarrierSpec(kind="upper", path=short, table=table_med)
        spec_lo = BarrierSpec(kind="lower", path=path_k5, table=table_med)
        with pytest.raises(RangeError):
            find_time_shifts(spec_lo, spec_up, fast_traj.snapshots,
                             shift_max=100.0)
