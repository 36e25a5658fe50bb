import numpy as np
import pytest

from conftest import CONSTANTS as C
from vhip import (
    AugmentedState,
    ContactSurface,
    ControlInput,
    ControllerConfig,
    PendulumState,
    Push,
    Scenario,
    apply_push,
    ballistic_point,
    equilibrium_virtual_time,
    run,
    step,
)


def rest_scenario(**overrides):
    base = dict(
        constants=C,
        initial=PendulumState([0, 0, 1], [0, 0, 0]),
        surfaces=(ContactSurface.rectangle([0, 0, 0], [0.05, 0.1127]),),
        controller="orbital_energy",
        config=ControllerConfig(target_height=1.0),
        max_time=10.0,
    )
    base.update(overrides)
    return Scenario(**base)


PUSH_DV = [-0.01, 0.4, -0.2]


class TestStep:
    def test_ballistic_oracle(self):
        state = PendulumState([0.1, -0.2, 1.5], [0.7, 0.3, 0.2])
        aug = AugmentedState(state, 0.4)
        control = ControlInput(0.0, [0, 0, 0])
        h = 1e-3
        worst = 0.0
        for i in range(1, 1001):
            aug = step(aug, control, C, h)
            exact = ballistic_point(state, i * h, C)
            worst = max(worst, float(np.max(np.abs(aug.pendulum.position - exact))))
        assert worst < 1e-8

    def test_equilibrium_fixed_point_no_drift(self):
        z_f = 1.0
        aug = AugmentedState(
            PendulumState([0, 0, z_f], [0, 0, 0]), equilibrium_virtual_time(z_f, C)
        )
        control = ControlInput(9.81 / z_f, [0, 0, 0])
        before = aug
        aug = step(aug, control, C, 1e-3)
        assert np.max(np.abs(aug.pendulum.position - before.pendulum.position)) < 1e-12
        assert abs(aug.virtual_time - before.virtual_time) < 1e-12

    def test_fourth_order_convergence(self):
        # constant-stiffness flow has a hyperbolic closed form
        u, cop = 4.0, np.zeros(3)
        state = PendulumState([0.2, -0.1, 1.2], [0.3, 0.2, -0.1])
        omega = np.sqrt(u)
        vrp = cop - C.gravity_vector / u

        def exact(t):
            d0 = state.position - vrp
            return vrp + d0 * np.cosh(omega * t) + state.velocity * np.sinh(omega * t) / omega

        def global_error(h):
            aug = AugmentedState(state, 0.3)
            n = int(round(1.0 / h))
            control = ControlInput(u, cop)
            for _ in range(n):
                aug = step(aug, control, C, h)
            return float(np.max(np.abs(aug.pendulum.position - exact(1.0))))

        ratio = global_error(2e-3) / global_error(1e-3)
        assert 12.0 <= ratio <= 20.0

    def test_energy_conservation_free_fall(self):
        state = PendulumState([0, 0, 2.0], [1.0, -0.5, 0.3])
        aug = AugmentedState(state, 0.4)
        control = ControlInput(0.0, [0, 0, 0])

        def energy(s):
            return 0.5 * float(s.velocity @ s.velocity) + 9.81 * s.position[2]

        e0 = energy(state)
        for _ in range(1000):
            aug = step(aug, control, C, 1e-3)
        assert abs(energy(aug.pendulum) - e0) < 1e-8


class TestApplyPush:
    def test_zero_is_identity(self):
        state = PendulumState([1, 2, 3], [0.1, 0.2, 0.3])
        out = apply_push(state, [0, 0, 0])
        assert np.array_equal(out.velocity, state.velocity)

    def test_magnitude(self):
        out = apply_push(PendulumState([0, 0, 1], [0, 0, 0]), PUSH_DV)
        assert np.linalg.norm(out.velocity) == pytest.approx(0.4474, abs=1e-4)

    def test_composition(self):
        state = PendulumState([0, 0, 1], [0, 0, 0])
        a = apply_push(apply_push(state, [0.1, 0, 0]), [0, 0.2, 0])
        b = apply_push(state, [0.1, 0.2, 0])
        assert np.allclose(a.velocity, b.velocity)


class TestRun:
    def test_rest_state_converges_quietly(self):
        result = run(rest_scenario())
        assert result.outcome == "converged"
        assert not result.has_event("reinitialized")
        # equilibrium hold: stiffness pinned at g / z_f the whole way
        assert np.allclose(result.stiffness[:-1], 9.81, atol=1e-9)

    def test_push_recovery_reinitializes_then_converges(self):
        result = run(rest_scenario(pushes=(Push(0.5, PUSH_DV),)))
        kinds = [e.kind for e in result.events]
        assert result.outcome == "converged"
        assert kinds.count("push-applied") == 1
        assert "reinitialized" in kinds
        push_t = next(e.time for e in result.events if e.kind == "push-applied")
        reinit_t = next(e.time for e in result.events if e.kind == "reinitialized")
        assert reinit_t == pytest.approx(push_t)

    def test_doomed_scenario_falls_for_every_controller(self):
        doomed = ContactSurface.rectangle([0.3, 0, 0], [0.05, 0.05])
        start = PendulumState([0, 0, 1], [0.4, 0, 0])
        for kind in ("orbital_energy", "bounded", "fixed_cop"):
            config = ControllerConfig(
                target_height=1.0, stiffness_limit=25.0 if kind == "bounded" else None
            )
            result = run(
                rest_scenario(
                    initial=start, surfaces=(doomed,), controller=kind, config=config
                )
            )
            assert result.outcome == "fell"
            assert result.has_event("no-valid-tg") or result.has_event("controller-error")
            # no resurrection: nothing logged after the fall
            assert [e.kind for e in result.events][-1] == "fell"
            assert not result.has_event("converged")

    def test_abort_mode_reports_no_valid_tg(self):
        doomed = ContactSurface.rectangle([0.3, 0, 0], [0.05, 0.05])
        start = PendulumState([0, 0, 1], [0.4, 0, 0])
        result = run(rest_scenario(initial=start, surfaces=(doomed,), on_unrecoverable="abort"))
        assert result.outcome == "no-valid-tg"
        assert len(result) == 1

    def test_determinism_bitwise(self):
        scenario = rest_scenario(pushes=(Push(0.4, PUSH_DV),), max_time=3.0)
        a = run(scenario)
        b = run(scenario)
        assert a.outcome == b.outcome
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.stiffness, b.stiffness)
        assert np.array_equal(a.cop, b.cop)

    def test_log_rows_strictly_increasing(self):
        result = run(rest_scenario(max_time=1.0))
        assert np.all(np.diff(result.times) > 0)

    def test_reinit_preceded_by_push_same_tick(self):
        result = run(rest_scenario(pushes=(Push(0.5, PUSH_DV),)))
        events = [(e.kind, e.time) for e in result.events]
        for kind, t in events:
            if kind == "reinitialized":
                assert ("push-applied", t) in events

    def test_converged_state_matches_equilibrium(self):
        result = run(rest_scenario(pushes=(Push(0.3, [0.05, 0.1, 0.0]),)))
        assert result.outcome == "converged"
        tg_star = equilibrium_virtual_time(1.0, C)
        assert abs(result.virtual_time[-1] - tg_star) < 1e-3
        assert abs(result.critical_height[-1] - 0.5) < 1e-3

    def test_fixed_cop_converges_from_suggested_point(self):
        start = PendulumState([0, 0, 1], [0.4, 0, 0])
        surface = ContactSurface.rectangle([0.1, 0, 0], [0.05, 0.05])
        result = run(
            rest_scenario(
                initial=start,
                surfaces=(surface,),
                controller="fixed_cop",
                config=ControllerConfig(target_height=1.0),
            )
        )
        assert result.outcome == "converged"
        final = result.final_state()
        assert np.allclose(final.position[:2], result.metadata["fixed_cop"][:2], atol=5e-3)

    def test_vrp_is_nan_in_free_fall(self):
        doomed = ContactSurface.rectangle([0.3, 0, 0], [0.05, 0.05])
        start = PendulumState([0, 0, 1], [0.4, 0, 0])
        result = run(rest_scenario(initial=start, surfaces=(doomed,)))
        assert np.isnan(result.vrp[-2]).all()

    def test_csv_round_trip_exact(self, tmp_path):
        result = run(rest_scenario(max_time=1.0))
        path = tmp_path / "log.csv"
        result.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == (
            "t,x,y,z,vx,vy,vz,u,xp,yp,zp,tg,xig_x,xig_y,xig_z,zcg,gvrp_x,gvrp_y,gvrp_z"
        )
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        assert np.array_equal(data[:, 0], result.times)
        assert np.array_equal(data[:, 1:4], result.positions)
        assert np.array_equal(data[:, 11], result.virtual_time)

    def test_two_coplanar_feet_are_hulled(self):
        left = ContactSurface.rectangle([0.0, 0.12, 0], [0.05, 0.03])
        right = ContactSurface.rectangle([0.0, -0.12, 0], [0.05, 0.03])
        # the gap between the feet is bridged by the support hull
        scenario = rest_scenario(
            surfaces=(left, right), pushes=(Push(0.3, [0.0, 0.25, 0.0]),)
        )
        result = run(scenario)
        assert result.outcome == "converged"

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            rest_scenario(step_size=0.05)
        with pytest.raises(ValueError):
            rest_scenario(pushes=(Push(0.5, [0, 0, 0]), Push(0.5, [0, 0, 0])))
        with pytest.raises(ValueError):
            rest_scenario(controller="mystery")
