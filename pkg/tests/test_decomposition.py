import numpy as np
import pytest

from conftest import CONSTANTS as C
from vhip import (
    AugmentedState,
    ContactSurface,
    ControlInput,
    NoValidVirtualTimeError,
    PendulumState,
    cbp_valid,
    decompose,
    equilibrium_virtual_time,
    initialize_virtual_time,
    reinitialize_after_push,
    step,
    subsystem_derivatives,
)

TG_EQ = equilibrium_virtual_time(1.0, C)  # sqrt(1/9.81)


class TestDecompose:
    def test_zero_velocity(self):
        aug = AugmentedState(PendulumState([0.2, -0.1, 1.1], [0, 0, 0]), 0.4)
        view = decompose(aug, C)
        assert np.allclose(view.dcm, [0.2, -0.1, 1.1])
        assert view.critical_height == pytest.approx(1.1 - 4.905 * 0.16)
        assert np.allclose(view.cbp[:2], view.dcm[:2])

    def test_equilibrium_vrp_is_com(self):
        aug = AugmentedState(PendulumState([0, 0, 1], [0, 0, 0]), TG_EQ)
        view = decompose(aug, C, stiffness=9.81, cop=[0, 0, 0])
        assert np.allclose(view.vrp, [0, 0, 1])
        assert np.allclose(view.dcm, [0, 0, 1])
        assert view.critical_height == pytest.approx(0.5, abs=1e-12)

    def test_direct_evaluation(self):
        aug = AugmentedState(PendulumState([0.1, 0, 1], [0.5, 0, -0.1]), 0.3)
        view = decompose(aug, C)
        assert np.allclose(view.dcm, [0.25, 0, 0.97])
        assert view.critical_height == pytest.approx(0.97 - 4.905 * 0.09)

    def test_vrp_absent_without_stiffness(self):
        aug = AugmentedState(PendulumState([0, 0, 1], [0, 0, 0]), 0.3)
        assert decompose(aug, C).vrp is None
        assert decompose(aug, C, stiffness=0.0, cop=[0, 0, 0]).vrp is None


class TestSubsystemDerivatives:
    def test_stable_curve_freezes_critical_height(self):
        for u in (0.0, 3.0, 9.81, 40.0):
            tg = 0.4
            z_cg = 4.905 * tg * tg
            # build a state whose view lands on (tg, z_cg)
            state = PendulumState([0, 0, z_cg + 4.905 * tg * tg], [0, 0, 0])
            aug = AugmentedState(state, tg)
            d = subsystem_derivatives(aug, ControlInput(u, [0, 0, 0]), C)
            assert d.critical_height_rate == pytest.approx(0.0, abs=1e-12)

    def test_dcm_on_cop_column_is_stationary(self):
        state = PendulumState([0.05, -0.02, 1.0], [0, 0, 0])
        aug = AugmentedState(state, 0.35)
        d = subsystem_derivatives(aug, ControlInput(5.0, [0.05, -0.02, 0.0]), C)
        assert np.allclose(d.dcm_xy_rate, 0.0, atol=1e-12)

    def test_equilibrium_rates_vanish(self):
        aug = AugmentedState(PendulumState([0, 0, 1], [0, 0, 0]), TG_EQ)
        d = subsystem_derivatives(aug, ControlInput(9.81, [0, 0, 0]), C)
        assert d.virtual_time_rate == pytest.approx(0.0, abs=1e-12)
        assert d.critical_height_rate == pytest.approx(0.0, abs=1e-12)
        assert d.height_rate == pytest.approx(0.0, abs=1e-12)

    def test_negative_virtual_time_is_a_trap(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            tg = -rng.uniform(0.01, 0.5)
            aug = AugmentedState(PendulumState(rng.normal(size=3), rng.normal(size=3)), tg)
            for _ in range(200):
                u = rng.uniform(0, 30)
                aug = step(aug, ControlInput(u, rng.normal(size=3)), C, 1e-3)
            assert aug.virtual_time < 0.0

    def test_boundary_rate_is_negative(self):
        aug = AugmentedState(PendulumState([0, 0, 1], [0, 0, 0]), 0.0)
        from vhip import augmented_derivative

        d = augmented_derivative(aug, ControlInput(50.0, [0, 0, 0]), C)
        assert d[0] == -1.0

    def test_negative_critical_height_keeps_falling(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            tg = rng.uniform(0.05, 0.8)
            z = rng.uniform(0.05, 1.0)
            vz = (rng.uniform(-0.5, -0.01) + 4.905 * tg * tg - z) / tg  # z_cg < 0
            aug = AugmentedState(PendulumState([0, 0, z], [0, 0, vz]), tg)
            view = decompose(aug, C)
            assert view.critical_height < 0
            d = subsystem_derivatives(aug, ControlInput(rng.uniform(0.1, 20), [0, 0, 0]), C)
            assert d.critical_height_rate < 0

    def test_chain_rule_consistency(self):
        # numerical derivative of the DCM matches u*tg*(dcm - vrp) along a
        # flow; differenced within one hold interval, where u is constant
        cop = np.array([0.04, 0.0, 0.0])

        def worst_error(h, n):
            aug = AugmentedState(
                PendulumState([0.05, 0.02, 1.05], [0.2, -0.1, 0.05]), 0.35
            )
            states, stiffnesses = [aug], []
            for i in range(n):
                u = 8.0 + 3.0 * np.sin(0.01 * i * (1e-3 / h))
                stiffnesses.append(u)
                states.append(step(states[-1], ControlInput(u, cop), C, h))
            worst = 0.0
            for i in range(n):
                u = stiffnesses[i]
                va = decompose(states[i], C, stiffness=u, cop=cop)
                vb = decompose(states[i + 1], C, stiffness=u, cop=cop)
                numeric = (vb.dcm - va.dcm) / h
                analytic = 0.5 * (
                    u * va.virtual_time * (va.dcm - va.vrp)
                    + u * vb.virtual_time * (vb.dcm - vb.vrp)
                )
                scale = max(1.0, float(np.linalg.norm(va.dcm)))
                worst = max(worst, float(np.max(np.abs(numeric - analytic))) / scale)
            return worst

        coarse = worst_error(1e-3, 400)
        fine = worst_error(5e-4, 800)
        assert coarse < 1e-4
        assert coarse / fine > 3.0  # at least second-order in the step size


class TestInitializeVirtualTime:
    def test_icp_inside_bounds_is_kept(self):
        state = PendulumState([0, 0, 1], [0, 0, 0])
        surface = ContactSurface.rectangle([0, 0, 0], [0.1, 0.1])
        tg0, bounds = initialize_virtual_time(state, surface, C, margin=0.05)
        assert tg0 == pytest.approx(np.sqrt(1 / 9.81), abs=1e-12)
        assert bounds.tau_min < tg0 < bounds.tau_max

    def test_zero_margin_gives_raw_window(self):
        state = PendulumState([0, 0, 1], [0.4, 0, 0])
        surface = ContactSurface.rectangle([0.1, 0, 0], [0.05, 0.05])
        _, bounds = initialize_virtual_time(state, surface, C, margin=0.0)
        assert bounds.tau_min == pytest.approx(0.125)
        assert bounds.tau_max == pytest.approx(0.375)

    def test_push_recovery_reconstruction(self):
        # rest at 1 m over a 0.05 x 0.1127 m half-extent foot, then pushed;
        # the ICP parameter exceeds the shrunk window and gets clamped
        surface = ContactSurface.rectangle([0, 0, 0], [0.05, 0.1127])
        rest = PendulumState([0, 0, 1], [0, 0, 0])
        tg_rest, _ = initialize_virtual_time(rest, surface, C, margin=0.05)
        assert tg_rest == pytest.approx(0.3193, abs=1e-3)
        pushed = PendulumState([0, 0, 1], [-0.01, 0.4, -0.2])
        tg0, bounds = initialize_virtual_time(pushed, surface, C, margin=0.05)
        assert bounds.tau_icp == pytest.approx(0.3092, abs=1e-3)
        assert min(bounds.tau_exit, bounds.tau_ground) == pytest.approx(0.2818, abs=1e-3)
        assert bounds.tau_max == pytest.approx(0.2677, abs=1e-3)
        assert tg0 == pytest.approx(bounds.tau_max)
        # the pick satisfies the CBP requirements
        aug = AugmentedState(pushed, tg0)
        assert cbp_valid(aug, surface, C)

    def test_not_capturable_raises(self):
        state = PendulumState([0, 0, 1], [0.4, 0, 0])
        surface = ContactSurface.rectangle([0.1, 0.3, 0], [0.05, 0.05])
        with pytest.raises(NoValidVirtualTimeError):
            initialize_virtual_time(state, surface, C)

    def test_initialized_cbp_has_margin(self):
        rng = np.random.default_rng(10)
        from conftest import random_capturability_instance

        for _ in range(30):
            state, surface, a = random_capturability_instance(rng)
            if not a.capturable:
                continue
            tg0, bounds = initialize_virtual_time(state, surface, C, margin=0.05)
            aug = AugmentedState(state, tg0)
            view = decompose(aug, C)
            assert view.critical_height > 0
            assert surface.margin_xy(view.dcm_xy) > -1e-12


class TestReinitialize:
    def test_push_breaking_cbp_gets_new_time(self):
        surface = ContactSurface.rectangle([0, 0, 0], [0.05, 0.1127])
        aug = AugmentedState(PendulumState([0, 0, 1], [0, 0, 0]), TG_EQ)
        assert cbp_valid(aug, surface, C)
        pushed = AugmentedState(
            PendulumState([0, 0, 1], [-0.01, 0.4, -0.2]), aug.virtual_time
        )
        assert not cbp_valid(pushed, surface, C)
        fixed, bounds = reinitialize_after_push(pushed, surface, C)
        assert cbp_valid(fixed, surface, C)
        assert np.array_equal(fixed.pendulum.position, pushed.pendulum.position)
        assert np.array_equal(fixed.pendulum.velocity, pushed.pendulum.velocity)
        assert bounds.tau_min <= fixed.virtual_time <= bounds.tau_max

    def test_unrecoverable_push_raises(self):
        # foot fully behind the post-push ballistic line
        surface = ContactSurface.rectangle([0, 0, 0], [0.05, 0.05])
        pushed = AugmentedState(PendulumState([0.3, 0, 1], [0.5, 0, 0]), TG_EQ)
        with pytest.raises(NoValidVirtualTimeError):
            reinitialize_after_push(pushed, surface, C)

    def test_push_from_inside_support_always_recoverable(self):
        # with unbounded stiffness, any state above the polygon interior keeps
        # a sliver of feasible virtual times no matter how hard the push
        surface = ContactSurface.rectangle([0, 0, 0], [0.05, 0.05])
        for dv in ([-2.5, 0, 0], [1.0, 3.0, -0.5], [0, -8.0, 0]):
            pushed = AugmentedState(PendulumState([0, 0, 1], dv), TG_EQ)
            fixed, _ = reinitialize_after_push(pushed, surface, C)
            assert cbp_valid(fixed, surface, C, xy_margin=0.0)


class TestEquilibrium:
    def test_fixed_point_values(self):
        z_f = 0.9
        tg = equilibrium_virtual_time(z_f, C)
        aug = AugmentedState(PendulumState([0, 0, z_f], [0, 0, 0]), tg)
        view = decompose(aug, C)
        assert view.critical_height == pytest.approx(z_f / 2, abs=1e-12)
        d = subsystem_derivatives(aug, ControlInput(9.81 / z_f, [0, 0, 0]), C)
        assert abs(d.virtual_time_rate) < 1e-12
        assert abs(d.critical_height_rate) < 1e-12
