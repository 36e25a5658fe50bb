"""Fixed-step closed-loop simulation with pushes and CBP monitoring.

One run owns a single augmented state.  Per tick: pushes due at the tick are
applied, CBP validity is checked (re-initializing the virtual time when a
disturbance broke it), the controller is evaluated, and the state advances
by one classical RK4 step with the control inputs held constant (zero-order
hold, matching a discrete control loop; the laws are discontinuous, so
re-evaluating them inside integrator stages would be inconsistent).

Runs terminate on convergence (sustained rest near the target), on a fall
(CoM reaching the contact plane), optionally on losing capturability, or at
the time limit.  Identical scenarios produce bit-identical logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .control import (
    ControlInput,
    ControllerConfig,
    bounded_stiffness,
    cop_command,
    fixed_cop_control,
    orbital_energy_stiffness,
)
from .capturability import assess_zero_step
from .core import AugmentedState, PendulumState, PhysicalConstants
from .decomposition import decompose, initialize_virtual_time
from .errors import NoValidVirtualTimeError, VhipError
from .geometry import ContactSurface, FootFrame, support_hull, tau_window

CONTROLLER_KINDS = ("orbital_energy", "bounded", "fixed_cop")
OUTCOMES = ("converged", "fell", "timeout", "no-valid-tg", "error")

CSV_HEADER = "t,x,y,z,vx,vy,vz,u,xp,yp,zp,tg,xig_x,xig_y,xig_z,zcg,gvrp_x,gvrp_y,gvrp_z"


@dataclass(frozen=True, eq=False)
class Push:
    """Impulsive velocity change applied at the nearest tick to ``time``."""

    time: float
    dv: np.ndarray

    def __post_init__(self):
        from .core import as_vector3

        if not (self.time >= 0.0 and np.isfinite(self.time)):
            raise ValueError(f"push time must be finite and >= 0, got {self.time}")
        object.__setattr__(self, "dv", as_vector3(self.dv, "dv"))


@dataclass(frozen=True)
class ConvergenceCriteria:
    """Rest detection: speed and position tolerances, sustained for ``dwell`` s."""

    speed_tol: float = 1e-3
    position_tol: float = 5e-3
    dwell: float = 0.2

    def __post_init__(self):
        if self.speed_tol <= 0.0 or self.position_tol <= 0.0 or self.dwell < 0.0:
            raise ValueError("convergence tolerances must be positive (dwell >= 0)")


@dataclass(frozen=True, eq=False)
class Scenario:
    """One simulation setup: physics, initial state, support, control, pushes.

    Multiple surfaces must be coplanar and are hulled into a single support
    polygon.  ``on_unrecoverable`` chooses what happens when no valid
    virtual time exists (the state is not 0-step capturable): ``"fallback"``
    keeps simulating with a best-effort policy so the fall can play out,
    ``"abort"`` ends the run with outcome ``no-valid-tg``.
    """

    constants: PhysicalConstants
    initial: PendulumState
    surfaces: tuple[ContactSurface, ...]
    controller: str
    config: ControllerConfig
    pushes: tuple[Push, ...] = ()
    step_size: float = 1e-3
    max_time: float = 10.0
    convergence: ConvergenceCriteria = field(default_factory=ConvergenceCriteria)
    on_unrecoverable: str = "fallback"
    name: str = ""
    description: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.surfaces, tuple):
            object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if not isinstance(self.pushes, tuple):
            object.__setattr__(self, "pushes", tuple(self.pushes))
        if len(self.surfaces) == 0:
            raise ValueError("scenario needs at least one contact surface")
        if self.controller not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller {self.controller!r}")
        if not 0.0 < self.step_size <= 0.01:
            raise ValueError(f"step_size must be in (0, 0.01], got {self.step_size}")
        if not self.max_time > 0.0:
            raise ValueError(f"max_time must be positive, got {self.max_time}")
        times = [p.time for p in self.pushes]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("push times must be strictly increasing")
        if self.on_unrecoverable not in ("fallback", "abort"):
            raise ValueError(f"unknown on_unrecoverable {self.on_unrecoverable!r}")

    @property
    def support(self) -> ContactSurface:
        if len(self.surfaces) == 1:
            return self.surfaces[0]
        return support_hull(self.surfaces)


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    detail: dict

    def as_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind, "detail": self.detail}


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """Uniformly sampled closed-loop trajectory plus events and outcome.

    Positions, velocities, CoP, DCM, and VRP are world-frame; the critical
    height and virtual time are scalars from the foot frame.  VRP rows are
    NaN while the stiffness is zero.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    stiffness: np.ndarray
    cop: np.ndarray
    virtual_time: np.ndarray
    dcm: np.ndarray
    critical_height: np.ndarray
    vrp: np.ndarray
    events: tuple[Event, ...]
    outcome: str
    metadata: dict

    def __len__(self) -> int:
        return len(self.times)

    def final_state(self) -> PendulumState:
        return PendulumState(self.positions[-1], self.velocities[-1])

    def has_event(self, kind: str) -> bool:
        return any(e.kind == kind for e in self.events)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for i in range(len(self.times)):
                row = (
                    self.times[i],
                    *self.positions[i],
                    *self.velocities[i],
                    self.stiffness[i],
                    *self.cop[i],
                    self.virtual_time[i],
                    *self.dcm[i],
                    self.critical_height[i],
                    *self.vrp[i],
                )
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def events_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "events": [e.as_dict() for e in self.events],
            "metadata": self.metadata,
        }

    def events_to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.events_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def apply_push(state: PendulumState, dv) -> PendulumState:
    """Instantaneous velocity change; position is untouched."""
    from .core import as_vector3

    return PendulumState(state.position, state.velocity + as_vector3(dv, "dv"))


def step(
    aug: AugmentedState, control: ControlInput, constants: PhysicalConstants, h: float
) -> AugmentedState:
    """One RK4 step of the augmented dynamics with inputs held constant."""
    if not h > 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    u = control.stiffness
    cop = control.cop
    gvec = constants.gravity_vector
    tg = aug.virtual_time
    r = aug.pendulum.position
    v = aug.pendulum.velocity

    def deriv(tg_, r_, v_):
        return -1.0 + tg_ * tg_ * u, v_, u * (r_ - cop) + gvec

    k1t, k1r, k1v = deriv(tg, r, v)
    k2t, k2r, k2v = deriv(tg + 0.5 * h * k1t, r + 0.5 * h * k1r, v + 0.5 * h * k1v)
    k3t, k3r, k3v = deriv(tg + 0.5 * h * k2t, r + 0.5 * h * k2r, v + 0.5 * h * k2v)
    k4t, k4r, k4v = deriv(tg + h * k3t, r + h * k3r, v + h * k3v)
    sixth = h / 6.0
    new_tg = tg + sixth * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    new_r = r + sixth * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    new_v = v + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return AugmentedState(PendulumState(new_r, new_v), new_tg)


def _fixed_cop_virtual_time(
    state: PendulumState, cop: np.ndarray, target_height: float, constants: PhysicalConstants
) -> float:
    """Time-to-CoP of a point-foot run; the virtual time resyncs to it.

    The fixed-CoP controller derives its time scale from the state itself,
    so the integrated virtual time is redundant there and would drift
    exponentially; the log carries the controller's own notion instead.
    """
    rel = state.position - cop
    v = state.velocity
    radius = float(np.hypot(rel[0], rel[1]))
    speed = float(np.hypot(v[0], v[1]))
    if radius <= 1e-9 and speed <= 1e-9:
        return float(np.sqrt(target_height / constants.gravity))
    axis = rel[:2] / radius if radius > 1e-12 else v[:2] / speed
    vx = float(v[0] * axis[0] + v[1] * axis[1])
    if abs(vx) < 1e-12:
        return float(np.sqrt(target_height / constants.gravity))
    x = float(rel[0] * axis[0] + rel[1] * axis[1])
    return float(np.clip(-x / vx, -100.0, 100.0))


def _fallback_virtual_time(state: PendulumState, constants: PhysicalConstants) -> float:
    """Best-effort virtual time for a non-capturable state (height-valid only)."""
    z, vz = state.position[2], state.velocity[2]
    if z <= 0.0:
        return 1e-3
    g = constants.gravity
    tau_ground = (vz + np.sqrt(vz * vz + 2.0 * g * z)) / g
    tau_icp = (vz + np.sqrt(vz * vz + 4.0 * g * z)) / (2.0 * g)
    return float(min(max(tau_icp, 0.05 * tau_ground), 0.95 * tau_ground))


def _resolve_fixed_cop(
    scenario: Scenario, surface: ContactSurface, frame: FootFrame, surface_ff: ContactSurface
) -> np.ndarray:
    """Foot-frame CoP point for the fixed-CoP controller."""
    if scenario.config.fixed_cop is not None:
        point = frame.point_to(scenario.config.fixed_cop)
        return np.array([point[0], point[1], 0.0])
    assessment = assess_zero_step(scenario.initial, surface, scenario.constants)
    if assessment.suggested_cop is not None:
        point = frame.point_to(assessment.suggested_cop)
        return np.array([point[0], point[1], 0.0])
    centroid = surface_ff.centroid
    return np.array([centroid[0], centroid[1], 0.0])


def run(scenario: Scenario) -> TrajectoryLog:
    """Simulate a scenario to termination and return its trajectory log."""
    constants = scenario.constants
    config = scenario.config
    h = scenario.step_size
    surface = scenario.support
    frame = FootFrame.of_surface(surface)
    surface_ff = frame.surface_to(surface)
    state = frame.state_to(scenario.initial)
    uses_tg = scenario.controller in ("orbital_energy", "bounded")

    events: list[Event] = []
    metadata: dict = {"name": scenario.name, "controller": scenario.controller}
    fallback_mode = False
    outcome = None

    fixed_cop_ff = None
    rest_xy = np.asarray(config.dcm_target, dtype=float)
    if scenario.controller == "fixed_cop":
        fixed_cop_ff = _resolve_fixed_cop(scenario, surface, frame, surface_ff)
        rest_xy = fixed_cop_ff[:2]
        metadata["fixed_cop"] = frame.point_from(fixed_cop_ff).tolist()

    try:
        tg0, bounds = initialize_virtual_time(state, surface_ff, constants, config.margin)
        metadata["initial_virtual_time"] = tg0
        metadata["initial_bounds"] = {
            "tau_min": bounds.tau_min,
            "tau_max": bounds.tau_max,
            "tau_enter": bounds.tau_enter,
            "tau_exit": bounds.tau_exit,
            "tau_ground": bounds.tau_ground,
            "tau_icp": bounds.tau_icp,
        }
    except NoValidVirtualTimeError as exc:
        events.append(Event(0.0, "no-valid-tg", {"message": str(exc)}))
        if scenario.on_unrecoverable == "abort":
            outcome = "no-valid-tg"
        fallback_mode = True
        tg0 = _fallback_virtual_time(state, constants)
    except VhipError as exc:  # degenerate initial state
        events.append(Event(0.0, "no-valid-tg", {"message": str(exc)}))
        outcome = "fell" if state.position[2] <= 0.0 else "no-valid-tg"
        tg0 = 1e-3

    aug = AugmentedState(state, tg0)
    n_ticks = int(round(scenario.max_time / h))
    push_ticks = {}
    for push in scenario.pushes:
        tick = int(round(push.time / h))
        if tick <= n_ticks:
            push_ticks.setdefault(tick, []).append(push)
    # a run with scheduled pushes is not allowed to declare rest before them
    last_push_tick = max(push_ticks, default=-1)

    n_rows = n_ticks + 1
    cols_t = np.empty(n_rows)
    cols_pos = np.empty((n_rows, 3))
    cols_vel = np.empty((n_rows, 3))
    cols_u = np.empty(n_rows)
    cols_cop = np.empty((n_rows, 3))
    cols_tg = np.empty(n_rows)
    cols_dcm = np.empty((n_rows, 3))
    cols_zc = np.empty(n_rows)
    cols_vrp = np.empty((n_rows, 3))
    n_logged = 0

    def log_row(t, aug_, control_):
        nonlocal n_logged
        pos_w = frame.point_from(aug_.pendulum.position)
        vel_w = frame.velocity_from(aug_.pendulum.velocity)
        tg = aug_.virtual_time
        view = decompose(aug_, constants)
        i = n_logged
        cols_t[i] = t
        cols_pos[i] = pos_w
        cols_vel[i] = vel_w
        cols_tg[i] = tg
        cols_dcm[i] = pos_w + vel_w * tg
        cols_zc[i] = view.critical_height
        if control_ is None:
            cols_u[i] = np.nan
            cols_cop[i] = np.nan
            cols_vrp[i] = np.nan
        else:
            cols_u[i] = control_.stiffness
            cols_cop[i] = frame.point_from(control_.cop)
            if control_.stiffness > 0.0:
                cols_vrp[i] = cols_cop[i] + np.array(
                    [0.0, 0.0, constants.gravity / control_.stiffness]
                )
            else:
                cols_vrp[i] = np.nan
        n_logged += 1

    control = None
    errored = False
    dwell_start = None
    conv = scenario.convergence

    if outcome is None and aug.pendulum.position[2] <= 0.0:
        events.append(Event(0.0, "fell", {"height": float(aug.pendulum.position[2])}))
        outcome = "fell"

    if outcome is not None:
        log_row(0.0, aug, None)
    else:
        for i in range(n_ticks):
            t = i * h
            for push in push_ticks.get(i, ()):
                dv_ff = frame.velocity_to(push.dv)
                aug = AugmentedState(apply_push(aug.pendulum, dv_ff), aug.virtual_time)
                events.append(Event(t, "push-applied", {"dv": push.dv.tolist()}))

            if scenario.controller == "fixed_cop":
                aug = aug.with_virtual_time(
                    _fixed_cop_virtual_time(
                        aug.pendulum, fixed_cop_ff, config.target_height, constants
                    )
                )
            view = decompose(aug, constants)
            if uses_tg and not fallback_mode:
                valid = (
                    view.virtual_time > 0.0
                    and view.critical_height > 1e-9
                    and surface_ff.margin_xy(view.dcm_xy) >= 1e-9
                )
                if not valid:
                    try:
                        tg_new, bounds = initialize_virtual_time(
                            aug.pendulum, surface_ff, constants, config.margin
                        )
                        aug = aug.with_virtual_time(tg_new)
                        view = decompose(aug, constants)
                        events.append(
                            Event(
                                t,
                                "reinitialized",
                                {
                                    "virtual_time": tg_new,
                                    "tau_min": bounds.tau_min,
                                    "tau_max": bounds.tau_max,
                                    "tau_icp": bounds.tau_icp,
                                },
                            )
                        )
                    except VhipError as exc:
                        events.append(Event(t, "no-valid-tg", {"message": str(exc)}))
                        if scenario.on_unrecoverable == "abort":
                            outcome = "no-valid-tg"
                            log_row(t, aug, control)
                            break
                        fallback_mode = True
                        aug = aug.with_virtual_time(
                            _fallback_virtual_time(aug.pendulum, constants)
                        )
                        view = decompose(aug, constants)

            try:
                if scenario.controller == "fixed_cop":
                    control = fixed_cop_control(aug.pendulum, fixed_cop_ff, config, constants)
                else:
                    if scenario.controller == "orbital_energy":
                        u = orbital_energy_stiffness(view, config, constants)
                    else:
                        u = bounded_stiffness(view, config, constants)
                    control = ControlInput(u, cop_command(view, u, config, surface_ff))
            except VhipError as exc:
                if not errored:
                    events.append(Event(t, "controller-error", {"message": str(exc)}))
                    errored = True
                nearest = surface_ff.nearest_point_xy(aug.pendulum.position[:2])
                control = ControlInput(0.0, np.array([nearest[0], nearest[1], 0.0]))

            log_row(t, aug, control)
            aug = step(aug, control, constants, h)
            t_next = (i + 1) * h

            pos = aug.pendulum.position
            if not (
                np.all(np.isfinite(pos))
                and np.all(np.isfinite(aug.pendulum.velocity))
                and np.isfinite(aug.virtual_time)
            ):
                events.append(Event(t_next, "numerical-blowup", {}))
                outcome = "error"
                break
            if pos[2] <= 0.0:
                events.append(Event(t_next, "fell", {"height": float(pos[2])}))
                outcome = "fell"
                log_row(t_next, aug, control)
                break

            at_rest = (
                i >= last_push_tick
                and float(np.linalg.norm(aug.pendulum.velocity)) < conv.speed_tol
                and abs(pos[2] - config.target_height) < conv.position_tol
                and float(np.hypot(pos[0] - rest_xy[0], pos[1] - rest_xy[1]))
                < conv.position_tol
            )
            if at_rest:
                if dwell_start is None:
                    dwell_start = t_next
                if t_next - dwell_start >= conv.dwell - 1e-12:
                    events.append(Event(t_next, "converged", {}))
                    outcome = "converged"
                    log_row(t_next, aug, control)
                    break
            else:
                dwell_start = None
        else:
            outcome = "timeout"
            log_row(n_ticks * h, aug, control)

    return TrajectoryLog(
        times=cols_t[:n_logged].copy(),
        positions=cols_pos[:n_logged].copy(),
        velocities=cols_vel[:n_logged].copy(),
        stiffness=cols_u[:n_logged].copy(),
        cop=cols_cop[:n_logged].copy(),
        virtual_time=cols_tg[:n_logged].copy(),
        dcm=cols_dcm[:n_logged].copy(),
        critical_height=cols_zc[:n_logged].copy(),
        vrp=cols_vrp[:n_logged].copy(),
        events=tuple(events),
        outcome=outcome,
        metadata=metadata,
    )
