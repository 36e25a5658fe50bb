"""State types and dynamics of the 3D variable-height inverted pendulum.

The model is a point mass at the center of mass (CoM) pushed by a leg force
directed from the center of pressure (CoP) toward the CoM, with free vertical
motion.  With ``u`` the normalized leg stiffness (1/s^2) the CoM obeys

    r'' = u * (r - cop) + (0, 0, -g),    u >= 0.

An augmented state carries one extra scalar, the virtual time ``T_g`` with
dynamics ``T_g' = -1 + T_g^2 * u``, which parametrizes the generalized
divergent component of motion (see :mod:`vhip.decomposition`).

Everything in this module is a pure function over immutable data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularStateError


def as_vector3(value, name: str = "vector") -> np.ndarray:
    """Coerce ``value`` to a finite float 3-vector."""
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class PhysicalConstants:
    """Gravity magnitude (m/s^2) and robot mass (kg).

    Mass only matters when reconstructing contact forces; the CoM dynamics
    are mass-normalized.
    """

    gravity: float = 9.81
    mass: float = 1.0

    def __post_init__(self):
        if not (self.gravity > 0.0 and np.isfinite(self.gravity)):
            raise ValueError(f"gravity must be positive, got {self.gravity}")
        if not (self.mass > 0.0 and np.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass}")

    @property
    def gravity_vector(self) -> np.ndarray:
        """Gravity as a 3-vector, (0, 0, -g)."""
        return np.array([0.0, 0.0, -self.gravity])


@dataclass(frozen=True, eq=False)
class PendulumState:
    """CoM position (m) and velocity (m/s)."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", as_vector3(self.position, "position"))
        object.__setattr__(self, "velocity", as_vector3(self.velocity, "velocity"))

    @classmethod
    def at_rest(cls, position) -> "PendulumState":
        return cls(position, np.zeros(3))


@dataclass(frozen=True, eq=False)
class ControlInput:
    """Normalized leg stiffness (1/s^2) and CoP position (m).

    Unilateral contact only pushes, so ``stiffness`` must be nonnegative.
    Whether ``cop`` lies on the active contact surface is the caller's
    responsibility; see :meth:`vhip.geometry.ContactSurface.contains_xy`.
    """

    stiffness: float
    cop: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.stiffness) and self.stiffness >= 0.0):
            raise ValueError(f"stiffness must be finite and >= 0, got {self.stiffness}")
        object.__setattr__(self, "cop", as_vector3(self.cop, "cop"))


@dataclass(frozen=True, eq=False)
class AugmentedState:
    """Pendulum state plus the scalar virtual time (s)."""

    pendulum: PendulumState
    virtual_time: float

    def __post_init__(self):
        if not np.isfinite(self.virtual_time):
            raise ValueError(f"virtual_time must be finite, got {self.virtual_time}")

    def with_virtual_time(self, virtual_time: float) -> "AugmentedState":
        return AugmentedState(self.pendulum, virtual_time)


@dataclass(frozen=True, eq=False)
class CaptureTarget:
    """Final CoP and the rest height of the CoM directly above it."""

    final_cop: np.ndarray
    final_height: float

    def __post_init__(self):
        object.__setattr__(self, "final_cop", as_vector3(self.final_cop, "final_cop"))
        if not (self.final_height > 0.0 and np.isfinite(self.final_height)):
            raise ValueError(f"final_height must be positive, got {self.final_height}")

    @property
    def final_com(self) -> np.ndarray:
        return self.final_cop + np.array([0.0, 0.0, self.final_height])


def com_acceleration(
    state: PendulumState, control: ControlInput, constants: PhysicalConstants
) -> np.ndarray:
    """CoM acceleration ``u * (r - cop) + (0, 0, -g)`` in m/s^2."""
    return control.stiffness * (state.position - control.cop) + constants.gravity_vector


def ground_reaction_force(
    state: PendulumState, control: ControlInput, constants: PhysicalConstants
) -> np.ndarray:
    """Contact force ``m * u * (r - cop)``; points from the CoP toward the CoM."""
    return constants.mass * control.stiffness * (state.position - control.cop)


def stiffness_from_force(
    force_magnitude: float,
    state: PendulumState,
    cop,
    constants: PhysicalConstants,
) -> float:
    """Normalized stiffness ``u = |f| / (m * |r - cop|)`` realizing a force magnitude.

    Round-trips with :func:`ground_reaction_force`.  Raises
    :class:`SingularStateError` when the CoM sits on the CoP.
    """
    if not (np.isfinite(force_magnitude) and force_magnitude >= 0.0):
        raise ValueError(f"force magnitude must be finite and >= 0, got {force_magnitude}")
    leg = state.position - as_vector3(cop, "cop")
    length = float(np.linalg.norm(leg))
    if length <= 1e-12:
        raise SingularStateError("CoM coincides with the CoP; stiffness is undefined")
    return float(force_magnitude) / (constants.mass * length)


def augmented_derivative(
    state: AugmentedState, control: ControlInput, constants: PhysicalConstants
) -> np.ndarray:
    """Time derivative of the 7 augmented states, ordered (T_g, r, r').

    Returns ``(-1 + T_g^2 u, velocity, com_acceleration)`` as a flat 7-vector.
    """
    tg = state.virtual_time
    u = control.stiffness
    out = np.empty(7)
    out[0] = -1.0 + tg * tg * u
    out[1:4] = state.pendulum.velocity
    out[4:7] = com_acceleration(state.pendulum, control, constants)
    return out


def planar_angular_momentum(state: PendulumState, cop) -> float:
    """Horizontal-plane angular momentum about the CoP, ``x*vy - y*vx``.

    Conserved by the dynamics for any stiffness profile when the CoP is held
    fixed; zero exactly when the CoP lies on the ballistic line.
    """
    cop = as_vector3(cop, "cop")
    rel = state.position - cop
    return float(rel[0] * state.velocity[1] - rel[1] * state.velocity[0])
