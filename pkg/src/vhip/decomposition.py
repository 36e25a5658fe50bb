"""Motion decomposition of the augmented pendulum.

With the virtual time ``T_g`` integrated alongside the physical state, the
7-state system splits into three cascaded subsystems:

* height strategy: ``(T_g, z_cg)`` with ``z_cg`` the *critical height*, the
  ballistic height at parameter ``T_g`` (the vertical coordinate of the
  critical ballistic point, CBP);
* CoP strategy: the horizontal generalized DCM ``dcm_xy = r_xy + v_xy T_g``,
  repelled from the CoP column;
* the CoM itself, which converges toward the DCM (the stable part).

The CBP stays meaningful only while its horizontal part is over the support
and its height is positive; pushes can break that, in which case the virtual
time is re-initialized from the current ballistic window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AugmentedState, ControlInput, PendulumState, PhysicalConstants
from .errors import NoValidVirtualTimeError, SingularStateError
from .geometry import ContactSurface, FootFrame, TauWindow, tau_window

#: default interpolation margin for virtual-time bounds
DEFAULT_MARGIN = 0.05


@dataclass(frozen=True, eq=False)
class DecompositionView:
    """Derived decomposition quantities at one instant.

    ``dcm`` is the generalized divergent component of motion
    ``r + v * T_g``; ``cbp`` the critical ballistic point, whose horizontal
    part equals the DCM's and whose height is ``critical_height``; ``vrp``
    the generalized virtual repellent point (CoP lifted by ``g/u``), absent
    when the stiffness is zero or unknown.
    """

    dcm: np.ndarray
    cbp: np.ndarray
    critical_height: float
    virtual_time: float
    vrp: Optional[np.ndarray] = None

    @property
    def dcm_xy(self) -> np.ndarray:
        return self.dcm[:2]

    @property
    def cbp_xy(self) -> np.ndarray:
        return self.cbp[:2]


def decompose(
    aug: AugmentedState,
    constants: PhysicalConstants,
    stiffness: Optional[float] = None,
    cop=None,
) -> DecompositionView:
    """Decomposition view of an augmented state.

    Pass the current stiffness and CoP to also obtain the repellent point.
    """
    tg = aug.virtual_time
    r = aug.pendulum.position
    v = aug.pendulum.velocity
    dcm = r + v * tg
    drop = 0.5 * constants.gravity * tg * tg
    critical_height = float(dcm[2] - drop)
    cbp = np.array([dcm[0], dcm[1], critical_height])
    vrp = None
    if stiffness is not None and stiffness > 0.0 and cop is not None:
        vrp = np.asarray(cop, dtype=float) + np.array(
            [0.0, 0.0, constants.gravity / stiffness]
        )
    return DecompositionView(dcm, cbp, critical_height, tg, vrp)


@dataclass(frozen=True)
class SubsystemDerivatives:
    """Time derivatives of the three decomposition subsystems."""

    virtual_time_rate: float
    critical_height_rate: float
    dcm_xy_rate: np.ndarray
    com_xy_rate: np.ndarray
    height_rate: float


def subsystem_derivatives(
    aug: AugmentedState, control: ControlInput, constants: PhysicalConstants
) -> SubsystemDerivatives:
    """Derivatives of (T_g, z_cg), dcm_xy, and the CoM, in the foot frame.

    Requires the CoP on the contact plane (height zero) and a nonzero
    virtual time; the CoM rates divide by ``T_g``.
    """
    tg = aug.virtual_time
    if tg == 0.0:
        raise SingularStateError("virtual time is zero; CoM tracking rates are undefined")
    view = decompose(aug, constants)
    u = control.stiffness
    g = constants.gravity
    drop = 0.5 * g * tg * tg
    r = aug.pendulum.position
    return SubsystemDerivatives(
        virtual_time_rate=-1.0 + tg * tg * u,
        critical_height_rate=u * tg * (view.critical_height - drop),
        dcm_xy_rate=u * tg * (view.dcm_xy - control.cop[:2]),
        com_xy_rate=(view.dcm_xy - r[:2]) / tg,
        height_rate=(view.critical_height + drop - r[2]) / tg,
    )


@dataclass(frozen=True)
class InitializationBounds:
    """Virtual-time window and its margin-shrunk bounds.

    ``tau_min``/``tau_max`` interpolate between the raw feasible bounds
    ``max(tau_enter, 0)`` and ``min(tau_exit, tau_ground)`` by the margin, so
    the initial CBP keeps a safety distance from the polygon boundary and
    from the ground crossing.
    """

    tau_enter: float
    tau_exit: float
    tau_ground: float
    tau_icp: float
    tau_min: float
    tau_max: float
    margin: float

    @classmethod
    def from_window(cls, window: TauWindow, margin: float) -> "InitializationBounds":
        lo = max(window.tau_enter, 0.0)
        hi = min(window.tau_exit, window.tau_ground)
        return cls(
            tau_enter=window.tau_enter,
            tau_exit=window.tau_exit,
            tau_ground=window.tau_ground,
            tau_icp=window.tau_icp,
            tau_min=margin * hi + (1.0 - margin) * lo,
            tau_max=(1.0 - margin) * hi + margin * lo,
            margin=margin,
        )


def initialize_virtual_time(
    state: PendulumState,
    surface: ContactSurface,
    constants: PhysicalConstants,
    margin: float = DEFAULT_MARGIN,
) -> tuple[float, InitializationBounds]:
    """Pick the initial virtual time: the ICP parameter, saturated inward.

    The ICP crossing time needs no height variation to stabilize, so it is
    the preferred value; when it falls outside the margin-shrunk feasible
    window it is clamped.  Raises :class:`NoValidVirtualTimeError` when the
    window is empty (state not 0-step capturable).
    """
    if not 0.0 <= margin < 0.5:
        raise ValueError(f"margin must be in [0, 0.5), got {margin}")
    frame = FootFrame.of_surface(surface)
    window = tau_window(frame.state_to(state), frame.surface_to(surface), constants)
    if window.empty:
        raise NoValidVirtualTimeError("ballistic line misses the support polygon")
    lo = max(window.tau_enter, 0.0)
    hi = min(window.tau_exit, window.tau_ground)
    if hi - lo <= 1e-9:
        raise NoValidVirtualTimeError(
            f"feasible virtual-time window ({lo:.4g}, {hi:.4g}) is empty"
        )
    bounds = InitializationBounds.from_window(window, margin)
    tg0 = min(max(window.tau_icp, bounds.tau_min), bounds.tau_max)
    return tg0, bounds


def reinitialize_after_push(
    aug: AugmentedState,
    surface: ContactSurface,
    constants: PhysicalConstants,
    margin: float = DEFAULT_MARGIN,
) -> tuple[AugmentedState, InitializationBounds]:
    """Re-pick the virtual time for the current (post-disturbance) state.

    The physical substate is untouched; only the virtual time changes.
    Raises :class:`NoValidVirtualTimeError` when the new state is not
    capturable.
    """
    tg, bounds = initialize_virtual_time(aug.pendulum, surface, constants, margin)
    return aug.with_virtual_time(tg), bounds


def cbp_valid(
    aug: AugmentedState,
    surface: ContactSurface,
    constants: PhysicalConstants,
    xy_margin: float = 1e-9,
    height_margin: float = 1e-9,
) -> bool:
    """Whether the critical ballistic point still permits feedback control.

    Requires the horizontal DCM strictly inside the support polygon and a
    positive critical height.  State and surface must share a frame with the
    contact plane horizontal.
    """
    view = decompose(aug, constants)
    if view.virtual_time <= 0.0:
        return False
    if view.critical_height <= height_margin:
        return False
    return surface.margin_xy(view.dcm_xy) >= xy_margin


def equilibrium_virtual_time(target_height: float, constants: PhysicalConstants) -> float:
    """Virtual time at the rest equilibrium for a given CoM height."""
    return math.sqrt(target_height / constants.gravity)
