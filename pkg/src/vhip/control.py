"""Feedback laws for push recovery.

Split per the motion decomposition: the stiffness input runs a height
strategy on ``(T_g, z_cg)`` (clipped orbital-energy law, optionally wrapped
by a saturation transform for bounded stiffness), while the CoP input steers
the horizontal DCM toward a target point with polygon saturation.  A
fixed-CoP controller reduces the 3D problem to the vertical plane through
the ballistic line and runs the same height law there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ControlInput, PendulumState, PhysicalConstants, as_vector3
from .decomposition import DecompositionView
from .errors import ControllerDomainError, InfeasibleCbpError, NotCapturableError
from .geometry import DEGENERATE_SPEED, ContactSurface

#: guard thresholds below which the height law refuses to divide
MIN_VIRTUAL_TIME = 1e-6
MIN_UPWARD_RATE = 1e-9

# critically-damped vertical PD used only in the resting-column special case
_VERTICAL_KP = 4.0
_VERTICAL_KD = 4.0


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    """Gains and targets shared by the bundled controllers.

    ``cop_gain_mode`` selects how the CoP feedback gain enters: ``"rate"``
    divides by ``u * T_g`` so the DCM decays toward the target at exactly
    ``cop_gain`` per second; ``"direct"`` applies the gain as a plain
    proportional offset.  ``stiffness_limit`` switches the height law to the
    saturated wrapper.  ``fixed_cop`` (world coordinates) pins the CoP for
    the fixed-CoP controller; when absent, the suggested fixed CoP of the
    capturability assessment is used.
    """

    target_height: float
    dcm_target: np.ndarray = None
    cop_gain: float = 0.5
    cop_gain_mode: str = "direct"
    stiffness_limit: Optional[float] = None
    margin: float = 0.05
    fixed_cop: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.target_height > 0.0 and np.isfinite(self.target_height)):
            raise ValueError(f"target_height must be positive, got {self.target_height}")
        target = np.zeros(2) if self.dcm_target is None else np.asarray(self.dcm_target, float)
        if target.shape != (2,) or not np.all(np.isfinite(target)):
            raise ValueError("dcm_target must be a finite XY point")
        object.__setattr__(self, "dcm_target", target)
        if not self.cop_gain > 0.0:
            raise ValueError(f"cop_gain must be positive, got {self.cop_gain}")
        if self.cop_gain_mode not in ("direct", "rate"):
            raise ValueError(f"unknown cop_gain_mode {self.cop_gain_mode!r}")
        if self.stiffness_limit is not None and not self.stiffness_limit > 0.0:
            raise ValueError(f"stiffness_limit must be positive, got {self.stiffness_limit}")
        if not 0.0 <= self.margin < 0.5:
            raise ValueError(f"margin must be in [0, 0.5), got {self.margin}")
        if self.fixed_cop is not None:
            object.__setattr__(self, "fixed_cop", as_vector3(self.fixed_cop, "fixed_cop"))


@dataclass(frozen=True)
class OrbitalEnergyTerms:
    """Coefficients (a, b) of the height law: ``a = -1/T_g`` is the inverse
    time scale and ``b = (z_cg + g T_g^2 / 2) / T_g`` the DCM height rate."""

    a: float
    b: float

    @classmethod
    def from_view(
        cls, view: DecompositionView, constants: PhysicalConstants
    ) -> "OrbitalEnergyTerms":
        tg = view.virtual_time
        if tg < MIN_VIRTUAL_TIME:
            raise ControllerDomainError(f"virtual time {tg:.3g} s is too small")
        b = (view.critical_height + 0.5 * constants.gravity * tg * tg) / tg
        return cls(a=-1.0 / tg, b=b)


def _orbital_energy(tg: float, critical_height: float, target_height: float, g: float) -> float:
    """Clipped orbital-energy stiffness on the (T_g, z_cg) subsystem."""
    if tg < MIN_VIRTUAL_TIME:
        raise ControllerDomainError(f"virtual time {tg:.3g} s is too small")
    a = -1.0 / tg
    b = (critical_height + 0.5 * g * tg * tg) / tg
    if b < MIN_UPWARD_RATE:
        raise ControllerDomainError(
            f"DCM height rate {b:.3g} m/s is not positive; state is outside the "
            "stabilizable set"
        )
    raw = -7.0 * a * a + (3.0 * target_height * a**3 - g * a) / b - 10.0 * a**3 * b / g
    return max(raw, 0.0)


def orbital_energy_stiffness(
    view: DecompositionView, config: ControllerConfig, constants: PhysicalConstants
) -> float:
    """Height-strategy stiffness; always nonnegative, unbounded above.

    At the rest equilibrium (``T_g = sqrt(z_f / g)``, ``z_cg = z_f / 2``) it
    returns exactly ``g / z_f``.
    """
    return _orbital_energy(
        view.virtual_time, view.critical_height, config.target_height, constants.gravity
    )


def normalized_orbital_energy(time_scale: float, critical_height: float, target_height: float) -> float:
    """Default inner law for the bounded wrapper, in units where g = 1."""
    if time_scale < MIN_VIRTUAL_TIME:
        raise ControllerDomainError(f"normalized time {time_scale:.3g} is too small")
    a = -1.0 / time_scale
    b = (critical_height + 0.5 * time_scale * time_scale) / time_scale
    if b < MIN_UPWARD_RATE:
        raise ControllerDomainError(f"normalized height rate {b:.3g} is not positive")
    return -7.0 * a * a + (3.0 * target_height * a**3 - a) / b - 10.0 * a**3 * b


def bounded_stiffness(
    view: DecompositionView,
    config: ControllerConfig,
    constants: PhysicalConstants,
    inner_law: Optional[Callable[[float, float, float], float]] = None,
) -> float:
    """Stiffness law honoring an upper bound ``u <= stiffness_limit``.

    Transforms the state into normalized units (gravity one, limit one),
    evaluates a pluggable normalized law there, clips it to [0, 1], and
    denormalizes.  The default inner law is the orbital-energy law, which
    makes this wrapper agree with :func:`orbital_energy_stiffness` whenever
    the unclipped value is below the limit.
    """
    limit = config.stiffness_limit
    if limit is None or not limit > 0.0:
        raise ValueError("bounded_stiffness requires a positive stiffness_limit")
    law = normalized_orbital_energy if inner_law is None else inner_law
    g = constants.gravity
    scale = math.sqrt(limit)
    time_scale = scale * view.virtual_time
    height = (limit / g) * view.critical_height
    target = (limit / g) * config.target_height
    raw = law(time_scale, height, target)
    return limit * min(max(raw, 0.0), 1.0)


def cop_command(
    view: DecompositionView,
    stiffness: float,
    config: ControllerConfig,
    surface: ContactSurface,
) -> np.ndarray:
    """CoP position steering the horizontal DCM toward the target.

    The command is ``dcm_xy + k * (dcm_xy - target)``; overshooting the CoP
    past the DCM pulls the DCM back toward the target.  When the nominal
    command leaves the polygon the gain is shrunk along the same ray to the
    boundary, preserving the decay direction.  Returns a foot-frame point
    (height zero).  Raises :class:`InfeasibleCbpError` when the DCM itself
    is outside the polygon.
    """
    xi = view.dcm_xy
    if surface.margin_xy(xi) < -1e-9:
        raise InfeasibleCbpError(
            f"horizontal DCM {xi} is outside the support polygon; re-initialize"
        )
    d = xi - config.dcm_target
    if float(np.hypot(d[0], d[1])) < 1e-12:
        return np.array([xi[0], xi[1], 0.0])
    if config.cop_gain_mode == "rate":
        k_eff = config.cop_gain / max(stiffness * view.virtual_time, 1e-9)
    else:
        k_eff = config.cop_gain
    clipped = surface.clip_line_xy(xi, d)
    if clipped is not None:
        k_eff = min(k_eff, max(clipped[1], 0.0))
    p = xi + k_eff * d
    return np.array([p[0], p[1], 0.0])


@dataclass(frozen=True, eq=False)
class PlanarReduction:
    """2D reduction of a fixed-CoP state into the ballistic plane.

    ``direction`` is the in-plane horizontal axis (unit XY vector along the
    CoM offset from the CoP), ``x``/``vx`` the reduced horizontal state,
    ``z``/``vz`` the height above the CoP.  ``scale`` is the lateral-over-
    sagittal ratio ``x0/y0`` of the original coordinates (None when the
    sagittal coordinate vanishes): the original axes evolve in lockstep with
    this constant ratio, which is what makes the 2D reduction exact.
    """

    direction: np.ndarray
    x: float
    z: float
    vx: float
    vz: float
    scale: Optional[float]


def planar_reduction(
    state: PendulumState, cop, constants: PhysicalConstants
) -> PlanarReduction:
    """Rotate a CoP-on-ballistic-line state into its vertical motion plane.

    Raises :class:`NotCapturableError` when the CoP is off the ballistic
    line (nonzero angular momentum about it): no fixed-CoP strategy can
    balance from there, and the motion is not planar.
    """
    cop = as_vector3(cop, "cop")
    rel = state.position - cop
    v = state.velocity
    speed_xy = float(np.hypot(v[0], v[1]))
    radius_xy = float(np.hypot(rel[0], rel[1]))
    w = rel[0] * v[1] - rel[1] * v[0]
    if speed_xy < DEGENERATE_SPEED:
        if radius_xy > 1e-9:
            raise NotCapturableError(
                "CoM at rest horizontally but not above the CoP; the degenerate "
                "ballistic line misses the CoP"
            )
        direction = np.array([1.0, 0.0])
    elif abs(w) > 1e-9 * radius_xy * speed_xy + 1e-15:
        raise NotCapturableError(
            f"CoP is off the ballistic line (angular momentum {w:.3g} m^2/s)"
        )
    elif radius_xy > 1e-12:
        direction = np.array([rel[0], rel[1]]) / radius_xy
    else:
        direction = np.array([v[0], v[1]]) / speed_xy
    x = float(rel[0] * direction[0] + rel[1] * direction[1])
    vx = float(v[0] * direction[0] + v[1] * direction[1])
    scale = None if abs(rel[1]) < 1e-12 else float(rel[0] / rel[1])
    return PlanarReduction(direction, x, float(rel[2]), vx, float(v[2]), scale)


def fixed_cop_control(
    state: PendulumState, cop, config: ControllerConfig, constants: PhysicalConstants
) -> ControlInput:
    """Height law applied in the ballistic plane, CoP held fixed.

    The reduced time-to-CoP and ballistic intercept must both be positive
    (otherwise the state is not capturable with this CoP and
    :class:`NotCapturableError` is raised).  Directly above the CoP with no
    horizontal motion the problem is purely vertical and a critically damped
    vertical law holds the CoM at the target height.
    """
    cop = as_vector3(cop, "cop")
    red = planar_reduction(state, cop, constants)
    g = constants.gravity
    if abs(red.x) <= 1e-9 and abs(red.vx) <= 1e-9:
        if red.z <= 1e-6:
            raise NotCapturableError(f"CoM height above the CoP is {red.z:.3g} m")
        u = (
            g
            - _VERTICAL_KP * (red.z - config.target_height)
            - _VERTICAL_KD * red.vz
        ) / red.z
        return ControlInput(max(u, 0.0), cop)
    if abs(red.vx) < 1e-12:
        raise NotCapturableError("CoM is horizontally stationary away from the CoP")
    time_to_cop = -red.x / red.vx
    if time_to_cop <= 0.0:
        raise NotCapturableError(
            f"CoM moves away from the CoP (time to CoP {time_to_cop:.3g} s)"
        )
    intercept = red.z + red.vz * time_to_cop - 0.5 * g * time_to_cop * time_to_cop
    if intercept <= 0.0:
        raise NotCapturableError(
            f"ballistic intercept above the CoP is {intercept:.3g} m"
        )
    u = _orbital_energy(time_to_cop, intercept, config.target_height, g)
    return ControlInput(u, cop)
