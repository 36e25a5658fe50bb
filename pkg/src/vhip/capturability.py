"""0-step capturability tests for fixed and variable CoP.

Two independent routes decide capturability:

* the *constructive* route (:func:`assess_zero_step`): clip the ballistic
  line against the support polygon and intersect with the interval where the
  ballistic trajectory is still above the contact plane.  The state is
  capturable iff the resulting open interval is nonempty; any point of it is
  a feasible fixed CoP.

* the *obstruction* route (:func:`separation_certificate`): search for a
  plane with the support polygon strictly above it and the free-fall
  parabola strictly below.  Such a plane is an invariant-set witness that no
  admissible control (any ``u >= 0``, any CoP on the surface) can ever bring
  the CoM to rest over the support.

For any state exactly one of the two succeeds; tests exercise the dichotomy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import PendulumState, PhysicalConstants, as_vector3, planar_angular_momentum
from .errors import DegenerateStateError
from .geometry import (
    DEGENERATE_SPEED,
    ContactSurface,
    FootFrame,
    TauWindow,
    tau_window,
)

#: failure tags reported by :func:`assess_zero_step`
MISSES_LINE = "misses-ballistic-line"
ABOVE_TRAJECTORY = "above-ballistic-trajectory"
BEHIND_PUSH = "behind-push"
BOUNDED_SHIFT = "bounded-u-shifted"

#: minimum feasible-interval length counted as capturable, in seconds
INTERVAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CaptureAssessment:
    """Verdict of a 0-step capturability test with window diagnostics.

    ``feasible_interval`` is the open interval of ballistic-line parameters
    at which a CoP may be fixed (already restricted by the stiffness limit
    when one was given); ``suggested_cop`` is the surface point at its
    midpoint, in world coordinates.  ``failure_reasons`` is empty iff
    capturable.
    """

    capturable: bool
    window: TauWindow
    feasible_interval: Optional[tuple[float, float]]
    suggested_cop: Optional[np.ndarray]
    failure_reasons: frozenset[str]
    stiffness_limit: Optional[float] = None

    def as_dict(self) -> dict:
        w = self.window
        return {
            "capturable": self.capturable,
            "tau_enter": None if w.empty else w.tau_enter,
            "tau_exit": None if w.empty else w.tau_exit,
            "tau_ground": w.tau_ground,
            "tau_icp": w.tau_icp,
            "feasible_interval": None
            if self.feasible_interval is None
            else list(self.feasible_interval),
            "suggested_cop": None if self.suggested_cop is None else self.suggested_cop.tolist(),
            "failure_reasons": sorted(self.failure_reasons),
            "stiffness_limit": self.stiffness_limit,
        }


def assess_zero_step(
    state: PendulumState,
    surface: ContactSurface,
    constants: PhysicalConstants,
    stiffness_limit: Optional[float] = None,
) -> CaptureAssessment:
    """Exact 0-step capturability verdict for a variable CoP.

    Unbounded stiffness: capturable iff some ballistic-line parameter lies
    both inside the polygon crossing window and before the trajectory's
    ground crossing.  With a stiffness limit ``u <= M`` the interval is
    further restricted to ``tau > 1/sqrt(M)`` and to parameters where the
    ballistic height still exceeds ``g / (2M)`` (the shifted-trajectory
    conditions).  Intervals shorter than ``INTERVAL_TOL`` do not count.
    """
    frame = FootFrame.of_surface(surface)
    s = frame.state_to(state)
    surf = frame.surface_to(surface)
    window = tau_window(s, surf, constants)
    g = constants.gravity
    z, vz = s.position[2], s.velocity[2]

    reasons: set[str] = set()
    interval: Optional[tuple[float, float]] = None
    if window.empty:
        reasons.add(MISSES_LINE)
    else:
        lo = max(window.tau_enter, 0.0)
        hi = min(window.tau_exit, window.tau_ground)
        if window.tau_exit <= INTERVAL_TOL:
            reasons.add(BEHIND_PUSH)
        elif window.tau_enter >= window.tau_ground - INTERVAL_TOL:
            reasons.add(ABOVE_TRAJECTORY)
        elif hi - lo <= INTERVAL_TOL:
            reasons.add(MISSES_LINE)  # tangential graze of the polygon
        else:
            interval = (lo, hi)

    if interval is not None and stiffness_limit is not None:
        if not stiffness_limit > 0.0:
            raise ValueError(f"stiffness_limit must be positive, got {stiffness_limit}")
        tau_floor = 1.0 / math.sqrt(stiffness_limit)
        height_floor = g / (2.0 * stiffness_limit)
        # parameters where the ballistic height exceeds the shifted floor
        disc = vz * vz + 2.0 * g * (z - height_floor)
        if disc <= 0.0:
            interval = None
        else:
            root = math.sqrt(disc)
            shifted_lo = (vz - root) / g
            shifted_hi = (vz + root) / g
            blo = max(interval[0], tau_floor, shifted_lo)
            bhi = min(interval[1], shifted_hi)
            interval = (blo, bhi) if bhi - blo > INTERVAL_TOL else None
        if interval is None:
            reasons.add(BOUNDED_SHIFT)

    capturable = interval is not None
    suggested = None
    if capturable:
        tau_mid = 0.5 * (interval[0] + interval[1])
        xy = s.position[:2] + s.velocity[:2] * tau_mid
        suggested = frame.point_from(np.array([xy[0], xy[1], 0.0]))
    return CaptureAssessment(
        capturable=capturable,
        window=window,
        feasible_interval=interval,
        suggested_cop=suggested,
        failure_reasons=frozenset(reasons),
        stiffness_limit=stiffness_limit,
    )


@dataclass(frozen=True)
class FixedCopDiagnostics:
    """Point-foot capturability data for one candidate CoP.

    ``angular_momentum`` is the horizontal-plane angular momentum about the
    CoP (zero iff the CoP sits on the ballistic line); ``time_to_cop`` is the
    ballistic-line parameter at which the CoM passes over the CoP, and
    ``intercept_height`` the ballistic height above the CoP at that moment.
    The triple (on line, positive time, positive height) decides
    capturability with this CoP held fixed.
    """

    angular_momentum: float
    time_to_cop: float
    intercept_height: float
    on_line: bool
    capturable: bool


def fixed_cop_diagnostics(
    state: PendulumState, cop, constants: PhysicalConstants
) -> FixedCopDiagnostics:
    """Capturability diagnostics for a CoP held fixed at ``cop``.

    With vanishing horizontal velocity the ballistic line degenerates to a
    point; the state is then capturable iff the CoM sits directly above the
    CoP (conventionally ``time_to_cop = inf``).
    """
    cop = as_vector3(cop, "cop")
    w = planar_angular_momentum(state, cop)
    rel = state.position - cop
    v = state.velocity
    speed_xy = float(np.hypot(v[0], v[1]))
    radius_xy = float(np.hypot(rel[0], rel[1]))
    if speed_xy < DEGENERATE_SPEED:
        above = radius_xy <= 1e-9
        capturable = above and rel[2] > 0.0
        return FixedCopDiagnostics(
            angular_momentum=w,
            time_to_cop=math.inf if capturable else math.nan,
            intercept_height=rel[2] if capturable else math.nan,
            on_line=above,
            capturable=capturable,
        )
    on_line = abs(w) <= 1e-9 * radius_xy * speed_xy + 1e-15
    if not on_line:
        return FixedCopDiagnostics(w, math.nan, math.nan, False, False)
    # in-plane axis along the CoM offset (fall back to the velocity when the
    # CoM is directly above the CoP)
    if radius_xy > 1e-12:
        axis = np.array([rel[0], rel[1]]) / radius_xy
    else:
        axis = np.array([v[0], v[1]]) / speed_xy
    x = rel[0] * axis[0] + rel[1] * axis[1]
    vx = v[0] * axis[0] + v[1] * axis[1]
    time_to_cop = -x / vx
    g = constants.gravity
    intercept = rel[2] + v[2] * time_to_cop - 0.5 * g * time_to_cop * time_to_cop
    capturable = time_to_cop > 0.0 and intercept > 0.0
    return FixedCopDiagnostics(w, time_to_cop, intercept, True, capturable)


def fixed_cop_capture_segment(
    state: PendulumState, surface: ContactSurface, constants: PhysicalConstants
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Endpoints of the 1D fixed-CoP capture region on the surface.

    The capture region of a fixed CoP is the piece of the ballistic line on
    the contact plane whose parameters are feasible; it is returned as its
    two endpoint positions in world coordinates, or None when the state is
    not capturable.  With vanishing horizontal velocity the segment
    degenerates to the CoM's projection onto the plane.
    """
    assessment = assess_zero_step(state, surface, constants)
    if not assessment.capturable:
        return None
    frame = FootFrame.of_surface(surface)
    s = frame.state_to(state)
    lo, hi = assessment.feasible_interval
    points = []
    for tau in (lo, hi):
        xy = s.position[:2] + s.velocity[:2] * tau
        points.append(frame.point_from(np.array([xy[0], xy[1], 0.0])))
    return points[0], points[1]


@dataclass(frozen=True, eq=False)
class SeparationCertificate:
    """Plane separating the support polygon from the free-fall trajectory.

    The plane is ``{p : normal . p = offset}`` with ``normal = (-a, -b, 1)``.
    Validity requires every surface vertex strictly above it
    (``normal . p > offset``) and the forward free-fall trajectory strictly
    below, i.e. ``initial_peak_gap < 0`` where the peak gap

        com_gap + max(normal . v, 0)^2 / (2 g)

    is the largest plane clearance the trajectory from ``(r, v)`` will ever
    reach (the parabola apex when moving toward the plane, the current
    clearance when receding; supports behind the push sit under the
    *backward* extension of the parabola, which is why the one-sided form is
    the right one).  A valid certificate proves the state is not 0-step
    capturable under any admissible control.
    """

    normal: np.ndarray
    offset: float
    initial_com_gap: float
    initial_peak_gap: float

    def as_dict(self) -> dict:
        return {
            "normal": self.normal.tolist(),
            "offset": self.offset,
            "initial_com_gap": self.initial_com_gap,
            "initial_peak_gap": self.initial_peak_gap,
        }

    def com_gap(self, position) -> float:
        """Signed plane clearance of a CoM position (negative below)."""
        return float(self.normal @ as_vector3(position, "position") - self.offset)

    def peak_gap(self, position, velocity, constants: PhysicalConstants) -> float:
        """Largest plane clearance reachable by free fall from this state."""
        rate = max(float(self.normal @ as_vector3(velocity, "velocity")), 0.0)
        return self.com_gap(position) + rate * rate / (2.0 * constants.gravity)


def _slope_gap(ab: np.ndarray, vertices: np.ndarray, r0: np.ndarray, v0: np.ndarray, g: float):
    """Separation slack of plane slopes ``ab``; positive means a plane exists.

    For slopes (a, b) the best offset splits the gap between the lowest
    vertex clearance and the forward trajectory's peak term; the slack is
    their difference.  Concave in (a, b) (min of affines minus a convex
    positive-part square), so 1D restrictions are unimodal.
    """
    a = ab[..., 0]
    b = ab[..., 1]
    vert_term = (
        vertices[:, 2]
        - np.multiply.outer(a, vertices[:, 0])
        - np.multiply.outer(b, vertices[:, 1])
    )
    c_upper = vert_term.min(axis=-1)
    com = r0[2] - a * r0[0] - b * r0[1]
    rate = np.maximum(v0[2] - a * v0[0] - b * v0[1], 0.0)
    peak = com + rate * rate / (2.0 * g)
    return c_upper - peak


def _ray_maxima(gap, dirs: np.ndarray, magnitude_cap: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-direction maximum of the slack along rays ``s * dir``, s >= 0.

    The slack restricted to a ray is concave (min of affine terms minus a
    convex quadratic), so ternary search is exact.
    """
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), magnitude_cap)
    for _ in range(70):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        left = gap(m1[:, None] * dirs)
        right = gap(m2[:, None] * dirs)
        take = left < right
        lo = np.where(take, m1, lo)
        hi = np.where(take, hi, m2)
    s = 0.5 * (lo + hi)
    return s, gap(s[:, None] * dirs)


def separation_certificate(
    state: PendulumState,
    surface: ContactSurface,
    constants: PhysicalConstants,
    n_directions: int = 720,
    magnitude_cap: float = 1e6,
) -> Optional[SeparationCertificate]:
    """Search for a plane certifying that the state is not 0-step capturable.

    The slope plane is swept in polar form: for each slope direction the
    optimal magnitude is found by exact 1D concave maximization, and the
    best direction is refined locally (supports close to the ballistic line
    need very steep planes in a narrow direction cone, so a bounded
    cartesian grid would miss them).  The returned certificate is verified
    exactly; None means no separating plane was found (for a capturable
    state none exists).
    """
    vertices = surface.vertices
    r0, v0 = state.position, state.velocity
    g = constants.gravity

    def gap(ab):
        with np.errstate(over="ignore", invalid="ignore"):
            out = _slope_gap(np.asarray(ab, dtype=float), vertices, r0, v0, g)
        return np.where(np.isfinite(out), out, -np.inf)

    thetas = np.linspace(0.0, 2.0 * np.pi, n_directions, endpoint=False)
    dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    mags, vals = _ray_maxima(gap, dirs, magnitude_cap)
    j = int(np.argmax(vals))
    best = mags[j] * dirs[j]
    best_val = float(vals[j])
    flat = float(gap(np.zeros((1, 2)))[0])  # horizontal plane candidate
    if flat > best_val:
        best, best_val = np.zeros(2), flat

    if best_val < 1.0:
        # golden-section refinement of the direction around the best ray
        spacing = 2.0 * np.pi / n_directions
        lo_t, hi_t = thetas[j] - 2.0 * spacing, thetas[j] + 2.0 * spacing
        phi = 0.5 * (np.sqrt(5.0) - 1.0)
        for _ in range(40):
            t1 = hi_t - phi * (hi_t - lo_t)
            t2 = lo_t + phi * (hi_t - lo_t)
            d12 = np.array([[np.cos(t1), np.sin(t1)], [np.cos(t2), np.sin(t2)]])
            m12, v12 = _ray_maxima(gap, d12, magnitude_cap)
            if v12[0] < v12[1]:
                lo_t = t1
                cand, cand_val = m12[1] * d12[1], float(v12[1])
            else:
                hi_t = t2
                cand, cand_val = m12[0] * d12[0], float(v12[0])
            if cand_val > best_val:
                best, best_val = cand, cand_val

    if best_val <= 2e-9 or not np.all(np.isfinite(best)):
        return None
    a, b = best
    normal = np.array([-a, -b, 1.0])
    com = float(normal @ r0)
    rate = max(float(normal @ v0), 0.0)
    peak = com + rate * rate / (2.0 * g)
    c_upper = float(np.min(vertices @ normal))
    offset = 0.5 * (peak + c_upper)
    # exact validity check; never report an unverified plane
    if not (c_upper - offset > 0.0 and peak - offset < 0.0):
        return None
    return SeparationCertificate(
        normal=normal,
        offset=offset,
        initial_com_gap=com - offset,
        initial_peak_gap=peak - offset,
    )


@dataclass(frozen=True, eq=False)
class CertificateMonitor:
    """Invariant check of a separation certificate along a trajectory.

    ``com_gap`` samples the CoM's plane clearance; it must stay negative
    forever (the CoM can never cross the plane, hence never rest over the
    support).  ``peak_gap`` samples the forward peak clearance
    ``com_gap + max(rate, 0)^2 / (2g)``, which no admissible control can
    drive above its running history while below the plane; it must stay
    negative as well.  ``approaching`` marks samples moving toward the
    plane, where the peak bound is the parabola apex rather than the
    current clearance.
    """

    times: np.ndarray
    com_gap: np.ndarray
    peak_gap: np.ndarray
    approaching: np.ndarray
    ok: bool


def certificate_monitor(
    certificate: SeparationCertificate,
    times,
    positions,
    velocities,
    constants: PhysicalConstants,
    tol: float = 1e-9,
) -> CertificateMonitor:
    """Evaluate certificate invariants at trajectory samples.

    ``positions``/``velocities`` are (n, 3) arrays.  The monitor passes when
    neither the CoM clearance nor the forward peak clearance ever crosses
    from negative to positive.
    """
    times = np.asarray(times, dtype=float)
    pos = np.asarray(positions, dtype=float)
    vel = np.asarray(velocities, dtype=float)
    n = certificate.normal
    com_gap = pos @ n - certificate.offset
    rate = vel @ n
    forward = np.maximum(rate, 0.0)
    peak_gap = com_gap + forward * forward / (2.0 * constants.gravity)
    approaching = rate >= 0.0
    ok = bool(np.all(com_gap < tol) and np.all(peak_gap < tol))
    return CertificateMonitor(times, com_gap, peak_gap, approaching, ok)


def sweep_admissible_policies(
    state: PendulumState,
    surface: ContactSurface,
    constants: PhysicalConstants,
    certificate: SeparationCertificate,
    n_policies: int = 100,
    horizon: float = 1.5,
    step: float = 1e-3,
    max_stiffness: float = 20.0,
    seed: int = 0,
) -> CertificateMonitor:
    """Stress a certificate with random piecewise-constant admissible policies.

    Each policy redraws a stiffness in ``[0, max_stiffness]`` and a CoP on
    the surface every 50-300 ticks; all policies integrate in one vectorized
    RK4 batch.  Returns a pooled monitor whose rows are the worst gaps over
    time per policy.
    """
    rng = np.random.default_rng(seed)
    n_ticks = int(round(horizon / step))
    segment = rng.integers(50, 301, size=n_policies)
    n_segments = int(np.ceil(n_ticks / segment.min())) + 1
    u_segments = rng.uniform(0.0, max_stiffness, size=(n_policies, n_segments))
    weights = rng.dirichlet(np.ones(len(surface.vertices)), size=(n_policies, n_segments))
    cop_segments = weights @ surface.vertices

    r = np.tile(state.position, (n_policies, 1))
    v = np.tile(state.velocity, (n_policies, 1))
    gvec = constants.gravity_vector
    g = constants.gravity
    n = certificate.normal
    rows = np.arange(n_policies)

    worst_com = np.full(n_policies, -np.inf)
    worst_peak = np.full(n_policies, -np.inf)
    for i in range(n_ticks):
        seg_idx = np.minimum(i // segment, n_segments - 1)
        u = u_segments[rows, seg_idx][:, None]
        cop = cop_segments[rows, seg_idx]

        def deriv(r_, v_):
            return v_, u * (r_ - cop) + gvec

        k1r, k1v = deriv(r, v)
        k2r, k2v = deriv(r + 0.5 * step * k1r, v + 0.5 * step * k1v)
        k3r, k3v = deriv(r + 0.5 * step * k2r, v + 0.5 * step * k2v)
        k4r, k4v = deriv(r + step * k3r, v + step * k3v)
        r = r + (step / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        v = v + (step / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

        com_gap = r @ n - certificate.offset
        rate = np.maximum(v @ n, 0.0)
        peak_gap = com_gap + rate * rate / (2.0 * g)
        worst_com = np.maximum(worst_com, com_gap)
        worst_peak = np.maximum(worst_peak, peak_gap)

    ok = bool(np.all(worst_com < 1e-9) and np.all(worst_peak < 1e-9))
    times = np.arange(n_policies, dtype=float)  # one pooled row per policy
    return CertificateMonitor(times, worst_com, worst_peak, worst_peak > worst_com, ok)
