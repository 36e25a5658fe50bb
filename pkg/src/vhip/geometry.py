"""Contact-surface geometry, instantaneous curves, and foot-frame normalization.

A contact surface is an oriented convex planar polygon of admissible CoP
locations.  Its *foot frame* is the linear change of variable

    z_r = (n . r - c) / n_z        (x, y unchanged)

which maps the surface plane to ``z_r = 0`` while preserving the form of the
pendulum dynamics.  All capturability and control machinery works in this
frame; results transform back exactly.

Instantaneous curves from a state ``(r, v)``, parametrized by ``tau >= 0``:

* ballistic trajectory (IBT):  ``r + v tau - (0,0,g/2) tau^2`` (free fall),
* instantaneous capture curve (ICC): same with a full ``g tau^2`` drop; its
  ground crossing is the classical instantaneous capture point (ICP),
* instantaneous divergent curve (IDC): the straight ray ``r + v tau``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import PendulumState, PhysicalConstants, as_vector3
from .errors import DegenerateStateError, UnsupportedOrientationError

#: horizontal speed below which the ballistic line degenerates to a point
DEGENERATE_SPEED = 1e-9

#: signed-distance tolerance for "inside the polygon"
INSIDE_TOL = 1e-9

_COPLANAR_TOL = 1e-9


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n <= 1e-12:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def _polygon_area_xy(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class ContactSurface:
    """Oriented convex planar polygon of admissible CoP positions.

    ``vertices`` is an (n, 3) array in counterclockwise order when viewed
    from the positive normal side; ``normal`` is the unit plane normal with
    positive vertical component, and ``offset`` satisfies
    ``normal . p == offset`` for every point ``p`` of the plane.

    Constructors normalize vertex order and reject vertical, non-planar, or
    non-convex inputs.  The XY projection of the polygon (used for all CoP
    feasibility tests, since the foot frame keeps x and y) is cached as
    half-space rows ``a . p <= b`` with unit-norm ``a``.
    """

    vertices: np.ndarray
    normal: np.ndarray
    offset: float
    _edge_normals: np.ndarray = None
    _edge_offsets: np.ndarray = None

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 3:
            raise ValueError("vertices must be an (n, 3) array with n >= 3")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertices must be finite")
        normal = _unit(as_vector3(self.normal, "normal"))
        if normal[2] < 1e-6:
            raise UnsupportedOrientationError(
                f"surface normal {normal} is vertical or downward-facing"
            )
        heights = verts @ normal - self.offset
        if np.max(np.abs(heights)) > _COPLANAR_TOL:
            raise ValueError(
                f"vertices deviate from the surface plane by {np.max(np.abs(heights)):.2e} m"
            )
        xy = verts[:, :2]
        if _polygon_area_xy(xy) < 0.0:
            verts = verts[::-1].copy()
            xy = verts[:, :2]
        edges = np.roll(xy, -1, axis=0) - xy
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(
            edges, -1, axis=0
        )[:, 0]
        scale = max(float(np.abs(xy).max()), 1.0)
        if np.any(cross <= 1e-12 * scale * scale):
            raise ValueError("polygon must be strictly convex with CCW-orderable vertices")
        # outward edge normals of the CCW XY projection
        edge_normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        edge_normals /= np.linalg.norm(edge_normals, axis=1, keepdims=True)
        edge_offsets = np.sum(edge_normals * xy, axis=1)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "_edge_normals", edge_normals)
        object.__setattr__(self, "_edge_offsets", edge_offsets)

    @classmethod
    def from_vertices(cls, vertices) -> "ContactSurface":
        """Build a surface from coplanar 3D vertices; the plane is fitted exactly."""
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 3:
            raise ValueError("vertices must be an (n, 3) array with n >= 3")
        # Newell's method gives a robust plane normal for near-coplanar input
        nxt = np.roll(verts, -1, axis=0)
        normal = np.array(
            [
                np.sum((verts[:, 1] - nxt[:, 1]) * (verts[:, 2] + nxt[:, 2])),
                np.sum((verts[:, 2] - nxt[:, 2]) * (verts[:, 0] + nxt[:, 0])),
                np.sum((verts[:, 0] - nxt[:, 0]) * (verts[:, 1] + nxt[:, 1])),
            ]
        )
        normal = _unit(normal)
        if normal[2] < 0.0:
            normal = -normal
        offset = float(np.mean(verts @ normal))
        return cls(verts, normal, offset)

    @classmethod
    def rectangle(
        cls, center, half_extents, normal=(0.0, 0.0, 1.0), yaw: float = 0.0
    ) -> "ContactSurface":
        """Rectangular surface from center, in-plane half extents, normal, and yaw."""
        center = as_vector3(center, "center")
        normal = _unit(as_vector3(normal, "normal"))
        hx, hy = float(half_extents[0]), float(half_extents[1])
        if hx <= 0.0 or hy <= 0.0:
            raise ValueError("half_extents must be positive")
        if abs(normal[2]) < 1e-6:
            raise UnsupportedOrientationError("rectangle normal may not be horizontal")
        t1 = np.array([1.0, 0.0, 0.0]) - normal[0] * normal
        t1 = _unit(t1)
        t2 = np.cross(normal, t1)
        c, s = np.cos(yaw), np.sin(yaw)
        u1 = c * t1 + s * t2
        u2 = -s * t1 + c * t2
        corners = [
            center + hx * u1 + hy * u2,
            center - hx * u1 + hy * u2,
            center - hx * u1 - hy * u2,
            center + hx * u1 - hy * u2,
        ]
        return cls.from_vertices(np.array(corners))

    @property
    def vertices_xy(self) -> np.ndarray:
        return self.vertices[:, :2]

    @property
    def centroid(self) -> np.ndarray:
        """Vertex centroid, a point on the surface."""
        return self.vertices.mean(axis=0)

    def margin_xy(self, point_xy) -> float:
        """Signed inward distance of an XY point; positive inside the polygon."""
        p = np.asarray(point_xy, dtype=float)[:2]
        return float(np.min(self._edge_offsets - self._edge_normals @ p))

    def contains_xy(self, point_xy, tol: float = INSIDE_TOL) -> bool:
        return self.margin_xy(point_xy) >= -tol

    def clip_line_xy(self, origin_xy, direction_xy) -> Optional[tuple[float, float]]:
        """Clip the full line ``origin + t * direction`` against the XY polygon.

        Returns the parameter interval ``(t_enter, t_exit)`` or None when the
        line misses the polygon.  The direction need not be normalized.
        """
        p = np.asarray(origin_xy, dtype=float)[:2]
        d = np.asarray(direction_xy, dtype=float)[:2]
        num = self._edge_offsets - self._edge_normals @ p
        den = self._edge_normals @ d
        t_lo, t_hi = -np.inf, np.inf
        for ni, di in zip(num, den):
            if abs(di) <= 1e-15:
                if ni < -INSIDE_TOL:
                    return None
                continue
            t = ni / di
            if di > 0.0:
                t_hi = min(t_hi, t)
            else:
                t_lo = max(t_lo, t)
        if t_lo > t_hi:
            return None
        return float(t_lo), float(t_hi)

    def nearest_point_xy(self, point_xy) -> np.ndarray:
        """Closest point of the closed XY polygon to an XY point."""
        p = np.asarray(point_xy, dtype=float)[:2]
        if self.contains_xy(p, tol=0.0):
            return p.copy()
        best, best_d2 = None, np.inf
        xy = self.vertices_xy
        for i in range(len(xy)):
            a, b = xy[i], xy[(i + 1) % len(xy)]
            ab = b - a
            t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
            q = a + t * ab
            d2 = float(np.sum((p - q) ** 2))
            if d2 < best_d2:
                best, best_d2 = q, d2
        return best

    def lift_xy(self, point_xy) -> np.ndarray:
        """3D surface point with the given XY coordinates."""
        p = np.asarray(point_xy, dtype=float)[:2]
        n = self.normal
        z = (self.offset - n[0] * p[0] - n[1] * p[1]) / n[2]
        return np.array([p[0], p[1], z])


@dataclass(frozen=True, eq=False)
class FootFrame:
    """Shear transform flattening a tilted contact plane to ``z_r = 0``.

    Keeps x and y, replaces the vertical coordinate by
    ``z_r = (n . r - c) / n_z``.  The pendulum dynamics keep their form with
    the CoP at height zero, free fall maps to free fall, and vertical lines
    map to vertical lines, so capturability verdicts are frame-invariant.
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = _unit(as_vector3(self.normal, "normal"))
        if normal[2] < 1e-6:
            raise UnsupportedOrientationError(
                f"cannot build a foot frame for normal {normal}"
            )
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def of_surface(cls, surface: ContactSurface) -> "FootFrame":
        return cls(surface.normal, surface.offset)

    @property
    def scale(self) -> float:
        """Height scaling 1 / (n . e_z); equals 1 for a horizontal surface."""
        return 1.0 / float(self.normal[2])

    @property
    def is_identity(self) -> bool:
        return (
            self.normal[0] == 0.0
            and self.normal[1] == 0.0
            and self.normal[2] == 1.0
            and self.offset == 0.0
        )

    def point_to(self, point) -> np.ndarray:
        if self.is_identity:
            return as_vector3(point, "point").copy()
        p = as_vector3(point, "point")
        n = self.normal
        z_r = (p @ n - self.offset) / n[2]
        return np.array([p[0], p[1], z_r])

    def point_from(self, point) -> np.ndarray:
        if self.is_identity:
            return as_vector3(point, "point").copy()
        q = as_vector3(point, "point")
        n = self.normal
        z = q[2] + (self.offset - n[0] * q[0] - n[1] * q[1]) / n[2]
        return np.array([q[0], q[1], z])

    def velocity_to(self, velocity) -> np.ndarray:
        if self.is_identity:
            return as_vector3(velocity, "velocity").copy()
        v = as_vector3(velocity, "velocity")
        n = self.normal
        return np.array([v[0], v[1], (v @ n) / n[2]])

    def velocity_from(self, velocity) -> np.ndarray:
        if self.is_identity:
            return as_vector3(velocity, "velocity").copy()
        w = as_vector3(velocity, "velocity")
        n = self.normal
        return np.array([w[0], w[1], w[2] - (n[0] * w[0] + n[1] * w[1]) / n[2]])

    def state_to(self, state: PendulumState) -> PendulumState:
        return PendulumState(self.point_to(state.position), self.velocity_to(state.velocity))

    def state_from(self, state: PendulumState) -> PendulumState:
        return PendulumState(self.point_from(state.position), self.velocity_from(state.velocity))

    def surface_to(self, surface: ContactSurface) -> ContactSurface:
        """The surface expressed in this frame: same XY, exactly at height 0."""
        if self.is_identity:
            return surface
        xy = surface.vertices_xy
        flat = np.column_stack([xy, np.zeros(len(xy))])
        return ContactSurface(flat, np.array([0.0, 0.0, 1.0]), 0.0)


def foot_frame(surface: ContactSurface) -> FootFrame:
    """Foot frame of a contact surface."""
    return FootFrame.of_surface(surface)


def ballistic_point(state: PendulumState, tau: float, constants: PhysicalConstants) -> np.ndarray:
    """Point of the free-fall trajectory at curve parameter ``tau``."""
    out = state.position + state.velocity * tau
    out = out.copy()
    out[2] -= 0.5 * constants.gravity * tau * tau
    return out


def icc_point(state: PendulumState, tau: float, constants: PhysicalConstants) -> np.ndarray:
    """Point of the instantaneous capture curve at parameter ``tau``."""
    out = (state.position + state.velocity * tau).copy()
    out[2] -= constants.gravity * tau * tau
    return out


def idc_point(state: PendulumState, tau: float) -> np.ndarray:
    """Point of the instantaneous divergent curve (straight ray) at ``tau``."""
    return state.position + state.velocity * tau


def _positive_root(coef: float, vz: float, z: float) -> float:
    """Unique positive root of ``z + vz*tau - coef*tau^2`` for z > 0, coef > 0."""
    disc = vz * vz + 4.0 * coef * z
    return (vz + np.sqrt(disc)) / (2.0 * coef)


@dataclass(frozen=True)
class TauWindow:
    """Ballistic-line crossing of the support polygon, in curve parameter ``tau``.

    ``tau_enter``/``tau_exit`` bound the full line's intersection with the XY
    polygon (they may be negative for a support behind the motion);
    ``tau_ground`` is where the ballistic trajectory reaches the contact
    plane, ``tau_icp`` where the capture curve does.  ``empty`` flags a line
    that misses the polygon entirely.  When the horizontal velocity vanishes
    the line degenerates to a point and the window is ``[0, tau_ground]`` if
    the CoM projects inside the polygon, empty otherwise.
    """

    tau_enter: float
    tau_exit: float
    tau_ground: float
    tau_icp: float
    empty: bool


def tau_window(
    state: PendulumState, surface: ContactSurface, constants: PhysicalConstants
) -> TauWindow:
    """Crossing window of the ballistic line through a foot-frame surface.

    Both arguments must be expressed in the surface's foot frame (contact
    plane at height zero).  Raises :class:`DegenerateStateError` if the CoM
    is at or below the plane.
    """
    x, y, z = state.position
    vx, vy, vz = state.velocity
    if z <= 0.0:
        raise DegenerateStateError(f"CoM height {z:.4g} m is not above the contact plane")
    g = constants.gravity
    tau_ground = _positive_root(0.5 * g, vz, z)
    tau_icp = _positive_root(g, vz, z)
    speed_xy = float(np.hypot(vx, vy))
    if speed_xy < DEGENERATE_SPEED:
        if surface.contains_xy((x, y)):
            return TauWindow(0.0, tau_ground, tau_ground, tau_icp, False)
        return TauWindow(np.nan, np.nan, tau_ground, tau_icp, True)
    clipped = surface.clip_line_xy((x, y), (vx, vy))
    if clipped is None:
        return TauWindow(np.nan, np.nan, tau_ground, tau_icp, True)
    return TauWindow(clipped[0], clipped[1], tau_ground, tau_icp, False)


def support_hull(surfaces: Sequence[ContactSurface]) -> ContactSurface:
    """Convex hull of coplanar contact surfaces (the support polygon).

    All surfaces must lie on the plane of the first one within 1e-6 m.
    """
    if len(surfaces) == 0:
        raise ValueError("need at least one surface")
    first = surfaces[0]
    points = np.vstack([s.vertices for s in surfaces])
    heights = points @ first.normal - first.offset
    worst = float(np.max(np.abs(heights)))
    if worst > 1e-6:
        raise ValueError(
            f"surfaces are not coplanar: worst plane deviation {worst:.2e} m exceeds 1e-6"
        )
    hull_xy = _convex_hull_xy(points[:, :2])
    lifted = [first.lift_xy(p) for p in hull_xy]
    return ContactSurface.from_vertices(np.array(lifted))


def _convex_hull_xy(points: np.ndarray) -> np.ndarray:
    """Convex hull of 2D points in CCW order (Andrew's monotone chain)."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        raise ValueError("hull needs at least 3 distinct points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise ValueError("points are collinear; hull is degenerate")
    return np.array(hull)
