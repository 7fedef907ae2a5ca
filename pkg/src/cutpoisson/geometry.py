"""Analytic disk geometry: signed distance, boundary partition, collars, cutoff weight.

The domain is a disk described by its signed distance function.  The boundary
carries mixed boundary conditions: a set of half-open angular arcs is
Dirichlet, the complement is Neumann, and the junction points where the two
parts meet are the locus of reduced solution regularity.  This module also
provides the collar neighborhoods of the Dirichlet boundary and of the
junctions, and the cutoff weight that localizes boundary integrals to the
Dirichlet part while decaying smoothly across an epsilon-wide wedge past each
junction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


class QuadratureConvergenceError(RuntimeError):
    """Raised when an adaptive integral does not reach the requested tolerance."""

    def __init__(self, message, achieved, estimate):
        super().__init__(f"{message} (achieved rel. change {achieved:.3e})")
        self.achieved = achieved
        self.estimate = estimate


def _wrap(theta):
    """Wrap angles into [0, 2*pi)."""
    return np.mod(theta, TWO_PI)


def cross2(a, b):
    """Scalar cross product of 2-d vectors (arrays broadcast over leading axes)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _smoothstep_down(s):
    """C1 profile: 1 for s <= 0, 0 for s >= 1, cubic in between."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def _smoothstep_down_prime(s):
    """Derivative of ``_smoothstep_down``; vanishes at both ends of [0, 1]."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, -6.0 * s * (1.0 - s), 0.0)


# Largest slope of the cubic profile, attained at s = 1/2.
PROFILE_MAX_SLOPE = 1.5


@dataclass(frozen=True)
class LevelSetDomain:
    """Disk with a Dirichlet/Neumann partition of its boundary.

    ``dirichlet_arcs`` is a sequence of half-open angular intervals
    [theta_a, theta_b) in radians; points of the boundary whose angle lies in
    some interval are Dirichlet, all others Neumann.  Endpoint ties are
    resolved by the half-open convention, so every boundary point has exactly
    one tag.  Abutting arcs are merged, and a single arc spanning the full
    circle yields a pure Dirichlet boundary with no junctions.
    """

    center: tuple[float, float]
    radius: float
    dirichlet_arcs: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        arcs = _normalize_arcs(self.dirichlet_arcs)
        object.__setattr__(self, "dirichlet_arcs", arcs)

    @property
    def center_array(self):
        return np.asarray(self.center, dtype=float)

    @property
    def is_pure_dirichlet(self):
        return len(self.dirichlet_arcs) == 1 and self.dirichlet_arcs[0][1] >= TWO_PI - 1e-12

    @property
    def is_pure_neumann(self):
        return len(self.dirichlet_arcs) == 0

    @property
    def junction_angles(self):
        """Angles of the points where the Dirichlet and Neumann parts meet."""
        if self.is_pure_dirichlet or self.is_pure_neumann:
            return np.empty(0)
        angles = []
        for start, span in self.dirichlet_arcs:
            angles.append(start)
            angles.append(_wrap(start + span))
        return np.sort(np.array(angles))

    @property
    def junction_points(self):
        """Coordinates of the boundary-condition junctions, shape (k, 2)."""
        ang = self.junction_angles
        return self.center_array + self.radius * np.column_stack([np.cos(ang), np.sin(ang)])

    def boundary_point(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.center_array + self.radius * np.stack(
            [np.cos(theta), np.sin(theta)], axis=-1
        )


def _normalize_arcs(arcs):
    """Normalize to sorted (start, span) pairs, merging abutting arcs."""
    items = []
    for a, b in arcs:
        start = float(_wrap(a))
        span = float(_wrap(b - a))
        if span == 0.0:
            # [a, a + 2*pi) covers the whole circle; a genuinely empty arc
            # carries no information and should simply be omitted.
            span = TWO_PI
        items.append((start, span))
    if not items:
        return ()
    items.sort()
    if any(span >= TWO_PI - 1e-12 for _, span in items):
        if len(items) > 1:
            raise ValueError("a full-circle arc cannot be combined with other arcs")
        return ((items[0][0], TWO_PI),)
    # Merge chains of abutting arcs, then check for overlap.
    merged = [list(items[0])]
    for start, span in items[1:]:
        end_prev = merged[-1][0] + merged[-1][1]
        if start < end_prev - 1e-12:
            raise ValueError("dirichlet arcs overlap")
        if abs(start - end_prev) <= 1e-12:
            merged[-1][1] = start + span - merged[-1][0]
        else:
            merged.append([start, span])
    # Wrap-around: last arc may abut or overlap the first one modulo 2*pi.
    if len(merged) > 1:
        end_last = merged[-1][0] + merged[-1][1]
        if end_last > merged[0][0] + TWO_PI + 1e-12:
            raise ValueError("dirichlet arcs overlap")
        if abs(end_last - (merged[0][0] + TWO_PI)) <= 1e-12:
            merged[0][0] = merged[-1][0] - TWO_PI
            merged[0][1] = merged[0][1] + merged[-1][1]
            merged.pop()
    total = sum(span for _, span in merged)
    if total >= TWO_PI - 1e-12:
        return ((_wrap(merged[0][0]), TWO_PI),)
    return tuple((_wrap(start), span) for start, span in merged)


def signed_distance(domain, x):
    """Signed distance to the boundary: negative inside, zero on it, positive outside."""
    x = np.asarray(x, dtype=float)
    return np.linalg.norm(x - domain.center_array, axis=-1) - domain.radius


def closest_point(domain, x):
    """Project onto the boundary along the radial direction.

    Undefined at the disk center, where every boundary point is equally close.
    """
    x = np.asarray(x, dtype=float)
    d = x - domain.center_array
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("closest point is undefined at the disk center")
    return domain.center_array + domain.radius * d / r[..., None]


def boundary_angle(domain, x):
    """Angle of the radial projection of ``x``, in [0, 2*pi)."""
    x = np.asarray(x, dtype=float)
    d = x - domain.center_array
    return _wrap(np.arctan2(d[..., 1], d[..., 0]))


def outward_normal(domain, x):
    """Unit exterior normal at the radial projection of ``x``."""
    x = np.asarray(x, dtype=float)
    d = x - domain.center_array
    r = np.linalg.norm(d, axis=-1)
    return d / r[..., None]


def is_dirichlet_angle(domain, theta):
    """Whether boundary points at angle ``theta`` carry the Dirichlet condition."""
    theta = np.asarray(theta, dtype=float)
    hit = np.zeros(theta.shape, dtype=bool)
    for start, span in domain.dirichlet_arcs:
        hit |= _wrap(theta - start) < span
    return hit if hit.shape else np.bool_(hit)


def classify_boundary(domain, b, tol=1e-8):
    """Classify a boundary point as ``DIRICHLET`` or ``NEUMANN``.

    Raises ``ValueError`` if ``b`` is not on the boundary within
    ``tol * radius``.
    """
    b = np.asarray(b, dtype=float)
    if abs(float(signed_distance(domain, b))) > tol * domain.radius:
        raise ValueError(f"point {b.tolist()} is not on the boundary")
    theta = float(boundary_angle(domain, b))
    return DIRICHLET if is_dirichlet_angle(domain, theta) else NEUMANN


def junction_arc_distance(domain, theta):
    """Geodesic distance along the boundary from angle ``theta`` to the nearest junction."""
    theta = np.asarray(theta, dtype=float)
    junctions = domain.junction_angles
    if junctions.size == 0:
        return np.full(theta.shape, np.inf) if theta.shape else np.inf
    flat = theta.reshape(-1)
    diff = np.abs(_wrap(flat[:, None] - junctions[None, :] + math.pi) - math.pi)
    out = domain.radius * diff.min(axis=1).reshape(theta.shape)
    return out if theta.shape else float(out)


def distance_to_dirichlet(domain, x):
    """Euclidean distance from ``x`` to the Dirichlet part of the boundary."""
    x = np.asarray(x, dtype=float)
    if domain.is_pure_neumann:
        return np.full(x.shape[:-1], np.inf) if x.ndim > 1 else np.inf
    theta = boundary_angle(domain, x)
    radial = np.abs(signed_distance(domain, x))
    on_arc = is_dirichlet_angle(domain, theta)
    best = np.where(on_arc, radial, np.inf)
    for start, span in domain.dirichlet_arcs:
        for ang in (start, start + span):
            z = domain.boundary_point(ang)
            best = np.minimum(best, np.linalg.norm(x - z, axis=-1))
    return best


@dataclass(frozen=True)
class TubeParams:
    """Collar widths: `delta` into the domain, `epsilon` along the boundary past
    a junction, with `delta0`/`epsilon0` the maximal admissible values."""

    delta: float
    epsilon: float
    delta0: float
    epsilon0: float

    def __post_init__(self):
        if not (0.0 < self.delta <= self.delta0):
            raise ValueError(f"need 0 < delta <= delta0, got {self.delta}, {self.delta0}")
        if not (0.0 < self.epsilon <= self.epsilon0):
            raise ValueError(f"need 0 < epsilon <= epsilon0, got {self.epsilon}, {self.epsilon0}")


def default_tube_params(domain, h, eps_coeff=0.1):
    """Standard coupling delta = h and epsilon = eps_coeff * h**2."""
    delta0 = 0.75 * domain.radius
    if h > delta0:
        raise ValueError(f"mesh size {h} exceeds the collar limit {delta0}")
    return TubeParams(delta=h, epsilon=eps_coeff * h * h, delta0=delta0, epsilon0=delta0)


class TubeMembership(NamedTuple):
    in_dirichlet_collar: np.ndarray
    in_junction_wedge: np.ndarray
    in_collar: np.ndarray


def tube_membership(domain, params, x):
    """Membership flags for the collar regions of a point (or array of points).

    The Dirichlet collar collects points within ``delta`` of the boundary that
    project onto the Dirichlet part.  The junction wedge collects points
    projecting onto the Neumann part whose along-boundary distance to the
    nearest junction is below ``rho + epsilon`` at depth ``rho``.  The full
    collar is their union.
    """
    x = np.asarray(x, dtype=float)
    rho = np.abs(signed_distance(domain, x))
    theta = boundary_angle(domain, x)
    dirichlet = is_dirichlet_angle(domain, theta)
    arc_dist = junction_arc_distance(domain, theta)

    in_d = (rho < params.delta) & dirichlet
    in_wedge = (rho <= params.delta) & ~dirichlet & (arc_dist < rho + params.epsilon)
    return TubeMembership(in_d, in_wedge, in_d | in_wedge)


def cutoff(domain, params, x):
    """Cutoff weight in [0, 1]: one on the Dirichlet boundary, zero outside the collar.

    Separable construction w(rho/delta) * g, where w is the C1 cubic profile
    and g equals one over the Dirichlet part and m(a / (rho + epsilon)) over
    the Neumann part, with a the along-boundary distance to the nearest
    junction and m the same cubic profile.
    """
    x = np.asarray(x, dtype=float)
    d = x - domain.center_array
    r = np.linalg.norm(d, axis=-1)
    rho = np.abs(r - domain.radius)
    theta = _wrap(np.arctan2(d[..., 1], d[..., 0]))

    w = _smoothstep_down(rho / params.delta)
    arc_dist = junction_arc_distance(domain, theta)
    gamma = rho + params.epsilon
    with np.errstate(invalid="ignore"):
        m = _smoothstep_down(arc_dist / gamma)
    g = np.where(is_dirichlet_angle(domain, theta), 1.0, m)
    return w * g


def cutoff_gradient(domain, params, x):
    """Analytic gradient of the cutoff weight.

    Valid away from the measure-zero set where the construction is not
    differentiable (the boundary itself, the rays through the junctions, and
    the disk center).
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    pts = np.atleast_2d(x)
    d = pts - domain.center_array
    r = np.linalg.norm(d, axis=-1)
    grad = np.zeros_like(pts)

    ok = r > 0.0
    e_r = np.zeros_like(pts)
    e_r[ok] = d[ok] / r[ok, None]
    e_t = np.column_stack([-e_r[:, 1], e_r[:, 0]])

    rho = np.abs(r - domain.radius)
    s_rho = np.where(r >= domain.radius, 1.0, -1.0)
    theta = _wrap(np.arctan2(d[:, 1], d[:, 0]))

    w = _smoothstep_down(rho / params.delta)
    wp = _smoothstep_down_prime(rho / params.delta) / params.delta

    dirichlet = is_dirichlet_angle(domain, theta)
    junctions = domain.junction_angles

    if junctions.size == 0:
        grad[ok] = (wp * s_rho)[ok, None] * e_r[ok]
        if not domain.is_pure_dirichlet:
            grad[:] = 0.0  # pure Neumann: weight vanishes identically
        return grad[0] if squeeze else grad.reshape(x.shape)

    # Signed angular offset to the nearest junction drives the along-boundary
    # coordinate a = R * |offset| and its direction of increase.
    offs = _wrap(theta[:, None] - junctions[None, :] + math.pi) - math.pi
    nearest = np.argmin(np.abs(offs), axis=1)
    off = offs[np.arange(len(pts)), nearest]
    a = domain.radius * np.abs(off)
    sign_a = np.where(off >= 0.0, 1.0, -1.0)

    gamma = rho + params.epsilon
    q = a / gamma
    m = _smoothstep_down(q)
    mp = _smoothstep_down_prime(q)

    with np.errstate(invalid="ignore", divide="ignore"):
        grad_a = (sign_a * domain.radius / r)[:, None] * e_t
        grad_rho = s_rho[:, None] * e_r
        grad_q = grad_a / gamma[:, None] - (a / gamma**2 * s_rho)[:, None] * e_r

        g_d = (wp * s_rho)[:, None] * e_r
        g_n = (wp * s_rho * m)[:, None] * e_r + (w * mp)[:, None] * grad_q

    grad = np.where(dirichlet[:, None], g_d, g_n)
    grad[~ok] = 0.0
    grad[rho >= params.delta] = 0.0
    return grad[0] if squeeze else grad.reshape(x.shape)


def _neumann_side(domain, junction_angle):
    """Direction (+1 CCW / -1 CW) from a junction into the Neumann part."""
    return -1.0 if is_dirichlet_angle(domain, np.float64(junction_angle)) else 1.0


def _panel_gauss(f, breaks, order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        total += half * np.sum(weights * f(mid + half * nodes))
    return total


def _geometric_breaks(delta, epsilon):
    """Panels refined toward t = 0 where the integrand varies on scale epsilon."""
    breaks = [0.0]
    t = min(epsilon, delta)
    while t < delta:
        breaks.append(t)
        t *= 2.0
    breaks.append(delta)
    return np.array(breaks)


def log_model_integral(delta, epsilon, order=16):
    """Numerical value of the one-dimensional model integral of 1/(t + epsilon) over [0, delta]."""
    breaks = _geometric_breaks(delta, epsilon)
    return _panel_gauss(lambda t: 1.0 / (t + epsilon), breaks, order)


def cutoff_conormal_integral(domain, params, z, rtol=1e-6, max_doublings=6):
    """Integral of the squared conormal derivative of the cutoff over the wedge at ``z``.

    The wedge fiber at depth t extends an arc length of t + epsilon into the
    Neumann side of the junction ``z``; the integral is evaluated by tensor
    quadrature (adaptive panels in depth, Gauss along the fiber) to relative
    tolerance ``rtol``.
    """
    z = np.asarray(z, dtype=float)
    junctions = domain.junction_angles
    if junctions.size == 0:
        raise ValueError("domain has no boundary-condition junctions")
    theta_all = boundary_angle(domain, z)
    k = int(np.argmin(np.abs(_wrap(junctions - theta_all + math.pi) - math.pi)))
    theta_z = junctions[k]
    if np.linalg.norm(z - domain.boundary_point(theta_z)) > 1e-8 * domain.radius:
        raise ValueError("z is not a junction point of the boundary partition")
    side = _neumann_side(domain, theta_z)

    R = domain.radius
    c = domain.center_array

    def fiber_integral(t_values, order_a):
        nodes, weights = np.polynomial.legendre.leggauss(order_a)
        out = np.zeros_like(t_values)
        for i, t in enumerate(t_values):
            gamma = t + params.epsilon
            a = 0.5 * gamma * (nodes + 1.0)
            w_a = 0.5 * gamma * weights
            psi = theta_z + side * a / R
            pts = c + (R - t) * np.column_stack([np.cos(psi), np.sin(psi)])
            grad = cutoff_gradient(domain, params, pts)
            tang = np.column_stack([-np.sin(psi), np.cos(psi)])
            conormal = np.sum(grad * tang, axis=1)
            # Area element of the (depth, arc) parameterization.
            out[i] = np.sum(w_a * conormal**2) * (1.0 - t / R)
        return out

    breaks = _geometric_breaks(params.delta, params.epsilon)
    order_t, order_a = 16, 12
    value = _panel_gauss(lambda t: fiber_integral(t, order_a), breaks, order_t)
    for _ in range(max_doublings):
        order_t *= 2
        order_a *= 2
        refined = _panel_gauss(lambda t: fiber_integral(t, order_a), breaks, order_t)
        change = abs(refined - value) / max(abs(refined), 1e-300)
        value = refined
        if change <= rtol:
            return value
    raise QuadratureConvergenceError(
        "conormal cutoff integral did not converge", change, value
    )
