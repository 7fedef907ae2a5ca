import math

import numpy as np
import pytest

from cutpoisson import LevelSetDomain, TubeParams
from cutpoisson.geometry import (
    DIRICHLET,
    NEUMANN,
    classify_boundary,
    closest_point,
    cutoff,
    cutoff_conormal_integral,
    cutoff_gradient,
    junction_arc_distance,
    log_model_integral,
    signed_distance,
    tube_membership,
)

UNIT = LevelSetDomain((0.0, 0.0), 1.0, ((0.0, math.pi),))
TUBE = TubeParams(delta=0.1, epsilon=0.01, delta0=0.75, epsilon0=0.75)


def test_signed_distance_reference_points():
    disk = LevelSetDomain((0.0, 0.0), 1.0)
    assert signed_distance(disk, (0.0, 0.0)) == -1.0
    assert signed_distance(disk, (1.0, 0.0)) == 0.0
    assert signed_distance(disk, (0.0, -2.0)) == 1.0


def test_closest_point_radial_projection():
    disk = LevelSetDomain((0.0, 0.0), 1.0)
    assert np.allclose(closest_point(disk, (0.5, 0.0)), (1.0, 0.0))
    assert np.allclose(closest_point(disk, (0.0, 3.0)), (0.0, 1.0))
    x = 0.9 * np.array([1.0, 1.0]) / math.sqrt(2.0)
    assert np.allclose(closest_point(disk, x), np.array([1.0, 1.0]) / math.sqrt(2.0))
    with pytest.raises(ValueError):
        closest_point(disk, (0.0, 0.0))


def test_closest_point_matches_distance(rng):
    disk = LevelSetDomain((0.3, -0.2), 0.8)
    pts = rng.uniform(-1, 1, size=(200, 2))
    pts = pts[np.linalg.norm(pts - [0.3, -0.2], axis=1) > 1e-6]
    proj = closest_point(disk, pts)
    assert np.allclose(signed_distance(disk, proj), 0.0, atol=1e-14)
    assert np.allclose(
        np.linalg.norm(pts - proj, axis=1), np.abs(signed_distance(disk, pts)), atol=1e-14
    )


def test_closest_point_idempotent_along_normal(rng):
    disk = LevelSetDomain((0.0, 0.0), 1.0)
    delta0 = 0.75
    theta = rng.uniform(0.0, 2.0 * math.pi, 50)
    p = disk.boundary_point(theta)
    for s in (-0.5, -0.1, 0.3, 0.7):
        q = closest_point(disk, p + s * delta0 * p)
        assert np.allclose(q, p, atol=1e-12)


def test_boundary_classification_half_open_arcs():
    assert classify_boundary(UNIT, (0.0, 1.0)) == DIRICHLET
    assert classify_boundary(UNIT, (0.0, -1.0)) == NEUMANN
    # arc endpoint theta = 0 belongs to the half-open Dirichlet arc
    assert classify_boundary(UNIT, (1.0, 0.0)) == DIRICHLET
    assert classify_boundary(UNIT, (-1.0, 0.0)) == NEUMANN
    with pytest.raises(ValueError):
        classify_boundary(UNIT, (0.5, 0.5))


def test_arc_normalization_merges_and_validates():
    two = LevelSetDomain((0, 0), 1.0, ((0.0, 1.0), (1.0, 2.0)))
    assert len(two.dirichlet_arcs) == 1
    assert np.allclose(two.junction_angles, [0.0, 2.0])
    full = LevelSetDomain((0, 0), 1.0, ((0.0, 2.0 * math.pi),))
    assert full.is_pure_dirichlet and len(full.junction_angles) == 0
    assert LevelSetDomain((0, 0), 1.0).is_pure_neumann
    with pytest.raises(ValueError):
        LevelSetDomain((0, 0), 1.0, ((0.0, 2.0), (1.0, 3.0)))


def test_membership_flags():
    m = tube_membership(UNIT, TUBE, np.array([0.0, 0.95]))
    assert (bool(m.in_dirichlet_collar), bool(m.in_junction_wedge), bool(m.in_collar)) == (
        True,
        False,
        True,
    )
    m = tube_membership(UNIT, TUBE, np.array([0.0, -0.95]))
    assert (bool(m.in_dirichlet_collar), bool(m.in_junction_wedge), bool(m.in_collar)) == (
        False,
        False,
        False,
    )
    # Neumann side, depth 0.05, arc distance 0.02 < 0.05 + 0.01
    x = 0.95 * np.array([math.cos(-0.02 / 0.95), math.sin(-0.02 / 0.95)])
    rho = abs(signed_distance(UNIT, x))
    a = junction_arc_distance(UNIT, math.atan2(x[1], x[0]))
    assert a < rho + TUBE.epsilon
    m = tube_membership(UNIT, TUBE, x)
    assert (bool(m.in_dirichlet_collar), bool(m.in_junction_wedge), bool(m.in_collar)) == (
        False,
        True,
        True,
    )


def test_cutoff_boundary_values():
    # one on the Dirichlet boundary
    theta = np.linspace(0.05, math.pi - 0.05, 20)
    assert np.allclose(cutoff(UNIT, TUBE, UNIT.boundary_point(theta)), 1.0)
    # zero outside the collar
    assert cutoff(UNIT, TUBE, np.array([0.0, 0.0])) == 0.0
    assert cutoff(UNIT, TUBE, np.array([0.0, 0.85])) == 0.0
    # zero on the Neumann part beyond the epsilon wedge
    z = UNIT.boundary_point(-2.0 * TUBE.epsilon)  # arc distance 2 eps from the junction
    assert cutoff(UNIT, TUBE, z) == 0.0
    # inside [0, 1] everywhere
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 1, size=(2000, 2))
    vals = cutoff(UNIT, TUBE, pts)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)


def test_cutoff_support_in_collar(rng):
    pts = rng.uniform(-1.0, 1.0, size=(10000, 2))
    inside = signed_distance(UNIT, pts) < 0.0
    pts = pts[inside]
    vals = cutoff(UNIT, TUBE, pts)
    member = tube_membership(UNIT, TUBE, pts)
    positive = vals > 0.0
    assert np.all(member.in_collar[positive])


def test_cutoff_gradient_zero_outside_collar():
    for x in ([0.0, 0.0], [0.5, 0.0], [0.0, -0.5]):
        assert np.allclose(cutoff_gradient(UNIT, TUBE, np.array(x)), 0.0)


def test_cutoff_gradient_bound_on_dirichlet_collar(rng):
    # where the junction profile is locally one, |grad chi| <= max|w'| / delta
    theta = rng.uniform(0.3, math.pi - 0.3, 100)
    depth = rng.uniform(0.001, 0.099, 100)
    pts = (1.0 - depth)[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    g = cutoff_gradient(UNIT, TUBE, pts)
    assert np.linalg.norm(g, axis=1).max() <= 1.5 / TUBE.delta + 1e-12


def test_cutoff_gradient_matches_finite_differences(rng):
    pts = []
    while len(pts) < 100:
        p = rng.uniform(-1.0, 1.0, 2)
        r = np.linalg.norm(p)
        if 0.05 < r < 0.999:
            pts.append(p)
    pts = np.array(pts)
    step = 1e-6
    grad = cutoff_gradient(UNIT, TUBE, pts)
    for axis, dv in enumerate((np.array([step, 0.0]), np.array([0.0, step]))):
        fd = (cutoff(UNIT, TUBE, pts + dv) - cutoff(UNIT, TUBE, pts - dv)) / (2.0 * step)
        assert np.abs(fd - grad[:, axis]).max() < 1e-7


def test_cutoff_gradient_wedge_bound(rng):
    """Inside the junction wedge the gradient is bounded by C / (rho + epsilon)."""
    z_angle = 0.0
    samples = []
    for _ in range(400):
        t = rng.uniform(0.0, TUBE.delta)
        a = rng.uniform(0.0, t + TUBE.epsilon)
        psi = z_angle - a  # into the Neumann side
        samples.append((1.0 - t) * np.array([math.cos(psi), math.sin(psi)]))
    pts = np.array(samples)
    g = np.linalg.norm(cutoff_gradient(UNIT, TUBE, pts), axis=1)
    rho = np.abs(signed_distance(UNIT, pts))
    bound = 4.0 / (rho + TUBE.epsilon)
    assert np.all(g <= bound)


def test_conormal_integral_tracks_log_bound(domain_unit_mixed):
    """Quotient against log(1 + delta/eps) stays within fixed constants over 3 decades."""
    delta = 0.3
    quotients = []
    for ratio in (10.0, 100.0, 1000.0):
        tube = TubeParams(delta, delta / ratio, 0.75, 0.75)
        z = domain_unit_mixed.junction_points[0]
        val = cutoff_conormal_integral(domain_unit_mixed, tube, z)
        quotients.append(val / math.log1p(ratio))
    spread = max(quotients) / min(quotients)
    assert spread < 3.0
    assert min(quotients) > 0.1 and max(quotients) < 10.0


def test_conormal_integral_bounded_for_wide_wedge(domain_unit_mixed):
    """With epsilon >> delta the integral stays below the explicit profile bound."""
    delta = 0.005
    eps = delta / 0.01  # ratio 0.01
    tube = TubeParams(delta, eps, 0.75, 0.75)
    z = domain_unit_mixed.junction_points[0]
    val = cutoff_conormal_integral(domain_unit_mixed, tube, z)
    R = domain_unit_mixed.radius
    bound = 1.5**2 * (R / (R - delta)) * math.log1p(delta / eps)
    assert val <= bound


def test_conormal_integral_doubling_follows_model(domain_unit_mixed):
    delta, eps = 0.1, 0.001
    z = domain_unit_mixed.junction_points[0]
    i1 = cutoff_conormal_integral(domain_unit_mixed, TubeParams(delta, eps, 0.75, 0.75), z)
    i2 = cutoff_conormal_integral(
        domain_unit_mixed, TubeParams(2.0 * delta, eps, 0.75, 0.75), z
    )
    model = math.log1p(2.0 * delta / eps) / math.log1p(delta / eps)
    assert abs(i2 / i1 - model) <= 0.3 * model


def test_log_model_integral_matches_closed_form():
    for ratio in (10.0, 100.0, 1000.0):
        delta = 0.3
        eps = delta / ratio
        assert abs(log_model_integral(delta, eps) - math.log1p(ratio)) < 1e-12


def test_tube_params_validation():
    with pytest.raises(ValueError):
        TubeParams(0.0, 0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        TubeParams(0.5, 0.2, 0.4, 1.0)
    with pytest.raises(ValueError):
        TubeParams(0.1, 0.5, 1.0, 0.4)
