import math

import numpy as np
import pytest

from cutpoisson import LevelSetDomain
from cutpoisson.study import (
    interpolation_study,
    manufactured_singular,
    manufactured_smooth,
    regularization_coupling,
    run_convergence,
    validate_problem,
    verify_cutoff_lemma,
    verify_inequalities,
)
from tests.conftest import make_discretization


def test_smooth_problem_reference_values(domain_mixed):
    problem = manufactured_smooth(domain_mixed)
    assert problem.f(np.zeros(2)) == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(problem.grad_u(np.zeros(2)), [math.pi, 0.0], atol=1e-14)
    assert validate_problem(problem) < 1e-6


def test_singular_problem_structure(domain_mixed):
    problem = manufactured_singular(domain_mixed, 0)
    z0 = np.asarray(problem.singular_points[0])
    assert np.allclose(z0, [0.7, 0.0])
    assert problem.u(z0) == pytest.approx(0.0)
    # harmonic away from the singular point (checked by validate_problem)
    assert validate_problem(problem) < 1e-4
    # gradient blows up like r^{-1/2} along a fixed interior direction
    direction = np.array([-1.0, 0.3])
    direction /= np.linalg.norm(direction)
    scaled = []
    for t in (1e-2, 1e-3, 1e-4):
        g = problem.grad_u(z0 + t * direction)
        scaled.append(np.linalg.norm(g) * math.sqrt(t))
    assert max(scaled) / min(scaled) < 1.01


def test_singular_problem_needs_junction(domain_dirichlet):
    with pytest.raises(ValueError):
        manufactured_singular(domain_dirichlet)


def test_zero_data_zero_errors(domain_mixed):
    problem = manufactured_smooth(domain_mixed)

    def zero(p):
        p = np.asarray(p)
        return np.zeros(p.shape[:-1])

    def zero_grad(p):
        p = np.asarray(p)
        return np.zeros(p.shape)

    from cutpoisson.study import ManufacturedProblem

    trivial = ManufacturedProblem(
        domain_mixed, zero, zero_grad, zero, zero, zero, 2.0, (), "zero"
    )
    report = run_convergence(trivial, [8, 16], validate=False)
    for level in report.levels:
        assert level.energy == pytest.approx(0.0, abs=1e-13)
        assert level.l2 == pytest.approx(0.0, abs=1e-13)
        assert level.sh == pytest.approx(0.0, abs=1e-13)


def test_smooth_convergence_short(domain_dirichlet):
    problem = manufactured_smooth(domain_dirichlet)
    report = run_convergence(problem, [8, 16, 32])
    assert all(0.8 <= e <= 1.3 for e in report.eoc_energy)
    assert all(1.7 <= e <= 2.4 for e in report.eoc_l2)
    # the stabilizer seminorm of the discrete solution decays at least linearly
    hs = [lvl.h for lvl in report.levels]
    sh_slope = float(np.polyfit(np.log(hs), np.log([lvl.sh for lvl in report.levels]), 1)[0])
    assert sh_slope >= 0.8


def test_report_rejects_non_refined_levels(domain_dirichlet):
    problem = manufactured_smooth(domain_dirichlet)
    with pytest.raises(ValueError):
        run_convergence(problem, [16, 8])
    with pytest.raises(ValueError):
        run_convergence(problem, [16])


def test_inequality_constants_stable(domain_mixed):
    constants = []
    for n in (8, 16):
        mesh, topo, dofmap, params, rules = make_discretization(domain_mixed, n)
        rep = verify_inequalities(domain_mixed, dofmap, rules, params, trials=20)
        constants.append(rep)
        assert rep.full_gradient > 0.0
        assert rep.boundary_flux > 0.0
        assert rep.cut_trace > 0.0
    # the cut-trace constant is stable across refinement (within 20 percent)
    c8, c16 = constants[0].cut_trace, constants[1].cut_trace
    assert abs(c16 - c8) <= 0.2 * max(c8, c16)


def test_inequality_affine_case(domain_mixed):
    """A global affine has zero stabilizer, so the full-mesh gradient bound is
    an upper bound with constant at least the active-to-cut area ratio."""
    mesh, topo, dofmap, params, rules = make_discretization(domain_mixed, 8)
    from cutpoisson.assembly import assemble_stiffness

    K = assemble_stiffness(dofmap, rules)
    verts = mesh.vertices[dofmap.dof_to_vertex]
    x = 2.0 * verts[:, 0] - verts[:, 1]
    grad_cut = float(x @ (K @ x))
    areas = sum(
        0.5
        * abs(float(np.linalg.det(np.column_stack([c[1] - c[0], c[2] - c[0]]))))
        for c in (mesh.triangle_coords(t) for t in topo.active)
    )
    grad_full = 5.0 * areas  # |grad|^2 = 5 on every triangle
    assert grad_full >= grad_cut > 0.0


def test_inequality_constants_bounded_across_sweep(domain_mixed):
    from cutpoisson.study import sweep_shifts

    values = []
    for shift in sweep_shifts((-1, -1, 1, 1), 8, 20):
        mesh, topo, dofmap, params, rules = make_discretization(
            domain_mixed, 8, tol=1e-8, shift=shift
        )
        rep = verify_inequalities(domain_mixed, dofmap, rules, params, trials=5)
        values.append(rep.full_gradient)
    assert max(values) <= 10.0 * min(values)
    assert max(values) < 100.0


def test_cutoff_lemma_report(domain_mixed):
    report = verify_cutoff_lemma(domain_mixed, [10.0, 100.0, 1000.0])
    assert not report.flagged
    assert report.quotient_spread < 3.0
    assert report.model_error < 1e-10
    quotients = [r.quotient for r in report.rows]
    assert max(quotients) / min(quotients) == pytest.approx(report.quotient_spread)


def test_cutoff_lemma_rejects_bad_ratio(domain_mixed):
    with pytest.raises(ValueError):
        verify_cutoff_lemma(domain_mixed, [10.0, -1.0])


def test_regularization_coupling_halves(domain_mixed):
    problem = manufactured_smooth(domain_mixed)
    report = regularization_coupling(problem, (8, 16, 32))
    geo_mean = float(np.exp(np.mean(np.log(report.ratios))))
    assert 0.25 <= geo_mean <= 0.85


def test_interpolation_energy_slope_singular(domain_mixed):
    problem = manufactured_singular(domain_mixed, 0)
    report = interpolation_study(problem, [8, 16, 32])
    totals = [lvl.energy + lvl.sh for lvl in report.levels]
    hs = [lvl.h for lvl in report.levels]
    slope = float(np.polyfit(np.log(hs), np.log(totals), 1)[0])
    assert slope >= 0.4
