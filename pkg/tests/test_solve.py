import math

import numpy as np
import pytest
import scipy.sparse as sp

from cutpoisson import LevelSetDomain
from cutpoisson.assembly import (
    SystemMatrices,
    assemble_regularized,
    assemble_system,
    energy_gram,
    energy_norm,
)
from cutpoisson.solve import (
    SolverError,
    condition_estimate,
    solve_regularized,
    solve_standard,
)
from cutpoisson.study import (
    condition_sweep,
    convergence_level,
    manufactured_smooth,
    regularization_study,
)
from tests.conftest import make_discretization


class FakeDofmap:
    def __init__(self, n):
        self.ndof = n


def wrap(K, b):
    n = K.shape[0]
    return SystemMatrices(sp.csr_matrix(K), sp.csr_matrix((n, n)), b, True)


def test_zero_load_gives_zero_solution():
    K = np.diag([2.0, 3.0, 4.0])
    report = solve_standard(wrap(K, np.zeros(3)), FakeDofmap(3))
    assert np.all(report.solution.coefficients == 0.0)
    assert report.residual == 0.0


def test_hand_three_by_three_system():
    """SPD system of the single-triangle Nitsche sanity problem, solved by hand."""
    K = np.array([[4.0, -1.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -1.0, 2.0]])
    b = np.array([1.0, 2.0, 0.5])
    x_hand = np.linalg.solve(K, b)
    report = solve_standard(wrap(K, b), FakeDofmap(3))
    assert np.abs(report.solution.coefficients - x_hand).max() < 1e-12
    assert report.residual <= 1e-10 * np.linalg.norm(b)


def test_indefinite_system_raises():
    K = np.diag([1.0, -1.0, 1e-18])
    with pytest.raises(SolverError):
        solve_standard(wrap(K, np.array([1.0, 1.0, 1.0])), FakeDofmap(3))


def test_monotone_refinement(domain_dirichlet):
    problem = manufactured_smooth(domain_dirichlet)
    e16 = convergence_level(problem, 16).energy
    e32 = convergence_level(problem, 32).energy
    assert e32 < e16


def test_regularized_limit_matches_standard(domain_mixed):
    problem = manufactured_smooth(domain_mixed)
    mesh, topo, dofmap, params, rules = make_discretization(domain_mixed, 16)
    system = assemble_system(dofmap, rules, params, problem)
    u_h = solve_standard(system, dofmap).solution
    A0 = assemble_regularized(dofmap, rules, params, domain_mixed)
    reg = solve_regularized(SystemMatrices(A0, system.S, system.b, True), dofmap)
    assert np.abs(reg.solution.coefficients - u_h.coefficients).max() < 1e-8


def test_regularized_gap_bounded_and_stable(domain_mixed):
    """Gap grows linearly in epsilon and the regularized solutions stay bounded."""
    problem = manufactured_smooth(domain_mixed)
    n = 16
    h = 2.0 * math.sqrt(2.0) / n
    eps_values = [0.05 * h**2, 0.1 * h**2, 0.2 * h**2, 0.4 * h**2]
    report = regularization_study(problem, n, eps_values)
    assert 0.8 <= report.slope <= 1.2
    mesh, topo, dofmap, params, rules = make_discretization(domain_mixed, n)
    system = assemble_system(dofmap, rules, params, problem)
    u_h = solve_standard(system, dofmap).solution
    gram = energy_gram(dofmap, rules, params, stabilizer=system.S)
    base = energy_norm(u_h, gram)
    for eps, gap in zip(eps_values, report.gaps):
        assert gap <= 10.0 * eps / h * base
        # uniform stability: |||u_eps||| is within 10 percent of |||u_h|||
        # across the sweep by the triangle inequality
        assert gap <= 0.1 * base


def test_condition_estimate_reference_matrices():
    assert condition_estimate(sp.eye(40, format="csr")) == pytest.approx(1.0, rel=0.01)
    K = sp.diags([1.0, 1e4]).tocsr()
    assert condition_estimate(K) == pytest.approx(1e4, rel=0.01)


def test_condition_estimate_matches_dense_oracle(domain_dirichlet):
    mesh, topo, dofmap, params, rules = make_discretization(domain_dirichlet, 8, tol=1e-8)
    from cutpoisson.assembly import assemble_ghost_penalty, assemble_nitsche

    K = (
        assemble_nitsche(dofmap, rules, params)
        + assemble_ghost_penalty(dofmap, rules, params)
    ).tocsr()
    eigs = np.abs(np.linalg.eigvalsh(K.toarray()))
    dense = eigs.max() / eigs.min()
    est = condition_estimate(K)
    assert est == pytest.approx(dense, rel=0.05)


def test_stabilization_controls_conditioning(domain_dirichlet):
    """Across a cut sweep the stabilized condition number is steady while the
    unstabilized one blows up at unfavorable cut positions."""
    report = condition_sweep(domain_dirichlet, n=16, n_shifts=10)
    lam = [r.lambda_min_energy for r in report.rows]
    assert min(lam) >= 0.1
    assert report.kappa_spread <= 10.0
    assert report.worst_blowup >= 100.0


def test_solver_determinism(domain_mixed):
    problem = manufactured_smooth(domain_mixed)
    mesh, topo, dofmap, params, rules = make_discretization(domain_mixed, 16)
    system = assemble_system(dofmap, rules, params, problem)
    x1 = solve_standard(system, dofmap).solution.coefficients
    x2 = solve_standard(system, dofmap).solution.coefficients
    assert np.array_equal(x1, x2)
