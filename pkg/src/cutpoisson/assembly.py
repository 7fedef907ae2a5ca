"""Assembly of the Nitsche bilinear forms, ghost-penalty stabilizer, and loads.

Matrix orientation: entry (i, j) is the form evaluated at trial function j and
test function i, so solving ``A x = b`` realizes "find u with form(u, v) =
load(v) for all v".  All boundary terms of a matrix reuse the same quadrature
rules, which makes the standard Nitsche matrix exactly symmetric in floating
point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from cutpoisson.geometry import TubeParams, cutoff
from cutpoisson.mesh import _point_triangle_distance
from cutpoisson.quadrature import _barycentric, refine_rule_toward
from cutpoisson.space import FeFunction, evaluate, face_normal, gradient, hat_gradients


@dataclass(frozen=True)
class NitscheParams:
    """Penalty and stabilization parameters of the discrete forms.

    ``epsilon = 0`` selects the standard method; a positive value selects the
    regularized form whose Dirichlet flux term is weighted by the cutoff.
    """

    beta: float = 10.0
    sigma: float = 0.1
    epsilon: float = 0.0
    tube: TubeParams | None = None

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.epsilon > 0.0:
            if self.tube is None:
                raise ValueError("regularization requires tube parameters")
            if self.epsilon > self.tube.epsilon0:
                raise ValueError(
                    f"epsilon {self.epsilon} exceeds the admissible {self.tube.epsilon0}"
                )

    def with_epsilon(self, epsilon):
        return NitscheParams(self.beta, self.sigma, epsilon, self.tube)


@dataclass
class SystemMatrices:
    """Assembled operator, stabilizer, and load of one discrete problem."""

    A: sp.csr_matrix
    S: sp.csr_matrix
    b: np.ndarray
    symmetric: bool


def _coo_accumulate(ndof, rows, cols, vals):
    """Sum duplicate entries in a fixed order (row, col, insertion order).

    Symmetric pairs (i, j) and (j, i) then accumulate bitwise-identical addend
    sequences, so operators built from symmetric local blocks stay exactly
    symmetric in floating point, independent of sparse library internals.
    """
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    order = np.lexsort((np.arange(len(v)), c, r))
    r, c, v = r[order], c[order], v[order]
    starts = np.flatnonzero(np.r_[True, (r[1:] != r[:-1]) | (c[1:] != c[:-1])])
    sums = np.add.reduceat(v, starts)
    return sp.csr_matrix((sums, (r[starts], c[starts])), shape=(ndof, ndof))


def assemble_stiffness(dofmap, rules):
    """Gradient-gradient form over the cut domain: (grad u, grad v) on each T cap Omega."""
    topology = dofmap.topology
    mesh = dofmap.mesh
    active = topology.active
    grads = np.array([hat_gradients(mesh.triangle_coords(t)) for t in active])
    masses = np.array([rules.volume[int(t)].measure for t in active])
    local = np.einsum("tid,tjd,t->tij", grads, grads, masses)
    dofs = dofmap.vertex_to_dof[mesh.triangles[active]]
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    return _coo_accumulate(dofmap.ndof, [rows], [cols], [local.ravel()])


def _boundary_local(dofmap, t, rule, weight=None):
    """Per-triangle boundary data: hat values, normal fluxes, effective weights."""
    coords = dofmap.mesh.triangle_coords(t)
    lam = _barycentric(coords, rule.points)
    flux = rule.normals @ hat_gradients(coords).T  # (nq, 3), grad(phi_j) . n
    w = rule.weights if weight is None else rule.weights * weight(rule.points)
    return lam, flux, w


def assemble_boundary_mass(dofmap, rules):
    """Mass matrix on the Dirichlet part of the boundary."""
    rows, cols, vals = [], [], []
    for t, (rule_d, _) in rules.boundary.items():
        if not len(rule_d):
            continue
        lam, _, w = _boundary_local(dofmap, t, rule_d)
        scaled = lam * np.sqrt(w)[:, None]  # Gram form keeps the block bitwise symmetric
        local = scaled.T @ scaled
        dofs = dofmap.triangle_dofs(t)
        rows.append(np.repeat(dofs, 3))
        cols.append(np.tile(dofs, 3))
        vals.append(local.ravel())
    if not rows:
        return sp.csr_matrix((dofmap.ndof, dofmap.ndof))
    return _coo_accumulate(dofmap.ndof, rows, cols, vals)


def _flux_matrix(dofmap, rules, include_neumann=False, weight=None):
    """Entries (i, j) of the boundary flux pairing (grad(phi_j) . n, phi_i)."""
    rows, cols, vals = [], [], []
    for t, (rule_d, rule_n) in rules.boundary.items():
        parts = [rule_d, rule_n] if include_neumann else [rule_d]
        for rule in parts:
            if not len(rule):
                continue
            lam, flux, w = _boundary_local(dofmap, t, rule, weight)
            local = lam.T @ (flux * w[:, None])  # test i rows, trial j cols
            dofs = dofmap.triangle_dofs(t)
            rows.append(np.repeat(dofs, 3))
            cols.append(np.tile(dofs, 3))
            vals.append(local.ravel())
    if not rows:
        return sp.csr_matrix((dofmap.ndof, dofmap.ndof))
    return _coo_accumulate(dofmap.ndof, rows, cols, vals)


def assemble_nitsche(dofmap, rules, params):
    """Standard symmetric Nitsche operator with Dirichlet penalty."""
    h = dofmap.mesh.h
    K = assemble_stiffness(dofmap, rules)
    B = _flux_matrix(dofmap, rules)
    M = assemble_boundary_mass(dofmap, rules)
    # grouping the two flux terms keeps the matrix bitwise symmetric
    return (K - (B + B.T) + (params.beta / h) * M).tocsr()


def cutoff_flux_neumann(dofmap, rules, domain, params):
    """Cutoff-weighted flux pairing over the Neumann boundary only.

    This is exactly the difference between the standard and regularized
    operators, since the cutoff equals one on the Dirichlet part.
    """
    if params.tube is None:
        raise ValueError("regularization requires tube parameters")
    tube = TubeParams(
        params.tube.delta, params.epsilon, params.tube.delta0, params.tube.epsilon0
    )
    rows, cols, vals = [], [], []
    for t, (_, rule_n) in rules.boundary.items():
        if not len(rule_n):
            continue
        lam, flux, w = _boundary_local(
            dofmap, t, rule_n, weight=lambda pts: cutoff(domain, tube, pts)
        )
        local = lam.T @ (flux * w[:, None])
        dofs = dofmap.triangle_dofs(t)
        rows.append(np.repeat(dofs, 3))
        cols.append(np.tile(dofs, 3))
        vals.append(local.ravel())
    if not rows:
        return sp.csr_matrix((dofmap.ndof, dofmap.ndof))
    return _coo_accumulate(dofmap.ndof, rows, cols, vals)


def assemble_regularized(dofmap, rules, params, domain):
    """Regularized Nitsche operator: the Dirichlet flux term is cutoff-weighted.

    At epsilon = 0 this coincides with the standard operator entrywise.  The
    penalty stays on the Dirichlet part so that the zero-regularization limit
    is exact.
    """
    A = assemble_nitsche(dofmap, rules, params)
    if params.epsilon == 0.0:
        return A
    return (A - cutoff_flux_neumann(dofmap, rules, domain, params)).tocsr()


def assemble_ghost_penalty(dofmap, rules, params):
    """Face-jump stabilizer sigma * h * sum_F int_F [grad_n u][grad_n v]."""
    mesh = dofmap.mesh
    rows, cols, vals = [], [], []
    for f, rule in rules.face.items():
        t1, t2 = mesh.face_tris[f]
        n1 = face_normal(mesh, f, t1)
        vids = np.unique(np.concatenate([mesh.triangles[t1], mesh.triangles[t2]]))
        jump = np.zeros(len(vids))
        for t, sign in ((t1, 1.0), (t2, -1.0)):
            flux = hat_gradients(mesh.triangle_coords(t)) @ n1
            for k, v in enumerate(mesh.triangles[t]):
                jump[np.searchsorted(vids, v)] += sign * flux[k]
        local = params.sigma * mesh.h * rule.measure * np.outer(jump, jump)
        dofs = dofmap.vertex_to_dof[vids]
        rows.append(np.repeat(dofs, len(vids)))
        cols.append(np.tile(dofs, len(vids)))
        vals.append(local.ravel())
    if not rows:
        return sp.csr_matrix((dofmap.ndof, dofmap.ndof))
    return _coo_accumulate(dofmap.ndof, rows, cols, vals)


def assemble_load(dofmap, rules, params, data):
    """Load vector with source, Neumann flux, and Dirichlet Nitsche data terms."""
    h = dofmap.mesh.h
    mesh = dofmap.mesh
    b = np.zeros(dofmap.ndof)
    for t, rule in rules.volume.items():
        if not len(rule):
            continue
        coords = mesh.triangle_coords(t)
        lam = _barycentric(coords, rule.points)
        b[dofmap.triangle_dofs(t)] += lam.T @ (rule.weights * data.f(rule.points))
    for t, (rule_d, rule_n) in rules.boundary.items():
        dofs = dofmap.triangle_dofs(t)
        if len(rule_n):
            lam, _, w = _boundary_local(dofmap, t, rule_n)
            b[dofs] += lam.T @ (w * data.g_N(rule_n.points))
        if len(rule_d):
            lam, flux, w = _boundary_local(dofmap, t, rule_d)
            gd = data.g_D(rule_d.points)
            b[dofs] += (params.beta / h) * (lam.T @ (w * gd))
            b[dofs] -= flux.T @ (w * gd)
    return b


def assemble_system(dofmap, rules, params, data, domain=None):
    """Operator, stabilizer, and load of the discrete problem in one bundle."""
    if params.epsilon > 0.0:
        if domain is None:
            raise ValueError("regularized assembly needs the domain geometry")
        A = assemble_regularized(dofmap, rules, params, domain)
        symmetric = False
    else:
        A = assemble_nitsche(dofmap, rules, params)
        symmetric = True
    S = assemble_ghost_penalty(dofmap, rules, params)
    b = assemble_load(dofmap, rules, params, data)
    return SystemMatrices(A, S, b, symmetric)


def nitsche_action(dofmap, rules, params, u, grad_u, domain=None, chi_weighted=False):
    """Vector of the standard (or cutoff-weighted) form applied to an analytic field.

    Entry i is form(u, phi_i), with the exact solution entering through its
    analytic values and gradients at the quadrature points.
    """
    h = dofmap.mesh.h
    mesh = dofmap.mesh
    out = np.zeros(dofmap.ndof)
    for t, rule in rules.volume.items():
        if not len(rule):
            continue
        coords = mesh.triangle_coords(t)
        flux_int = (rule.weights[:, None] * grad_u(rule.points)).sum(axis=0)
        out[dofmap.triangle_dofs(t)] += hat_gradients(coords) @ flux_int
    if chi_weighted and params.tube is None:
        raise ValueError("cutoff weighting requires tube parameters")
    if chi_weighted:
        tube = TubeParams(
            params.tube.delta, params.epsilon, params.tube.delta0, params.tube.epsilon0
        )
    for t, (rule_d, rule_n) in rules.boundary.items():
        dofs = dofmap.triangle_dofs(t)
        if len(rule_d):
            lam, flux, w = _boundary_local(dofmap, t, rule_d)
            un = (grad_u(rule_d.points) * rule_d.normals).sum(axis=1)
            uv = u(rule_d.points)
            w_flux = w * cutoff(domain, tube, rule_d.points) if chi_weighted else w
            out[dofs] -= lam.T @ (w_flux * un)
            out[dofs] -= flux.T @ (w * uv)
            out[dofs] += (params.beta / h) * (lam.T @ (w * uv))
        if chi_weighted and len(rule_n):
            lam, _, w = _boundary_local(dofmap, t, rule_n)
            un = (grad_u(rule_n.points) * rule_n.normals).sum(axis=1)
            out[dofs] -= lam.T @ (w * cutoff(domain, tube, rule_n.points) * un)
    return out


def energy_gram(dofmap, rules, params, stabilizer=None, with_stabilization=True):
    """Gram matrix of the energy norm: gradient, stabilizer, and Dirichlet trace parts."""
    h = dofmap.mesh.h
    G = assemble_stiffness(dofmap, rules) + assemble_boundary_mass(dofmap, rules) / h
    if with_stabilization:
        if stabilizer is None:
            stabilizer = assemble_ghost_penalty(dofmap, rules, params)
        G = G + stabilizer
    return G.tocsr()


def energy_norm(v, gram):
    """Energy norm of a finite element function from its Gram matrix."""
    x = v.coefficients if isinstance(v, FeFunction) else np.asarray(v)
    return float(np.sqrt(max(0.0, x @ (gram @ x))))


def ghost_penalty_seminorm(v, stabilizer):
    x = v.coefficients if isinstance(v, FeFunction) else np.asarray(v)
    return float(np.sqrt(max(0.0, x @ (stabilizer @ x))))


@dataclass
class ErrorNorms:
    """Error measures of a discrete solution against an analytic field."""

    energy: float
    sh: float
    l2: float


def error_norms(problem, u_h, rules, params, stabilizer, refine_levels=0):
    """Energy error (without stabilization), stabilizer seminorm, and L2 error.

    The energy error pairs the broken gradient over the cut volumes with the
    scaled Dirichlet trace mismatch.  Near points of reduced regularity the
    volume rules are refined so the quadrature of the singular gradient does
    not pollute the reported norms.
    """
    dofmap = u_h.dofmap
    mesh = dofmap.mesh
    domain = problem.domain
    grad_sq = 0.0
    l2_sq = 0.0
    for t, rule in rules.volume.items():
        coords = mesh.triangle_coords(t)
        if refine_levels and len(problem.singular_points):
            for z in problem.singular_points:
                if _point_triangle_distance(np.asarray(z), coords) <= 2.0 * mesh.h:
                    rule = refine_rule_toward(
                        coords, domain, z, tol=rules.tol, levels=refine_levels
                    )
                    break
        if not len(rule):
            continue
        lam = _barycentric(coords, rule.points)
        diff_grad = problem.grad_u(rule.points) - gradient(u_h, t)
        grad_sq += float(rule.weights @ (diff_grad**2).sum(axis=1))
        diff = problem.u(rule.points) - lam @ u_h.vertex_values(t)
        l2_sq += float(rule.weights @ diff**2)
    trace_sq = 0.0
    for t, (rule_d, _) in rules.boundary.items():
        if not len(rule_d):
            continue
        diff = problem.u(rule_d.points) - evaluate(u_h, t, rule_d.points)
        trace_sq += float(rule_d.weights @ diff**2)
    energy = float(np.sqrt(grad_sq + trace_sq / mesh.h))
    return ErrorNorms(energy, ghost_penalty_seminorm(u_h, stabilizer), float(np.sqrt(l2_sq)))
