"""Continuous piecewise-affine finite element space on the active mesh.

Degrees of freedom sit at the vertices of active triangles.  Functions are
evaluated barycentrically, gradients are constant per triangle, and the
quasi-interpolant projects onto affine functions over vertex patches, which
reproduces affine functions while needing only point values of the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cutpoisson.geometry import cross2
from cutpoisson.quadrature import _barycentric, _full_triangle_points, _tri_area


@dataclass(frozen=True)
class DofMap:
    """One degree of freedom per vertex of the active mesh."""

    topology: object
    vertex_to_dof: np.ndarray
    dof_to_vertex: np.ndarray

    @property
    def ndof(self):
        return len(self.dof_to_vertex)

    @property
    def mesh(self):
        return self.topology.mesh

    def triangle_dofs(self, t):
        return self.vertex_to_dof[self.mesh.triangles[t]]


def build_dofmap(topology):
    mesh = topology.mesh
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.triangles[topology.active].ravel()] = True
    dof_to_vertex = np.flatnonzero(used)
    vertex_to_dof = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vertex_to_dof[dof_to_vertex] = np.arange(len(dof_to_vertex))
    return DofMap(topology, vertex_to_dof, dof_to_vertex)


@dataclass
class FeFunction:
    """Nodal coefficient vector over the active-mesh vertex dofs."""

    coefficients: np.ndarray
    dofmap: DofMap

    def vertex_values(self, t):
        return self.coefficients[self.dofmap.triangle_dofs(t)]


def hat_gradients(coords):
    """Constant gradients of the three barycentric hat functions, shape (3, 2)."""
    e = np.roll(coords, -2, axis=0) - np.roll(coords, -1, axis=0)  # edge opposite vertex i
    area2 = float(cross2(coords[1] - coords[0], coords[2] - coords[0]))
    return np.column_stack([-e[:, 1], e[:, 0]]) / area2


def evaluate(f, t, x):
    """Value of ``f`` at points ``x`` inside active triangle ``t``."""
    if not f.dofmap.topology.is_active(t):
        raise ValueError(f"triangle {t} is not in the active mesh")
    coords = f.dofmap.mesh.triangle_coords(t)
    lam = _barycentric(coords, x)
    vals = lam @ f.vertex_values(t)
    return vals if np.asarray(x).ndim > 1 else float(vals[0])


def gradient(f, t):
    """Gradient of ``f`` on active triangle ``t`` (constant per triangle)."""
    if not f.dofmap.topology.is_active(t):
        raise ValueError(f"triangle {t} is not in the active mesh")
    coords = f.dofmap.mesh.triangle_coords(t)
    return f.vertex_values(t) @ hat_gradients(coords)


def face_normal(mesh, f, t):
    """Unit normal of face ``f`` pointing out of triangle ``t``."""
    p0, p1 = mesh.face_coords(f)
    tangent = p1 - p0
    n = np.array([tangent[1], -tangent[0]])
    n /= np.linalg.norm(n)
    centroid = mesh.triangle_coords(t).mean(axis=0)
    if float((centroid - p0) @ n) > 0.0:
        n = -n
    return n


def jump_normal_gradient(f, face):
    """Jump of the normal gradient across an interior face of the active mesh.

    The jump is the sum of the two one-sided normal derivatives with outward
    normals, so it vanishes for globally affine functions; the reported sign
    corresponds to the stored face orientation (lower triangle index first).
    """
    dofmap = f.dofmap
    mesh = dofmap.mesh
    t1, t2 = mesh.face_tris[face]
    if t1 < 0 or t2 < 0:
        raise ValueError(f"face {face} is on the mesh boundary")
    if not (dofmap.topology.is_active(t1) and dofmap.topology.is_active(t2)):
        raise ValueError(f"face {face} has an inactive neighbor")
    n1 = face_normal(mesh, face, t1)
    return float(gradient(f, t1) @ n1 - gradient(f, t2) @ n1)


def _vertex_patches(topology):
    patches = {}
    tris = topology.mesh.triangles
    for t in topology.active:
        for v in tris[t]:
            patches.setdefault(int(v), []).append(int(t))
    return patches


def clement_interpolate(u, dofmap):
    """Quasi-interpolant of an analytic function onto the finite element space.

    The nodal value at a vertex is the value there of the L2 projection of
    ``u`` onto affine functions over the patch of active triangles containing
    the vertex.  Patches use full triangles, so ``u`` must be evaluable on the
    whole active mesh, including the parts outside the domain.
    """
    topology = dofmap.topology
    mesh = topology.mesh
    patches = _vertex_patches(topology)
    coeffs = np.zeros(dofmap.ndof)
    for v, tris in patches.items():
        xv = mesh.vertices[v]
        scale = 0.0
        for t in tris:
            scale = max(scale, np.linalg.norm(mesh.triangle_coords(t) - xv, axis=1).max())
        moments = np.zeros((3, 3))
        rhs = np.zeros(3)
        for t in tris:
            pts, wts = _full_triangle_points(mesh.triangle_coords(t))
            basis = np.column_stack(
                [np.ones(len(pts)), (pts[:, 0] - xv[0]) / scale, (pts[:, 1] - xv[1]) / scale]
            )
            moments += (basis * wts[:, None]).T @ basis
            rhs += (basis * wts[:, None]).T @ u(pts)
        if np.linalg.cond(moments) > 1e12:
            raise ValueError(f"degenerate patch moment matrix at vertex {v}")
        sol = np.linalg.solve(moments, rhs)
        coeffs[dofmap.vertex_to_dof[v]] = sol[0]
    return FeFunction(coeffs, dofmap)
