"""Background simplicial mesh on a box, cut classification, and active-mesh face sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cutpoisson.geometry import cross2, signed_distance

INSIDE = 0
CUT = 1
OUTSIDE = 2


class AmbiguousCutError(RuntimeError):
    """Raised when a triangle is tangent to the boundary below the detection tolerance."""

    def __init__(self, triangle, gap):
        super().__init__(
            f"triangle {triangle}: boundary tangency within {gap:.3e} of the element, "
            "classification is ambiguous"
        )
        self.triangle = triangle


@dataclass(frozen=True)
class BackgroundMesh:
    """Structured triangulation of an axis-aligned box.

    Faces are stored once, with the two adjacent triangles ordered by index
    (-1 marks the outside of the box); this fixes the sign of normal-gradient
    jumps.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    faces: np.ndarray
    face_tris: np.ndarray
    h: float

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def triangle_coords(self, t):
        return self.vertices[self.triangles[t]]

    def face_coords(self, f):
        return self.vertices[self.faces[f]]


def build_background(box, n, shift=(0.0, 0.0)):
    """Structured n-by-n grid of squares on ``box``, each split into two triangles.

    ``box`` is (x0, y0, x1, y1); ``shift`` translates the whole grid, which is
    how cut-position sweeps move the boundary relative to the mesh.  The mesh
    parameter h is the cell diagonal, i.e. the diameter of every triangle.
    """
    if n < 1:
        raise ValueError(f"need at least one subdivision per side, got n={n}")
    x0, y0, x1, y1 = (float(v) for v in box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate box {box}")
    xs = np.linspace(x0, x1, n + 1) + float(shift[0])
    ys = np.linspace(y0, y1, n + 1) + float(shift[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    triangles = np.array(tris, dtype=np.int64)

    face_map = {}
    for t, tri in enumerate(triangles):
        for k in range(3):
            edge = (int(tri[k]), int(tri[(k + 1) % 3]))
            key = (min(edge), max(edge))
            face_map.setdefault(key, []).append(t)
    faces = np.array(sorted(face_map), dtype=np.int64)
    face_tris = np.full((len(faces), 2), -1, dtype=np.int64)
    for f, key in enumerate(sorted(face_map)):
        adj = sorted(face_map[key])
        face_tris[f, : len(adj)] = adj

    h = float(np.hypot((x1 - x0) / n, (y1 - y0) / n))
    mesh = BackgroundMesh(vertices, triangles, faces, face_tris, h)
    _check_shape_regularity(mesh)
    return mesh


def _check_shape_regularity(mesh):
    coords = mesh.vertices[mesh.triangles]
    e = coords - np.roll(coords, -1, axis=1)
    lengths = np.linalg.norm(e, axis=2)
    diam = lengths.max(axis=1)
    if diam.max() / diam.min() > 2.0:
        raise ValueError("mesh is not quasi-uniform (diameter ratio exceeds 2)")
    areas = 0.5 * np.abs(cross2(coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]))
    # min angle bounded below iff area is comparable to the product of edge lengths
    quality = 4.0 * areas / (diam * lengths.sum(axis=1))
    if quality.min() < 0.2:
        raise ValueError("mesh is not shape regular")


@dataclass(frozen=True)
class CutTopology:
    """Per-triangle inside/cut/outside tags plus derived active-mesh structure."""

    mesh: BackgroundMesh
    classification: np.ndarray
    active: np.ndarray
    active_index: np.ndarray
    ghost_faces: np.ndarray

    @property
    def cut(self):
        return np.flatnonzero(self.classification == CUT)

    @property
    def inside(self):
        return np.flatnonzero(self.classification == INSIDE)

    def is_active(self, t):
        return self.active_index[t] >= 0


def _point_triangle_distance(p, coords):
    """Euclidean distance from point ``p`` to a (closed) triangle."""
    best = np.inf
    sign_sum = 0
    for k in range(3):
        a, b = coords[k], coords[(k + 1) % 3]
        ab = b - a
        t = np.dot(p - a, ab) / np.dot(ab, ab)
        t = min(1.0, max(0.0, t))
        best = min(best, float(np.linalg.norm(p - (a + t * ab))))
        sign_sum += 1 if cross2(ab, p - a) >= 0 else -1
    if abs(sign_sum) == 3:
        return 0.0  # p inside the triangle
    return best


def classify(mesh, domain, tol=1e-12):
    """Tag every triangle as inside, cut, or outside the domain.

    Vertices exactly on the boundary count as inside, so the partition is
    deterministic.  A triangle whose vertices all lie outside is cut exactly
    when the disk reaches into it, which is decided by the exact distance from
    the disk center to the triangle; tangency closer than ``tol * h`` to that
    threshold raises ``AmbiguousCutError``.
    """
    phi = signed_distance(domain, mesh.vertices)
    phi_t = phi[mesh.triangles]
    inside_v = phi_t <= 0.0

    cls = np.full(mesh.n_triangles, OUTSIDE, dtype=np.int8)
    all_in = inside_v.all(axis=1)
    any_in = inside_v.any(axis=1)
    cls[all_in] = INSIDE  # disk is convex, so vertex containment is conclusive
    cls[any_in & ~all_in] = CUT

    center = domain.center_array
    guard = tol * mesh.h
    candidates = np.flatnonzero(~any_in & (phi_t.min(axis=1) <= mesh.h))
    for t in candidates:
        dist = _point_triangle_distance(center, mesh.triangle_coords(t))
        if abs(dist - domain.radius) <= guard:
            raise AmbiguousCutError(int(t), abs(dist - domain.radius))
        if dist < domain.radius:
            cls[t] = CUT

    active = np.flatnonzero(cls != OUTSIDE)
    active_index = np.full(mesh.n_triangles, -1, dtype=np.int64)
    active_index[active] = np.arange(len(active))

    is_act = cls != OUTSIDE
    t0, t1 = mesh.face_tris[:, 0], mesh.face_tris[:, 1]
    interior = (t0 >= 0) & (t1 >= 0)
    both_active = interior.copy()
    both_active[interior] = is_act[t0[interior]] & is_act[t1[interior]]
    near_cut = np.zeros_like(both_active)
    near_cut[interior] = (cls[t0[interior]] == CUT) | (cls[t1[interior]] == CUT)
    ghost = np.flatnonzero(both_active & near_cut)

    return CutTopology(mesh, cls, active, active_index, ghost)


def ghost_penalty_faces(topology):
    """Interior faces of the active mesh with at least one cut neighbor."""
    return topology.ghost_faces


def submesh(topology, region_distance, tol=1e-12):
    """Active triangles meeting the region described by a distance function.

    ``region_distance`` maps points (shape (..., 2)) to a 1-Lipschitz distance
    to the region, non-positive on the region itself.  Intersection is decided
    by branch-and-bound subdivision: cells certified empty by the Lipschitz
    bound are pruned, and a cell that cannot be pruned by the time it shrinks
    below ``tol * h`` proves the region passes within tolerance of the
    triangle, which counts as a hit.  This works for lower-dimensional regions
    (curves, points) whose distance never becomes negative.
    """
    mesh = topology.mesh
    floor = tol * mesh.h
    hits = []
    for t in topology.active:
        if _triangle_meets_region(mesh.triangle_coords(t), region_distance, floor):
            hits.append(t)
    return np.array(hits, dtype=np.int64)


def _triangle_meets_region(coords, region_distance, floor):
    stack = [coords]
    while stack:
        tri = stack.pop()
        d = np.asarray(region_distance(tri), dtype=float)
        if np.any(d <= 0.0):
            return True
        centroid = tri.mean(axis=0)
        radius = float(np.linalg.norm(tri - centroid, axis=1).max())
        dc = float(region_distance(centroid))
        if dc <= 0.0:
            return True
        if dc - radius > 0.0:
            continue  # Lipschitz certificate: region cannot reach this cell
        if 2.0 * radius <= floor:
            return True  # region within floor of the cell, hence of the triangle
        mids = 0.5 * (tri + np.roll(tri, -1, axis=0))
        stack.append(np.array([tri[0], mids[0], mids[2]]))
        stack.append(np.array([tri[1], mids[1], mids[0]]))
        stack.append(np.array([tri[2], mids[2], mids[1]]))
        stack.append(mids)
    return False
