"""Local virtual element operators on a single polyhedron.

Every face carries a 2D virtual element built once in an isometric chart
of its plane; those face elements supply the boundary integrals of the 3D
projectors, so face traces are never evaluated away from their dofs. The
cell dofs are vertex values, Lobatto edge values, face moments against the
face's own scaled monomials, and interior cell moments.
"""

import numpy as np
import scipy.linalg

from . import polybasis as pb
from .element2d import Element2D, _refined_solve
from .mesh import cell_geometry


class FaceData:
    """A mesh face with its chart and its 2D virtual element."""

    def __init__(self, face_id, frame, element):
        self.face_id = face_id
        self.frame = frame
        self.element = element


def build_face_cache(mesh, k):
    """The FaceData of every mesh face, indexable by face id.

    Building the cache once per mesh lets neighboring cells share the
    same face elements and face moment functionals.
    """
    cache = []
    for fid in range(mesh.n_faces):
        frame = mesh.face_frame(fid)
        pts2 = frame.to2d(mesh.face_points(fid))
        cache.append(FaceData(fid, frame, Element2D(pts2, k)))
    return cache


class CellDofLayout3:
    """Dof bookkeeping of one polyhedral cell.

    Order: cell vertices by global id, then per cell edge (by global edge
    id) the k-1 interior nodes oriented from the lower to the higher
    vertex id, then per face (in the cell's face order) the face moments,
    then the cell moments.
    """

    def __init__(self, mesh, cell_id, k):
        self.k = k
        self.vertex_ids = mesh.cell_vertex_ids(cell_id)
        self.edge_ids = mesh.cell_edge_ids[cell_id]
        self.face_ids = [fid for fid, _ in mesh.cells[cell_id]]
        nmf = pb.n_poly(2, k - 2)
        self.n_boundary = len(self.vertex_ids) + len(self.edge_ids) * (k - 1)
        self.n_face_moments = len(self.face_ids) * nmf
        self.n_cell_moments = pb.n_poly(3, k - 2)
        self.n_total = (self.n_boundary + self.n_face_moments
                        + self.n_cell_moments)

        self._vertex_pos = {v: i for i, v in enumerate(self.vertex_ids)}
        self._edge_pos = {e: i for i, e in enumerate(self.edge_ids)}
        self._faces = []
        for lf, fid in enumerate(self.face_ids):
            loop = mesh.faces[fid]
            idx = [self._vertex_pos[v] for v in loop]
            nv = len(self.vertex_ids)
            for a, b in zip(loop, loop[1:] + loop[:1]):
                lo, hi = (a, b) if a < b else (b, a)
                eid = mesh.edge_lookup[(lo, hi)]
                base = nv + self._edge_pos[eid] * (k - 1)
                nodes = range(base, base + k - 1)
                idx.extend(nodes if a == lo else reversed(nodes))
            start = self.n_boundary + lf * nmf
            idx.extend(range(start, start + nmf))
            self._faces.append(np.array(idx, dtype=int))

    def face_dof_indices(self, local_face):
        """Cell dof indices forming the face element's dof vector."""
        return self._faces[local_face]


class Element3D:
    """Degree-k virtual element on a star-shaped polyhedron."""

    def __init__(self, mesh, cell_id, k, cache=None):
        if k < 1:
            raise ValueError("polynomial degree must be at least 1")
        self.k = k
        self.mesh = mesh
        self.cell_id = cell_id
        if cache is None:
            cache = build_face_cache(mesh, k)
        self.layout = CellDofLayout3(mesh, cell_id, k)
        self._faces = [cache[fid] for fid in self.layout.face_ids]
        self._signs = [sign for _, sign in mesh.cells[cell_id]]
        self.geometry = cell_geometry(mesh, cell_id)
        self.basis = pb.ScaledMonomialBasis(
            3, k, self.geometry.centroid, self.geometry.h)

        self._build_nodes()
        self._qp, self._qw = self.volume_quadrature(2 * k)
        self.H = pb.mass_matrix(self.basis, self._qp, self._qw)
        self.Gt = pb.stiffness_from_mass(self.basis, self.H)
        self._build_d_mat()
        self._build_projectors()

    # -- geometry ------------------------------------------------------------

    def _build_nodes(self):
        verts = self.mesh.vertices
        pts = [verts[self.layout.vertex_ids]]
        if self.k > 1:
            ts = pb.edge_interior_nodes(self.k)
            for eid in self.layout.edge_ids:
                lo, hi = sorted(self.mesh.edges[eid])
                pts.append(verts[lo] + ts[:, None] * (verts[hi] - verts[lo]))
        self._node_points = np.concatenate(pts)

    def volume_quadrature(self, degree):
        """A quadrature rule over the cell, exact to the degree.

        The cell is fanned into tetrahedra joining the cell star point to
        the star fans of its faces.
        """
        star = self.geometry.star_center
        tp, tw = pb.tetrahedron_rule(degree)
        qp, qw = [], []
        for face in self._faces:
            pts3 = self.mesh.face_points(face.face_id)
            fstar = face.frame.to3d(face.element.geometry.star_center)[0]
            rolled = np.roll(pts3, -1, axis=0)
            for a, b in zip(pts3, rolled):
                E = np.array([a - star, b - star, fstar - star])
                det = abs(np.linalg.det(E))
                if det == 0.0:
                    continue
                qp.append(star + tp @ E)
                qw.append(tw * det)
        return np.concatenate(qp), np.concatenate(qw)

    # -- dof matrix and projectors --------------------------------------------

    def _face_quadrature(self, face):
        qp2, qw2 = face.element.volume_quadrature(2 * self.k)
        return qp2, qw2, face.frame.to3d(qp2)

    def _build_d_mat(self):
        lay = self.layout
        rows = [self.basis.eval(self._node_points)]
        nmf = pb.n_poly(2, self.k - 2)
        if nmf:
            for face in self._faces:
                qp2, qw2, qp3 = self._face_quadrature(face)
                vals3 = self.basis.eval(qp3)
                vals2 = face.element.basis.eval(qp2)[:, :nmf]
                area = face.element.geometry.measure
                rows.append((vals2.T * qw2) @ vals3 / area)
        rows.append(self.H[:lay.n_cell_moments, :] / self.geometry.measure)
        self.d_mat = np.vstack(rows)

    def _build_projectors(self):
        k = self.k
        lay = self.layout
        n = self.basis.n
        vol = self.geometry.measure

        B = np.zeros((n, lay.n_total))
        bnd_mean_dof = np.zeros(lay.n_total)
        bnd_mean_mono = np.zeros(n)
        total_area = 0.0
        maps = self.basis.derivative_maps()
        for lf, face in enumerate(self._faces):
            qp2, qw2, qp3 = self._face_quadrature(face)
            vals3 = self.basis.eval(qp3)
            vals2 = face.element.basis.eval(qp2)
            T = (vals3.T * qw2) @ vals2
            normal = self._signs[lf] * face.frame.normal
            ND = sum(normal[d] * maps[d] for d in range(3))
            idx = lay.face_dof_indices(lf)
            CF = face.element.pi_zero
            B[:, idx] += (ND @ T) @ CF
            bnd_mean_dof[idx] += face.element.H[0] @ CF
            bnd_mean_mono += T[:, 0]
            total_area += face.element.geometry.measure
        bnd_mean_dof /= total_area
        bnd_mean_mono /= total_area
        ncm = lay.n_cell_moments
        lap = self.basis.laplacian_map()
        moment_cols = slice(lay.n_total - ncm, lay.n_total)
        B[:, moment_cols] -= vol * lap[:, :ncm]

        R = pb.orthonormal_change(self.H) if k >= 3 else None
        if R is None:
            Gc = self.Gt.copy()
            Gc[0] = bnd_mean_mono
            Bc = B.copy()
            Bc[0] = bnd_mean_dof
        else:
            Gc = R.T @ self.Gt @ R
            Gc[0] = R.T @ bnd_mean_mono
            Bc = R.T @ B
            Bc[0] = bnd_mean_dof
        lu = scipy.linalg.lu_factor(Gc)
        X = _refined_solve(lu, Gc, Bc)
        self.pi_nabla_star = R @ X if R is not None else X
        self.pi_nabla = self.d_mat @ self.pi_nabla_star

        if k == 1:
            self.pi_zero = self.pi_nabla_star
        else:
            M = self.H @ self.pi_nabla_star
            M[:ncm] = 0.0
            M[np.arange(ncm), lay.n_total - ncm + np.arange(ncm)] = vol
            if R is None:
                lu_h = scipy.linalg.lu_factor(self.H)
                self.pi_zero = _refined_solve(lu_h, self.H, M)
            else:
                Z = R @ (R.T @ M)
                Z += R @ (R.T @ (M - self.H @ Z))
                self.pi_zero = Z

    # -- stabilization and stiffness -------------------------------------------

    def stabilization_matrix(self):
        """Face-wise stabilizing inner product on the dofs.

        Each face contributes the identity on its boundary nodes plus the
        L2 product of the face moment projections scaled by the inverse
        squared face diameter; nodes shared by several faces are counted
        once per face. Cell moments are left unstabilized.
        """
        lay = self.layout
        S = np.zeros((lay.n_total, lay.n_total))
        nmf = pb.n_poly(2, self.k - 2)
        for lf, face in enumerate(self._faces):
            idx = lay.face_dof_indices(lf)
            nbf = face.element.layout.n_boundary
            nodes = idx[:nbf]
            S[nodes, nodes] += 1.0
            if nmf:
                hf = face.element.geometry.h
                area = face.element.geometry.measure
                HjF = face.element.H[:nmf, :nmf]
                form = area ** 2 * np.linalg.inv(HjF)
                mom = idx[nbf:]
                S[np.ix_(mom, mom)] += form / hf ** 2
        return self.geometry.h * S

    def local_stiffness(self):
        """Projected stiffness plus the stabilized residual part."""
        S = self.stabilization_matrix()
        K = self.pi_nabla_star.T @ self.Gt @ self.pi_nabla_star
        resid = np.eye(self.layout.n_total) - self.pi_nabla
        K += resid.T @ S @ resid
        return 0.5 * (K + K.T)

    # -- load and interpolation -------------------------------------------------

    def _load_projector(self):
        lay = self.layout
        vol = self.geometry.measure
        if self.k == 1:
            return self.pi_zero, self.basis.n
        if self.k == 2:
            n1 = pb.n_poly(3, 1)
            H1 = self.H[:n1, :n1]
            return np.linalg.solve(H1, self.H[:n1] @ self.pi_zero), n1
        ncm = lay.n_cell_moments
        C = np.zeros((ncm, lay.n_total))
        C[:, lay.n_total - ncm:] = vol * np.linalg.inv(self.H[:ncm, :ncm])
        return C, ncm

    def local_load(self, f):
        """Right hand side integrals of f against the projected dofs."""
        C, nj = self._load_projector()
        fvals = np.asarray(f(self._qp), dtype=float)
        mvec = (self.basis.eval(self._qp)[:, :nj].T * self._qw) @ fvals
        return C.T @ mvec

    def interpolate(self, func):
        """Dof vector of the interpolant of a function given pointwise."""
        lay = self.layout
        dofs = np.empty(lay.n_total)
        dofs[:lay.n_boundary] = np.asarray(
            func(self._node_points), dtype=float)
        for lf, face in enumerate(self._faces):
            frame = face.frame
            trace = lambda q2: func(frame.to3d(q2))
            dofs[lay.face_dof_indices(lf)] = face.element.interpolate(trace)
        ncm = lay.n_cell_moments
        if ncm:
            fvals = np.asarray(func(self._qp), dtype=float)
            vals = self.basis.eval(self._qp)[:, :ncm]
            dofs[lay.n_total - ncm:] = \
                (vals.T * self._qw) @ fvals / self.geometry.measure
        return dofs
