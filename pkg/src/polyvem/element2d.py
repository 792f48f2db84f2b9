"""Local virtual element operators on a single polygon.

Shape functions are never evaluated inside the cell: everything is driven
by their degrees of freedom (vertex values, Lobatto edge values, scaled
interior moments). The element exposes the energy and L2 projectors onto
polynomials, the projected stiffness with a choice of stabilizations, the
projected load, and the interpolation operator.
"""

import numpy as np
import scipy.linalg

from . import polybasis as pb
from .mesh import polygon_geometry


class DofLayout:
    """Counts and index ranges of the local degrees of freedom."""

    def __init__(self, n_boundary, n_moment):
        self.n_boundary = n_boundary
        self.n_moment = n_moment
        self.n_total = n_boundary + n_moment


def _refined_solve(lu, A, B):
    """Solve A X = B with one step of iterative refinement."""
    X = scipy.linalg.lu_solve(lu, B)
    X += scipy.linalg.lu_solve(lu, B - A @ X)
    return X


class Element2D:
    """Degree-k virtual element on a star-shaped polygon."""

    def __init__(self, points, k):
        if k < 1:
            raise ValueError("polynomial degree must be at least 1")
        self.k = k
        self.points = np.asarray(points, dtype=float)
        nv = len(self.points)
        self.geometry = polygon_geometry(self.points)
        self.basis = pb.ScaledMonomialBasis(
            2, k, self.geometry.centroid, self.geometry.h)
        self.layout = DofLayout(nv * k, pb.n_poly(2, k - 2))

        self._build_edges()
        self._qp, self._qw = pb.polygon_quadrature(
            self.points, self.geometry.star_center, 2 * k)
        self.H = pb.mass_matrix(self.basis, self._qp, self._qw)
        self.Gt = pb.stiffness_from_mass(self.basis, self.H)
        self._build_d_mat()
        self._build_projectors()

    # -- geometry of the boundary ------------------------------------------

    def _build_edges(self):
        k = self.k
        nv = len(self.points)
        self._edge_ts = np.concatenate([[0.0], pb.edge_interior_nodes(k),
                                        [1.0]])
        node_pts = [self.points]
        self._edge_dofs = []
        self._edge_lengths = np.empty(nv)
        self._edge_normals = np.empty((nv, 2))
        for e in range(nv):
            p0, p1 = self.points[e], self.points[(e + 1) % nv]
            tang = p1 - p0
            length = np.linalg.norm(tang)
            self._edge_lengths[e] = length
            self._edge_normals[e] = np.array([tang[1], -tang[0]]) / length
            dofs = [e] + [nv + e * (k - 1) + j for j in range(k - 1)] \
                + [(e + 1) % nv]
            self._edge_dofs.append(np.array(dofs))
            if k > 1:
                interior = self._edge_ts[1:-1]
                node_pts.append(p0 + interior[:, None] * tang)
        self._node_points = np.concatenate(node_pts)

    def volume_quadrature(self, degree):
        """A quadrature rule over the polygon, exact to the degree."""
        return pb.polygon_quadrature(self.points,
                                     self.geometry.star_center, degree)

    # -- dof matrix and projectors -----------------------------------------

    def _build_d_mat(self):
        nm = self.layout.n_moment
        area = self.geometry.measure
        self.d_mat = np.vstack([self.basis.eval(self._node_points),
                                self.H[:nm, :] / area])

    def _build_projectors(self):
        k = self.k
        nb = self.layout.n_boundary
        nm = self.layout.n_moment
        n = self.basis.n
        area = self.geometry.measure

        tg, wg = pb.gauss_legendre(k + 2)
        lag = pb.lagrange_matrix(self._edge_ts, tg)
        powers = tg[:, None] ** np.arange(k + 1)

        B = np.zeros((n, self.layout.n_total))
        bnd_mean_dof = np.zeros(self.layout.n_total)
        bnd_mean_mono = np.zeros(n)
        perimeter = self._edge_lengths.sum()
        for e in range(len(self.points)):
            p0 = self.points[e]
            p1 = self.points[(e + 1) % len(self.points)]
            length = self._edge_lengths[e]
            dofs = self._edge_dofs[e]
            Tn = pb.normal_derivative_trace_matrix(
                self.basis, p0, p1, self._edge_normals[e])
            qvals = Tn @ powers[:, :Tn.shape[1]].T
            B[:, dofs] += length * qvals @ (wg[:, None] * lag)
            bnd_mean_dof[dofs] += length * (wg @ lag)
            tvals = pb.edge_trace_matrix(self.basis, p0, p1) @ powers.T
            bnd_mean_mono += length * (tvals @ wg)
        bnd_mean_dof /= perimeter
        bnd_mean_mono /= perimeter
        # moments carry the exact volume term of the integration by parts
        lap = self.basis.laplacian_map()
        B[:, nb:] -= area * lap[:, :nm]

        # a change to an H-orthonormal basis keeps the projector solves
        # well conditioned once the monomials become nearly dependent
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
            M[:nm] = 0.0
            M[np.arange(nm), nb + np.arange(nm)] = area
            if R is None:
                lu_h = scipy.linalg.lu_factor(self.H)
                self.pi_zero = _refined_solve(lu_h, self.H, M)
            else:
                Z = R @ (R.T @ M)
                Z += R @ (R.T @ (M - self.H @ Z))
                self.pi_zero = Z

    # -- stabilization and stiffness ---------------------------------------

    def stabilization_matrix(self, kind):
        """Stabilizing inner product on the dofs.

        "s1" is the identity on boundary dofs. "s2" and "s2tilde" penalize
        the tangential derivative jump energy of the edge traces, weighted
        by the cell diameter and the edge length respectively.
        """
        n = self.layout.n_total
        S = np.zeros((n, n))
        if kind == "s1":
            idx = np.arange(self.layout.n_boundary)
            S[idx, idx] = 1.0
            return S
        if kind not in ("s2", "s2tilde"):
            raise ValueError(f"unknown stabilization {kind!r}")
        tg, wg = pb.gauss_legendre(self.k + 2)
        dlag = pb.lagrange_matrix(self._edge_ts, tg, deriv=True)
        local = (dlag.T * wg) @ dlag
        for e in range(len(self.points)):
            dofs = self._edge_dofs[e]
            weight = (self.geometry.h / self._edge_lengths[e]
                      if kind == "s2" else 1.0)
            S[np.ix_(dofs, dofs)] += weight * local
        return S

    def local_stiffness(self, kind):
        """Projected stiffness plus the stabilized residual part."""
        S = self.stabilization_matrix(kind)
        K = self.pi_nabla_star.T @ self.Gt @ self.pi_nabla_star
        resid = np.eye(self.layout.n_total) - self.pi_nabla
        K += resid.T @ S @ resid
        return 0.5 * (K + K.T)

    # -- load, interpolation, norms ----------------------------------------

    def _load_projector(self):
        """Coefficient matrix C with (load polynomial of phi_i) = C[:, i]."""
        k = self.k
        nb = self.layout.n_boundary
        nm = self.layout.n_moment
        area = self.geometry.measure
        if k == 1:
            return self.pi_zero, self.basis.n
        if k == 2:
            n1 = pb.n_poly(2, 1)
            H1 = self.H[:n1, :n1]
            return np.linalg.solve(H1, self.H[:n1] @ self.pi_zero), n1
        # for k >= 3 the degree k-2 moments are stored dofs
        C = np.zeros((nm, self.layout.n_total))
        C[:, nb:nb + nm] = area * np.linalg.inv(self.H[:nm, :nm])
        return C, nm

    def local_load(self, f):
        """Right hand side integrals of f against the projected dofs."""
        C, nj = self._load_projector()
        fvals = np.asarray(f(self._qp), dtype=float)
        mvec = (self.basis.eval(self._qp)[:, :nj].T * self._qw) @ fvals
        return C.T @ mvec

    def interpolate(self, func):
        """Dof vector of the interpolant of a function given pointwise."""
        dofs = np.empty(self.layout.n_total)
        nb = self.layout.n_boundary
        dofs[:nb] = np.asarray(func(self._node_points), dtype=float)
        nm = self.layout.n_moment
        if nm:
            fvals = np.asarray(func(self._qp), dtype=float)
            vals = self.basis.eval(self._qp)[:, :nm]
            dofs[nb:] = (vals.T * self._qw) @ fvals / self.geometry.measure
        return dofs

    def seminorm_tbar(self, v):
        """Computable seminorm combining the projected interior part with
        scaled L2 norms of the edge trace projections."""
        k = self.k
        nm = self.layout.n_moment
        total = 0.0
        if nm:
            Hm = self.H[:nm, :nm]
            c = np.linalg.solve(Hm, self.geometry.measure * v[self.layout.n_boundary:])
            total += c @ Hm @ c
        tg, wg = pb.gauss_legendre(k + 2)
        lag = pb.lagrange_matrix(self._edge_ts, tg)
        gram = 1.0 / (np.arange(k)[:, None] + np.arange(k)[None, :] + 1.0)
        powers = tg[:, None] ** np.arange(k)
        edge_total = 0.0
        for e in range(len(self.points)):
            trace = lag @ v[self._edge_dofs[e]]
            r = powers.T @ (wg * trace)
            edge_total += self._edge_lengths[e] * (r @ np.linalg.solve(gram, r))
        total += self.geometry.h * edge_total
        return float(np.sqrt(total))
