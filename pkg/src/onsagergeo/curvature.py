"""Riemann curvature of the mobility geometry.

Second directional derivatives of the edge activity, the curvature tensor by
two independent evaluation routes (a response-matrix assembly and an explicit
ordered-edge sum), sectional/Ricci/scalar curvatures on the orthonormal frame,
and a finite-difference chart oracle used to cross-validate everything.
"""

from dataclasses import dataclass

import numpy as np

from .chains import grad_matrix
from .connection import contract_d1
from .errors import DegeneratePlane
from .metric import (
    frame_potentials,
    onsager_matrix,
    pseudo_inverse,
    response_matrix,
)
from .mobility import check_interior

# The sign convention for the m-matrix that matches both the chart oracle and
# the 3-lattice closed forms: m = -2 W - (unhalved) directional contractions.
M_CONVENTION = "m = -2W - dtheta(L(V1 theta) phi2) - dtheta(L(V2 theta) phi1)"


def _w_second(s_ii, s_ij, v1, v2):
    """Mixed second derivative of theta along two frozen vertex directions."""
    dd_i = s_ii * v2[:, None] + s_ij * v2[None, :]
    dd_j = s_ij * v2[:, None] + s_ii.T * v2[None, :]
    return dd_i * v1[:, None] + dd_j * v1[None, :]


@dataclass
class SecondDirectional:
    """Second-order directional data of theta along V_phi1, V_phi2.

    All fields are symmetric edge matrices.  Both sign conventions of the
    m-matrix are retained; `m` is the one that reproduces the chart oracle.
    """

    W: np.ndarray
    nabla_theta_L: np.ndarray  # dtheta contracted with L(V_phi1 theta) phi2
    theta_second: np.ndarray   # V_phi1 (V_phi2 theta), equals W + nabla_theta_L
    m: np.ndarray
    m_variant: np.ndarray      # the +2W variant that appears in one expansion


def second_directional(chain, model, phi1, phi2, p) -> SecondDirectional:
    p = check_interior(p)
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    theta_mat = model.theta_matrix(chain, p)
    d1 = model.d1_matrix(chain, p)
    s_ii, s_ij = model.d2_matrices(chain, p)
    L = response_matrix(chain, theta_mat)
    v1 = L @ phi1
    v2 = L @ phi2
    W = _w_second(s_ii, s_ij, v1, v2)
    n12 = contract_d1(d1, response_matrix(chain, contract_d1(d1, v1)) @ phi2)
    n21 = contract_d1(d1, response_matrix(chain, contract_d1(d1, v2)) @ phi1)
    return SecondDirectional(
        W=W,
        nabla_theta_L=n12,
        theta_second=W + n12,
        m=-2.0 * W - n12 - n21,
        m_variant=2.0 * W - n12 - n21,
    )


def gamma3(chain, model, phi1, phi2, phi3, phi4, p):
    """Third-order coupling matrix.

    With A_ij = (grad Gamma(phi1, phi2))_ij (grad phi4)_ij dtheta_ij/dp_i,
    Gamma3_ij = 1/2 sum_k sqrt(w_ik) (A_kj - A_ij) (grad phi3)_ik theta_ik.
    """
    p = check_interior(p)
    theta_mat = model.theta_matrix(chain, p)
    d1 = model.d1_matrix(chain, p)
    g1 = grad_matrix(chain, np.asarray(phi1, dtype=float))
    g2 = grad_matrix(chain, np.asarray(phi2, dtype=float))
    gam = (g1 * g2 * d1).sum(axis=1)
    g3 = grad_matrix(chain, np.asarray(phi3, dtype=float))
    g4 = grad_matrix(chain, np.asarray(phi4, dtype=float))
    return _gamma3_core(chain, theta_mat, d1, gam, g3, g4)


def _gamma3_core(chain, theta_mat, d1, gam_12, g3, g4):
    A = grad_matrix(chain, gam_12) * g4 * d1
    M = chain.sqrt_omega * g3 * theta_mat
    term1 = np.einsum("ik,kj->ij", M, A)
    term2 = M.sum(axis=1)[:, None] * A
    return 0.5 * (term1 - term2)


class _Workspace:
    """Point-level quantities shared by the curvature routes."""

    def __init__(self, chain, model, p):
        self.p = check_interior(p)
        self.theta = model.theta_matrix(chain, p)
        self.d1 = model.d1_matrix(chain, p)
        self.s_ii, self.s_ij = model.d2_matrices(chain, p)
        self.L = response_matrix(chain, self.theta)
        self.R = pseudo_inverse(onsager_matrix(chain, self.theta))
        self.chain = chain

    def velocity(self, phi):
        return self.L @ phi

    def m_matrix(self, phis, a, b, V):
        d1 = self.d1
        W = _w_second(self.s_ii, self.s_ij, V[a], V[b])
        n_ab = contract_d1(d1, response_matrix(self.chain, contract_d1(d1, V[a])) @ phis[b])
        n_ba = contract_d1(d1, response_matrix(self.chain, contract_d1(d1, V[b])) @ phis[a])
        return -2.0 * W - n_ab - n_ba

    def commutator(self, phis, a, b, V):
        d1 = self.d1
        return (
            response_matrix(self.chain, contract_d1(d1, V[a])) @ phis[b]
            - response_matrix(self.chain, contract_d1(d1, V[b])) @ phis[a]
        )


def _riemann_assembled(ws: _Workspace, phis):
    ch = ws.chain
    L = ws.L
    V = [L @ f for f in phis]
    g = [grad_matrix(ch, f) for f in phis]
    gam = lambda a, b: (g[a] * g[b] * ws.d1).sum(axis=1)
    m = lambda a, b: ws.m_matrix(phis, a, b, V)
    comm = lambda a, b: ws.commutator(phis, a, b, V)
    return 0.25 * (
        phis[1] @ response_matrix(ch, m(0, 2)) @ phis[3]
        + phis[0] @ response_matrix(ch, m(1, 3)) @ phis[2]
        - phis[1] @ response_matrix(ch, m(0, 3)) @ phis[2]
        - phis[0] @ response_matrix(ch, m(1, 2)) @ phis[3]
        + gam(0, 2) @ L @ gam(1, 3)
        - gam(1, 2) @ L @ gam(0, 3)
        + comm(0, 2) @ ws.R @ comm(1, 3)
        - comm(1, 2) @ ws.R @ comm(0, 3)
        + 2.0 * comm(2, 3) @ ws.R @ comm(0, 1)
    )


def _riemann_explicit(ws: _Workspace, phis):
    ch = ws.chain
    T, d1, s_ii, s_ij = ws.theta, ws.d1, ws.s_ii, ws.s_ij
    L = ws.L
    V = [L @ f for f in phis]
    g = [grad_matrix(ch, f) for f in phis]
    sw = ch.sqrt_omega

    # vertex-diagonal second partials: pair the two gradients sitting on the
    # same pivot vertex with the outgoing flux sums
    def b1pair(a, b):
        return (g[a] * g[b] * s_ii).sum(axis=1)

    def flux(a):
        return (sw * T * g[a]).sum(axis=1)

    block1 = 0.5 * np.sum(
        -b1pair(1, 3) * flux(0) * flux(2)
        - b1pair(0, 2) * flux(1) * flux(3)
        + b1pair(1, 2) * flux(0) * flux(3)
        + b1pair(0, 3) * flux(1) * flux(2)
    )

    # mixed second partials under the four-index difference operator
    def b2(a, b, c, d):
        C = g[a] * g[b] * s_ij
        P = sw * g[c] * T
        Q = sw * g[d] * T
        u, u0 = P.sum(axis=1), P.sum(axis=0)
        v, v0 = Q.sum(axis=1), Q.sum(axis=0)
        return (
            np.einsum("i,k,ik->", u, v, C)
            - np.einsum("i,l,il->", u, v0, C)
            - np.einsum("j,k,jk->", u0, v, C)
            + np.einsum("j,l,jl->", u0, v0, C)
        )

    block2 = 0.125 * (-b2(1, 3, 0, 2) - b2(0, 2, 1, 3) + b2(1, 2, 0, 3) + b2(0, 3, 1, 2))

    # eight third-order coupling terms
    gam = lambda a, b: (g[a] * g[b] * d1).sum(axis=1)

    def g3sum(a, b, c, d):
        return _gamma3_core(ch, T, d1, gam(a, b), g[c], g[d]).sum()

    block3 = 0.25 * (
        -g3sum(1, 3, 0, 2) - g3sum(1, 3, 2, 0)
        - g3sum(0, 2, 1, 3) - g3sum(0, 2, 3, 1)
        + g3sum(1, 2, 0, 3) + g3sum(1, 2, 3, 0)
        + g3sum(0, 3, 1, 2) + g3sum(0, 3, 2, 1)
    )

    block4 = 0.125 * np.sum(T * (
        grad_matrix(ch, gam(0, 2)) * grad_matrix(ch, gam(1, 3))
        - grad_matrix(ch, gam(1, 2)) * grad_matrix(ch, gam(0, 3))
    ))

    comm = lambda a, b: ws.commutator(phis, a, b, V)
    block5 = 0.25 * (
        comm(0, 2) @ ws.R @ comm(1, 3)
        - comm(1, 2) @ ws.R @ comm(0, 3)
        + 2.0 * comm(2, 3) @ ws.R @ comm(0, 1)
    )
    return block1 + block2 + block3 + block4 + block5


def riemann(chain, model, phi1, phi2, phi3, phi4, p, route="assembled"):
    """<R(V_phi1, V_phi2) V_phi3, V_phi4> at p."""
    ws = _Workspace(chain, model, p)
    phis = [np.asarray(f, dtype=float) for f in (phi1, phi2, phi3, phi4)]
    if route == "assembled":
        return float(_riemann_assembled(ws, phis))
    if route == "explicit":
        return float(_riemann_explicit(ws, phis))
    raise ValueError(f"unknown route {route!r}")


def sectional(chain, model, phi1, phi2, p):
    """Sectional curvature of the plane spanned by V_phi1, V_phi2."""
    ws = _Workspace(chain, model, p)
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    a11 = float(phi1 @ ws.L @ phi1)
    a22 = float(phi2 @ ws.L @ phi2)
    a12 = float(phi1 @ ws.L @ phi2)
    gram = a11 * a22 - a12 * a12
    if gram <= 1e-12 * max(a11 * a22, 0.0):
        raise DegeneratePlane(f"Gram determinant {gram:.3e} below tolerance")
    num = _riemann_assembled(ws, [phi1, phi2, phi2, phi1])
    return float(num / gram)


def ricci_scalar(chain, model, p):
    """Ricci form on the orthonormal frame and the scalar curvature.

    Ric(e_a, e_b) = sum_c <R(e_c, e_a) e_b, e_c>; scalar = trace.
    """
    ws = _Workspace(chain, model, p)
    pots = frame_potentials(onsager_matrix(chain, ws.theta))
    k = pots.shape[0]
    ric = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            total = 0.0
            for c in range(k):
                total += _riemann_assembled(ws, [pots[c], pots[a], pots[b], pots[c]])
            ric[a, b] = ric[b, a] = total
    return ric, float(np.trace(ric))


# -- chart-coordinate oracle ---------------------------------------------------

def _chart_metric(chain, model, x):
    p = np.append(x, 1.0 - x.sum())
    R = pseudo_inverse(onsager_matrix(chain, model.theta_matrix(chain, p)))
    n = chain.n
    J = np.vstack([np.eye(n - 1), -np.ones(n - 1)])
    return J.T @ R @ J


def _chart_christoffel(chain, model, x, h_metric):
    m = chain.n - 1
    G0 = _chart_metric(chain, model, x)
    dG = np.zeros((m, m, m))
    for a in range(m):
        e = np.zeros(m)
        e[a] = h_metric
        dG[a] = (_chart_metric(chain, model, x + e)
                 - _chart_metric(chain, model, x - e)) / (2.0 * h_metric)
    G_inv = np.linalg.inv(G0)
    gam = np.zeros((m, m, m))
    for i in range(m):
        for j in range(m):
            for k in range(m):
                gam[i, j, k] = 0.5 * sum(
                    G_inv[i, l] * (dG[j][l, k] + dG[k][l, j] - dG[l][j, k])
                    for l in range(m)
                )
    return gam


def chart_curvature_oracle(chain, model, p, h_metric=1e-5, h_christoffel=1e-4):
    """Fully lowered Riemann tensor in the chart x = (p_1, ..., p_{n-1}).

    Christoffel symbols come from central differences of the chart metric;
    their partials from a second central-difference layer.  Independent of the
    response-matrix routes, so it arbitrates them.
    """
    p = check_interior(p)
    x = np.asarray(p, dtype=float)[:-1]
    m = chain.n - 1
    d_gam = np.zeros((m, m, m, m))
    for a in range(m):
        e = np.zeros(m)
        e[a] = h_christoffel
        d_gam[a] = (_chart_christoffel(chain, model, x + e, h_metric)
                    - _chart_christoffel(chain, model, x - e, h_metric)) / (2.0 * h_christoffel)
    gam = _chart_christoffel(chain, model, x, h_metric)
    r_up = np.zeros((m, m, m, m))
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    r_up[i, j, k, l] = d_gam[k][i, l, j] - d_gam[l][i, k, j] + sum(
                        gam[mm, l, j] * gam[i, k, mm] - gam[mm, k, j] * gam[i, l, mm]
                        for mm in range(m)
                    )
    G0 = _chart_metric(chain, model, x)
    return np.einsum("im,mjkl->ijkl", G0, r_up)


def oracle_contraction(chain, model, phi1, phi2, phi3, phi4, p, lowered=None):
    """Contract the chart tensor to <R(V_phi1, V_phi2) V_phi3, V_phi4>."""
    if lowered is None:
        lowered = chart_curvature_oracle(chain, model, p)
    L = response_matrix(chain, model.theta_matrix(chain, p))
    v = [(L @ np.asarray(f, dtype=float))[:-1] for f in (phi1, phi2, phi3, phi4)]
    return float(np.einsum("ijkl,i,j,k,l->", lowered, v[3], v[2], v[0], v[1]))


# -- summary report --------------------------------------------------------------

@dataclass
class CurvatureReport:
    point: np.ndarray
    riemann: np.ndarray          # frame components <R(e_a,e_b)e_c,e_d>
    sectional: np.ndarray        # frame-pair plane curvatures, nan on diagonal
    ricci: np.ndarray
    scalar: float
    oracle_residual: float
    m_convention: str = M_CONVENTION


def curvature_report(chain, model, p) -> CurvatureReport:
    """Frame curvature data at p, cross-checked against the chart oracle."""
    ws = _Workspace(chain, model, p)
    pots = frame_potentials(onsager_matrix(chain, ws.theta))
    k = pots.shape[0]
    tensor = np.empty((k, k, k, k))
    for a in range(k):
        for b in range(k):
            for c in range(k):
                for d in range(k):
                    tensor[a, b, c, d] = _riemann_assembled(
                        ws, [pots[a], pots[b], pots[c], pots[d]])
    lowered = chart_curvature_oracle(chain, model, p)
    E = np.array([(ws.L @ f)[:-1] for f in pots])
    oracle = np.einsum("ijkl,di,cj,ak,bl->abcd", lowered, E, E, E, E)
    residual = float(np.abs(tensor - oracle).max())

    sec = np.full((k, k), np.nan)
    for a in range(k):
        for b in range(k):
            if a != b:
                # frame vectors are orthonormal, so the Gram determinant is 1
                sec[a, b] = tensor[a, b, b, a]
    ric = np.einsum("cabc->ab", tensor)
    return CurvatureReport(
        point=np.asarray(p, dtype=float).copy(),
        riemann=tensor,
        sectional=sec,
        ricci=ric,
        scalar=float(np.trace(ric)),
        oracle_residual=residual,
    )
