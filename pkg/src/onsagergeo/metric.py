"""The Onsager response matrix, its pseudo-inverse (the metric tensor), inner
products, orthonormal frames, arc length, and geodesic distance."""

import numpy as np
import scipy.integrate

from .errors import NearSingular

KERNEL_RTOL = 1e-12  # eigenvalues below KERNEL_RTOL * lambda_max count as kernel


def mean_zero(phi):
    """Project a potential to the mean-zero gauge."""
    phi = np.asarray(phi, dtype=float)
    return phi - phi.mean()


def response_matrix(chain, edge_values):
    """The response matrix L(M) of an edge matrix M:
    L_ij = -omega_ij M_ij (i != j), L_ii = sum_k omega_ki M_ki.

    For M = theta this is the Onsager matrix; the same assembly applies to any
    symmetric edge matrix (directional derivatives of theta, etc.).  Rows and
    columns sum to zero.
    """
    A = chain.omega * edge_values
    out = -A
    np.fill_diagonal(out, A.sum(axis=0))  # omega's diagonal is zero
    return out


class OnsagerMatrix:
    """L(theta) together with its (lazily computed) eigensystem.

    Attributes
    ----------
    L : (n, n) ndarray
        Symmetric positive semidefinite, kernel spanned by the constants.
    eigenvalues : (n-1,) ndarray
        The positive eigenvalues in ascending order (kernel excluded).
    eigenvectors : (n, n-1) ndarray
        Matching orthonormal eigenvectors.
    """

    def __init__(self, chain, L):
        self.chain = chain
        self.L = L
        self._eig = None

    def _eigensystem(self):
        if self._eig is None:
            lam, U = np.linalg.eigh(self.L)
            top = lam[-1]
            if top <= 0:
                raise NearSingular("response matrix has no positive eigenvalue")
            cutoff = KERNEL_RTOL * top
            kernel = int((lam < cutoff).sum())
            if kernel != 1:
                raise NearSingular(
                    f"response matrix kernel dimension {kernel}, expected 1 "
                    "(point effectively on the boundary or mobility degenerate)"
                )
            self._eig = (lam[1:], U[:, 1:])
        return self._eig

    @property
    def eigenvalues(self):
        return self._eigensystem()[0]

    @property
    def eigenvectors(self):
        return self._eigensystem()[1]


def onsager_matrix(chain, theta_mat) -> OnsagerMatrix:
    """Assemble L(theta) for a mobility edge matrix."""
    return OnsagerMatrix(chain, response_matrix(chain, theta_mat))


def _as_onsager(chain_or_none, L):
    if isinstance(L, OnsagerMatrix):
        return L
    return OnsagerMatrix(chain_or_none, np.asarray(L, dtype=float))


def pseudo_inverse(L):
    """Moore-Penrose inverse of L(theta) restricted to the mean-zero subspace.

    Satisfies L R L = L, R L R = R, R 1 = 0; raises NearSingular when the
    kernel is more than one-dimensional.
    """
    om = _as_onsager(None, L)
    lam, U = om._eigensystem()
    return (U / lam) @ U.T


def deflated_solve(L, rhs):
    """The pseudo-inverse action x = R rhs for mean-zero rhs, computed as the
    solution of the kernel-deflated system (L + 1 1^T / n) x = rhs.

    Adding the rank-one term moves the constant kernel to eigenvalue one and
    leaves the mean-zero subspace untouched, so a plain solve replaces the
    eigendecomposition inside ODE right-hand sides.
    """
    L = np.asarray(L, dtype=float)
    try:
        return np.linalg.solve(L + 1.0 / L.shape[0], rhs)
    except np.linalg.LinAlgError as exc:
        raise NearSingular(f"deflated response solve failed ({exc})")


def inner_product(chain, theta_mat, phi1, phi2):
    """Riemannian inner product <V_phi1, V_phi2> = phi1^T L(theta) phi2."""
    return float(phi1 @ response_matrix(chain, theta_mat) @ phi2)


def inner_product_edges(chain, theta_mat, phi1, phi2):
    """Same inner product as an ordered-pair edge sum:
    1/2 sum_(i,j) (grad phi1)_ij (grad phi2)_ij theta_ij."""
    from .chains import grad_matrix

    g1 = grad_matrix(chain, np.asarray(phi1, dtype=float))
    g2 = grad_matrix(chain, np.asarray(phi2, dtype=float))
    return float(0.5 * np.sum(g1 * g2 * theta_mat))


def orthonormal_frame(L):
    """Tangent vectors e_k = sqrt(lambda_k) u_k, k = 1..n-1, orthonormal in the
    metric <x, y> = x^T R y.  Returned as rows of an (n-1, n) array."""
    om = _as_onsager(None, L)
    lam, U = om._eigensystem()
    return (U * np.sqrt(lam)).T


def frame_potentials(L):
    """Potentials generating the orthonormal frame: Phi_k = u_k / sqrt(lambda_k),
    so that L Phi_k = e_k."""
    om = _as_onsager(None, L)
    lam, U = om._eigensystem()
    return (U / np.sqrt(lam)).T


def curve_velocity(times, states):
    """Central-difference velocity of a sampled curve (one-sided at the ends)."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    v = np.empty_like(states)
    v[1:-1] = (states[2:] - states[:-2]) / (times[2:] - times[:-2])[:, None]
    v[0] = (states[1] - states[0]) / (times[1] - times[0])
    v[-1] = (states[-1] - states[-2]) / (times[-1] - times[-2])
    return v


def arc_length(chain, model, times, states):
    """Length of a sampled curve: quadrature of sqrt(pdot^T R(theta) pdot).

    Simpson's rule on uniform grids, trapezoid otherwise; velocities by
    central differences.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if len(times) < 2:
        return 0.0
    if not (np.diff(times) > 0).all():
        raise ValueError("time grid must be strictly increasing")
    vel = curve_velocity(times, states)
    speeds = np.empty(len(times))
    for k, (p, v) in enumerate(zip(states, vel)):
        R = pseudo_inverse(onsager_matrix(chain, model.theta_matrix(chain, p)))
        speeds[k] = np.sqrt(max(v @ R @ v, 0.0))
    steps = np.diff(times)
    if np.allclose(steps, steps[0], rtol=1e-10, atol=0.0):
        return float(scipy.integrate.simpson(speeds, x=times))
    return float(np.trapezoid(speeds, times))


def distance(chain, model, p0, p1, **bvp_options):
    """Geodesic distance between two interior points (shooting solver)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if np.allclose(p0, p1, atol=1e-14):
        return 0.0
    from .connection import geodesic_bvp

    _, record, length = geodesic_bvp(chain, model, p0, p1, **bvp_options)
    return length
