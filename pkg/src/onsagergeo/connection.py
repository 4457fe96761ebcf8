"""Covariant structure of the probability manifold: commutators, the edge
coupling operator Gamma, the Levi-Civita connection, parallel transport,
geodesics (initial- and boundary-value), and Hessian forms."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chains import grad_matrix
from .dynamics import Energy, advance_interior, rk4_step
from .errors import BvpNoConvergence, OnsagerGeoError
from .metric import (
    curve_velocity,
    deflated_solve,
    mean_zero,
    onsager_matrix,
    pseudo_inverse,
    response_matrix,
)
from .mobility import EPS_BOUNDARY, check_interior


def contract_d1(d1, vec):
    """Contract the theta partials against a vertex vector:
    out_ij = (d theta_ij/d p_i) vec_i + (d theta_ij/d p_j) vec_j."""
    return d1 * vec[:, None] + d1.T * vec[None, :]


def directional_theta(chain, model, phi, p):
    """First directional derivative of theta along V_phi (symmetric edge matrix)."""
    theta_mat = model.theta_matrix(chain, p)
    d1 = model.d1_matrix(chain, p)
    v = response_matrix(chain, theta_mat) @ np.asarray(phi, dtype=float)
    return contract_d1(d1, v)


def gamma_op(chain, model, phi1, phi2, p):
    """Gamma(phi1, phi2, p)_i = sum_j (grad phi1)_ij (grad phi2)_ij dtheta_ij/dp_i."""
    d1 = model.d1_matrix(chain, p)
    g1 = grad_matrix(chain, np.asarray(phi1, dtype=float))
    g2 = grad_matrix(chain, np.asarray(phi2, dtype=float))
    return (g1 * g2 * d1).sum(axis=1)


def commutator(chain, model, phi1, phi2, p):
    """Lie bracket of the fields V_phi1, V_phi2 (potentials held fixed):
    [V1, V2] = L(V_1 theta) phi2 - L(V_2 theta) phi1."""
    theta_mat = model.theta_matrix(chain, p)
    d1 = model.d1_matrix(chain, p)
    L = response_matrix(chain, theta_mat)
    v1 = L @ np.asarray(phi1, dtype=float)
    v2 = L @ np.asarray(phi2, dtype=float)
    return (
        response_matrix(chain, contract_d1(d1, v1)) @ phi2
        - response_matrix(chain, contract_d1(d1, v2)) @ phi1
    )


@dataclass
class ConnectionValue:
    """The covariant derivative as a tangent vector, with the optional scalar
    pairing against a third potential."""

    vector: np.ndarray
    scalar_form: float | None = None


def levi_civita(chain, model, phi1, phi2, p, phi3=None) -> ConnectionValue:
    """nabla_{V1} V2 = 1/2 ( L(V_1 theta) phi2 - L(V_2 theta) phi1
    + L(theta) Gamma(phi1, phi2, p) ); with phi3 the scalar form <nabla_1 2, V3>."""
    theta_mat = model.theta_matrix(chain, p)
    d1 = model.d1_matrix(chain, p)
    L = response_matrix(chain, theta_mat)
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    v1 = L @ phi1
    v2 = L @ phi2
    g1 = grad_matrix(chain, phi1)
    g2 = grad_matrix(chain, phi2)
    gam = (g1 * g2 * d1).sum(axis=1)
    vec = 0.5 * (
        response_matrix(chain, contract_d1(d1, v1)) @ phi2
        - response_matrix(chain, contract_d1(d1, v2)) @ phi1
        + L @ gam
    )
    scalar = None
    if phi3 is not None:
        # <vec, V3> = vec^T R L phi3 = vec^T phi3 because vec is mean-orthogonal
        scalar = float(vec @ (np.asarray(phi3, dtype=float)))
    return ConnectionValue(vector=vec, scalar_form=scalar)


def koszul_scalar(chain, model, phi1, phi2, phi3, p):
    """<nabla_{V1} V2, V3> written purely through Gamma:
    1/2 ( phi1^T L Gamma(2,3) - phi2^T L Gamma(1,3) + phi3^T L Gamma(1,2) )."""
    theta_mat = model.theta_matrix(chain, p)
    L = response_matrix(chain, theta_mat)
    g13 = gamma_op(chain, model, phi2, phi3, p)
    g23 = gamma_op(chain, model, phi1, phi3, p)
    g12 = gamma_op(chain, model, phi1, phi2, p)
    return 0.5 * float(phi1 @ L @ g13 - phi2 @ L @ g23 + phi3 @ L @ g12)


# -- geodesics -----------------------------------------------------------------

@dataclass
class GeodesicRecord:
    times: np.ndarray
    states: np.ndarray      # gamma(t), row per time
    potentials: np.ndarray  # Phi(t), mean-zero
    speeds: np.ndarray      # sqrt(<V_Phi, V_Phi>)

    def final_state(self):
        return self.states[-1]


def _geodesic_rhs(chain, model):
    n = chain.n

    def f(y):
        p = y[:n]
        phi = y[n:]
        theta_mat, d1 = model.theta_d1_matrices(chain, p)
        L = response_matrix(chain, theta_mat)
        g = grad_matrix(chain, phi)
        dgamma = L @ phi
        dphi = -0.5 * (g * g * d1).sum(axis=1)
        return np.concatenate([dgamma, dphi])

    return f


def _speed(chain, model, p, phi):
    L = response_matrix(chain, model.theta_matrix(chain, p))
    return float(np.sqrt(max(phi @ L @ phi, 0.0)))


def geodesic_ivp(chain, model, p0, phi0, T, dt) -> GeodesicRecord:
    """Integrate the geodesic system
    dgamma/dt = L(theta) Phi,   dPhi_i/dt = -1/2 sum_j (grad Phi)_ij^2 dtheta_ij/dp_i
    with RK4, projecting Phi to mean zero after every step."""
    from .dynamics import _time_grid

    n = chain.n
    p0 = check_interior(p0)
    phi0 = mean_zero(phi0)
    f = _geodesic_rhs(chain, model)
    is_ok = lambda y: bool((y[:n] >= EPS_BOUNDARY).all())
    times = _time_grid(T, dt)
    states = np.empty((len(times), n))
    pots = np.empty((len(times), n))
    speeds = np.empty(len(times))
    y = np.concatenate([p0, phi0])
    states[0], pots[0] = p0, phi0
    speeds[0] = _speed(chain, model, p0, phi0)
    for k in range(1, len(times)):
        y = advance_interior(f, y, times[k] - times[k - 1], is_ok)
        y[n:] -= y[n:].mean()
        states[k] = y[:n]
        pots[k] = y[n:]
        speeds[k] = _speed(chain, model, y[:n], y[n:])
    return GeodesicRecord(times, states, pots, speeds)


def _mean_zero_basis(n):
    return scipy.linalg.null_space(np.ones((1, n)))  # (n, n-1), orthonormal


def geodesic_bvp(chain, model, p0, p1, nsteps=100, tol=1e-9, max_iter=50,
                 restarts=8, seed=0):
    """Single shooting for the two-point geodesic problem on [0, 1].

    Damped Newton on the endpoint residual gamma(1) - p1 over mean-zero initial
    potentials; the Jacobian is taken by forward differences.  Returns
    (phi0, GeodesicRecord, length).
    """
    p0 = check_interior(p0)
    p1 = check_interior(p1)
    n = chain.n
    B = _mean_zero_basis(n)
    dt = 1.0 / nsteps

    def shoot(x):
        rec = geodesic_ivp(chain, model, p0, B @ x, 1.0, dt)
        return rec.final_state() - p1, rec

    R0 = pseudo_inverse(onsager_matrix(chain, model.theta_matrix(chain, p0)))
    x_init = B.T @ (R0 @ (p1 - p0))
    rng = np.random.default_rng(seed)
    best = np.inf

    for attempt in range(restarts + 1):
        if attempt == 0:
            x = x_init.copy()
        else:
            scale = max(np.abs(x_init).max(), 1e-3)
            x = x_init + rng.normal(size=n - 1) * scale * 0.5 * attempt
        try:
            r, rec = shoot(x)
        except OnsagerGeoError:
            continue
        norm = np.abs(r).max()
        for _ in range(max_iter):
            if norm < tol:
                length = float(np.trapezoid(rec.speeds, rec.times))
                return B @ x, rec, length
            J = np.empty((n - 1, n - 1))
            h = 1e-7 * (1.0 + np.abs(x).max())
            failed = False
            for k in range(n - 1):
                e = np.zeros(n - 1)
                e[k] = h
                try:
                    rk, _ = shoot(x + e)
                except OnsagerGeoError:
                    failed = True
                    break
                J[:, k] = (rk[:-1] - r[:-1]) / h
            if failed:
                break
            try:
                delta = np.linalg.solve(J, -r[:-1])
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(J, -r[:-1], rcond=None)[0]
            lam, improved = 1.0, False
            while lam > 2.0**-12:
                try:
                    rc, recc = shoot(x + lam * delta)
                except OnsagerGeoError:
                    lam *= 0.5
                    continue
                if np.abs(rc).max() < norm:
                    x = x + lam * delta
                    r, rec, norm = rc, recc, np.abs(rc).max()
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                break
        best = min(best, norm)
        if norm < tol:
            length = float(np.trapezoid(rec.speeds, rec.times))
            return B @ x, rec, length
    raise BvpNoConvergence(f"shooting failed; best endpoint residual {best:.3e}")


# -- parallel transport ----------------------------------------------------------

@dataclass
class TransportState:
    t: float
    gamma: np.ndarray
    phi: np.ndarray
    eta: np.ndarray


@dataclass
class GeodesicPath:
    """Transport along the geodesic started at (p0, phi0), for time T."""

    p0: np.ndarray
    phi0: np.ndarray
    T: float = 1.0


@dataclass
class SampledPath:
    """Transport along a sampled curve; the driving potential is recovered as
    Phi = R(theta) dgamma/dt with central differences."""

    times: np.ndarray
    states: np.ndarray


def _transport_rate(chain, model, p, phi, eta, pre=None):
    """d eta/dt = -1/2 R(theta) [ L(V_phi theta) eta - L(V_eta theta) phi
    + L(theta) Gamma(phi, eta) ];  eta may hold several columns.

    `pre`, when given, carries (theta, D1, L) already evaluated at p so the
    joint geodesic+transport integrator does the model work once per stage.
    The metric action R(...) on the mean-zero bracket is taken by a
    kernel-deflated solve rather than an eigendecomposition.
    """
    if pre is None:
        theta_mat, d1 = model.theta_d1_matrices(chain, p)
        L = response_matrix(chain, theta_mat)
    else:
        theta_mat, d1, L = pre
    v_phi = L @ phi
    A = response_matrix(chain, contract_d1(d1, v_phi))
    V = L @ eta
    # W_ij = omega_ij D1_ij (phi_i - phi_j) collects every phi-weighted theta
    # sensitivity; both remaining terms contract it against the eta columns:
    #   L(V_eta theta) phi = rowsum(W) o V - W^T V
    #   Gamma(phi, eta)    = rowsum(W) o eta - W eta
    W = chain.omega * d1 * (phi[:, None] - phi[None, :])
    r = W.sum(axis=1)[:, None]
    bracket = A @ eta - (r * V - W.T @ V) + L @ (r * eta - W @ eta)
    return -0.5 * deflated_solve(L, bracket)


def parallel_transport(chain, model, path, eta0, dt):
    """Transport eta0 (one potential per column if 2-D) along the path.

    Returns a list of TransportState; the inner products <V_eta, V_eta> are
    invariants of the exact flow.
    """
    eta0 = np.asarray(eta0, dtype=float)
    single = eta0.ndim == 1
    H = eta0[:, None].copy() if single else eta0.copy()
    if H.shape[0] != chain.n:
        raise ValueError("eta0 must have n entries (or one column of n per vector)")
    H -= H.mean(axis=0)
    n = chain.n

    if isinstance(path, GeodesicPath):
        from .dynamics import _time_grid

        p0 = check_interior(path.p0)
        phi0 = mean_zero(path.phi0)
        m = H.shape[1]

        def f(y):
            p = y[:n]
            phi = y[n:2 * n]
            eta = y[2 * n:].reshape(n, m)
            theta_mat, d1 = model.theta_d1_matrices(chain, p)
            L = response_matrix(chain, theta_mat)
            g = grad_matrix(chain, phi)
            dgamma = L @ phi
            dphi = -0.5 * (g * g * d1).sum(axis=1)
            deta = _transport_rate(chain, model, p, phi, eta,
                                   pre=(theta_mat, d1, L))
            return np.concatenate([dgamma, dphi, deta.ravel()])

        is_ok = lambda y: bool((y[:n] >= EPS_BOUNDARY).all())
        times = _time_grid(path.T, dt)
        y = np.concatenate([p0, phi0, H.ravel()])
        out = [TransportState(0.0, p0.copy(), phi0.copy(),
                              H[:, 0].copy() if single else H.copy())]
        for k in range(1, len(times)):
            y = advance_interior(f, y, times[k] - times[k - 1], is_ok)
            y[n:2 * n] -= y[n:2 * n].mean()
            eta = y[2 * n:].reshape(n, m)
            eta -= eta.mean(axis=0)
            y[2 * n:] = eta.ravel()
            out.append(TransportState(float(times[k]), y[:n].copy(),
                                      y[n:2 * n].copy(),
                                      eta[:, 0].copy() if single else eta.copy()))
        return out

    if isinstance(path, SampledPath):
        times = np.asarray(path.times, dtype=float)
        states = np.asarray(path.states, dtype=float)
        vel = curve_velocity(times, states)
        pots = np.empty_like(states)
        for k, (p, v) in enumerate(zip(states, vel)):
            R = pseudo_inverse(onsager_matrix(chain, model.theta_matrix(chain, p)))
            pots[k] = mean_zero(R @ v)

        def gamma_at(t):
            return np.array([np.interp(t, times, states[:, i]) for i in range(n)])

        def phi_at(t):
            return np.array([np.interp(t, times, pots[:, i]) for i in range(n)])

        def f_eta(t, eta_flat):
            eta = eta_flat.reshape(n, -1)
            return _transport_rate(chain, model, gamma_at(t), phi_at(t), eta).ravel()

        grid = np.arange(times[0], times[-1] + 0.5 * dt, dt)
        if grid[-1] < times[-1] - 1e-12:
            grid = np.append(grid, times[-1])
        else:
            grid[-1] = times[-1]
        eta = H.copy()
        out = [TransportState(float(grid[0]), gamma_at(grid[0]), phi_at(grid[0]),
                              eta[:, 0].copy() if single else eta.copy())]
        for t0, t1 in zip(grid[:-1], grid[1:]):
            h = t1 - t0
            y = eta.ravel()
            k1 = f_eta(t0, y)
            k2 = f_eta(t0 + 0.5 * h, y + 0.5 * h * k1)
            k3 = f_eta(t0 + 0.5 * h, y + 0.5 * h * k2)
            k4 = f_eta(t1, y + h * k3)
            eta = (y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)).reshape(n, -1)
            eta -= eta.mean(axis=0)
            out.append(TransportState(float(t1), gamma_at(t1), phi_at(t1),
                                      eta[:, 0].copy() if single else eta.copy()))
        return out

    raise TypeError("path must be a GeodesicPath or a SampledPath")


# -- Hessian of an energy --------------------------------------------------------

def hessian_form(chain, model, F: Energy, phi1, phi2, p, route="matrix"):
    """Hess F(V_phi1, V_phi2) at p.

    route="matrix": the response-matrix expression
        phi1^T L H_F L phi2 + 1/2 gradF . ( L(V_1 theta) phi2 + L(V_2 theta) phi1
                                            - L(theta) Gamma(phi1, phi2) )
    route="edges": the same first-order part rewritten as ordered-edge sums of
    Gamma terms; the two must agree.
    """
    p = check_interior(p)
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    theta_mat = model.theta_matrix(chain, p)
    d1 = model.d1_matrix(chain, p)
    L = response_matrix(chain, theta_mat)
    grad_f = F.gradient(p)
    second = float(phi1 @ L @ F.hessian(p) @ L @ phi2)
    if route == "matrix":
        v1 = L @ phi1
        v2 = L @ phi2
        g1 = grad_matrix(chain, phi1)
        g2 = grad_matrix(chain, phi2)
        gam12 = (g1 * g2 * d1).sum(axis=1)
        first = 0.5 * float(grad_f @ (
            response_matrix(chain, contract_d1(d1, v1)) @ phi2
            + response_matrix(chain, contract_d1(d1, v2)) @ phi1
            - L @ gam12
        ))
    elif route == "edges":
        g1 = grad_matrix(chain, phi1)
        g2 = grad_matrix(chain, phi2)
        gf = grad_matrix(chain, grad_f)
        gam_2f = (g2 * gf * d1).sum(axis=1)
        gam_1f = (g1 * gf * d1).sum(axis=1)
        gam_12 = (g1 * g2 * d1).sum(axis=1)
        first = 0.25 * float(np.sum(theta_mat * (
            g1 * grad_matrix(chain, gam_2f)
            + g2 * grad_matrix(chain, gam_1f)
            - gf * grad_matrix(chain, gam_12)
        )))
    else:
        raise ValueError(f"unknown route {route!r}")
    return second + first
