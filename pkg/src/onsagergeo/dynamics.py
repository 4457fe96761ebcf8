"""Master-equation integration, the gradient-flow reformulation, metric
gradients of energies, and dissipation bookkeeping."""

import numpy as np
import scipy.linalg

from .chains import grad_matrix
from .errors import StepLeavesSimplex, BoundaryPoint
from .metric import response_matrix
from .mobility import EPS_BOUNDARY, as_simplex_point, check_interior

MAX_HALVINGS = 20


class Energy:
    """A scalar function of p with Euclidean gradient (and optional Hessian).

    The Hessian falls back to central differences of the gradient when no
    callback is supplied.
    """

    def __init__(self, value, gradient, hessian=None):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    def value(self, p):
        return float(self._value(p))

    def gradient(self, p):
        return np.asarray(self._gradient(p), dtype=float)

    def hessian(self, p, h=1e-6):
        if self._hessian is not None:
            return np.asarray(self._hessian(p), dtype=float)
        n = len(p)
        H = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            H[:, k] = (self.gradient(p + e) - self.gradient(p - e)) / (2 * h)
        return 0.5 * (H + H.T)


def divergence_energy(model, chain) -> Energy:
    """The f-divergence of a model as an Energy (diagonal analytic Hessian)."""
    return Energy(
        value=lambda p: model.divergence(chain, p),
        gradient=lambda p: model.divergence_gradient(chain, p),
        hessian=lambda p: np.diag(model.divergence_hessian_diag(chain, p)),
    )


def master_rhs(chain, p):
    """Right-hand side of the master equation dp_i/dt = sum_j (Q_ji p_j - Q_ij p_i)."""
    return chain.flow_matrix() @ np.asarray(p, dtype=float)


def master_exact(chain, p0, t):
    """Exact master-equation solution via the generator matrix exponential
    (test oracle for the integrator)."""
    return scipy.linalg.expm(t * chain.flow_matrix()) @ np.asarray(p0, dtype=float)


def metric_gradient(chain, model, F, p):
    """Metric gradient of an energy: L(theta(p)) (euclidean gradient of F).

    F may be an Energy or a bare gradient callback.
    """
    p = check_interior(p)
    g = F.gradient(p) if isinstance(F, Energy) else np.asarray(F(p), dtype=float)
    return response_matrix(chain, model.theta_matrix(chain, p)) @ g


def gradient_flow_rhs(chain, model, p):
    """-L(theta(p)) grad D_f(p): equals master_rhs identically when the model's
    mean function is built from the same f as its divergence."""
    p = check_interior(p)
    g = model.divergence_gradient(chain, p)
    return -response_matrix(chain, model.theta_matrix(chain, p)) @ g


# -- integrators ---------------------------------------------------------------

def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def advance_interior(f, y, dt, is_ok, depth=0):
    """One RK4 step that must land in the admissible set `is_ok`; failing steps
    are retaken as two half steps, at most MAX_HALVINGS levels deep."""
    try:
        y1 = rk4_step(f, y, dt)
        ok = is_ok(y1)
    except BoundaryPoint:
        ok = False
    if ok:
        return y1
    if depth >= MAX_HALVINGS:
        raise StepLeavesSimplex(
            f"integrator step left the simplex interior after {MAX_HALVINGS} halvings"
        )
    y_half = advance_interior(f, y, 0.5 * dt, is_ok, depth + 1)
    return advance_interior(f, y_half, 0.5 * dt, is_ok, depth + 1)


def _time_grid(T, dt):
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    steps = int(np.floor(T / dt + 1e-12))
    times = [k * dt for k in range(steps + 1)]
    if T - times[-1] > 1e-12 * max(1.0, T):
        times.append(T)
    return np.array(times)


class Trajectory:
    """A recorded master-equation solution with its energy ledger.

    Attributes: times, states (k x n), energy (D_f per time), and the two
    dissipation records dissipation_quadratic / dissipation_edgesum.
    """

    def __init__(self, times, states, energy, dq, de):
        self.times = times
        self.states = states
        self.energy = energy
        self.dissipation_quadratic = dq
        self.dissipation_edgesum = de

    def final_state(self):
        return self.states[-1]


def dissipation_pair(chain, model, p):
    """The energy decay rate along the flow, computed two ways:
    the quadratic form -g^T L(theta) g and the ordered-edge sum
    -1/2 sum (grad_omega g)_ij^2 theta_ij, g = grad D_f."""
    g = model.divergence_gradient(chain, p)
    theta_mat = model.theta_matrix(chain, p)
    quad = -float(g @ response_matrix(chain, theta_mat) @ g)
    gg = grad_matrix(chain, g)
    edge = -0.5 * float(np.sum(gg * gg * theta_mat))
    return quad, edge


def integrate(chain, model, p0, T, dt) -> Trajectory:
    """RK4 solution of the master equation with energy/dissipation records.

    Steps that would leave the eps-interior are retaken as half steps
    (recursively, bounded); the recorded grid keeps the requested dt.
    """
    p = as_simplex_point(p0)
    A = chain.flow_matrix()
    f = lambda q: A @ q
    is_ok = lambda q: bool((q >= EPS_BOUNDARY).all())
    times = _time_grid(T, dt)
    states = np.empty((len(times), chain.n))
    states[0] = p
    for k in range(1, len(times)):
        p = advance_interior(f, p, times[k] - times[k - 1], is_ok)
        states[k] = p
    energy = np.array([model.divergence(chain, q) for q in states])
    pairs = [dissipation_pair(chain, model, q) for q in states]
    dq = np.array([a for a, _ in pairs])
    de = np.array([b for _, b in pairs])
    return Trajectory(times, states, energy, dq, de)
