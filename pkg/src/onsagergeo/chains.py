"""Reversible Markov chains as weighted graphs, plus the discrete calculus
(gradient, divergence, Laplacian) everything else is built on.

A chain is specified by its off-diagonal rate matrix Q.  The stationary
distribution pi is computed, reversibility (detailed balance) is verified, and
the symmetric edge weights omega_ij = Q_ij * pi_i define the graph.
"""

import numpy as np
import scipy.linalg

from .errors import (
    DetailedBalanceViolation,
    DegenerateStationary,
    DisconnectedGraph,
)

DB_RTOL = 1e-9        # detailed-balance tolerance, relative to max omega
PI_FLOOR = 1e-12      # smallest admissible stationary entry


class ReversibleChain:
    """A reversible finite-state Markov chain and its weighted graph.

    Attributes
    ----------
    n : int
        Number of states (vertices).
    Q : (n, n) ndarray
        Off-diagonal transition rates; the diagonal is zeroed and unused.
    pi : (n,) ndarray
        Stationary distribution, strictly positive, sums to 1.
    omega : (n, n) ndarray
        Symmetric edge weights omega_ij = Q_ij * pi_i, zero diagonal.
    edges : tuple of (int, int)
        Unordered edges as pairs (i, j) with i < j and omega_ij > 0.
    neighbors : tuple of frozenset
        Adjacency sets N(i).

    Instances are treated as immutable once built; use
    :func:`build_reversible_chain`.
    """

    def __init__(self, Q, pi, omega):
        self.n = len(pi)
        self.Q = Q
        self.pi = pi
        self.omega = omega
        self.sqrt_omega = np.sqrt(omega)
        self.edge_mask = omega > 0
        self.edges = tuple(
            (i, j)
            for i in range(self.n)
            for j in range(i + 1, self.n)
            if omega[i, j] > 0
        )
        self.neighbors = tuple(
            frozenset(np.flatnonzero(self.edge_mask[i])) for i in range(self.n)
        )

    def flow_matrix(self):
        """Generator of the master equation dp/dt = A p:
        A_ij = Q_ji for i != j, A_ii = -sum_j Q_ij."""
        A = self.Q.T.copy()
        np.fill_diagonal(A, -self.Q.sum(axis=1))
        return A

    def __repr__(self):
        return f"ReversibleChain(n={self.n}, edges={len(self.edges)})"


class EdgeField:
    """An antisymmetric function on the ordered edges of a chain.

    Stored as a full matrix with `values[i, j] = -values[j, i]` and zeros off
    the edge set; indexing an ordered pair returns the signed value.
    """

    def __init__(self, chain, values):
        values = np.asarray(values, dtype=float)
        if not np.allclose(values, -values.T, atol=1e-12 * (1 + np.abs(values).max())):
            raise ValueError("edge field must be antisymmetric")
        self.chain = chain
        self.values = np.where(chain.edge_mask, values, 0.0)

    def __getitem__(self, ij):
        i, j = ij
        return self.values[i, j]


def _connected(mask):
    n = mask.shape[0]
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(mask[i]):
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


def build_reversible_chain(Q) -> ReversibleChain:
    """Build a :class:`ReversibleChain` from a nonnegative rate matrix.

    Parameters
    ----------
    Q : (n, n) array_like
        Off-diagonal entries are transition rates per unit time; the diagonal
        is ignored.

    Returns
    -------
    ReversibleChain
        With stationary pi solved from the generator's null space and
        omega = Q_ij * pi_i verified symmetric.

    Raises
    ------
    DisconnectedGraph
        If the support of Q + Q^T is not connected.
    DegenerateStationary
        If the stationary distribution is not unique/strictly positive.
    DetailedBalanceViolation
        If Q_ij pi_i != Q_ji pi_j beyond tolerance.
    """
    Q = np.array(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Q must be a square matrix")
    n = Q.shape[0]
    if n < 2:
        raise ValueError("need at least two states")
    np.fill_diagonal(Q, 0.0)
    if (Q < 0).any():
        raise ValueError("off-diagonal rates must be nonnegative")

    support = (Q > 0) | (Q.T > 0)
    if not _connected(support):
        raise DisconnectedGraph("rate matrix does not induce a connected graph")

    # stationary distribution: null space of the transposed generator
    A = Q.T - np.diag(Q.sum(axis=1))  # dp/dt = A p
    ns = scipy.linalg.null_space(A)
    if ns.shape[1] != 1:
        raise DegenerateStationary(
            f"stationary distribution is not unique (kernel dim {ns.shape[1]})"
        )
    pi = ns[:, 0]
    pi = pi / pi.sum()
    if (pi <= PI_FLOOR).any():
        raise DegenerateStationary("stationary distribution has a non-positive entry")

    omega = Q * pi[:, None]
    asym = np.abs(omega - omega.T).max()
    if asym > DB_RTOL * omega.max():
        raise DetailedBalanceViolation(
            f"detailed balance fails: max|Q_ij pi_i - Q_ji pi_j| = {asym:.3e}"
        )
    omega = 0.5 * (omega + omega.T)  # kill round-off asymmetry
    return ReversibleChain(Q, pi, omega)


def chain_from_rates(n, rates) -> ReversibleChain:
    """Build a chain from 1-based (i, j, Q_ij) triples, the config format."""
    Q = np.zeros((n, n))
    for i, j, q in rates:
        i, j = int(i), int(j)
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise ValueError(f"bad rate entry ({i}, {j}): indices are 1-based and distinct")
        Q[i - 1, j - 1] = float(q)
    return build_reversible_chain(Q)


# -- built-in example chains -------------------------------------------------

def triangle_reaction_chain() -> ReversibleChain:
    """Three species in a reaction cycle: rates 1<->2: (1, 2), 2<->3: (1, 2),
    1<->3: (1, 4).  Stationary distribution (4/7, 2/7, 1/7)."""
    Q = np.array([[0.0, 1.0, 1.0],
                  [2.0, 0.0, 1.0],
                  [4.0, 2.0, 0.0]])
    return build_reversible_chain(Q)


def lattice3_chain() -> ReversibleChain:
    """Three-point path 1 - 2 - 3 with unit edge weights (rates 3 * adjacency,
    uniform stationary distribution)."""
    Q = 3.0 * np.array([[0.0, 1.0, 0.0],
                        [1.0, 0.0, 1.0],
                        [0.0, 1.0, 0.0]])
    return build_reversible_chain(Q)


PRESETS = {
    "triangle-reaction": triangle_reaction_chain,
    "lattice3": lattice3_chain,
}


def preset_chain(name) -> ReversibleChain:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}"
        ) from None


# -- discrete calculus -------------------------------------------------------

def grad_omega(chain, phi) -> EdgeField:
    """Weighted graph gradient: (grad phi)_ij = sqrt(omega_ij) (phi_j - phi_i)."""
    phi = np.asarray(phi, dtype=float)
    return EdgeField(chain, grad_matrix(chain, phi))


def grad_matrix(chain, phi):
    """Gradient as a raw antisymmetric matrix (hot path, no wrapper)."""
    return chain.sqrt_omega * (phi[None, :] - phi[:, None])


def div_omega(chain, v):
    """Weighted divergence: div(v)_i = sum_{j in N(i)} sqrt(omega_ij) v_ij.

    Adjoint to the gradient: sum_i phi_i div(v)_i
    = -1/2 sum_{ordered (i,j)} (grad phi)_ij v_ij.
    """
    m = v.values if isinstance(v, EdgeField) else np.asarray(v, dtype=float)
    return (chain.sqrt_omega * m).sum(axis=1)


def laplacian_omega(chain, phi):
    """div(grad(phi)); negative semidefinite, kernel = constants."""
    phi = np.asarray(phi, dtype=float)
    return div_omega(chain, grad_matrix(chain, phi))
