"""Covariant derivative, geodesics, transport, and the energy Hessian."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from onsagergeo import (
    AlphaMean,
    BvpNoConvergence,
    GeodesicPath,
    GeometricMean,
    KLLogMean,
    SampledPath,
    commutator,
    deflated_solve,
    directional_theta,
    divergence_energy,
    gamma_op,
    geodesic_bvp,
    geodesic_ivp,
    hessian_form,
    inner_product,
    koszul_scalar,
    lattice3_chain,
    levi_civita,
    parallel_transport,
    pseudo_inverse,
    response_matrix,
)
from onsagergeo.acceptance import (
    _scaled_potential,
    random_interior_point,
    random_potential,
    random_reversible_chain,
)
from onsagergeo.connection import _transport_rate, contract_d1

LATTICE = lattice3_chain()
KL = KLLogMean()
UNIFORM = np.full(3, 1.0 / 3.0)

CURVED_MODELS = [KLLogMean(), AlphaMean(0.0), GeometricMean(0.5)]


def _case(rng, n=None):
    n = n or int(rng.integers(3, 6))
    chain = random_reversible_chain(rng, n)
    p = random_interior_point(rng, n, floor=1e-3)
    return chain, p


def test_gamma_vanishing_cases():
    rng = np.random.default_rng(2)
    chain, p = _case(rng)
    const = np.full(chain.n, 1.7)
    phi = random_potential(rng, chain.n)
    assert_allclose(gamma_op(chain, KL, const, phi, p), 0.0, atol=1e-15)
    flat = AlphaMean(3.0)  # theta identically one
    assert np.abs(gamma_op(chain, flat, phi, phi, p)).max() < 1e-12


def test_gamma_is_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(10):
        chain, p = _case(rng)
        phi1 = random_potential(rng, chain.n)
        phi2 = random_potential(rng, chain.n)
        assert np.array_equal(gamma_op(chain, KL, phi1, phi2, p),
                              gamma_op(chain, KL, phi2, phi1, p))


def test_gamma_pairing_identity():
    # phi1^T L(V_3 theta) phi2 == (L phi3)^T Gamma(phi1, phi2)
    rng = np.random.default_rng(4)
    for model in CURVED_MODELS:
        for _ in range(10):
            chain, p = _case(rng)
            phi1, phi2, phi3 = (random_potential(rng, chain.n) for _ in range(3))
            L = response_matrix(chain, model.theta_matrix(chain, p))
            lhs = float(phi1 @ response_matrix(
                chain, directional_theta(chain, model, phi3, p)) @ phi2)
            rhs = float((L @ phi3) @ gamma_op(chain, model, phi1, phi2, p))
            assert lhs == pytest.approx(rhs, abs=1e-10 * (1 + abs(lhs)))


def test_directional_theta_matches_fd():
    rng = np.random.default_rng(5)
    eps = 1e-6
    for _ in range(15):
        chain, p = _case(rng)
        phi = random_potential(rng, chain.n)
        v = response_matrix(chain, KL.theta_matrix(chain, p)) @ phi
        fd = (KL.theta_matrix(chain, p + eps * v)
              - KL.theta_matrix(chain, p - eps * v)) / (2 * eps)
        d = directional_theta(chain, KL, phi, p)
        assert_allclose(d, fd, atol=1e-6 * (1 + abs(d).max()))
        assert_allclose(d, d.T, atol=1e-12 * (1 + abs(d).max()))
    const = np.ones(chain.n)
    assert_allclose(directional_theta(chain, KL, const, p), 0.0, atol=1e-15)


def test_commutator_basics():
    rng = np.random.default_rng(6)
    chain, p = _case(rng)
    phi1 = random_potential(rng, chain.n)
    phi2 = random_potential(rng, chain.n)
    assert_allclose(commutator(chain, KL, phi1, phi1, p), 0.0, atol=1e-14)
    c12 = commutator(chain, KL, phi1, phi2, p)
    c21 = commutator(chain, KL, phi2, phi1, p)
    assert_allclose(c12, -c21, atol=1e-14 * (1 + abs(c12).max()))
    flat = AlphaMean(3.0)
    assert np.abs(commutator(chain, flat, phi1, phi2, p)).max() < 1e-12


def test_commutator_matches_flow_composition():
    # compose Euler steps of the two flows in both orders
    rng = np.random.default_rng(7)
    eps = 1e-5
    for _ in range(5):
        chain, p = _case(rng, n=3)
        phi1 = random_potential(rng, 3)
        phi2 = random_potential(rng, 3)

        def flow(q, phi):
            return q + eps * response_matrix(chain, KL.theta_matrix(chain, q)) @ phi

        fd = (flow(flow(p, phi1), phi2) - flow(flow(p, phi2), phi1)) / eps**2
        c = commutator(chain, KL, phi1, phi2, p)
        assert_allclose(c, fd, atol=1e-3 * (1 + abs(c).max()))


def test_connection_is_torsion_free():
    rng = np.random.default_rng(8)
    for model in CURVED_MODELS:
        for _ in range(8):
            chain, p = _case(rng)
            phi1 = random_potential(rng, chain.n)
            phi2 = random_potential(rng, chain.n)
            d12 = levi_civita(chain, model, phi1, phi2, p).vector
            d21 = levi_civita(chain, model, phi2, phi1, p).vector
            c = commutator(chain, model, phi1, phi2, p)
            assert_allclose(d12 - d21, c, atol=1e-10 * (1 + abs(c).max()))


def test_connection_symmetric_part():
    rng = np.random.default_rng(9)
    chain, p = _case(rng)
    phi1 = random_potential(rng, chain.n)
    phi2 = random_potential(rng, chain.n)
    L = response_matrix(chain, KL.theta_matrix(chain, p))
    total = (levi_civita(chain, KL, phi1, phi2, p).vector
             + levi_civita(chain, KL, phi2, phi1, p).vector)
    expected = L @ gamma_op(chain, KL, phi1, phi2, p)
    assert_allclose(total, expected, atol=1e-12 * (1 + abs(expected).max()))


def test_connection_vector_is_mean_orthogonal():
    rng = np.random.default_rng(10)
    for _ in range(10):
        chain, p = _case(rng)
        phi1 = random_potential(rng, chain.n)
        phi2 = random_potential(rng, chain.n)
        cv = levi_civita(chain, KL, phi1, phi2, p)
        assert abs(cv.vector.sum()) < 1e-10 * (1 + abs(cv.vector).max())
        assert cv.scalar_form is None


def test_koszul_matches_connection_scalar():
    rng = np.random.default_rng(11)
    for model in CURVED_MODELS:
        for _ in range(10):
            chain, p = _case(rng)
            phi1, phi2, phi3 = (random_potential(rng, chain.n) for _ in range(3))
            cv = levi_civita(chain, model, phi1, phi2, p, phi3=phi3)
            k = koszul_scalar(chain, model, phi1, phi2, phi3, p)
            assert cv.scalar_form == pytest.approx(k, abs=1e-12 * (1 + abs(k)))


def test_metric_compatibility():
    # flow derivative of <V_2, V_3> splits into the two connection terms
    rng = np.random.default_rng(12)
    eps = 1e-6
    for _ in range(20):
        chain, p = _case(rng)
        phi1, phi2, phi3 = (random_potential(rng, chain.n) for _ in range(3))
        v1 = response_matrix(chain, KL.theta_matrix(chain, p)) @ phi1

        def pairing(q):
            return inner_product(chain, KL.theta_matrix(chain, q), phi2, phi3)

        fd = (pairing(p + eps * v1) - pairing(p - eps * v1)) / (2 * eps)
        rhs = (koszul_scalar(chain, KL, phi1, phi2, phi3, p)
               + koszul_scalar(chain, KL, phi1, phi3, phi2, p))
        assert fd == pytest.approx(rhs, abs=1e-5 * (1 + abs(rhs)))


def test_geodesic_conserves_speed():
    rng = np.random.default_rng(41)
    phi0 = _scaled_potential(LATTICE, KL, UNIFORM, rng.normal(size=3), speed=0.05)
    rec = geodesic_ivp(LATTICE, KL, UNIFORM, phi0, 1.0, 1e-3)
    assert rec.times.shape == (1001,)
    assert rec.states.shape == (1001, 3)
    assert abs(rec.speeds - 0.05).max() < 1e-8
    assert_allclose(rec.potentials.mean(axis=1), 0.0, atol=1e-14)
    assert_allclose(rec.states.sum(axis=1), 1.0, atol=1e-12)


def test_geodesic_with_zero_potential_stays_put():
    rec = geodesic_ivp(LATTICE, KL, UNIFORM, np.zeros(3), 1.0, 0.01)
    assert abs(rec.states - UNIFORM).max() < 1e-14
    assert abs(rec.speeds).max() == 0.0


def test_geodesic_time_reversal():
    rng = np.random.default_rng(42)
    phi0 = _scaled_potential(LATTICE, KL, UNIFORM, rng.normal(size=3), speed=0.05)
    fwd = geodesic_ivp(LATTICE, KL, UNIFORM, phi0, 1.0, 1e-3)
    back = geodesic_ivp(LATTICE, KL, fwd.final_state(), -fwd.potentials[-1],
                        1.0, 1e-3)
    assert abs(back.final_state() - UNIFORM).max() < 1e-10


def test_bvp_hits_the_target():
    target = np.array([0.5, 0.3, 0.2])
    phi0, rec, length = geodesic_bvp(LATTICE, KL, UNIFORM, target)
    assert abs(rec.final_state() - target).max() < 1e-7
    assert phi0.sum() == pytest.approx(0.0, abs=1e-12)
    assert length == pytest.approx(0.21353544999371732, rel=1e-7)

    # the geodesic is no longer than the straight segment
    ts = np.linspace(0.0, 1.0, 101)
    seg = np.outer(1 - ts, UNIFORM) + np.outer(ts, target)
    from onsagergeo import arc_length

    assert length < arc_length(LATTICE, KL, ts, seg)


def test_bvp_with_identical_endpoints():
    phi0, rec, length = geodesic_bvp(LATTICE, KL, UNIFORM, UNIFORM)
    assert abs(phi0).max() < 1e-12
    assert length == pytest.approx(0.0, abs=1e-12)
    assert_allclose(rec.final_state(), UNIFORM, atol=1e-12)


def test_bvp_reports_failure():
    with pytest.raises(BvpNoConvergence, match="shooting failed"):
        geodesic_bvp(LATTICE, KL, UNIFORM, np.array([0.55, 0.25, 0.2]),
                     max_iter=1, restarts=0, tol=1e-15)


def test_transport_of_the_driving_potential():
    # the geodesic's own velocity field is parallel along it
    rng = np.random.default_rng(50)
    phi0 = _scaled_potential(LATTICE, KL, UNIFORM, rng.normal(size=3), speed=0.05)
    states = parallel_transport(LATTICE, KL, GeodesicPath(UNIFORM, phi0, 1.0),
                                phi0, 0.01)
    worst = max(abs(s.eta - s.phi).max() for s in states)
    assert worst < 1e-8
    assert states[0].t == 0.0 and states[-1].t == pytest.approx(1.0)


def test_transport_preserves_inner_products():
    rng = np.random.default_rng(51)
    phi0 = _scaled_potential(LATTICE, KL, UNIFORM, rng.normal(size=3), speed=0.05)
    eta0 = np.column_stack([random_potential(rng, 3), random_potential(rng, 3)])
    states = parallel_transport(LATTICE, KL, GeodesicPath(UNIFORM, phi0, 1.0),
                                eta0, 0.01)
    grams = []
    for s in states:
        t = KL.theta_matrix(LATTICE, s.gamma)
        grams.append([[inner_product(LATTICE, t, s.eta[:, a], s.eta[:, b])
                       for b in range(2)] for a in range(2)])
    grams = np.array(grams)
    assert abs(grams - grams[0]).max() < 1e-7


def test_transport_on_a_sampled_path_matches_the_geodesic_route():
    rng = np.random.default_rng(52)
    phi0 = _scaled_potential(LATTICE, KL, UNIFORM, rng.normal(size=3), speed=0.05)
    eta0 = random_potential(rng, 3)
    rec = geodesic_ivp(LATTICE, KL, UNIFORM, phi0, 1.0, 1e-3)
    direct = parallel_transport(LATTICE, KL, GeodesicPath(UNIFORM, phi0, 1.0),
                                eta0, 0.01)
    sampled = parallel_transport(
        LATTICE, KL, SampledPath(rec.times[::10], rec.states[::10]), eta0, 0.01)
    assert abs(sampled[-1].eta - direct[-1].eta).max() < 1e-6


def test_transport_rate_is_minus_the_connection():
    rng = np.random.default_rng(53)
    for _ in range(10):
        chain, p = _case(rng)
        phi = random_potential(rng, chain.n)
        eta = random_potential(rng, chain.n)
        L = response_matrix(chain, KL.theta_matrix(chain, p))
        rate = _transport_rate(chain, KL, p, phi, eta[:, None])[:, 0]
        nabla = levi_civita(chain, KL, phi, eta, p).vector
        expected = -deflated_solve(L, nabla)
        assert_allclose(rate, expected, atol=1e-12 * (1 + abs(expected).max()))


def test_transport_input_validation():
    with pytest.raises(ValueError, match="eta0 must have"):
        parallel_transport(LATTICE, KL, GeodesicPath(UNIFORM, np.zeros(3)),
                           np.zeros(4), 0.1)
    with pytest.raises(TypeError, match="GeodesicPath or a SampledPath"):
        parallel_transport(LATTICE, KL, (np.arange(3), np.eye(3)),
                           np.zeros(3), 0.1)


def test_hessian_routes_and_symmetry():
    rng = np.random.default_rng(60)
    F = divergence_energy(KL, LATTICE)
    for _ in range(10):
        p = random_interior_point(rng, 3)
        phi1 = random_potential(rng, 3)
        phi2 = random_potential(rng, 3)
        a = hessian_form(LATTICE, KL, F, phi1, phi2, p, route="matrix")
        b = hessian_form(LATTICE, KL, F, phi1, phi2, p, route="edges")
        assert a == pytest.approx(b, abs=1e-10 * (1 + abs(a)))
        c = hessian_form(LATTICE, KL, F, phi2, phi1, p)
        assert a == pytest.approx(c, abs=1e-9 * (1 + abs(a)))
    with pytest.raises(ValueError, match="route"):
        hessian_form(LATTICE, KL, F, phi1, phi2, p, route="nope")


def test_hessian_matches_geodesic_second_difference():
    rng = np.random.default_rng(61)
    F = divergence_energy(KL, LATTICE)
    p = np.array([0.5, 0.3, 0.2])
    phi = random_potential(rng, 3)
    h = 1e-3
    fwd = geodesic_ivp(LATTICE, KL, p, phi, h, h / 5)
    bwd = geodesic_ivp(LATTICE, KL, p, -phi, h, h / 5)
    fd = (F.value(fwd.final_state()) - 2 * F.value(p)
          + F.value(bwd.final_state())) / h**2
    hess = hessian_form(LATTICE, KL, F, phi, phi, p)
    assert hess == pytest.approx(fd, rel=1e-4)
