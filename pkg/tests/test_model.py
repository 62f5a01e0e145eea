import numpy as np
import pytest

from sktlab.errors import (
    AsymmetricSupport,
    CycleInconsistent,
    DetailedBalanceViolated,
    NonPositiveDensity,
)
from sktlab.model import (
    SKTParameters,
    detailed_balance_residual,
    diffusion_matrix,
    dissipation_lower_bound,
    entropy_density,
    entropy_variable,
    find_reversible_measure,
    inverse_entropy_variable,
    mobility_matrix,
)


class TestReversibleMeasure:
    def test_two_species_ratio(self):
        # pi_1 * 2 = pi_2 * 1, anchored at pi_1 = 1
        pi = find_reversible_measure(np.array([[0.0, 2.0], [1.0, 0.0]]))
        assert np.allclose(pi, [1.0, 2.0], rtol=1e-14)

    def test_symmetric_gives_ones(self):
        a = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 2.0], [0.5, 2.0, 0.0]])
        assert np.allclose(find_reversible_measure(a), 1.0)

    def test_cyclic_inconsistency_detected(self):
        # forward 3-cycle product 1, backward 8
        a = np.array([[0.0, 1.0, 2.0], [2.0, 0.0, 1.0], [1.0, 2.0, 0.0]])
        with pytest.raises(CycleInconsistent):
            find_reversible_measure(a)

    def test_asymmetric_support_rejected(self):
        a = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(AsymmetricSupport):
            find_reversible_measure(a)

    def test_disconnected_components_anchored_independently(self):
        a = np.zeros((4, 4))
        a[0, 1], a[1, 0] = 3.0, 1.0    # component {0,1}: pi = (1, 3)
        a[2, 3], a[3, 2] = 1.0, 4.0    # component {2,3}: pi = (1, 1/4)
        pi = find_reversible_measure(a)
        assert np.allclose(pi, [1.0, 3.0, 1.0, 0.25])

    def test_recovery_against_linear_oracle(self, rng):
        # Oracle: solve the balance equations directly by least squares.
        for _ in range(20):
            n = 4
            pi_true = rng.uniform(0.2, 5.0, n)
            s = rng.uniform(0.1, 2.0, (n, n))
            s = s + s.T
            a = s / pi_true[:, None]
            pi = find_reversible_measure(a)
            expected = pi_true / pi_true[0]
            assert np.max(np.abs(pi - expected) / expected) < 1e-12
            assert detailed_balance_residual(a, pi) < 1e-12


class TestParameters:
    def test_mode_validation(self):
        with pytest.raises(ValueError):
            SKTParameters(a0=[1.0], a=[[0.0]], pi=[1.0], mode="with_self_diffusion")
        with pytest.raises(ValueError):
            SKTParameters(a0=[0.0], a=[[0.0]], pi=[1.0])  # fits neither mode

    def test_detailed_balance_enforced(self):
        with pytest.raises(DetailedBalanceViolated):
            SKTParameters(a0=[1.0, 1.0], a=[[0.0, 2.0], [1.0, 0.0]], pi=[1.0, 1.0])

    def test_negative_coefficients_rejected(self):
        with pytest.raises(ValueError):
            SKTParameters(a0=[-1.0], a=[[0.0]], pi=[1.0])


class TestAlgebra:
    def test_diffusion_matrix_example(self):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.0, 1.0], [1.0, 0.0]], pi=[1.0, 1.0])
        A = diffusion_matrix(p, [1.0, 2.0])
        assert np.allclose(A, [[3.0, 1.0], [2.0, 2.0]])

    def test_scalar_heat_limit(self):
        p = SKTParameters(a0=[2.5], a=[[0.0]], pi=[1.0])
        assert np.allclose(diffusion_matrix(p, [7.0]), [[2.5]])

    def test_vanishing_density_limit(self):
        p = SKTParameters(a0=[1.0, 2.0], a=[[0.0, 1.0], [1.0, 0.0]], pi=[1.0, 1.0])
        A = diffusion_matrix(p, [1e-14, 1e-14])
        assert np.allclose(A, np.diag([1.0, 2.0]), atol=1e-12)

    def test_entropy_density_values(self):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.0, 1.0], [1.0, 0.0]], pi=[1.0, 1.0])
        assert entropy_density(p, [1.0, 1.0]) == 0.0
        assert abs(entropy_density(p, [np.e, 1.0]) - 1.0) < 1e-14
        p2 = SKTParameters(a0=[1.0], a=[[0.0]], pi=[2.0])
        assert entropy_density(p2, [0.0]) == 2.0   # u log u -> 0 limit

    def test_entropy_density_nonnegative(self, rng):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.0, 1.0], [1.0, 0.0]], pi=[0.7, 0.7])
        for _ in range(200):
            u = rng.uniform(0.0, 10.0, 2)
            assert entropy_density(p, u) >= 0.0

    def test_entropy_convex_along_segments(self, rng):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.0, 2.0], [1.0, 0.0]], pi=[1.0, 2.0])
        for _ in range(300):
            u = rng.uniform(0.01, 10.0, 2)
            v = rng.uniform(0.01, 10.0, 2)
            lam = rng.uniform()
            mid = entropy_density(p, lam * u + (1 - lam) * v)
            assert mid <= lam * entropy_density(p, u) + (1 - lam) * entropy_density(p, v) + 1e-12

    def test_entropy_variable_roundtrip(self, rng):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.0, 2.0], [1.0, 0.0]], pi=[1.0, 2.0])
        assert np.allclose(entropy_variable(p, [1.0, 1.0]), 0.0)
        assert np.allclose(inverse_entropy_variable(p, [0.0, 0.0]), 1.0)
        p2 = SKTParameters(a0=[1.0], a=[[0.0]], pi=[2.0])
        assert np.allclose(entropy_variable(p2, [np.e]), [2.0])
        for _ in range(100):
            w = rng.uniform(-5.0, 5.0, 2)
            back = entropy_variable(p, inverse_entropy_variable(p, w))
            assert np.max(np.abs(back - w)) < 1e-13 * max(1.0, np.max(np.abs(w)))

    def test_entropy_variable_rejects_nonpositive(self):
        p = SKTParameters(a0=[1.0], a=[[0.0]], pi=[1.0])
        with pytest.raises(NonPositiveDensity):
            entropy_variable(p, [0.0])
        with pytest.raises(NonPositiveDensity):
            entropy_variable(p, [-1.0])

    def test_mobility_examples(self):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.0, 1.0], [1.0, 0.0]], pi=[1.0, 1.0])
        w = entropy_variable(p, [1.0, 2.0])
        assert np.allclose(mobility_matrix(p, w), [[3.0, 2.0], [2.0, 4.0]])
        p1 = SKTParameters(a0=[1.0], a=[[0.0]], pi=[1.0])
        for u in (0.3, 1.7):
            assert np.allclose(mobility_matrix(p1, [np.log(u)]), [[u]])

    def test_mobility_symmetric_at_symmetric_point(self):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.5, 1.0], [1.0, 0.5]], pi=[1.0, 1.0])
        B = mobility_matrix(p, [0.0, 0.0])
        assert np.allclose(B, B.T)

    def test_mobility_form_matches_entropy_form(self, rng):
        # z . B(w) z with z = h''(u) z' reproduces z' . (h'' A z')
        p = SKTParameters(a0=[0.2, 0.3], a=[[0.4, 0.6], [0.3, 0.5]], pi=[1.0, 2.0])
        for _ in range(100):
            w = rng.uniform(-2.0, 2.0, 2)
            u = inverse_entropy_variable(p, w)
            zp = rng.standard_normal(2)
            z = (p.pi / u) * zp
            lhs = z @ mobility_matrix(p, w) @ z
            rhs = zp @ (np.diag(p.pi / u) @ diffusion_matrix(p, u) @ zp)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


class TestDissipationBound:
    def test_scalar_equality(self):
        p = SKTParameters(a0=[1.0], a=[[0.0]], pi=[1.0])
        for u, z in ((0.5, 1.3), (2.0, -0.7)):
            bound = dissipation_lower_bound(p, [u], [z])
            assert abs(bound - z**2 / u) < 1e-14

    def test_zero_direction(self):
        p = SKTParameters(a0=[1.0, 1.0], a=[[0.0, 1.0], [1.0, 0.0]], pi=[1.0, 1.0])
        assert dissipation_lower_bound(p, [1.0, 2.0], [0.0, 0.0]) == 0.0

    def test_cancellation_case(self):
        p = SKTParameters(a0=[1e-30, 1e-30], a=[[0.0, 1.0], [1.0, 0.0]], pi=[1.0, 1.0],
                          mode="without_self_diffusion")
        u, z = np.array([1.0, 1.0]), np.array([1.0, -1.0])
        bound = dissipation_lower_bound(p, u, z)
        form = z @ (np.diag(p.pi / u) @ diffusion_matrix(p, u) @ z)
        assert abs(bound) < 1e-12 and abs(form) < 1e-12

    def test_bound_below_quadratic_form(self, rng):
        # 1000 random parameter/state/direction triples
        for _ in range(1000):
            n = int(rng.integers(1, 4))
            pi = rng.uniform(0.3, 3.0, n)
            s = rng.uniform(0.0, 1.0, (n, n))
            s = s + s.T
            a = s / pi[:, None]
            np.fill_diagonal(a, rng.uniform(0.05, 1.0, n))
            p = SKTParameters(a0=rng.uniform(0.0, 1.0, n), a=a, pi=pi)
            u = rng.uniform(0.01, 100.0, n)
            z = rng.standard_normal(n)
            bound = dissipation_lower_bound(p, u, z)
            form = z @ (np.diag(pi / u) @ diffusion_matrix(p, u) @ z)
            assert bound >= 0.0
            assert form - bound >= -1e-12 * (1.0 + abs(bound))
