import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_simplex
from infogeo.core import Distribution
from infogeo.errors import ContractError, NumericError
from infogeo.fisher import (FisherMatrix, Reparametrization, covariance_transform, fisher_bregman,
                            fisher_numeric, identity_reparam, linear_reparam, logit_reparam)
from infogeo.projection import project


def test_bernoulli_natural(kl, bernoulli_natural):
    m = bernoulli_natural.forward([0.0])
    I = fisher_numeric(kl, bernoulli_natural, m, [0.0])
    assert I.matrix[0, 0] == pytest.approx(0.25, rel=1e-8)
    assert I.source == "numeric_hessian"


def test_euclidean_mean_bernoulli(euclid, bernoulli_mean):
    # D = 2 (x1 - t)^2 has second derivative 4
    for t in (0.2, 0.5, 0.8):
        I = fisher_numeric(euclid, bernoulli_mean, bernoulli_mean.forward([t]), [t])
        assert I.matrix[0, 0] == pytest.approx(4.0, rel=1e-8)


def test_kl_mean_bernoulli(kl, bernoulli_mean):
    I = fisher_numeric(kl, bernoulli_mean, Distribution([0.5, 0.5]), [0.5])
    assert I.matrix[0, 0] == pytest.approx(4.0, rel=1e-8)
    assert fisher_bregman(kl, bernoulli_mean, [0.5]).matrix[0, 0] == pytest.approx(4.0, rel=1e-14)


def test_exponential_variance(kl, exp3):
    # at theta = 0 the model is uniform and Var(q) = 2/3
    I = fisher_numeric(kl, exp3, Distribution([1 / 3] * 3), [0.0])
    assert I.matrix[0, 0] == pytest.approx(2 / 3, rel=1e-8)


def test_numeric_matches_closed_form(config):
    name, gen, M = config
    rng = np.random.default_rng(8)
    for t in M.sample_params(rng, 5, margin=0.05):
        x = M.forward(t)
        num = fisher_numeric(gen, M, x, t).matrix
        ref = fisher_bregman(gen, M, t).matrix
        assert np.linalg.norm(num - ref) <= 1e-7 * np.linalg.norm(ref), name


def test_off_manifold_fiber_point(kl, exp3):
    # Hessian at a data point off the manifold equals the Fisher term at its projection
    x = Distribution([0.5, 0.1, 0.4])
    res = project(kl, exp3, x)
    num = fisher_numeric(kl, exp3, x, res.theta_star).matrix
    assert num[0, 0] == pytest.approx(fisher_bregman(kl, exp3, res.theta_star).matrix[0, 0], rel=1e-7)


def test_precondition(kl, exp3):
    with pytest.raises(ContractError):
        fisher_numeric(kl, exp3, Distribution([0.5, 0.1, 0.4]), [1.0])


def test_halving_guard(kl, exp3):
    # a step so large that the two stencils disagree
    with pytest.raises(NumericError, match="step halving"):
        fisher_numeric(kl, exp3, exp3.forward([0.0]), [0.0], step_scale=1000.0)
    fisher_numeric(kl, exp3, exp3.forward([0.0]), [0.0], step_scale=100.0)


def test_fisher_matrix_symmetry():
    F = FisherMatrix([0.0, 0.0], [[1.0, 0.5], [0.5 + 1e-9, 2.0]], "test")
    assert F.matrix[0, 1] == F.matrix[1, 0]
    with pytest.raises(NumericError):
        FisherMatrix([0.0, 0.0], [[1.0, 0.5], [0.6, 2.0]], "test")


class TestCovariance:

    def test_identity(self):
        F = FisherMatrix([0.5], [[4.0]], "x")
        assert covariance_transform(F, identity_reparam()).matrix[0, 0] == 4.0

    def test_logit(self):
        # mean Bernoulli at 0.5 has I = 4; logit coordinates give 0.25
        F = FisherMatrix([0.5], [[4.0]], "x")
        G = covariance_transform(F, logit_reparam())
        assert G.matrix[0, 0] == pytest.approx(0.25, rel=1e-14)
        assert G.at_theta[0] == pytest.approx(0.0, abs=1e-15)

    def test_scaling(self):
        F = FisherMatrix([1.0], [[1.0]], "x")
        assert covariance_transform(F, linear_reparam([[2.0]])).matrix[0, 0] == pytest.approx(0.25)

    def test_singular_jacobian(self):
        F = FisherMatrix([0.0], [[1.0]], "x")
        rep = Reparametrization(lambda t: t ** 3, lambda t: 3 * t ** 2, name="cube")
        with pytest.raises(NumericError):
            covariance_transform(F, rep)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.5, 3.0), st.floats(-2.0, 2.0), st.floats(0.5, 3.0))
    def test_composition(self, a, b, c):
        F = FisherMatrix([0.1, 0.2], [[2.0, 0.3], [0.3, 1.0]], "x")
        A = np.array([[a, b], [0.0, c]])
        B = np.array([[1.0, 0.0], [b, a]])
        two_step = covariance_transform(covariance_transform(F, linear_reparam(A)), linear_reparam(B))
        one_step = covariance_transform(F, linear_reparam(B @ A))
        np.testing.assert_allclose(two_step.matrix, one_step.matrix, rtol=1e-10, atol=1e-12)

    def test_newton_inverse(self):
        rep = Reparametrization(lambda t: t + 0.1 * t ** 3, lambda t: np.atleast_2d(1 + 0.3 * t ** 2))
        t = rep.inverse_map([1.2])
        assert t[0] + 0.1 * t[0] ** 3 == pytest.approx(1.2, abs=1e-14)

    def test_direct_eta_fisher(self, kl, bernoulli_mean):
        rep = logit_reparam()
        lo, hi = bernoulli_mean.lower[0], bernoulli_mean.upper[0]
        M_eta = bernoulli_mean.reparametrize(rep, rep.map(np.array([lo])), rep.map(np.array([hi])))
        for t in (0.2, 0.5, 0.7):
            I_theta = fisher_bregman(kl, bernoulli_mean, [t])
            eta = rep.map(np.array([t]))
            direct = fisher_numeric(kl, M_eta, M_eta.forward(eta), eta).matrix[0, 0]
            assert direct == pytest.approx(covariance_transform(I_theta, rep).matrix[0, 0], rel=1e-8)
            assert direct == pytest.approx(t * (1 - t), rel=1e-8)
