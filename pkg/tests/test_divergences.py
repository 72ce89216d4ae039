import math

import numpy as np
import pytest

from conftest import random_simplex
from infogeo.core import Distribution, evaluate
from infogeo.divergences import (DeformedLogSpec, GeneratorSpec, bregman_divergence, decomposed_divergence,
                                 deformed_log, entropy, euclidean_generator, exp_u_spec,
                                 generator_from_deformed_log, kl_generator, log_map, q_log, qlog_generator,
                                 quadratic_u_spec, register_generator, u_divergence)
from infogeo.errors import ContractError, DomainError
from infogeo.projection import corrector

X = Distribution([0.5, 0.5])
M = Distribution([0.25, 0.75])
KL_XM = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)


def kl_direct(x, m):
    return float(np.sum(x * np.log(x / m)))


class TestBregman:

    def test_zero_on_diagonal(self, kl):
        x = Distribution([0.3, 0.7])
        assert bregman_divergence(kl, x, x) == 0.0

    def test_kl_example(self, kl):
        assert bregman_divergence(kl, X, M) == pytest.approx(KL_XM, rel=1e-14)
        assert bregman_divergence(kl, X, M) == pytest.approx(0.143841, abs=1e-6)

    def test_euclidean_example(self, euclid):
        assert bregman_divergence(euclid, X, M) == pytest.approx(0.125, rel=1e-14)

    def test_plain_formula_matches_stable_terms(self):
        rng = np.random.default_rng(0)
        for gen in (kl_generator(), euclidean_generator(), qlog_generator(0.5), qlog_generator(2.0)):
            plain = GeneratorSpec(gen.F, gen.f, gen.fprime, gen.name)
            for x, m in zip(random_simplex(rng, 4, 50), random_simplex(rng, 4, 50)):
                assert bregman_divergence(gen, x, m) == pytest.approx(bregman_divergence(plain, x, m),
                                                                      rel=1e-9, abs=1e-15)

    def test_boundary_is_domain_error(self, kl):
        with pytest.raises(DomainError):
            bregman_divergence(kl, [1.0, 0.0], M)

    def test_alphabet_mismatch(self, kl):
        with pytest.raises(ContractError):
            bregman_divergence(kl, X, Distribution([0.2, 0.3, 0.5]))

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_kl_against_direct_sum(self, kl, n):
        rng = np.random.default_rng(n)
        for x, m in zip(random_simplex(rng, n, 100), random_simplex(rng, n, 100)):
            assert bregman_divergence(kl, x, m) == pytest.approx(kl_direct(x, m), rel=1e-12, abs=1e-15)


class TestDecomposition:

    @pytest.mark.parametrize("gen", [kl_generator(), euclidean_generator(), qlog_generator(0.5)],
                             ids=["kl", "euclidean", "qlog0.5"])
    def test_identity_and_consistency(self, gen):
        rng = np.random.default_rng(11)
        for x, m in zip(random_simplex(rng, 3, 200), random_simplex(rng, 3, 200)):
            x, m = Distribution(x), Distribution(m)
            assert decomposed_divergence(gen, x, m) == pytest.approx(bregman_divergence(gen, x, m), abs=1e-10)
            assert entropy(gen, x) + evaluate(x, log_map(gen, m)) <= corrector(gen, m) + 1e-12

    def test_corrector_examples(self, kl, euclid):
        # zeta(m) + <m|Lm>: for F = u ln u this is sum m = 1, for F = u^2 it is sum m^2
        m = Distribution([0.2, 0.3, 0.5])
        direct_kl = -np.sum(m.weights * np.log(m.weights)) + np.sum(m.weights * (1 + np.log(m.weights)))
        assert corrector(kl, m) == pytest.approx(direct_kl, abs=1e-15)
        assert corrector(kl, m) == pytest.approx(1.0, abs=1e-15)
        assert corrector(euclid, Distribution([0.5, 0.5])) == pytest.approx(0.5, abs=1e-15)


class TestEntropyAndLogMap:

    def test_entropy(self, kl, euclid):
        assert entropy(kl, X) == pytest.approx(math.log(2), rel=1e-15)
        assert entropy(euclid, X) == pytest.approx(-0.5, rel=1e-15)
        assert entropy(kl, Distribution([1 - 1e-6, 1e-6])) == pytest.approx(0.0, abs=1e-4)

    def test_log_map(self, kl, euclid):
        # f = F' = 1 + ln u for F = u ln u
        np.testing.assert_allclose(log_map(kl, X).values, 1 + np.log([0.5, 0.5]), rtol=1e-15)
        np.testing.assert_allclose(log_map(euclid, M).values, [0.5, 1.5], rtol=1e-15)
        np.testing.assert_allclose(log_map(qlog_generator(0.5), M).values, [-1.0, -0.267949], atol=1e-6)


class TestDeformedLog:

    @pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    def test_zero_at_one(self, q):
        assert deformed_log(DeformedLogSpec(q=q), 1.0) == 0.0

    def test_examples(self):
        assert deformed_log(DeformedLogSpec(q=1.0), math.e) == pytest.approx(1.0, rel=1e-15)
        assert deformed_log(DeformedLogSpec(q=0.5), 4.0) == pytest.approx(2.0, rel=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            deformed_log(DeformedLogSpec(q=0.5), 0.0)

    @pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 2.0])
    def test_closed_form_vs_quadrature(self, q):
        spec = DeformedLogSpec(q=q)
        general = DeformedLogSpec(phi=lambda v: v ** q)
        for u in np.linspace(0.1, 10, 25):
            assert deformed_log(spec, u) == pytest.approx(deformed_log(general, u), abs=1e-8)
            assert deformed_log(spec, u) == pytest.approx(deformed_log(spec, u, method="quadrature"), abs=1e-8)

    @pytest.mark.parametrize("dq", [1e-3, -1e-3, 1e-6, -1e-6])
    def test_continuity_at_q_one(self, dq):
        u = np.linspace(0.1, 10, 50)
        err = np.abs(q_log(u, 1 + dq) - np.log(u))
        bound = 0.5 * abs(dq) * np.log(u) ** 2 * np.maximum(u ** abs(dq), 1)
        assert np.all(err <= bound * 1.001 + 1e-15)

    def test_phi_must_be_increasing(self):
        with pytest.raises(ContractError):
            DeformedLogSpec(phi=lambda v: 1 / v)


class TestGeneratorFromDeformedLog:

    def test_q_one_is_kl(self, kl):
        gen = generator_from_deformed_log(DeformedLogSpec(q=1.0))
        rng = np.random.default_rng(5)
        for x, m in zip(random_simplex(rng, 3, 10), random_simplex(rng, 3, 10)):
            assert bregman_divergence(gen, x, m) == pytest.approx(bregman_divergence(kl, x, m), rel=1e-12)
        u = np.linspace(0.05, 1, 20)
        np.testing.assert_allclose(gen.f(u), np.log(u), rtol=1e-14)
        np.testing.assert_allclose(gen.F(u), u * np.log(u) - u + 1, atol=1e-15)

    def test_derivatives(self):
        u = np.linspace(0.05, 1, 20)
        np.testing.assert_allclose(qlog_generator(0.5).fprime(u), u ** -0.5, rtol=1e-15)
        np.testing.assert_allclose(qlog_generator(2.0).f(u), 1 - 1 / u, rtol=1e-13)

    @pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    def test_power_generators_validate(self, q):
        qlog_generator(q).validate()

    def test_general_phi_generator(self):
        gen = generator_from_deformed_log(DeformedLogSpec(phi=lambda v: v ** 0.5))
        ref = qlog_generator(0.5)
        u = np.array([0.2, 0.6, 0.9])
        np.testing.assert_allclose(gen.f(u), ref.f(u), atol=1e-9)
        np.testing.assert_allclose(gen.F(u), ref.F(u), atol=1e-9)
        np.testing.assert_allclose(gen.fprime(u), ref.fprime(u), rtol=1e-14)


class TestRegistration:

    def test_valid_custom_generator(self):
        gen = register_generator("cubic", lambda u: u ** 3, lambda u: 3 * u ** 2, lambda u: 6 * u)
        assert bregman_divergence(gen, X, M) > 0

    def test_wrong_derivative_rejected(self):
        with pytest.raises(ContractError):
            register_generator("broken", lambda u: u ** 3, lambda u: 2 * u ** 2, lambda u: 6 * u)

    def test_concave_rejected(self):
        with pytest.raises(ContractError):
            register_generator("concave", lambda u: -u ** 2, lambda u: -2 * u, lambda u: -2 + 0 * u)


class TestUDivergence:

    def test_zero_on_diagonal(self):
        assert u_divergence(exp_u_spec(), X, X) == 0.0
        assert u_divergence(exp_u_spec(), X, X, method="quadrature") == 0.0

    def test_exp_is_kl(self, kl):
        assert u_divergence(exp_u_spec(), X, M) == pytest.approx(KL_XM, rel=1e-13)
        rng = np.random.default_rng(9)
        for x, m in zip(random_simplex(rng, 4, 10), random_simplex(rng, 4, 10)):
            assert u_divergence(exp_u_spec(), x, m) == pytest.approx(bregman_divergence(kl, x, m), abs=1e-8)
            assert u_divergence(exp_u_spec(), x, m, "quadrature") == pytest.approx(
                bregman_divergence(kl, x, m), abs=1e-8)

    def test_quadratic(self):
        assert u_divergence(quadratic_u_spec(), X, M) == pytest.approx(0.0625, rel=1e-14)
        assert u_divergence(quadratic_u_spec(), X, M, method="quadrature") == pytest.approx(0.0625, abs=1e-10)

    def test_spec_validation(self):
        exp_u_spec().validate()
        quadratic_u_spec().validate()
        from infogeo.divergences import USpec
        with pytest.raises(ContractError):
            USpec(np.exp, np.exp, lambda p: np.log(p) + 0.1).validate()
