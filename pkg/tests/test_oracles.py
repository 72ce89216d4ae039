"""High-precision reference values for Hessians of the divergence."""

import numpy as np
import pytest

mpmath = pytest.importorskip("mpmath")

from infogeo.catalog import build
from infogeo.fibers import fiber_description, sample_fiber
from infogeo.fisher import fisher_numeric


def kl_hessian(x, weights_fn, t):
    """d^2/dt^2 of sum x log(x / m(t)) at 40 digits."""
    mpmath.mp.dps = 40
    xs = [mpmath.mpf(float(v)) for v in x]

    def D(s):
        return mpmath.fsum(xa * mpmath.log(xa / ma) for xa, ma in zip(xs, weights_fn(s)))

    return float(mpmath.diff(D, mpmath.mpf(float(t)), 2))


def curved(s):
    return [s, s ** 2, 1 - s - s ** 2]


def exponential(s):
    z = [mpmath.exp(s), mpmath.mpf(1), mpmath.exp(-s)]
    total = mpmath.fsum(z)
    return [v / total for v in z]


@pytest.mark.parametrize("name, weights_fn, theta", [("kl-curved-3", curved, 0.3),
                                                     ("kl-exponential-3", exponential, 0.5)])
def test_fiber_hessians_match_oracle(name, weights_fn, theta):
    gen, M = build(name)
    desc = fiber_description(gen, M, [theta])
    pts = sample_fiber(desc, gen, M, 8, seed=3).verified_points
    for x in [desc.anchor] + pts:
        num = fisher_numeric(gen, M, x, [theta]).matrix[0, 0]
        assert num == pytest.approx(kl_hessian(x.weights, weights_fn, theta), rel=1e-8)


def test_curved_spread_oracle():
    # the constancy spread on the curved family, recomputed from oracle Hessians
    gen, M = build("kl-curved-3")
    desc = fiber_description(gen, M, [0.3])
    pts = sample_fiber(desc, gen, M, 100, 0.05, seed=0x1F05E).verified_points
    ref = kl_hessian(desc.anchor.weights, curved, 0.3)
    spread = max(abs(kl_hessian(x.weights, curved, 0.3) - ref) / abs(ref) for x in pts)
    assert spread == pytest.approx(0.023683513301926817, rel=1e-7)
