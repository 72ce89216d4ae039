"""Named generator/manifold pairings used by the CLI catalog and the test-suite."""

from __future__ import annotations

from .core import BuiltinManifoldSpec, make_manifold
from .divergences import get_generator

CURVED = [[0.0, 1.0], [0.0, 0.0, 1.0]]  # m = (t, t^2, 1 - t - t^2)

BUILTIN_CONFIGS = {
    "kl-bernoulli-natural": ({"kind": "kl"}, {"kind": "exponential", "n": 2, "questions": [[1, 0]]}),
    "kl-bernoulli-mean": ({"kind": "kl"}, {"kind": "curved_polynomial", "n": 2, "coefficients": [[0, 1]]}),
    "euclidean-bernoulli-mean": ({"kind": "euclidean"},
                                 {"kind": "curved_polynomial", "n": 2, "coefficients": [[0, 1]]}),
    "kl-exponential-3": ({"kind": "kl"}, {"kind": "exponential", "n": 3, "questions": [[1, 0, -1]]}),
    "kl-exponential-5x2": ({"kind": "kl"}, {"kind": "exponential", "n": 5,
                                            "questions": [[1, 0, -1, 0.5, 0], [0, 1, 0, -1, 0.5]]}),
    "euclidean-exponential-3": ({"kind": "euclidean"},
                                {"kind": "exponential", "n": 3, "questions": [[1, 0, -1]]}),
    "euclidean-mixture-3": ({"kind": "euclidean"},
                            {"kind": "curved_polynomial", "n": 3, "coefficients": [[0, 1], [0.3]]}),
    "qlog0.5-q-exponential-3": ({"kind": "qlog", "q": 0.5},
                                {"kind": "q_exponential", "n": 3, "questions": [[1, 0, -1]], "q": 0.5}),
    "qlog2-q-exponential-3": ({"kind": "qlog", "q": 2.0},
                              {"kind": "q_exponential", "n": 3, "questions": [[1, 0, -1]], "q": 2.0}),
    "kl-curved-3": ({"kind": "kl"}, {"kind": "curved_polynomial", "n": 3, "coefficients": CURVED}),
    "euclidean-curved-3": ({"kind": "euclidean"}, {"kind": "curved_polynomial", "n": 3, "coefficients": CURVED}),
}


def build(name: str):
    """Return ``(generator, manifold)`` for a named builtin configuration."""
    gen_spec, man_spec = BUILTIN_CONFIGS[name]
    gen = get_generator(gen_spec["kind"], gen_spec.get("q"))
    return gen, make_manifold(BuiltinManifoldSpec.from_dict(man_spec))
