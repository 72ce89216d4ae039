"""Generalized divergences, model projections, Fisher information and
exponential-family criteria over finite-alphabet probability simplexes."""

__version__ = "0.1.0"

from .core import (Alphabet, BuiltinManifoldSpec, Distribution, ModelManifold, Question,
                   evaluate, make_manifold)
from .divergences import (DeformedLogSpec, GeneratorSpec, USpec, bregman_divergence, deformed_log,
                          entropy, euclidean_generator, generator_from_deformed_log, get_generator,
                          kl_generator, log_map, qlog_generator, register_generator, u_divergence)
from .errors import (ContractError, DomainError, InfogeoError, NonUniquenessWarning, NumericError,
                     SolverError)
from .expfam import (check_affine_logmap, check_fiber_constancy, check_pythagorean,
                     check_second_derivative_criterion, theorem_chain)
from .fibers import fiber_description, sample_fiber
from .fisher import FisherMatrix, Reparametrization, covariance_transform, fisher_bregman, fisher_numeric
from .projection import ProjectionResult, SolverOptions, corrector, model_divergence, project
