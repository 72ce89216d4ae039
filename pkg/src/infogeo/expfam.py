"""Criteria for membership in a generalized exponential family.

Three independent checks, from strongest to weakest:

* the logarithmic map is affine in a d-dimensional set of coordinates
  (rank test on the double-centered matrix of log-map values),
* the Pythagorean relation holds for fiber points,
* the Fisher matrix is constant along fibers.

The first implies the second, which implies the third. Each check works on
finite samples and reports the measured quantity next to its verdict.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .core import Distribution, ModelManifold, _weights
from .divergences import GeneratorSpec, bregman_divergence
from .errors import ContractError, InsufficientSampleError
from .fibers import DEFAULT_RADIUS, VERIFY_TOL, fiber_description, sample_fiber
from .fisher import (HESSIAN_STEP, FisherMatrix, Reparametrization, fisher_bregman,
                     fisher_numeric, hessian_fd)
from .projection import DEFAULT_SEED, SolverOptions, model_divergence, project

CONSTANCY_THRESHOLD = 1e-5
PYTHAGOREAN_TOL = 1e-8
RANK_TOL = 1e-8
SECOND_DERIV_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class ConstancyReport:
    theta: np.ndarray
    n_points: int
    fisher_matrices: list
    reference: FisherMatrix
    max_relative_spread: float
    verdict: str
    threshold: float
    bregman_discrepancy: float
    n_requested: int = 0
    radius: float = DEFAULT_RADIUS
    note: str = ""
    points: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "n_points": self.n_points,
            "n_requested": self.n_requested,
            "radius": self.radius,
            "reference": self.reference.to_dict(),
            "max_relative_spread": self.max_relative_spread,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "bregman_discrepancy": self.bregman_discrepancy,
            "note": self.note,
            "fisher_matrices": [F.matrix.tolist() for F in self.fisher_matrices],
        }


@dataclass(frozen=True, eq=False)
class PythagoreanReport:
    x: Distribution
    theta: np.ndarray
    eta: np.ndarray
    lhs_terms: tuple
    rhs: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "x": self.x.weights.tolist(),
            "theta": self.theta.tolist(),
            "eta": self.eta.tolist(),
            "lhs_terms": list(self.lhs_terms),
            "rhs": self.rhs,
            "residual": self.residual,
        }


@dataclass(frozen=True, eq=False)
class AffineLogMapReport:
    grid: np.ndarray
    value_matrix: np.ndarray
    singular_values: np.ndarray
    effective_rank: int
    verdict: str
    rank_tol: float

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "singular_values": self.singular_values.tolist(),
            "effective_rank": self.effective_rank,
            "rank_tol": self.rank_tol,
            "verdict": self.verdict,
        }


@dataclass(frozen=True, eq=False)
class SecondDerivativeReport:
    theta: np.ndarray
    eta: np.ndarray
    hessians: np.ndarray  # (n, d, d), one per symbol
    pairs: list
    deviation: float
    relative_deviation: float
    verdict: str
    tol: float

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "eta": self.eta.tolist(),
            "hessians": self.hessians.tolist(),
            "pairs": [list(p) for p in self.pairs],
            "deviation": self.deviation,
            "relative_deviation": self.relative_deviation,
            "tol": self.tol,
            "verdict": self.verdict,
        }


def check_fiber_constancy(gen: GeneratorSpec, manifold: ModelManifold, theta,
                          n_samples: int = 100, radius: float = DEFAULT_RADIUS,
                          seed: int = DEFAULT_SEED, threshold: float = CONSTANCY_THRESHOLD,
                          solver: Optional[SolverOptions] = None) -> ConstancyReport:
    """Compare the Fisher matrix at verified fiber points with its value at the anchor."""
    if threshold <= 0:
        raise ContractError("constancy threshold must be positive")
    theta = manifold.check_theta(theta)
    desc = fiber_description(gen, manifold, theta)
    anchor = desc.anchor
    reference = fisher_numeric(gen, manifold, anchor, theta)
    closed = fisher_bregman(gen, manifold, theta).matrix
    discrepancy = float(np.linalg.norm(reference.matrix - closed) / np.linalg.norm(closed))
    if desc.dim == 0:
        return ConstancyReport(theta, 1, [reference], reference, 0.0, "constant", threshold, discrepancy,
                               n_samples, radius, note="fiber is a single point; constancy holds vacuously",
                               points=[anchor])
    sample = sample_fiber(desc, gen, manifold, n_samples, radius, seed, solver)
    pts = sample.verified_points
    if len(pts) < 3:
        raise InsufficientSampleError(
            f"only {len(pts)} of {len(sample.points)} fiber points re-projected to theta={theta.tolist()}")
    norm = np.linalg.norm(reference.matrix)
    mats, spread = [], 0.0
    for x in pts:
        I = fisher_numeric(gen, manifold, x, theta)
        mats.append(I)
        spread = max(spread, float(np.linalg.norm(I.matrix - reference.matrix) / norm))
    verdict = "constant" if spread <= threshold else "non_constant"
    note = f"{len(pts)} verified of {len(sample.points)} sampled points, radius {sample.radius:g}"
    return ConstancyReport(theta, len(pts), mats, reference, spread, verdict, threshold, discrepancy,
                           n_samples, sample.radius, note, pts)


def check_pythagorean(gen: GeneratorSpec, manifold: ModelManifold, x, theta, eta,
                      solver: Optional[SolverOptions] = None, verify: bool = True) -> PythagoreanReport:
    """Residual of ``D(x||theta) + D(theta||eta) - D(x||eta)`` for ``x`` in the fiber of theta."""
    xw = _weights(x)
    theta = manifold.check_theta(theta)
    eta = manifold.check_theta(eta)
    if verify:
        res = project(gen, manifold, x, solver)
        if np.abs(res.theta_star - theta).max() > VERIFY_TOL:
            raise ContractError(
                f"x does not lie in the fiber of theta={theta.tolist()}: "
                f"it projects to {res.theta_star.tolist()}")
    m_theta, m_eta = manifold.forward(theta), manifold.forward(eta)
    d_x_theta = bregman_divergence(gen, xw, m_theta)
    d_theta_eta = model_divergence(gen, manifold, theta, eta)
    d_x_eta = bregman_divergence(gen, xw, m_eta)
    residual = d_x_theta + d_theta_eta - d_x_eta
    return PythagoreanReport(Distribution(xw), theta, eta, (d_x_theta, d_theta_eta), d_x_eta, residual)


def parameter_grid(manifold: ModelManifold, size: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """``size`` parameter points in the central 80% of the box (evenly spaced when d = 1)."""
    d = manifold.param_dim
    if d == 1:
        u = np.linspace(0.0, 1.0, size)[:, None]
    else:
        u = qmc.Halton(d, scramble=True, seed=seed).random(size)
    width = manifold.upper - manifold.lower
    return manifold.lower + (0.1 + 0.8 * u) * width


def double_center(V: np.ndarray) -> np.ndarray:
    return V - V.mean(axis=1, keepdims=True) - V.mean(axis=0, keepdims=True) + V.mean()


def check_affine_logmap(gen: GeneratorSpec, manifold: ModelManifold, grid=12,
                        rank_tol: float = RANK_TOL, seed: int = DEFAULT_SEED) -> AffineLogMapReport:
    """Rank test: is ``theta -> f(m_theta(.))`` affine in d coordinates, up to constants?

    Rows of the value matrix are log-map vectors at grid points. Double
    centering removes the parameter-only and symbol-only terms, so an affine
    log-map leaves a matrix of rank at most d.
    """
    d = manifold.param_dim
    if np.isscalar(grid):
        grid = parameter_grid(manifold, int(grid), seed)
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    if grid.shape[1] != d:
        grid = grid.T
    if grid.shape[0] < 2 * (d + 2):
        raise ContractError(f"grid of {grid.shape[0]} points is too small; need at least {2 * (d + 2)}")
    V = np.array([gen.f(manifold.forward(t).weights) for t in grid])
    s = np.linalg.svd(double_center(V), compute_uv=False)
    rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
    verdict = "affine_of_dim_d" if rank <= d else "not_affine"
    return AffineLogMapReport(grid, V, s, rank, verdict, rank_tol)


def check_second_derivative_criterion(gen: GeneratorSpec, manifold: ModelManifold,
                                      reparam_to_eta: Reparametrization, theta,
                                      probe_alphabet_pairs: Optional[Sequence] = None,
                                      tol: float = SECOND_DERIV_TOL) -> SecondDerivativeReport:
    """Do the eta-Hessians of ``f(m(a))`` coincide across symbols ``a``?

    Deviations are measured relative to ``max(1, largest Hessian entry)``.
    """
    theta = manifold.check_theta(theta)
    reparam_to_eta.jac(theta)
    eta0 = np.atleast_1d(np.asarray(reparam_to_eta.map(theta), dtype=np.float64))

    def values(eta):
        t = reparam_to_eta.inverse_map(eta, theta0=theta)
        if not manifold.contains(t):
            raise ContractError(f"difference stencil leaves the parameter box at theta={t.tolist()}")
        return gen.f(manifold.weights(t))

    steps = HESSIAN_STEP * np.maximum(1.0, np.abs(eta0))
    H1 = hessian_fd(values, eta0, steps)
    H2 = hessian_fd(values, eta0, steps / 2)
    H = np.moveaxis((4.0 * H2 - H1) / 3.0, -1, 0)  # (n, d, d)
    if probe_alphabet_pairs is None:
        probe_alphabet_pairs = list(itertools.combinations(range(manifold.n), 2))
    pairs = [tuple(int(a) for a in p) for p in probe_alphabet_pairs]
    deviation = max((float(np.abs(H[a] - H[b]).max()) for a, b in pairs), default=0.0)
    scale = max(1.0, float(np.abs(H).max()))
    rel = deviation / scale
    verdict = "independent" if rel <= tol else "dependent"
    return SecondDerivativeReport(theta, eta0, H, pairs, deviation, rel, verdict, tol)


@dataclass(frozen=True)
class ChainSummary:
    """Verdicts of all three criteria for one configuration."""

    affine: bool
    pythagorean: bool
    constant: bool
    max_pythagorean_residual: float
    constancy_spread: float
    effective_rank: int

    @property
    def consistent(self) -> bool:
        return (not self.affine or self.pythagorean) and (not self.pythagorean or self.constant)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["consistent"] = self.consistent
        return out


def theorem_chain(gen: GeneratorSpec, manifold: ModelManifold, theta, n_fiber: int = 20,
                  n_eta: int = 10, radius: float = DEFAULT_RADIUS, seed: int = DEFAULT_SEED,
                  constancy_samples: int = 30) -> ChainSummary:
    """Run the affine, Pythagorean and constancy checks on one configuration."""
    theta = manifold.check_theta(theta)
    affine = check_affine_logmap(gen, manifold, seed=seed)
    desc = fiber_description(gen, manifold, theta)
    sample = sample_fiber(desc, gen, manifold, n_fiber, radius, seed)
    rng = np.random.default_rng(seed)
    etas = manifold.sample_params(rng, n_eta, margin=0.05)
    worst = 0.0
    for x in sample.verified_points:
        for eta in etas:
            rep = check_pythagorean(gen, manifold, x, theta, eta, verify=False)
            worst = max(worst, abs(rep.residual))
    const = check_fiber_constancy(gen, manifold, theta, constancy_samples, radius, seed)
    return ChainSummary(
        affine=affine.verdict == "affine_of_dim_d",
        pythagorean=worst <= PYTHAGOREAN_TOL,
        constant=const.verdict == "constant",
        max_pythagorean_residual=worst,
        constancy_spread=const.max_relative_spread,
        effective_rank=affine.effective_rank,
    )
