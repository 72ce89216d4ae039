"""The model map: projection of a data point onto a model manifold."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .core import BOUNDARY_FLOOR, Distribution, ModelManifold, _weights, evaluate
from .divergences import GeneratorSpec, bregman_divergence, bregman_raw, entropy, log_map
from .errors import NonUniquenessWarning, NumericError, SolverError
from .fisher import divergence_gradient, divergence_hessian

DEFAULT_SEED = 0x1F05E


@dataclass(frozen=True)
class SolverOptions:
    tol_grad: float = 1e-9
    max_iter: int = 500
    n_starts: int = 8
    seed: int = DEFAULT_SEED
    agree_tol: float = 1e-6
    method: str = "newton"
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtrack: int = 60

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "SolverOptions":
        return cls(**(d or {}))


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    theta_star: np.ndarray
    m_star: Distribution
    divergence_at_min: float
    gradient_norm: float
    converged: bool
    multistart_agreement: bool
    iterations: int = 0
    starts: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "theta_star": self.theta_star.tolist(),
            "m_star": self.m_star.weights.tolist(),
            "divergence_at_min": self.divergence_at_min,
            "gradient_norm": self.gradient_norm,
            "converged": self.converged,
            "multistart_agreement": self.multistart_agreement,
            "iterations": self.iterations,
        }


@dataclass
class _Run:
    theta: np.ndarray
    value: float
    grad_norm: float
    converged: bool
    iterations: int


def _admissible(manifold: ModelManifold, theta) -> bool:
    return manifold.contains(theta) and manifold.weights(theta).min() > BOUNDARY_FLOOR


def _minimize(gen, manifold, xw, theta0, opts: SolverOptions) -> _Run:
    def value(t):
        return bregman_raw(gen, xw, manifold.weights(t))

    theta = np.array(theta0, dtype=np.float64)
    D = value(theta)
    g = divergence_gradient(gen, manifold, xw, theta)
    gnorm = np.linalg.norm(g)
    prev = None  # (step, gradient change) for Barzilai-Borwein scaling
    it = 0
    while it < opts.max_iter and gnorm > opts.tol_grad:
        it += 1
        direction = None
        if opts.method == "newton":
            H = divergence_hessian(gen, manifold, xw, theta)
            try:
                L = np.linalg.cholesky(H)
                direction = -np.linalg.solve(L.T, np.linalg.solve(L, g))
            except np.linalg.LinAlgError:
                direction = None
        if direction is None:
            alpha0 = 1.0 / max(gnorm, 1e-300)
            if prev is not None:
                s, y = prev
                sy = s @ y
                if sy > 0:
                    alpha0 = sy / (y @ y)
            direction = -alpha0 * g
        slope = g @ direction
        step = 1.0
        accepted = False
        for _ in range(opts.max_backtrack):
            trial = theta + step * direction
            if _admissible(manifold, trial):
                Dt = value(trial)
                if Dt <= D + opts.armijo * step * slope:
                    accepted = True
                else:
                    # near the optimum the predicted decrease is below round-off in D
                    gt = divergence_gradient(gen, manifold, xw, trial)
                    if Dt <= D + 1e-13 * (1.0 + abs(D)) and np.linalg.norm(gt) < gnorm:
                        accepted = True
                if accepted:
                    break
            step *= opts.shrink
        if not accepted:
            break
        g_new = divergence_gradient(gen, manifold, xw, trial)
        prev = (trial - theta, g_new - g)
        theta, D, g = trial, Dt, g_new
        gnorm = np.linalg.norm(g)

    converged = bool(gnorm <= opts.tol_grad)
    if converged and opts.method == "newton":
        # polish: full Newton steps while they keep shrinking the gradient
        for _ in range(8):
            try:
                direction = -np.linalg.solve(divergence_hessian(gen, manifold, xw, theta), g)
            except np.linalg.LinAlgError:
                break
            trial = theta + direction
            if not _admissible(manifold, trial):
                break
            gt = divergence_gradient(gen, manifold, xw, trial)
            if np.linalg.norm(gt) >= gnorm:
                break
            theta, g, gnorm, D = trial, gt, np.linalg.norm(gt), value(trial)
    return _Run(theta, D, float(gnorm), converged, it)


def start_points(manifold: ModelManifold, n_starts: int, seed: int) -> np.ndarray:
    """Scrambled Sobol points in the central 90% of the parameter box."""
    sampler = qmc.Sobol(manifold.param_dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non power-of-two counts
        u = sampler.random(n_starts)
    width = manifold.upper - manifold.lower
    return manifold.lower + (0.05 + 0.9 * u) * width


def project(gen: GeneratorSpec, manifold: ModelManifold, x, opts: Optional[SolverOptions] = None,
            starts: Optional[np.ndarray] = None) -> ProjectionResult:
    """Minimize ``theta -> D(x || theta)`` from several starting points.

    Newton's method with backtracking (gradient steps where the Hessian is
    not positive definite). The best converged start is returned; if the
    starts disagree a :class:`NonUniquenessWarning` is issued and
    ``multistart_agreement`` is False.
    """
    opts = opts or SolverOptions()
    xw = _weights(x)
    if xw.size != manifold.n:
        raise NumericError(f"x has {xw.size} symbols, manifold {manifold.n}")
    if starts is None:
        starts = start_points(manifold, opts.n_starts, opts.seed)
    runs = []
    for t0 in np.atleast_2d(starts):
        if not _admissible(manifold, t0):
            continue
        runs.append(_minimize(gen, manifold, xw, t0, opts))
    if not runs:
        raise SolverError("no admissible starting point in the parameter box")
    good = [r for r in runs if r.converged]
    if not good:
        best = min(runs, key=lambda r: (r.grad_norm, r.value))
        raise SolverError(
            f"projection did not converge from any of {len(runs)} starts; best gradient norm "
            f"{best.grad_norm:.3e} at theta={best.theta.tolist()}", best=best)
    best = min(good, key=lambda r: r.value)
    agree = len(good) == len(np.atleast_2d(starts)) and all(
        np.abs(r.theta - best.theta).max() <= opts.agree_tol for r in good)
    if not agree:
        warnings.warn(
            f"multistart projection is not unique for x={xw.tolist()}: "
            f"{len(good)}/{len(runs)} starts converged to "
            f"{sorted({tuple(np.round(r.theta, 6)) for r in good})}", NonUniquenessWarning, stacklevel=2)
    return ProjectionResult(
        theta_star=best.theta,
        m_star=Distribution(manifold.weights(best.theta)),
        divergence_at_min=max(best.value, 0.0),
        gradient_norm=best.grad_norm,
        converged=True,
        multistart_agreement=agree,
        iterations=sum(r.iterations for r in runs),
        starts=tuple(r.theta for r in runs),
    )


def corrector(gen: GeneratorSpec, m) -> float:
    """``zeta(m) + <m | L m>``, the supremum over x attained at ``x = m``."""
    return entropy(gen, m) + evaluate(m, log_map(gen, m))


def model_divergence(gen: GeneratorSpec, manifold: ModelManifold, theta, eta,
                     cross_check: bool = False, n_samples: int = 20, radius: float = 0.05,
                     seed: int = DEFAULT_SEED) -> float:
    """Divergence between model points, ``D(m_theta || m_eta)``.

    The plug-in value attains the infimum over the fiber of theta. With
    ``cross_check`` the claim is tested against sampled, verified fiber points.
    """
    m_theta = manifold.forward(theta)
    m_eta = manifold.forward(eta)
    value = bregman_divergence(gen, m_theta, m_eta)
    if cross_check:
        from .fibers import fiber_description, sample_fiber

        desc = fiber_description(gen, manifold, theta)
        sample = sample_fiber(desc, gen, manifold, n_samples, radius, seed)
        sampled = [bregman_divergence(gen, p, m_eta) for p, ok in zip(sample.points, sample.verified) if ok]
        if sampled and value > min(sampled) + 1e-8:
            raise NumericError(
                f"plug-in model divergence {value:.12g} exceeds a sampled fiber value {min(sampled):.12g}")
    return value
