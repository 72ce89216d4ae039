"""Candidate fibers of the model map and sampling from them."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import BOUNDARY_FLOOR, Distribution, ModelManifold
from .divergences import GeneratorSpec
from .errors import ContractError, DegeneracyWarning, SamplingError, SolverError
from .fisher import logmap_jacobian
from .projection import SolverOptions, project

RANK_TOL = 1e-10
VERIFY_TOL = 1e-6
DEFAULT_RADIUS = 0.05


@dataclass(frozen=True, eq=False)
class FiberDescription:
    """Affine set through ``m_theta`` solving the first-order conditions.

    ``constraint_matrix`` rows are ``d_k f(m_theta(a))`` for each parameter,
    followed by the all-ones row; ``basis`` is an orthonormal basis of its
    null space, one vector per row.
    """

    theta: np.ndarray
    anchor: Distribution
    basis: np.ndarray
    constraint_matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def residual(self, xw) -> np.ndarray:
        return self.constraint_matrix @ (np.asarray(xw) - self.anchor.weights)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "anchor": self.anchor.weights.tolist(),
            "basis": self.basis.tolist(),
            "constraint_matrix": self.constraint_matrix.tolist(),
            "rank": self.rank,
        }


@dataclass(frozen=True, eq=False)
class FiberSample:
    points: list
    verified: list
    radius: float
    seed: int
    theta: np.ndarray = field(default=None)
    reprojected: list = field(default_factory=list, repr=False)

    @property
    def verified_points(self) -> list:
        return [p for p, ok in zip(self.points, self.verified) if ok]

    @property
    def verification_rate(self) -> float:
        return sum(self.verified) / len(self.verified)

    def to_dict(self) -> dict:
        return {
            "theta": None if self.theta is None else self.theta.tolist(),
            "radius": self.radius,
            "seed": self.seed,
            "n_points": len(self.points),
            "n_verified": int(sum(self.verified)),
            "points": [p.weights.tolist() for p in self.points],
            "verified": list(self.verified),
            "reprojected_theta": [None if t is None else t.tolist() for t in self.reprojected],
        }


def fiber_description(gen: GeneratorSpec, manifold: ModelManifold, theta) -> FiberDescription:
    """Null-space description of the stationarity conditions plus normalization at theta."""
    theta = manifold.check_theta(theta)
    anchor = manifold.forward(theta)
    C = np.vstack([logmap_jacobian(gen, manifold, theta), np.ones(manifold.n)])
    _, s, Vt = np.linalg.svd(C)
    rank = int(np.sum(s > RANK_TOL * s[0]))
    expected = manifold.param_dim + 1
    if rank < expected:
        warnings.warn(
            f"fiber constraints at theta={theta.tolist()} have rank {rank} < {expected}; "
            f"fiber dimension is {manifold.n - rank} instead of {manifold.n - expected}",
            DegeneracyWarning, stacklevel=2)
    return FiberDescription(theta, anchor, Vt[rank:].copy(), C, rank)


def _ball(rng, n, dim, radius):
    z = rng.standard_normal((n, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * (radius * rng.random((n, 1)) ** (1.0 / dim))


def sample_fiber(desc: FiberDescription, gen: GeneratorSpec, manifold: ModelManifold,
                 n_samples: int = 100, radius: float = DEFAULT_RADIUS, seed: int = 0,
                 solver: Optional[SolverOptions] = None) -> FiberSample:
    """Draw points of the candidate fiber and certify them by re-projection.

    Coefficients are uniform in a ball of the given radius in basis
    coordinates. Points touching the simplex boundary are discarded; if fewer
    than half survive the radius is halved, at most six times. Every kept
    point is re-projected and flagged verified iff it returns to theta.
    """
    if radius <= 0 or n_samples < 1:
        raise ContractError("sample_fiber needs radius > 0 and n_samples >= 1")
    solver = solver or SolverOptions()
    if desc.dim == 0:
        return FiberSample([desc.anchor], [True], radius, seed, desc.theta, [desc.theta.copy()])
    rng = np.random.default_rng(seed)
    r = radius
    for _ in range(7):
        coeffs = _ball(rng, n_samples, desc.dim, r)
        pts = desc.anchor.weights + coeffs @ desc.basis
        keep = pts.min(axis=1) > BOUNDARY_FLOOR
        if keep.sum() * 2 >= n_samples:
            break
        r /= 2
    if not keep.any():
        raise SamplingError(f"no interior fiber points within radius {radius:g} (reduced to {r:g})")
    points, verified, reproj = [], [], []
    for w in pts[keep]:
        x = Distribution(w)
        try:
            res = project(gen, manifold, x, solver)
            ok = bool(np.abs(res.theta_star - desc.theta).max() <= VERIFY_TOL)
            reproj.append(res.theta_star)
        except SolverError:
            ok = False
            reproj.append(None)
        points.append(x)
        verified.append(ok)
    return FiberSample(points, verified, r, seed, desc.theta, reproj)
