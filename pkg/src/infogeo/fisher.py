"""Generalized Fisher information: numeric Hessian, closed Bregman form, covariance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import BOUNDARY_FLOOR, ModelManifold, _weights
from .divergences import GeneratorSpec, bregman_raw
from .errors import ContractError, NumericError

#: Gradient norm above which a point is not accepted as a projection point.
MIN_GRAD_TOL = 1e-7
HESSIAN_STEP = 3e-4
#: Allowed relative change of the Hessian when the step is halved.
HALVING_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    at_theta: np.ndarray
    matrix: np.ndarray
    source: str

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        scale = max(1.0, np.abs(M).max())
        if np.abs(M - M.T).max() > 1e-6 * scale:
            raise NumericError(f"Fisher matrix is not symmetric: {M.tolist()}")
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "at_theta", np.atleast_1d(np.asarray(self.at_theta, dtype=np.float64)))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def to_dict(self) -> dict:
        return {
            "at_theta": self.at_theta.tolist(),
            "matrix": self.matrix.tolist(),
            "source": self.source,
            "eigenvalues": self.eigenvalues.tolist(),
        }


@dataclass(frozen=True)
class Reparametrization:
    """Diffeomorphism ``theta -> eta`` with Jacobian ``J[m, k] = d eta^m / d theta^k``.

    ``inverse`` is optional; without it the inverse map is found by Newton's method.
    """

    map: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    jacobian: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    inverse: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    name: str = "reparam"

    def jac(self, theta) -> np.ndarray:
        J = np.atleast_2d(np.asarray(self.jacobian(np.atleast_1d(theta)), dtype=np.float64))
        if abs(np.linalg.det(J)) <= 1e-10:
            raise NumericError(f"reparametrization {self.name!r} has a singular Jacobian at {np.ravel(theta).tolist()}")
        return J

    def inverse_map(self, eta, theta0=None) -> np.ndarray:
        eta = np.atleast_1d(np.asarray(eta, dtype=np.float64))
        if self.inverse is not None:
            return np.atleast_1d(np.asarray(self.inverse(eta), dtype=np.float64))
        theta = eta.copy() if theta0 is None else np.atleast_1d(np.asarray(theta0, dtype=np.float64))
        for _ in range(100):
            r = np.atleast_1d(self.map(theta)) - eta
            if np.abs(r).max() <= 1e-15 * max(1.0, np.abs(eta).max()):
                break
            step = np.linalg.solve(self.jac(theta), r)
            theta = theta - step
            if np.abs(step).max() <= 1e-16 * max(1.0, np.abs(theta).max()):
                break
        else:
            raise NumericError(f"could not invert reparametrization {self.name!r} at {eta.tolist()}")
        return theta

    def check_grid(self, grid) -> None:
        for theta in grid:
            self.jac(theta)


def identity_reparam(d: int = 1) -> Reparametrization:
    return Reparametrization(lambda t: np.asarray(t, dtype=np.float64), lambda t: np.eye(d),
                             lambda e: np.asarray(e, dtype=np.float64), name="identity")


def linear_reparam(matrix, offset=None) -> Reparametrization:
    A = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    b = np.zeros(A.shape[0]) if offset is None else np.asarray(offset, dtype=np.float64)
    return Reparametrization(lambda t: A @ t + b, lambda t: A, lambda e: np.linalg.solve(A, e - b), name="linear")


def logit_reparam() -> Reparametrization:
    return Reparametrization(
        lambda t: np.log(t / (1.0 - t)),
        lambda t: np.atleast_2d(1.0 / (t * (1.0 - t))),
        lambda e: 1.0 / (1.0 + np.exp(-np.asarray(e, dtype=np.float64))),
        name="logit",
    )


# derivatives of D(x || theta) ------------------------------------------------

def logmap_jacobian(gen: GeneratorSpec, manifold: ModelManifold, theta) -> np.ndarray:
    """``d x n`` matrix of ``d f(m_theta(a)) / d theta^k``."""
    m = manifold.weights(theta)
    return manifold.jacobian(theta) * gen.fprime(m)


def divergence_gradient(gen: GeneratorSpec, manifold: ModelManifold, xw, theta) -> np.ndarray:
    """Gradient of ``theta -> D(x || theta)``: ``-sum_a (x(a) - m(a)) d_k f(m(a))``."""
    m = manifold.weights(theta)
    return -logmap_jacobian(gen, manifold, theta) @ (xw - m)


def fisher_term(gen: GeneratorSpec, manifold: ModelManifold, theta) -> np.ndarray:
    m = manifold.weights(theta)
    J = manifold.jacobian(theta)
    return (J * gen.fprime(m)) @ J.T


def divergence_hessian(gen: GeneratorSpec, manifold: ModelManifold, xw, theta, step=1e-5) -> np.ndarray:
    """Hessian of ``theta -> D(x || theta)`` split into the Fisher term and the residual term.

    The residual term ``-sum_a (x(a) - m(a)) d_k d_l f(m(a))`` is obtained by
    central differences of the log-map Jacobian. Where a difference step would
    leave the admissible region only the Fisher term is returned.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    m = manifold.weights(theta)
    H = fisher_term(gen, manifold, theta)
    r = xw - m
    if not np.any(r):
        return H
    d = theta.size
    R = np.zeros((d, d))
    for l in range(d):
        h = step * max(1.0, abs(theta[l]))
        tp, tm = theta.copy(), theta.copy()
        tp[l] += h
        tm[l] -= h
        if not (manifold.contains(tp) and manifold.contains(tm)):
            return H
        mp, mm = manifold.weights(tp), manifold.weights(tm)
        if mp.min() <= BOUNDARY_FLOOR or mm.min() <= BOUNDARY_FLOOR:
            return H
        dS = (logmap_jacobian(gen, manifold, tp) - logmap_jacobian(gen, manifold, tm)) / (tp[l] - tm[l])
        R[:, l] = -dS @ r
    return H + 0.5 * (R + R.T)


def hessian_fd(fun, theta, steps) -> np.ndarray:
    """Central-difference Hessian; 3-point diagonal, 4-point cross terms.

    ``fun`` may be vector valued, in which case the result has shape
    ``(d, d) + fun(theta).shape``.
    """
    d = theta.size
    f0 = np.asarray(fun(theta), dtype=np.float64)
    H = np.empty((d, d) + f0.shape)
    for k in range(d):
        e = np.zeros(d)
        e[k] = steps[k]
        H[k, k] = (fun(theta + e) - 2.0 * f0 + fun(theta - e)) / steps[k] ** 2
        for l in range(k):
            g = np.zeros(d)
            g[l] = steps[l]
            H[k, l] = H[l, k] = (
                fun(theta + e + g) - fun(theta + e - g) - fun(theta - e + g) + fun(theta - e - g)
            ) / (4.0 * steps[k] * steps[l])
    return H


def fisher_numeric(gen: GeneratorSpec, manifold: ModelManifold, x, theta_star,
                   step_scale: float = 1.0, extrapolate: bool = True,
                   grad_tol: float = MIN_GRAD_TOL) -> FisherMatrix:
    """Finite-difference Hessian of ``theta -> D(x || theta)`` at a projection point.

    Central differences with step ``3e-4 * max(1, |theta_k|) * step_scale``,
    repeated at half the step. The two estimates must agree to 1e-4 relative;
    with ``extrapolate`` their Richardson combination is returned.
    """
    xw = _weights(x)
    theta = manifold.check_theta(theta_star)
    grad = divergence_gradient(gen, manifold, xw, theta)
    if np.linalg.norm(grad) > grad_tol:
        raise ContractError(
            f"theta={theta.tolist()} is not a projection point of x: gradient norm "
            f"{np.linalg.norm(grad):.3e} > {grad_tol:g}")

    def fun(t):
        if not manifold.contains(t):
            raise ContractError(f"Hessian stencil leaves the parameter box at {t.tolist()}")
        return bregman_raw(gen, xw, manifold.weights(t))

    steps = HESSIAN_STEP * step_scale * np.maximum(1.0, np.abs(theta))
    H1 = hessian_fd(fun, theta, steps)
    H2 = hessian_fd(fun, theta, steps / 2)
    norm = max(np.linalg.norm(H2), 1e-12)
    if np.linalg.norm(H1 - H2) > HALVING_TOL * norm:
        raise NumericError(
            f"Hessian unstable under step halving at theta={theta.tolist()}: "
            f"relative change {np.linalg.norm(H1 - H2) / norm:.2e}")
    H = (4.0 * H2 - H1) / 3.0 if extrapolate else H1
    return FisherMatrix(theta, H, "numeric_hessian")


def fisher_bregman(gen: GeneratorSpec, manifold: ModelManifold, theta) -> FisherMatrix:
    """``I_kl(theta) = sum_a f'(m(a)) d_k m(a) d_l m(a)``."""
    theta = manifold.check_theta(theta)
    return FisherMatrix(theta, fisher_term(gen, manifold, theta), "bregman_closed_form")


def covariance_transform(I_theta: FisherMatrix, rep: Reparametrization) -> FisherMatrix:
    """Express a Fisher matrix in eta coordinates: ``J^-T I_theta J^-1``."""
    J = rep.jac(I_theta.at_theta)
    Jinv = np.linalg.inv(J)
    eta = np.atleast_1d(rep.map(I_theta.at_theta))
    return FisherMatrix(eta, Jinv.T @ I_theta.matrix @ Jinv, I_theta.source)
