"""Generators, deformed logarithms and the divergences built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .core import EPS_DOM, Question, _weights, evaluate
from .errors import ContractError, DomainError, NumericError

#: Divergences in [-CLAMP_TOL, 0) are round-off and clamped to zero.
CLAMP_TOL = 1e-10

_GRID = np.linspace(1e-3, 1.0, 200)


@dataclass(frozen=True)
class GeneratorSpec:
    """Strictly convex ``F`` on (0, 1] with first and second derivatives.

    All three callables must accept and return numpy arrays.
    """

    F: Callable = field(repr=False)
    f: Callable = field(repr=False)
    fprime: Callable = field(repr=False)
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    #: optional per-symbol divergence ``(x, m) -> array``, free of cancellation
    term: Optional[Callable] = field(default=None, repr=False, compare=False)

    def validate(self, grid=_GRID) -> "GeneratorSpec":
        u = np.asarray(grid, dtype=np.float64)
        u = u[(u > EPS_DOM) & (u <= 1.0)]
        fp = self.fprime(u)
        if not np.all(fp > 0):
            raise ContractError(f"generator {self.name!r} is not strictly convex: F'' <= 0 on the grid")
        h = 1e-6 * u
        fd = (self.F(u + h) - self.F(u - h)) / (2 * h)
        fu = self.f(u)
        rel = np.abs(fd - fu) / np.maximum(1.0, np.abs(fu))
        if rel.max() > 1e-6:
            i = int(rel.argmax())
            raise ContractError(
                f"generator {self.name!r}: f is not the derivative of F at u={u[i]:.4g} "
                f"(finite difference {fd[i]:.10g} vs f {fu[i]:.10g})")
        fd2 = (self.f(u + h) - self.f(u - h)) / (2 * h)
        rel2 = np.abs(fd2 - fp) / np.maximum(1.0, np.abs(fp))
        if rel2.max() > 1e-5:
            i = int(rel2.argmax())
            raise ContractError(f"generator {self.name!r}: fprime is not the derivative of f at u={u[i]:.4g}")
        return self

    def to_dict(self) -> dict:
        return {"kind": self.name, **self.params}


@dataclass(frozen=True)
class DeformedLogSpec:
    """Deformed logarithm ``f(u) = int_1^u dv / phi(v)``.

    Give either ``q`` (power law ``phi(v) = v**q``, closed forms available) or
    a general positive nondecreasing ``phi``.
    """

    phi: Optional[Callable[[float], float]] = field(default=None, repr=False)
    q: Optional[float] = None

    def __post_init__(self):
        if self.phi is None and self.q is None:
            raise ContractError("a deformed logarithm needs phi or q")
        if self.q is not None and self.q < 0:
            raise ContractError("power-law phi(v) = v**q needs q >= 0 to be nondecreasing")
        if self.phi is not None:
            v = np.geomspace(1e-3, 1e3, 61)
            pv = np.array([self.phi(t) for t in v])
            if not np.all(pv > 0) or np.any(np.diff(pv) < 0):
                raise ContractError("phi must be positive and nondecreasing")

    def phi_value(self, v):
        if self.q is not None:
            return np.asarray(v, dtype=np.float64) ** self.q
        return self.phi(v)


@dataclass(frozen=True)
class USpec:
    """Convex increasing ``U`` with derivative ``g`` and ``f_inv`` = inverse of ``g``."""

    U: Callable = field(repr=False)
    g: Callable = field(repr=False)
    f_inv: Callable = field(repr=False)
    name: str = "custom"

    def validate(self, grid=_GRID) -> "USpec":
        p = np.asarray(grid, dtype=np.float64)
        u = self.f_inv(p)
        gu = self.g(u)
        if np.any(np.diff(gu) <= 0):
            raise ContractError(f"U-spec {self.name!r}: g is not increasing")
        back = self.f_inv(gu)
        if np.max(np.abs(back - u) / np.maximum(1.0, np.abs(u))) > 1e-8:
            raise ContractError(f"U-spec {self.name!r}: f_inv is not the inverse of g")
        return self


def _check_pair(x, m):
    xw, mw = _weights(x), _weights(m)
    if xw.size != mw.size:
        raise ContractError(f"alphabet mismatch: {xw.size} vs {mw.size} symbols")
    return xw, mw


def _clamp(value: float, what: str) -> float:
    if value < -CLAMP_TOL:
        raise NumericError(f"{what} is negative ({value:.3e}) beyond round-off tolerance {CLAMP_TOL:g}")
    return max(value, 0.0)


def bregman_raw(gen: GeneratorSpec, xw: np.ndarray, mw: np.ndarray) -> float:
    """Bregman divergence on raw weight arrays, without validation or clamping."""
    if gen.term is not None:
        return float(np.sum(gen.term(xw, mw)))
    return float(np.sum(gen.F(xw) - gen.F(mw) - (xw - mw) * gen.f(mw)))


def _power_term(xw, mw, q: float):
    """Per-symbol Bregman term of the q-log generator, ``m**(2-q) * chi((x - m) / m)``.

    ``chi(t) = [((1+t)**p - 1) / p - t] / (1 - q)`` with ``p = 2 - q``; a
    power series is used for small ``t`` where the bracket cancels.
    """
    xw = np.asarray(xw, dtype=np.float64)
    mw = np.asarray(mw, dtype=np.float64)
    t = (xw - mw) / mw
    p = 2.0 - q
    small = np.abs(t) < 1e-2
    ts = np.where(small, t, 0.0)
    series = np.zeros_like(t)
    c, tk = 0.5, ts * ts
    for k in range(2, 12):
        series += c * tk
        c *= (p - k) / (k + 1)
        tk = tk * ts
    tl = np.where(small, 1.0, t)
    if q == 1.0:
        direct = (1.0 + tl) * np.log1p(tl) - tl
    elif q == 2.0:
        direct = tl - np.log1p(tl)
    else:
        direct = (np.expm1(p * np.log1p(tl)) / p - tl) / (1.0 - q)
    return mw ** p * np.where(small, series, direct)


def bregman_divergence(gen: GeneratorSpec, x, m) -> float:
    """``sum_a F(x(a)) - F(m(a)) - (x(a) - m(a)) f(m(a))``, clamped at zero."""
    xw, mw = _check_pair(x, m)
    return _clamp(bregman_raw(gen, xw, mw), "Bregman divergence")


def _quad(fn, a, b, what):
    val, err, info = integrate.quad(fn, a, b, epsabs=1e-10, epsrel=1e-12, limit=10_000, full_output=True)[:3]
    if err > 1e-8:
        raise NumericError(
            f"quadrature for {what} on [{a:.6g}, {b:.6g}] did not converge: "
            f"estimate {val:.12g}, error {err:.2e}, {info.get('neval')} evaluations")
    return val


def u_divergence(u: USpec, x, m, method: str = "closed") -> float:
    """U-divergence ``sum_a int_{f(x(a))}^{f(m(a))} [g(t) - x(a)] dt``.

    ``method="closed"`` uses ``U`` as the antiderivative of ``g``;
    ``method="quadrature"`` integrates ``g`` numerically.
    """
    xw, mw = _check_pair(x, m)
    fx, fm = u.f_inv(xw), u.f_inv(mw)
    if method == "closed":
        terms = u.U(fm) - u.U(fx) - xw * (fm - fx)
    elif method == "quadrature":
        terms = np.array([
            _quad(lambda t, xa=xa: float(u.g(t)) - xa, a, b, "U-divergence") if a != b else 0.0
            for xa, a, b in zip(xw, fx, fm)
        ])
    else:
        raise ContractError(f"unknown method {method!r}")
    return _clamp(float(np.sum(terms)), "U-divergence")


def q_log(u, q: float):
    """Power-law deformed logarithm ``(u**(1-q) - 1) / (1 - q)``; ``ln u`` at ``q = 1``."""
    u = np.asarray(u, dtype=np.float64)
    if q == 1.0:
        return np.log(u)
    return np.expm1((1.0 - q) * np.log(u)) / (1.0 - q)


def deformed_log(spec: DeformedLogSpec, u, method: str = "auto") -> float:
    """Evaluate ``int_1^u dv / phi(v)``; closed form for power-law ``phi`` unless ``method="quadrature"``."""
    u = float(u)
    if not u > 0:
        raise DomainError(f"deformed logarithm needs u > 0, got {u}")
    if spec.q is not None and method != "quadrature":
        return float(q_log(u, spec.q))
    if u == 1.0:
        return 0.0
    return _quad(lambda v: 1.0 / float(spec.phi_value(v)), 1.0, u, "deformed logarithm")


def _power_antiderivative(u, q):
    # int_1^u ln_q(v) dv
    if q == 1.0:
        return u * np.log(u) - u + 1.0
    if q == 2.0:
        return u - 1.0 - np.log(u)
    return ((u ** (2.0 - q) - 1.0) / (2.0 - q) - (u - 1.0)) / (1.0 - q)


def generator_from_deformed_log(spec: DeformedLogSpec) -> GeneratorSpec:
    """Generator whose derivative is the deformed logarithm of ``spec``."""
    if spec.q is not None:
        q = float(spec.q)
        return GeneratorSpec(
            F=lambda u: _power_antiderivative(np.asarray(u, dtype=np.float64), q),
            f=lambda u: q_log(u, q),
            fprime=lambda u: np.asarray(u, dtype=np.float64) ** (-q),
            name="qlog",
            params={"q": q},
            term=lambda x, m: _power_term(x, m, q),
        )

    def f(u):
        return np.vectorize(lambda t: deformed_log(spec, t))(u)

    def F(u):
        return np.vectorize(lambda t: _quad(lambda v: deformed_log(spec, v), 1.0, t, "generator") if t != 1.0 else 0.0)(u)

    return GeneratorSpec(F=F, f=f, fprime=lambda u: 1.0 / spec.phi_value(np.asarray(u, dtype=np.float64)),
                         name="deformed_log")


def entropy(gen: GeneratorSpec, x) -> float:
    """``-sum_a F(x(a))``."""
    return float(-np.sum(gen.F(_weights(x))))


def log_map(gen: GeneratorSpec, m) -> Question:
    """The question ``a -> f(m(a))``."""
    return Question(gen.f(_weights(m)))


def decomposed_divergence(gen: GeneratorSpec, x, m) -> float:
    """Divergence assembled from corrector, entropy and logarithmic map."""
    from .projection import corrector

    return corrector(gen, m) - entropy(gen, x) - evaluate(x, log_map(gen, m))


# catalog -------------------------------------------------------------------

def kl_generator() -> GeneratorSpec:
    return GeneratorSpec(
        F=lambda u: u * np.log(u),
        f=lambda u: 1.0 + np.log(u),
        fprime=lambda u: 1.0 / np.asarray(u, dtype=np.float64),
        name="kl",
        term=lambda x, m: _power_term(x, m, 1.0),  # x ln(x/m) - (x - m)
    )


def euclidean_generator() -> GeneratorSpec:
    return GeneratorSpec(
        F=lambda u: np.asarray(u, dtype=np.float64) ** 2,
        f=lambda u: 2.0 * np.asarray(u, dtype=np.float64),
        fprime=lambda u: np.full(np.shape(u), 2.0),
        name="euclidean",
        term=lambda x, m: (np.asarray(x) - np.asarray(m)) ** 2,
    )


def qlog_generator(q: float) -> GeneratorSpec:
    return generator_from_deformed_log(DeformedLogSpec(q=q))


def exp_u_spec() -> USpec:
    """``U = exp``: recovers the Kullback-Leibler divergence on normalized inputs."""
    return USpec(U=np.exp, g=np.exp, f_inv=np.log, name="exp")


def quadratic_u_spec() -> USpec:
    return USpec(U=lambda t: 0.5 * np.asarray(t) ** 2, g=lambda t: np.asarray(t, dtype=np.float64),
                 f_inv=lambda p: np.asarray(p, dtype=np.float64), name="quadratic")


_REGISTRY: dict = {}


def register_generator(name: str, F, f, fprime) -> GeneratorSpec:
    """Validate and register a custom generator triple under ``name``."""
    gen = GeneratorSpec(F=F, f=f, fprime=fprime, name=name).validate()
    _REGISTRY[name] = gen
    return gen


def get_generator(kind: str, q: Optional[float] = None) -> GeneratorSpec:
    if kind == "kl":
        return kl_generator()
    if kind == "euclidean":
        return euclidean_generator()
    if kind == "qlog":
        if q is None:
            raise ContractError("qlog generator needs q")
        return qlog_generator(q)
    if kind in _REGISTRY:
        return _REGISTRY[kind]
    raise ContractError(f"unknown generator {kind!r}")


def generator_names():
    return ["kl", "euclidean", "qlog", *sorted(_REGISTRY)]
