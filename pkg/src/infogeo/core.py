"""Alphabets, distributions, questions and parametrized model manifolds.

The data space is the interior of the probability simplex over a finite
alphabet. Questions are real functions on the alphabet, evaluated against a
distribution as an expectation. A model manifold is a differentiable map
from an open parameter box into the simplex interior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError

#: Weights at or below this value are treated as lying on the simplex boundary.
EPS_DOM = 1e-12
#: Tolerance on the normalization of a distribution.
NORM_TOL = 1e-12
#: Weights at or below this value are rejected by solvers and samplers.
BOUNDARY_FLOOR = 10 * EPS_DOM
#: Default half-width of the parameter box of builtin families.
DEFAULT_HALF_WIDTH = 10.0


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ContractError(f"alphabet size must be an integer >= 2, got {self.size}")


@dataclass(frozen=True, eq=False)
class Distribution:
    """Strictly positive normalized weight vector over a finite alphabet."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size < 2:
            raise ContractError("distribution weights must be a vector of length >= 2")
        if not np.all(np.isfinite(w)):
            raise DomainError("distribution weights must be finite")
        if np.any(w <= EPS_DOM):
            raise DomainError(
                f"distribution has a weight <= {EPS_DOM:g} (min {w.min():.3e}); "
                "only interior points of the simplex are supported"
            )
        if abs(w.sum() - 1.0) > NORM_TOL:
            raise DomainError(f"distribution weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, weights) -> "Distribution":
        w = np.asarray(weights, dtype=np.float64)
        return cls(w / w.sum())

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.weights.size)

    def __len__(self):
        return self.weights.size

    def __eq__(self, other):
        return isinstance(other, Distribution) and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"Distribution({self.weights.tolist()})"


@dataclass(frozen=True, eq=False)
class Question:
    """A real function on the alphabet."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1 or v.size < 2:
            raise ContractError("question values must be a vector of length >= 2")
        if not np.all(np.isfinite(v)):
            raise ContractError("question values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, n: int, value: float = 1.0) -> "Question":
        return cls(np.full(n, float(value)))

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.values.size)

    def __add__(self, other):
        return Question(self.values + _values(other))

    def __mul__(self, scalar):
        return Question(float(scalar) * self.values)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Question) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Question({self.values.tolist()})"


def _weights(x) -> np.ndarray:
    if isinstance(x, Distribution):
        return x.weights
    return Distribution(x).weights


def _values(q) -> np.ndarray:
    if isinstance(q, Question):
        return q.values
    return Question(q).values


def evaluate(x, q) -> float:
    """Expectation of the question ``q`` under ``x``."""
    w, v = _weights(x), _values(q)
    if w.size != v.size:
        raise ContractError(f"alphabet mismatch: distribution has {w.size} symbols, question {v.size}")
    return float(w @ v)


def fd_jacobian(forward: Callable[[np.ndarray], np.ndarray], theta) -> np.ndarray:
    """Central finite-difference Jacobian, rows indexed by parameter."""
    theta = np.asarray(theta, dtype=np.float64)
    rows = []
    for k in range(theta.size):
        h = 1e-6 * max(1.0, abs(theta[k]))
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        rows.append((forward(tp) - forward(tm)) / (tp[k] - tm[k]))
    return np.array(rows)


@dataclass(frozen=True)
class ModelManifold:
    """A parametrized family ``theta -> m_theta`` over an open parameter box.

    ``forward_fn`` and ``jacobian_fn`` work on raw arrays and skip validation;
    they are the fast path used inside solvers. ``forward`` returns a checked
    :class:`Distribution`.
    """

    n: int
    lower: np.ndarray
    upper: np.ndarray
    forward_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    name: str = "manifold"
    spec: Optional["BuiltinManifoldSpec"] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        Alphabet(self.n)
        lo = _frozen(np.atleast_1d(self.lower))
        hi = _frozen(np.atleast_1d(self.upper))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ContractError("parameter box bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise ContractError("parameter box is empty")
        if not 1 <= lo.size <= self.n - 1:
            raise ContractError(f"parameter dimension {lo.size} must lie in [1, {self.n - 1}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.n)

    @property
    def param_dim(self) -> int:
        return self.lower.size

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=np.float64)
        return theta.shape == self.lower.shape and bool(np.all((theta > self.lower) & (theta < self.upper)))

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if not self.contains(theta):
            raise DomainError(
                f"parameter {theta.tolist()} outside the open box "
                f"{self.lower.tolist()} .. {self.upper.tolist()} of {self.name}"
            )
        return theta

    def weights(self, theta) -> np.ndarray:
        return self.forward_fn(np.atleast_1d(np.asarray(theta, dtype=np.float64)))

    def forward(self, theta) -> Distribution:
        return Distribution(self.weights(self.check_theta(theta)))

    def jacobian(self, theta) -> np.ndarray:
        """``d x n`` matrix of derivatives of ``m_theta(a)`` with respect to ``theta^k``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if self.jacobian_fn is not None:
            return self.jacobian_fn(theta)
        return fd_jacobian(self.forward_fn, theta)

    def fd_jacobian(self, theta) -> np.ndarray:
        return fd_jacobian(self.forward_fn, np.atleast_1d(np.asarray(theta, dtype=np.float64)))

    def sample_params(self, rng: np.random.Generator, size: int, margin: float = 0.0) -> np.ndarray:
        """Uniform parameters in the box shrunk by ``margin`` (a fraction of each side)."""
        width = self.upper - self.lower
        lo = self.lower + margin * width
        return lo + rng.random((size, self.param_dim)) * (1 - 2 * margin) * width

    def reparametrize(self, rep, lower=None, upper=None) -> "ModelManifold":
        """The same family in the coordinates ``eta = rep.map(theta)``.

        The eta box must be given unless ``d == 1``, where it is the image of
        the theta box under the (monotone) map.
        """
        if lower is None or upper is None:
            if self.param_dim != 1:
                raise ContractError("an explicit eta box is required for d > 1")
            ends = np.sort([rep.map(self.lower)[0], rep.map(self.upper)[0]])
            lower, upper = ends[:1], ends[1:]

        def forward(eta):
            return self.forward_fn(rep.inverse_map(eta))

        def jacobian(eta):
            theta = rep.inverse_map(eta)
            jr = np.atleast_2d(rep.jacobian(theta))
            return np.linalg.solve(jr.T, self.jacobian(theta))

        return ModelManifold(self.n, lower, upper, forward, jacobian, name=f"{self.name}[{rep.name}]")


@dataclass(frozen=True)
class BuiltinManifoldSpec:
    """Declarative description of a builtin family.

    ``exponential``: ``m(a) ~ exp(sum_k theta^k q_k(a))``.
    ``q_exponential``: ``m(a) ~ exp_q(sum_k theta^k q_k(a))``, normalized by the sum.
    ``curved_polynomial``: one parameter; the first ``n - 1`` weights are
    polynomials in theta (ascending coefficients), the last weight makes up the rest.
    """

    kind: str
    n: Optional[int] = None
    questions: Optional[Sequence[Sequence[float]]] = None
    q: Optional[float] = None
    coefficients: Optional[Sequence[Sequence[float]]] = None
    lower: Optional[Sequence[float]] = None
    upper: Optional[Sequence[float]] = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "n": self.n}
        for key in ("questions", "q", "coefficients", "lower", "upper"):
            val = getattr(self, key)
            if val is not None:
                out[key] = [list(map(float, r)) for r in val] if key in ("questions", "coefficients") else (
                    float(val) if key == "q" else [float(v) for v in val])
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "BuiltinManifoldSpec":
        return cls(
            kind=d["kind"],
            n=d.get("n"),
            questions=d.get("questions"),
            q=d.get("q"),
            coefficients=d.get("coefficients"),
            lower=d.get("lower"),
            upper=d.get("upper"),
        )


MANIFOLD_KINDS = ("exponential", "q_exponential", "curved_polynomial")


def _check_questions(questions, n):
    if not questions:
        raise ContractError("exponential families need at least one question")
    Q = np.array(questions, dtype=np.float64)
    if Q.ndim != 2 or (n is not None and Q.shape[1] != n):
        raise ContractError(f"questions must be a d x n array with n = {n}")
    if not np.all(np.isfinite(Q)):
        raise ContractError("questions must be finite")
    n = Q.shape[1]
    d = Q.shape[0]
    if d > n - 1:
        raise ContractError(f"{d} questions on an alphabet of {n} symbols: at most {n - 1} allowed")
    stacked = np.vstack([np.ones(n), Q])
    s = np.linalg.svd(stacked, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    if rank < d + 1:
        const = [k for k in range(d) if np.ptp(Q[k]) == 0]
        detail = f"constant question(s) {const}" if const else "questions are affinely dependent"
        raise ContractError(
            f"degenerate questions: rank {rank} of [1; q_1..q_d] is below {d + 1} ({detail})")
    return Q


def _box(spec, default_lo, default_hi):
    lo = np.array(spec.lower if spec.lower is not None else default_lo, dtype=np.float64)
    hi = np.array(spec.upper if spec.upper is not None else default_hi, dtype=np.float64)
    return lo, hi


def _exponential(spec: BuiltinManifoldSpec) -> ModelManifold:
    Q = _check_questions(spec.questions, spec.n)
    d, n = Q.shape
    # keep every weight above ~e^-20 / n inside the default box
    spread = np.ptp(Q, axis=1).sum()
    r = min(DEFAULT_HALF_WIDTH, 20.0 / spread)
    lo, hi = _box(spec, -r * np.ones(d), r * np.ones(d))

    def forward(theta):
        s = theta @ Q
        e = np.exp(s - s.max())
        return e / e.sum()

    def jacobian(theta):
        m = forward(theta)
        return m * (Q - (Q @ m)[:, None])

    return ModelManifold(n, lo, hi, forward, jacobian, name="exponential", spec=spec)


def q_exp(u, q: float):
    """Deformed exponential, the inverse of the q-logarithm (zero where undefined)."""
    u = np.asarray(u, dtype=np.float64)
    if q == 1.0:
        return np.exp(u)
    base = 1.0 + (1.0 - q) * u
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(base > 0, np.abs(base) ** (1.0 / (1.0 - q)), 0.0)


def _q_exponential(spec: BuiltinManifoldSpec) -> ModelManifold:
    if spec.q is None:
        raise ContractError("q_exponential family needs the deformation parameter q")
    q = float(spec.q)
    if q == 1.0:
        return _exponential(BuiltinManifoldSpec("exponential", spec.n, spec.questions,
                                                lower=spec.lower, upper=spec.upper))
    if q < 0:
        raise ContractError("deformation parameter q must be >= 0")
    Q = _check_questions(spec.questions, spec.n)
    d, n = Q.shape
    # 1 + (1 - q) u >= 0.1 on the whole default box
    r = min(DEFAULT_HALF_WIDTH, 0.9 / (abs(1.0 - q) * np.abs(Q).max(axis=1).sum()))
    lo, hi = _box(spec, -r * np.ones(d), r * np.ones(d))

    def forward(theta):
        e = q_exp(theta @ Q, q)
        return e / e.sum()

    def jacobian(theta):
        e = q_exp(theta @ Q, q)
        z = e.sum()
        de = e ** q * Q  # d/du exp_q(u) = exp_q(u)^q
        return (de - np.outer(de.sum(axis=1), e / z)) / z

    name = f"q_exponential(q={q:g})"
    return ModelManifold(n, lo, hi, forward, jacobian, name=name, spec=spec)


def _polynomial_domain(coeffs, min_weight=0.05):
    """Longest interval in [-10, 10] on which every weight exceeds ``min_weight``."""
    grid = np.linspace(-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH, 200001)
    head = np.array([np.polynomial.polynomial.polyval(grid, c) for c in coeffs])
    w = np.vstack([head, 1.0 - head.sum(axis=0)])
    ok = np.all(w > min_weight, axis=0)
    best, start, best_span = None, None, -1
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - 1 - start > best_span:
                best, best_span = (start, i - 1), i - 1 - start
            start = None
    if best is None or best_span < 1:
        raise ContractError(f"polynomial family has no parameter interval with all weights > {min_weight}")
    return np.array([grid[best[0]]]), np.array([grid[best[1]]])


def _curved_polynomial(spec: BuiltinManifoldSpec) -> ModelManifold:
    if not spec.coefficients:
        raise ContractError("curved_polynomial family needs coefficients for the first n - 1 weights")
    coeffs = [np.array(c, dtype=np.float64) for c in spec.coefficients]
    n = len(coeffs) + 1
    if spec.n is not None and spec.n != n:
        raise ContractError(f"{len(coeffs)} coefficient rows do not match n = {spec.n}")
    if spec.lower is not None and spec.upper is not None:
        lo, hi = _box(spec, None, None)
    else:
        lo, hi = _polynomial_domain(coeffs)
    dcoeffs = [np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1) for c in coeffs]
    P = np.polynomial.polynomial

    def forward(theta):
        t = theta[0]
        head = np.array([P.polyval(t, c) for c in coeffs])
        return np.append(head, 1.0 - head.sum())

    def jacobian(theta):
        t = theta[0]
        head = np.array([P.polyval(t, c) for c in dcoeffs])
        return np.append(head, -head.sum())[None, :]

    return ModelManifold(n, lo, hi, forward, jacobian, name="curved_polynomial", spec=spec)


def make_manifold(spec: BuiltinManifoldSpec) -> ModelManifold:
    """Build a builtin :class:`ModelManifold` from its declarative spec."""
    builders = {
        "exponential": _exponential,
        "q_exponential": _q_exponential,
        "curved_polynomial": _curved_polynomial,
    }
    try:
        build = builders[spec.kind]
    except KeyError:
        raise ContractError(f"unknown manifold kind {spec.kind!r}; expected one of {MANIFOLD_KINDS}") from None
    manifold = build(spec)
    if manifold.spec is not spec:
        object.__setattr__(manifold, "spec", spec)
    return manifold
