"""Rademacher complexity estimates and the generalisation-bound right-hand sides.

For the linear composite class ``{x -> beta^T A^T p_M(x) : ||beta|| <= C_b,
A^T A = I}`` the composite vector ``v = A beta`` ranges over the whole ball of
radius ``C_b`` (any unit direction can be the first column of ``A``), so the
supremum for one sign draw is available in closed form::

    sup_f (1/m) sum_i s_i f(x_i) = (C_b / m) * || sum_i s_i p_M(x_i) ||

Other classes go through a sup oracle; the default runs projected gradient
ascent from several random starts, which can only under-estimate the sup.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from ._rng import stream
from .composite import MlpComposite, ModelSpec, output_gradients
from .exceptions import BoundConstantsError, InvalidInputError, ModalboundError
from .modal_data import Dataset, ModalitySubset

DEFAULT_DRAWS = 200
DEFAULT_DELTA = 0.05
MAX_ENUMERATION = 2 ** 16


@dataclass
class RademacherEstimate:
    mean: float
    standard_error: float
    n_draws: int
    oracle: str
    per_draw: np.ndarray = field(default=None, repr=False)
    exact_enumeration: bool = False

    @property
    def lower_estimate(self) -> bool:
        return self.oracle != "linear_exact"

    def to_dict(self) -> dict:
        return {"mean": self.mean, "standard_error": self.standard_error,
                "n_draws": self.n_draws, "oracle": self.oracle,
                "exact_enumeration": self.exact_enumeration,
                "lower_estimate": self.lower_estimate}


def _aggregate(values: np.ndarray, oracle: str, exact: bool) -> RademacherEstimate:
    n = len(values)
    mean = math.fsum(values) / n
    se = 0.0 if exact or n < 2 else float(np.std(values, ddof=1) / math.sqrt(n))
    return RademacherEstimate(mean, se, n, oracle, values, exact)


def _sign_draws(m: int, n_draws: int, seed: int, enumerate_signs: bool | None):
    if enumerate_signs is None:
        enumerate_signs = 2 ** m <= n_draws
    if enumerate_signs:
        if 2 ** m > MAX_ENUMERATION:
            raise InvalidInputError(f"refusing to enumerate 2^{m} sign patterns")
        return np.array(list(itertools.product((-1.0, 1.0), repeat=m))), True
    rng = stream(seed, "sigma")
    return rng.choice(np.array([-1.0, 1.0]), size=(n_draws, m)), False


def rademacher_linear_exact(dataset: Dataset, subset: ModalitySubset, C_b: float,
                            n_draws: int = DEFAULT_DRAWS, seed: int = 0,
                            enumerate_signs: bool | None = None) -> RademacherEstimate:
    """Empirical Rademacher complexity of the masked linear composite class.

    Every sign pattern is enumerated (and the result is exact) when
    ``2**m <= n_draws``, or when ``enumerate_signs`` is forced on.
    """
    if not np.isfinite(C_b) or C_b < 0:
        raise InvalidInputError("the linear closed form needs a finite C_b >= 0")
    m = len(dataset)
    if m < 1:
        raise InvalidInputError("need at least one sample")
    signs, exact = _sign_draws(m, n_draws, seed, enumerate_signs)
    X = dataset.masked_X(subset)
    values = (C_b / m) * np.linalg.norm(signs @ X, axis=1)
    return _aggregate(values, "linear_exact", exact)


class FunctionClass(Protocol):
    """What the ascent oracle needs from a parametrised function class."""

    def init(self, rng: np.random.Generator) -> list[np.ndarray]: ...

    def correlation(self, params, X: np.ndarray, coeffs: np.ndarray) -> float: ...

    def gradient(self, params, X: np.ndarray, coeffs: np.ndarray) -> list[np.ndarray]: ...

    def step(self, params, grads, eta: float) -> list[np.ndarray]: ...

    def prediction_bound(self, dataset: Dataset) -> float | None: ...


@dataclass(frozen=True)
class ZeroClass:
    """The class holding only the zero function."""

    def init(self, rng):
        return []

    def correlation(self, params, X, coeffs):
        return 0.0

    def gradient(self, params, X, coeffs):
        return []

    def step(self, params, grads, eta):
        return params

    def prediction_bound(self, dataset):
        return 0.0


@dataclass(frozen=True)
class LinearClass:
    """{x -> beta^T A^T p_M(x) : ||beta|| <= C_b, A with orthonormal columns}."""

    subset: ModalitySubset
    C_b: float
    latent_dim: int = 1

    def init(self, rng):
        d = self.subset.schema.d
        q, _ = np.linalg.qr(rng.standard_normal((d, self.latent_dim)))
        beta = rng.standard_normal(self.latent_dim)
        beta *= self.C_b * rng.uniform() / max(np.linalg.norm(beta), 1e-300)
        return [q, beta]

    def _u(self, X, coeffs):
        return (coeffs @ X) * self.subset.coord_mask()

    def correlation(self, params, X, coeffs):
        A, beta = params
        return float(beta @ (A.T @ self._u(X, coeffs)))

    def gradient(self, params, X, coeffs):
        A, beta = params
        u = self._u(X, coeffs)
        return [np.outer(u, beta), A.T @ u]

    def step(self, params, grads, eta):
        A, beta = params
        gA, gb = grads
        A = A + eta * gA / max(np.linalg.norm(gA), 1e-300)
        U, _, Vt = np.linalg.svd(A, full_matrices=False)
        beta = beta + eta * self.C_b * gb / max(np.linalg.norm(gb), 1e-300)
        norm = np.linalg.norm(beta)
        if norm > self.C_b:
            beta *= self.C_b / norm
        return [U @ Vt, beta]

    def prediction_bound(self, dataset):
        return float(self.C_b * np.linalg.norm(dataset.masked_X(self.subset), axis=1).max())


@dataclass(frozen=True)
class MlpClass:
    """MLP composites restricted to ``subset`` with every parameter in [-bound, bound].

    ``output_bound`` (a bound on |f(x)| over the data) must be supplied for
    constant estimation; a box on the weights alone does not give one cheaply.
    """

    subset: ModalitySubset
    spec: ModelSpec = ModelSpec()
    bound: float = 1.0
    output_bound: float | None = None

    def _model(self, params) -> MlpComposite:
        return self._template.with_parameters(params)

    @property
    def _template(self) -> MlpComposite:
        return MlpComposite.initialize(self.subset.schema, self.spec, np.random.default_rng(0))

    def init(self, rng):
        return [rng.uniform(-self.bound, self.bound, p.shape) for p in self._template.parameters()]

    def _X(self, X):
        return X * self.subset.coord_mask()

    def correlation(self, params, X, coeffs):
        model = self._model(params)
        return float(coeffs @ model.head(model.latents(self._X(X))))

    def gradient(self, params, X, coeffs):
        _, grads = output_gradients(self._model(params), self._X(X), coeffs)
        if not self.spec.bias:
            grads[-1] = np.zeros(1)
        return grads

    def step(self, params, grads, eta):
        return [np.clip(p + eta * self.bound * np.sign(g), -self.bound, self.bound)
                for p, g in zip(params, grads)]

    def prediction_bound(self, dataset):
        return self.output_bound


class OracleError(ModalboundError):
    def __init__(self, draw: int, cause: Exception):
        super().__init__(f"sup oracle failed on draw {draw}: {cause}")
        self.draw = draw


SupOracle = Callable[[FunctionClass, np.ndarray, np.ndarray, np.random.Generator], float]


def ascent_oracle(restarts: int = 8, steps: int = 100, eta0: float = 0.5) -> SupOracle:
    """Multi-restart projected gradient ascent; returns the best value found.

    The zero function is always a candidate, so each draw is >= 0 for classes
    that contain it.
    """

    def oracle(fclass, X, coeffs, rng):
        best = 0.0
        for _ in range(restarts):
            params = fclass.init(rng)
            for t in range(steps):
                grads = fclass.gradient(params, X, coeffs)
                params = fclass.step(params, grads, eta0 / (1.0 + t / 10.0))
            best = max(best, fclass.correlation(params, X, coeffs))
        return best

    return oracle


def rademacher_mc_oracle(dataset: Dataset, function_class: FunctionClass,
                         sup_oracle: str | SupOracle = "mc_ascent",
                         n_draws: int = DEFAULT_DRAWS, seed: int = 0,
                         restarts: int = 8, steps: int = 100) -> RademacherEstimate:
    """Monte-Carlo Rademacher estimate with a pluggable sup oracle (a lower estimate)."""
    m = len(dataset)
    if m < 1:
        raise InvalidInputError("need at least one sample")
    oracle = ascent_oracle(restarts, steps) if sup_oracle == "mc_ascent" else sup_oracle
    name = sup_oracle if isinstance(sup_oracle, str) else getattr(sup_oracle, "__name__", "custom")
    signs = stream(seed, "sigma").choice(np.array([-1.0, 1.0]), size=(n_draws, m))
    X = dataset.X
    values = np.empty(n_draws)
    for i, s in enumerate(signs):
        rng = stream(seed, "restart", i)
        try:
            values[i] = oracle(function_class, X, s / m, rng)
        except Exception as exc:
            raise OracleError(i, exc) from exc
    return _aggregate(values, name, False)


@dataclass(frozen=True)
class BoundConstants:
    L: float
    C: float
    delta: float = DEFAULT_DELTA
    C_b: float | None = None
    prediction_bound: float | None = None
    label_bound: float | None = None

    def __post_init__(self):
        if self.L <= 0 or self.C <= 0:
            raise InvalidInputError("L and C must be positive")
        if not 0 < self.delta < 1:
            raise InvalidInputError("delta must lie in (0, 1)")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def estimate_constants(dataset: Dataset, model_class: FunctionClass, delta: float = DEFAULT_DELTA,
                       label_bound: float | None = None) -> BoundConstants:
    """Loss bound C and Lipschitz constant L of the squared loss on the prediction box.

    With |f(x)| <= B_p and |y| <= B_y: C = (B_p + B_y)^2 and L = 2 (B_p + B_y).
    """
    B_p = model_class.prediction_bound(dataset)
    if B_p is None or not np.isfinite(B_p):
        raise BoundConstantsError(
            "the function class has no prediction bound; supply one (for linear heads "
            "use C_b times the largest input norm) before evaluating the bounds")
    B_y = float(np.abs(dataset.y).max()) if label_bound is None else float(label_bound)
    total = B_p + B_y
    return BoundConstants(2.0 * total, total ** 2, delta, getattr(model_class, "C_b", None), B_p, B_y)


def _rad(r) -> float:
    return r.mean if isinstance(r, RademacherEstimate) else float(r)


def _deviation(C: float, delta: float, m: int) -> float:
    return C * math.sqrt(2.0 * math.log(2.0 / delta) / m)


def _check_m(m: int):
    if m < 1:
        raise InvalidInputError("m must be >= 1")


def theorem1_components(gamma_val: float, rad_M, consts: BoundConstants, m: int) -> dict:
    """Terms of the risk-difference bound, in display order."""
    _check_m(m)
    return {"gamma": float(gamma_val),
            "complexity_M": 8.0 * consts.L * _rad(rad_M),
            "constant_shift": 4.0 * consts.C / math.sqrt(m),
            "deviation": 2.0 * _deviation(consts.C, consts.delta, m)}


def theorem2_components(rad_M, rad_full, consts: BoundConstants, m: int, centered_gap: float,
                        variant: str = "body") -> dict:
    """Terms of the latent-quality bound.

    ``variant="body"`` uses the 6C sqrt(2 ln(2/delta)/m) deviation term;
    ``"appendix"`` uses 4C/sqrt(m) + 2C sqrt(2 ln(2/delta)/m).
    """
    _check_m(m)
    terms = {"complexity_M": 4.0 * consts.L * _rad(rad_M),
             "complexity_full": 4.0 * consts.L * _rad(rad_full)}
    if variant == "body":
        terms["deviation"] = 6.0 * _deviation(consts.C, consts.delta, m)
    elif variant == "appendix":
        terms["constant_shift"] = 4.0 * consts.C / math.sqrt(m)
        terms["deviation"] = 2.0 * _deviation(consts.C, consts.delta, m)
    else:
        raise InvalidInputError(f"unknown variant {variant!r}")
    terms["centered_gap"] = float(centered_gap)
    return terms


def _total(components: dict) -> float:
    return math.fsum(components.values())


def theorem1_rhs(gamma_val: float, rad_M, consts: BoundConstants, m: int) -> float:
    return _total(theorem1_components(gamma_val, rad_M, consts, m))


def theorem2_rhs(rad_M, rad_full, consts: BoundConstants, m: int, centered_gap: float,
                 variant: str = "body") -> float:
    return _total(theorem2_components(rad_M, rad_full, consts, m, centered_gap, variant))


@dataclass
class BoundReport:
    theorem: str
    lhs: float
    rhs: float
    holds: bool
    components: dict
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds,
                "components": dict(self.components), "flags": list(self.flags)}


def bound_check(lhs: float, components: dict, theorem: str, lhs_digest: str | None = None,
                rhs_digest: str | None = None, lower_estimates: bool = False) -> BoundReport:
    """Compare a measured left-hand side with an evaluated bound."""
    if lhs_digest is not None and rhs_digest is not None and lhs_digest != rhs_digest:
        raise InvalidInputError(f"lhs and rhs come from different configurations "
                                f"({lhs_digest} vs {rhs_digest})")
    rhs = _total(components)
    flags = ("rhs possibly understated",) if lower_estimates else ()
    return BoundReport(theorem, float(lhs), rhs, bool(lhs <= rhs), dict(components), flags)
