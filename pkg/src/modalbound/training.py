"""Empirical risk minimisation over a modality subset."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .composite import (FusionOp, LinearComposite, MlpComposite, Model, ModelSpec,
                        encode_dataset, output_gradients, predict_dataset)
from .exceptions import InvalidConfigError, InvalidInputError, TrainingDivergedError
from .modal_data import Dataset, ModalitySubset

log = logging.getLogger(__name__)

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class TrainConfig:
    """Optimiser settings; defaults are the synthetic-data settings (SGD, lr 0.01,
    momentum 0.9, batch 10000, 10000 steps)."""

    subset: ModalitySubset
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 10000
    steps: int = 10000
    seed: int = 0
    checkpoint_every: int = 100
    method: str = "sgd"
    loss: str = "squared"

    def __post_init__(self):
        if self.lr <= 0 or self.steps < 1 or self.batch_size < 1 or self.checkpoint_every < 1:
            raise InvalidConfigError("lr, steps, batch_size and checkpoint_every must be positive")
        if not 0 <= self.momentum < 1:
            raise InvalidConfigError("momentum must lie in [0, 1)")
        if self.method not in ("sgd", "closed_form"):
            raise InvalidConfigError(f"unknown method {self.method!r}")
        if self.loss != "squared":
            raise InvalidConfigError("only the squared loss is supported")


@dataclass
class ERMResult:
    model: Model
    empirical_risk: float
    trajectory: list[tuple[int, float]] = field(default_factory=list)
    centered_gap: float | None = None
    subset: ModalitySubset | None = None
    stages: list["ERMResult"] = field(default_factory=list)

    @property
    def head_norm(self) -> float:
        if isinstance(self.model, LinearComposite):
            return self.model.head_norm
        return float(np.linalg.norm(self.model.head_weight))

    def summary(self) -> dict:
        return {"empirical_risk": self.empirical_risk, "centered_gap": self.centered_gap,
                "head_norm": self.head_norm,
                "subset": None if self.subset is None else self.subset.label,
                "checkpoints": len(self.trajectory)}


def empirical_risk(model: Model, dataset: Dataset, subset: ModalitySubset) -> float:
    """Mean squared error of ``model`` restricted to ``subset``."""
    if len(dataset) == 0:
        raise InvalidInputError("empirical risk of an empty dataset")
    r = predict_dataset(model, dataset, subset) - dataset.y
    return float(np.mean(r * r))


def _oracle_gap(risk: float, dataset: Dataset, oracle: Model | None) -> float | None:
    if oracle is None:
        return None
    full = ModalitySubset.full(dataset.schema)
    return risk - empirical_risk(oracle, dataset, full)


def _require_subset(subset: ModalitySubset):
    if subset.is_empty:
        raise InvalidInputError("training needs at least one modality")


def least_squares(Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares; singular values below 1e-10 x max are dropped."""
    coef, *_ = np.linalg.lstsq(Z, y, rcond=PINV_RCOND)
    return coef


def orthonormal_completion(v: np.ndarray, n: int) -> np.ndarray:
    """d x n matrix with orthonormal columns whose first column is v / ||v||."""
    d = v.shape[0]
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.eye(d)[:, :n]
    q, _ = np.linalg.qr(v.reshape(-1, 1), mode="complete")
    q = q[:, :n].copy()
    if q[:, 0] @ v < 0:
        q[:, 0] *= -1
    return q


def erm_linear_closed_form(dataset: Dataset, subset: ModalitySubset, n: int | None = None,
                           oracle: Model | None = None) -> ERMResult:
    """Exact ERM over {x -> beta^T A^T p_M(x)}.

    Fits the composite vector v = A beta by least squares on the subset's
    coordinates, then factors it as A = [v/||v||, completion], beta = (||v||, 0, ...).
    """
    _require_subset(subset)
    if len(dataset) < 1:
        raise InvalidInputError("need at least one sample")
    schema = dataset.schema
    n = schema.d if n is None else n
    if not 1 <= n <= schema.d:
        raise InvalidInputError(f"latent dim must be in [1, {schema.d}], got {n}")
    cols = subset.coord_mask()
    v = np.zeros(schema.d)
    v[cols] = least_squares(dataset.masked_X(subset)[:, cols], dataset.y)
    A = orthonormal_completion(v, n)
    beta = np.zeros(n)
    beta[0] = np.linalg.norm(v)
    model = LinearComposite(schema, A, beta)
    risk = empirical_risk(model, dataset, subset)
    return ERMResult(model, risk, [(0, risk)], _oracle_gap(risk, dataset, oracle), subset)


def _as_mlp(model: LinearComposite) -> MlpComposite:
    schema = model.schema
    weights = [model.A[schema.block_slice(k)].T for k in range(schema.K)]
    return MlpComposite(schema, weights, None, model.beta, 0.0, FusionOp.SUM, "identity")


def _as_linear(model: MlpComposite) -> LinearComposite:
    return LinearComposite(model.schema, np.vstack([w.T for w in model.weights]), model.head_weight)


def _init_model(schema, spec: ModelSpec, seed: int) -> MlpComposite:
    rng = stream(seed, "init")
    if spec.kind == "linear":
        d, n = schema.d, spec.latent_dim
        bound = 1.0 / np.sqrt(d)
        A = rng.uniform(-bound, bound, (d, n))
        beta = rng.uniform(-1 / np.sqrt(n), 1 / np.sqrt(n), n)
        return _as_mlp(LinearComposite(schema, A, beta))
    return MlpComposite.initialize(schema, spec, rng)


def _loss_and_grads(model: MlpComposite, X: np.ndarray, y: np.ndarray):
    # overflow shows up as a non-finite loss, which the caller turns into an error
    with np.errstate(over="ignore", invalid="ignore"):
        out = model.head(model.latents(X))
        resid = out - y
        _, grads = output_gradients(model, X, (2.0 / len(y)) * resid)
        return float(np.mean(resid * resid)), grads


def _batches(m: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches: without replacement, reshuffled each epoch."""
    if batch_size >= m:
        full = slice(None)
        while True:
            yield full
    while True:
        perm = rng.permutation(m)
        for start in range(0, m, batch_size):
            yield perm[start:start + batch_size]


def _sgd(model: MlpComposite, X: np.ndarray, y: np.ndarray, config: TrainConfig,
         freeze_encoders: bool = False):
    params = [p.copy() for p in model.parameters()]
    velocity = [np.zeros_like(p) for p in params]
    trainable = list(range(len(params) - 2 if freeze_encoders else 0, len(params)))
    if model.biases is None:
        trainable.remove(len(params) - 1)  # bias-free models have no head intercept
    batches = _batches(len(y), config.batch_size, stream(config.seed, "shuffle"))

    def full_risk(m):
        with np.errstate(over="ignore", invalid="ignore"):
            r = m.head(m.latents(X)) - y
            return float(np.mean(r * r))

    def snapshot():
        return model.with_parameters([p.copy() for p in params])

    model = model.with_parameters(params)
    trajectory = [(0, full_risk(model))]
    last_good = (trajectory[0][1], snapshot())
    for step in range(1, config.steps + 1):
        idx = next(batches)
        loss, grads = _loss_and_grads(model, X[idx], y[idx])
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, *last_good)
        for i in trainable:
            velocity[i] *= config.momentum
            velocity[i] += grads[i]
            params[i] -= config.lr * velocity[i]
        model = model.with_parameters(params)
        if step % config.checkpoint_every == 0 or step == config.steps:
            risk = full_risk(model)
            if not np.isfinite(risk):
                raise TrainingDivergedError(step, *last_good)
            trajectory.append((step, risk))
            last_good = (risk, snapshot())
    return last_good[1], trajectory


def erm_train(dataset: Dataset, model_spec: ModelSpec, config: TrainConfig,
              oracle: Model | None = None) -> ERMResult:
    """Minibatch SGD with momentum on the squared loss over masked inputs.

    With ``config.method == "closed_form"`` a linear spec is solved exactly
    instead (see :func:`erm_linear_closed_form`).
    """
    subset = config.subset
    _require_subset(subset)
    if config.method == "closed_form":
        if model_spec.kind != "linear":
            raise InvalidConfigError("closed-form ERM exists only for the linear class")
        return erm_linear_closed_form(dataset, subset, model_spec.latent_dim, oracle)
    X = dataset.masked_X(subset)
    model = _init_model(dataset.schema, model_spec, config.seed)
    model, trajectory = _sgd(model, X, dataset.y, config)
    if model_spec.kind == "linear":
        model = _as_linear(model)
    risk = trajectory[-1][1]
    log.debug("erm_train %s: final risk %.6g", subset.label, risk)
    return ERMResult(model, risk, trajectory, _oracle_gap(risk, dataset, oracle), subset)


def finetune_head(dataset: Dataset, frozen_encoder: Model, subset: ModalitySubset,
                  config: TrainConfig | None = None, oracle: Model | None = None) -> ERMResult:
    """Refit only the head on top of a frozen encoder.

    Heads are linear (affine for MLP composites), so this is an exact least
    squares problem on the latent features; ``config`` is accepted for
    interface symmetry and only its seed is recorded.
    """
    Z = encode_dataset(frozen_encoder, dataset, subset)
    if isinstance(frozen_encoder, MlpComposite):
        coef = least_squares(np.column_stack([Z, np.ones(len(Z))]), dataset.y)
        model = frozen_encoder.with_head(coef[:-1], coef[-1])
    else:
        model = frozen_encoder.with_head(least_squares(Z, dataset.y))
    risk = empirical_risk(model, dataset, subset)
    return ERMResult(model, risk, [(0, risk)], _oracle_gap(risk, dataset, oracle), subset)


def two_stage_train(dataset: Dataset, subset: ModalitySubset, model_spec: ModelSpec,
                    config: TrainConfig, oracle: Model | None = None) -> ERMResult:
    """Train one uni-modal composite per modality, then fit a head over their fused,
    frozen encoders."""
    _require_subset(subset)
    schema = dataset.schema
    stages = []
    for k in subset.indices:
        single = ModalitySubset.of(schema, [k])
        stage_cfg = TrainConfig(**{**config.__dict__, "subset": single})
        stages.append(erm_train(dataset, model_spec, stage_cfg))

    if model_spec.kind == "linear":
        blocks = [r.model.effective_matrix(r.subset) for r in stages]
        fused = LinearComposite(schema, np.hstack(blocks), np.zeros(sum(b.shape[1] for b in blocks)))
    else:
        h = model_spec.latent_dim
        weights = [np.zeros((h, dk)) for dk in schema.dims]
        biases = [np.zeros(h) for _ in schema.dims] if model_spec.bias else None
        for r, k in zip(stages, subset.indices):
            weights[k] = r.model.weights[k]
            if biases is not None:
                biases[k] = r.model.biases[k]
        head_dim = h * schema.K if model_spec.fusion is FusionOp.CONCAT else h
        fused = MlpComposite(schema, weights, biases, np.zeros(head_dim), 0.0,
                             model_spec.fusion, model_spec.activation)
    result = finetune_head(dataset, fused, subset, oracle=oracle)
    result.stages = stages
    return result
