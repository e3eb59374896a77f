"""Composite hypotheses h o g: per-modality encoders, a fusion operator and a head."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .exceptions import InvalidInputError
from .modal_data import (Dataset, ModalitySchema, ModalitySubset, MultiModalSample,
                         config_digest, to_masked_vector)


class FusionOp(str, Enum):
    CONCAT = "concat"
    SUM = "sum"
    MEAN = "mean"
    MAX = "max"


def fuse(latents: Sequence[np.ndarray], op: FusionOp | str) -> np.ndarray:
    """Combine per-modality latents, in schema order.

    Works on single vectors or on batches whose last axis is the latent axis.
    """
    op = FusionOp(op)
    if not latents:
        raise InvalidInputError("nothing to fuse")
    latents = [np.asarray(z, dtype=float) for z in latents]
    if op is FusionOp.CONCAT:
        return np.concatenate(latents, axis=-1)
    shapes = {z.shape for z in latents}
    if len(shapes) != 1:
        raise InvalidInputError(f"{op.value} fusion needs equal latent dims, got {sorted(shapes)}")
    stacked = np.stack(latents)
    if op is FusionOp.SUM:
        return stacked.sum(axis=0)
    if op is FusionOp.MEAN:
        return stacked.mean(axis=0)
    return stacked.max(axis=0)


def fuse_backward(latents: Sequence[np.ndarray], op: FusionOp, grad: np.ndarray) -> list[np.ndarray]:
    """Gradient of ``fuse`` w.r.t. each latent.

    At ties under max fusion the whole gradient goes to the first argmax.
    """
    if op is FusionOp.CONCAT:
        cuts = np.cumsum([z.shape[-1] for z in latents])[:-1]
        return np.split(grad, cuts, axis=-1)
    if op is FusionOp.SUM:
        return [grad for _ in latents]
    if op is FusionOp.MEAN:
        return [grad / len(latents) for _ in latents]
    winner = np.argmax(np.stack(latents), axis=0)
    return [np.where(winner == k, grad, 0.0) for k in range(len(latents))]


@dataclass(frozen=True)
class ModelSpec:
    """What to build before training.

    ``kind="linear"`` is the class x -> beta^T A^T x; ``kind="mlp"`` has one
    affine encoder per modality, a fusion operator and an affine head.
    """

    kind: str = "mlp"
    latent_dim: int = 10
    fusion: FusionOp = FusionOp.SUM
    activation: str = "identity"
    bias: bool = True

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise InvalidInputError(f"unknown model kind {self.kind!r}")
        if self.activation not in ("identity", "relu"):
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        if self.latent_dim < 1:
            raise InvalidInputError("latent_dim must be positive")
        object.__setattr__(self, "fusion", FusionOp(self.fusion))


@dataclass(frozen=True, eq=False)
class LinearComposite:
    """g(x) = A^T x, h(z) = beta^T z, with optional head-norm cap ``C_b``."""

    schema: ModalitySchema
    A: np.ndarray
    beta: np.ndarray
    C_b: float = np.inf
    require_orthonormal: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if A.shape != (self.schema.d, beta.shape[0]):
            raise InvalidInputError(f"A must be {self.schema.d}x{beta.shape[0]}, got {A.shape}")
        if np.linalg.norm(beta) > self.C_b * (1 + 1e-12):
            raise InvalidInputError(f"||beta||={np.linalg.norm(beta):.6g} exceeds C_b={self.C_b}")
        if self.require_orthonormal and not np.allclose(A.T @ A, np.eye(A.shape[1]), atol=1e-8, rtol=0):
            raise InvalidInputError("A must have orthonormal columns")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "beta", beta)

    @property
    def latent_dim(self) -> int:
        return self.A.shape[1]

    @property
    def composite_vector(self) -> np.ndarray:
        return self.A @ self.beta

    @property
    def head_norm(self) -> float:
        return float(np.linalg.norm(self.beta))

    def effective_matrix(self, subset: ModalitySubset) -> np.ndarray:
        """P_M A: the encoder as a matrix acting on unmasked inputs."""
        return self.A * subset.coord_mask()[:, None]

    def latents(self, X_masked: np.ndarray) -> np.ndarray:
        return X_masked @ self.A

    def head(self, Z: np.ndarray) -> np.ndarray:
        return Z @ self.beta

    def with_head(self, beta: np.ndarray, intercept: float = 0.0) -> "LinearComposite":
        if intercept:
            raise InvalidInputError("the linear head has no intercept")
        return LinearComposite(self.schema, self.A, beta, self.C_b)


@dataclass(frozen=True, eq=False)
class MlpComposite:
    """Per-modality affine encoders, a fusion operator and an affine head."""

    schema: ModalitySchema
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...] | None
    head_weight: np.ndarray
    head_bias: float = 0.0
    fusion: FusionOp = FusionOp.SUM
    activation: str = "identity"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        # own copies, so later edits to caller arrays cannot leak into the model
        weights = tuple(np.atleast_2d(np.array(w, dtype=float)) for w in self.weights)
        if len(weights) != self.schema.K:
            raise InvalidInputError(f"need {self.schema.K} encoders, got {len(weights)}")
        for w, dk in zip(weights, self.schema.dims):
            if w.shape[1] != dk:
                raise InvalidInputError(f"encoder input dim {w.shape[1]} != modality dim {dk}")
        biases = None if self.biases is None else tuple(
            np.array(b, dtype=float).reshape(-1) for b in self.biases)
        fusion = FusionOp(self.fusion)
        head = np.array(self.head_weight, dtype=float).reshape(-1)
        hidden = [w.shape[0] for w in weights]
        fused_dim = sum(hidden) if fusion is FusionOp.CONCAT else hidden[0]
        if fusion is not FusionOp.CONCAT and len(set(hidden)) != 1:
            raise InvalidInputError(f"{fusion.value} fusion needs equal latent dims")
        if head.shape[0] != fused_dim:
            raise InvalidInputError(f"head expects {head.shape[0]} inputs, fusion gives {fused_dim}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "fusion", fusion)
        object.__setattr__(self, "head_weight", head)
        object.__setattr__(self, "head_bias", float(self.head_bias))

    @property
    def latent_dim(self) -> int:
        return self.head_weight.shape[0]

    @classmethod
    def initialize(cls, schema: ModalitySchema, spec: ModelSpec, rng: np.random.Generator) -> "MlpComposite":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
        weights, biases = [], []
        for dk in schema.dims:
            bound = 1.0 / np.sqrt(dk)
            weights.append(rng.uniform(-bound, bound, (spec.latent_dim, dk)))
            biases.append(rng.uniform(-bound, bound, spec.latent_dim))
        fused = spec.latent_dim * (schema.K if spec.fusion is FusionOp.CONCAT else 1)
        bound = 1.0 / np.sqrt(fused)
        head = rng.uniform(-bound, bound, fused)
        head_bias = rng.uniform(-bound, bound) if spec.bias else 0.0
        return cls(schema, weights, biases if spec.bias else None, head, head_bias,
                   spec.fusion, spec.activation, {"init": "uniform(+-1/sqrt(fan_in))"})

    def _act(self, H: np.ndarray) -> np.ndarray:
        return np.maximum(H, 0.0) if self.activation == "relu" else H

    def pre_activations(self, X_masked: np.ndarray) -> list[np.ndarray]:
        out = []
        for k, w in enumerate(self.weights):
            h = X_masked[..., self.schema.block_slice(k)] @ w.T
            if self.biases is not None:
                h = h + self.biases[k]
            out.append(h)
        return out

    def latents(self, X_masked: np.ndarray) -> np.ndarray:
        return fuse([self._act(h) for h in self.pre_activations(X_masked)], self.fusion)

    def head(self, Z: np.ndarray) -> np.ndarray:
        return Z @ self.head_weight + self.head_bias

    def with_head(self, weight: np.ndarray, intercept: float = 0.0) -> "MlpComposite":
        return MlpComposite(self.schema, self.weights, self.biases, weight, intercept,
                            self.fusion, self.activation, dict(self.metadata))

    # flat parameter view, used by serialization and the ascent oracle
    def parameters(self) -> list[np.ndarray]:
        params = list(self.weights)
        if self.biases is not None:
            params += list(self.biases)
        return params + [self.head_weight, np.array([self.head_bias])]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "MlpComposite":
        K = self.schema.K
        weights = params[:K]
        biases = params[K:2 * K] if self.biases is not None else None
        head, head_bias = params[-2], float(np.asarray(params[-1]).reshape(-1)[0])
        return MlpComposite(self.schema, weights, biases, head, head_bias, self.fusion,
                            self.activation, dict(self.metadata))


Model = LinearComposite | MlpComposite


def output_gradients(model: MlpComposite, X_masked: np.ndarray, dout: np.ndarray):
    """Outputs of ``model`` on ``X_masked`` and the gradient of ``sum_i dout_i f(x_i)``
    with respect to every entry of ``model.parameters()``."""
    pre = model.pre_activations(X_masked)
    relu = model.activation == "relu"
    acts = [np.maximum(h, 0.0) for h in pre] if relu else pre
    Z = fuse(acts, model.fusion)
    out = Z @ model.head_weight + model.head_bias
    dZ = np.outer(dout, model.head_weight)
    g_w, g_b = [], []
    for k, (h, da) in enumerate(zip(pre, fuse_backward(acts, model.fusion, dZ))):
        dh = da * (h > 0) if relu else da
        g_w.append(dh.T @ X_masked[:, model.schema.block_slice(k)])
        g_b.append(dh.sum(axis=0))
    grads = g_w + (g_b if model.biases is not None else [])
    return out, grads + [Z.T @ dout, np.array([dout.sum()])]


def encode(model: Model, sample: MultiModalSample, subset: ModalitySubset) -> np.ndarray:
    """g_M(x) = g'(p_M(x)) for one sample."""
    return model.latents(to_masked_vector(sample, subset))


def predict(model: Model, sample: MultiModalSample, subset: ModalitySubset) -> float:
    return float(model.head(encode(model, sample, subset)))


def encode_dataset(model: Model, dataset: Dataset, subset: ModalitySubset) -> np.ndarray:
    return model.latents(dataset.masked_X(subset))


def predict_dataset(model: Model, dataset: Dataset, subset: ModalitySubset) -> np.ndarray:
    return model.head(encode_dataset(model, dataset, subset))


def model_to_dict(model: Model, provenance: dict | None = None) -> dict:
    schema = list(model.schema.dims)
    if isinstance(model, LinearComposite):
        out = {"kind": "linear", "dims": schema, "A": model.A.tolist(),
               "beta": model.beta.tolist(),
               "C_b": None if np.isinf(model.C_b) else model.C_b}
    else:
        out = {"kind": "mlp", "dims": schema, "fusion": model.fusion.value,
               "activation": model.activation, "has_bias": model.biases is not None,
               "shapes": [list(p.shape) for p in model.parameters()],
               "parameters": [p.ravel().tolist() for p in model.parameters()]}
    out["provenance"] = dict(provenance or {})
    out["provenance"]["digest"] = config_digest({k: v for k, v in out.items() if k != "provenance"})
    return out


def model_from_dict(data: dict) -> Model:
    schema = ModalitySchema(tuple(data["dims"]))
    if data["kind"] == "linear":
        C_b = np.inf if data.get("C_b") is None else data["C_b"]
        return LinearComposite(schema, np.array(data["A"]), np.array(data["beta"]), C_b)
    params = [np.array(p).reshape(s) for p, s in zip(data["parameters"], data["shapes"])]
    K = schema.K
    has_bias = data["has_bias"]
    return MlpComposite(schema, params[:K], params[K:2 * K] if has_bias else None,
                        params[-2], float(params[-1][0]), data["fusion"], data["activation"])


def save_model(model: Model, path, provenance: dict | None = None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, provenance), fh, indent=1)


def load_model(path) -> Model:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
