"""Latent representation quality: closed form for linear encoders and a finetuning estimate.

For the linear data model ``y = v*^T x + eps`` with ``v* = A* beta*`` and
input covariance ``Sigma``, the best head on top of an encoder ``A`` leaves an
excess risk equal to the Schur complement of the joint covariance of
``(A^T x, A*^T x)`` evaluated at ``beta*``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .composite import Model, predict_dataset
from .exceptions import InvalidInputError, SingularityError
from .modal_data import Dataset, ModalitySubset
from .training import PINV_RCOND, finetune_head

log = logging.getLogger(__name__)


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    return a


@dataclass(frozen=True, eq=False)
class CovarianceBlocks:
    g11: np.ndarray
    g12: np.ndarray
    g21: np.ndarray
    g22: np.ndarray

    def assembled(self) -> np.ndarray:
        return np.block([[self.g11, self.g12], [self.g21, self.g22]])


def covariance_blocks(A, A_prime, Sigma) -> CovarianceBlocks:
    """Second-moment blocks of (A^T x, A'^T x) for x with covariance ``Sigma``."""
    A, Ap, S = _as_matrix(A), _as_matrix(A_prime), _as_matrix(Sigma)
    if S.shape[0] != S.shape[1] or A.shape[0] != S.shape[0] or Ap.shape[0] != S.shape[0]:
        raise InvalidInputError(f"non-conformable shapes A{A.shape}, A'{Ap.shape}, Sigma{S.shape}")
    if not np.allclose(S, S.T, rtol=0, atol=1e-10 * max(1.0, np.abs(S).max())):
        raise InvalidInputError("Sigma must be symmetric")
    SA, SAp = S @ A, S @ Ap
    g11 = A.T @ SA
    g12 = A.T @ SAp
    g22 = Ap.T @ SAp
    # exact symmetry of the diagonal blocks and of g21 = g12^T
    return CovarianceBlocks((g11 + g11.T) / 2, g12, g12.T.copy(), (g22 + g22.T) / 2)


def _pinv(g11: np.ndarray, allow_pinv: bool) -> np.ndarray:
    s = np.linalg.svd(g11, compute_uv=False)
    rank = int(np.sum(s > PINV_RCOND * s.max())) if s.size and s.max() > 0 else 0
    if rank < g11.shape[0] and not allow_pinv:
        raise SingularityError("Gamma_11 is numerically singular", rank, g11.shape[0])
    return np.linalg.pinv(g11, rcond=PINV_RCOND, hermitian=True)


def schur_complement(blocks: CovarianceBlocks, allow_pinv: bool = True) -> np.ndarray:
    """Gamma_22 - Gamma_21 Gamma_11^+ Gamma_12.

    Rank-deficient Gamma_11 (masked encoders) falls back to the pseudo-inverse,
    i.e. the minimum-norm least-squares head; pass ``allow_pinv=False`` to
    raise instead.
    """
    inv = _pinv(blocks.g11, allow_pinv)
    sch = blocks.g22 - blocks.g21 @ inv @ blocks.g12
    return (sch + sch.T) / 2


def optimal_head(A, A_star, beta_star, Sigma, allow_pinv: bool = True) -> np.ndarray:
    """Population-risk minimising head for the frozen encoder ``A``."""
    blocks = covariance_blocks(A, A_star, Sigma)
    return _pinv(blocks.g11, allow_pinv) @ blocks.g12 @ np.asarray(beta_star, dtype=float).reshape(-1)


@dataclass
class EtaEstimate:
    value: float
    method: str
    standard_error: float | None = None
    oracle_risk: float | None = None
    centered: bool = True
    n_eval: int | None = None
    warnings: tuple[str, ...] = ()
    model: Model | None = field(default=None, repr=False)

    @property
    def label(self) -> str:
        return "eta" if self.centered else "uncentered risk"

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "standard_error": self.standard_error,
                "oracle_risk": self.oracle_risk, "centered": self.centered,
                "label": self.label, "n_eval": self.n_eval, "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, data: dict) -> "EtaEstimate":
        return cls(data["value"], data["method"], data.get("standard_error"),
                   data.get("oracle_risk"), data.get("centered", True), data.get("n_eval"),
                   tuple(data.get("warnings", ())))


def eta_closed_form(A, A_star, beta_star, Sigma, allow_pinv: bool = True) -> EtaEstimate:
    """beta*^T Gamma_sch(A, A*) beta*, the excess risk of the best head on ``A``."""
    beta_star = np.asarray(beta_star, dtype=float).reshape(-1)
    sch = schur_complement(covariance_blocks(A, A_star, Sigma), allow_pinv)
    return EtaEstimate(float(beta_star @ sch @ beta_star), "closed_form")


def eta_empirical(encoder: Model, subset: ModalitySubset, eval_dataset: Dataset,
                  head_fit_dataset: Dataset, oracle_risk: float | None = None) -> EtaEstimate:
    """Freeze ``encoder``, refit its head, and measure held-out excess risk.

    Without a known ``oracle_risk`` the result is the raw held-out risk and is
    labelled as uncentered.
    """
    warnings = []
    if eval_dataset.overlaps(head_fit_dataset):
        warnings.append("head-fit and evaluation datasets share samples")
        log.warning("eta_empirical: %s", warnings[-1])
    fitted = finetune_head(head_fit_dataset, encoder, subset).model
    sq = (predict_dataset(fitted, eval_dataset, subset) - eval_dataset.y) ** 2
    n = len(sq)
    se = float(np.std(sq, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    centering = 0.0 if oracle_risk is None else float(oracle_risk)
    return EtaEstimate(float(np.mean(sq)) - centering, "empirical", se, oracle_risk,
                       oracle_risk is not None, n, tuple(warnings), fitted)


def gamma(eta_M: EtaEstimate, eta_N: EtaEstimate) -> float:
    """eta(g_M) - eta(g_N); both estimates must share their centering."""
    if eta_M.centered != eta_N.centered:
        raise InvalidInputError("cannot compare a centered eta with an uncentered risk")
    if (eta_M.oracle_risk is not None and eta_N.oracle_risk is not None
            and not np.isclose(eta_M.oracle_risk, eta_N.oracle_risk, rtol=1e-12, atol=1e-12)):
        raise InvalidInputError(f"mismatched oracle centering: {eta_M.oracle_risk} vs {eta_N.oracle_risk}")
    return eta_M.value - eta_N.value
