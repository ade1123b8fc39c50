"""Cross-modal supervised contrastive objective and its analytic gradients.

Positives for an anchor are the opposite-modality samples with the same
real/fake label; anchors with no such positive are excluded from the
loss. The vanilla variant ignores modality and serves as the ablation
baseline. The joint objective adds the contrastive term to mean binary
cross-entropy with a configurable weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import EmbeddedSample, Label, Modality
from .errors import LengthMismatchError, ZeroNormRowError

DEFAULT_TAU = 0.07
DEFAULT_LAMBDA = 0.05

_NORM_FLOOR = 1e-12


class LossVariant(Enum):
    CROSS_MODAL = "cross_modal"
    VANILLA = "vanilla"


@dataclass(frozen=True)
class LossConfig:
    tau: float = DEFAULT_TAU
    variant: LossVariant = LossVariant.CROSS_MODAL

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")


def _as_binary_array(values, what: str) -> np.ndarray:
    """Accept Label/Modality sequences or 0/1 arrays; return int8 array."""
    if isinstance(values, np.ndarray):
        arr = values.astype(np.int8)
    else:
        converted = []
        for v in values:
            if isinstance(v, (Label, Modality)):
                converted.append(v.numeric)
            else:
                converted.append(int(v))
        arr = np.asarray(converted, dtype=np.int8)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{what} entries must be 0 or 1")
    return arr


@dataclass(frozen=True)
class BatchFeatures:
    """Pre-normalization features z with class labels y and modalities m."""

    z: np.ndarray
    y: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        z = np.ascontiguousarray(self.z, dtype=np.float64)
        y = _as_binary_array(self.y, "labels")
        m = _as_binary_array(self.m, "modalities")
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 2:
            raise ValueError("z must be (n, d) with n >= 1 and d >= 2")
        if not (len(y) == len(m) == z.shape[0]):
            raise LengthMismatchError(
                f"z has {z.shape[0]} rows but got {len(y)} labels, {len(m)} modalities"
            )
        if not np.all(np.isfinite(z)):
            raise ValueError("features must be finite")
        if np.any(np.all(z == 0.0, axis=1)):
            raise ValueError("no feature row may be identically zero")
        for arr in (z, y, m):
            arr.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @classmethod
    def from_samples(cls, samples: Sequence[EmbeddedSample]) -> "BatchFeatures":
        if not samples:
            raise ValueError("need at least one sample")
        return cls(
            z=np.stack([s.feature for s in samples]),
            y=[s.label for s in samples],
            m=[s.modality for s in samples],
        )


@dataclass(frozen=True)
class PositiveSets:
    """Per-anchor positive index lists and the valid-anchor set."""

    positives: tuple[np.ndarray, ...]
    valid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "valid", np.asarray(self.valid, dtype=np.int64))


def l2_normalize(z: np.ndarray) -> np.ndarray:
    """Divide each row by its Euclidean norm; rows must not be (near) zero."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    bad = np.flatnonzero(norms <= _NORM_FLOOR)
    if bad.size:
        raise ZeroNormRowError(int(bad[0]))
    return z / norms[:, None]


def positive_sets(y, m) -> PositiveSets:
    """Cross-modal positive sets: P(i) = {j != i : y_j == y_i and m_j != m_i}."""
    y = _as_binary_array(y, "labels")
    m = _as_binary_array(m, "modalities")
    if len(y) != len(m):
        raise LengthMismatchError(f"{len(y)} labels vs {len(m)} modalities")
    mask = _positive_mask(y, m, cross_modal=True)
    positives = tuple(np.flatnonzero(row) for row in mask)
    valid = np.flatnonzero([len(p) > 0 for p in positives])
    return PositiveSets(positives=positives, valid=valid)


def _positive_mask(y: np.ndarray, m: np.ndarray, cross_modal: bool) -> np.ndarray:
    same_label = y[:, None] == y[None, :]
    mask = same_label.copy()
    if cross_modal:
        mask &= m[:, None] != m[None, :]
    np.fill_diagonal(mask, False)
    return mask


@dataclass(frozen=True)
class ContrastiveResult:
    loss: float
    per_anchor: np.ndarray  # length n; zero for anchors outside the valid set
    valid: np.ndarray


def _contrastive(
    z: np.ndarray, y: np.ndarray, m: np.ndarray, tau: float, cross_modal: bool
) -> ContrastiveResult:
    zhat = l2_normalize(z)
    n = zhat.shape[0]
    mask = _positive_mask(y, m, cross_modal)
    pos_counts = mask.sum(axis=1)
    valid = np.flatnonzero(pos_counts > 0)
    per_anchor = np.zeros(n)
    if valid.size == 0:
        return ContrastiveResult(loss=0.0, per_anchor=per_anchor, valid=valid)
    sims = zhat @ zhat.T / tau
    logits = sims.copy()
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1)
    lse = row_max + np.log(np.exp(logits - row_max[:, None]).sum(axis=1))
    log_prob = sims - lse[:, None]
    for i in valid:
        per_anchor[i] = -log_prob[i, mask[i]].mean()
    loss = float(per_anchor[valid].mean())
    return ContrastiveResult(loss=loss, per_anchor=per_anchor, valid=valid)


def cm_supcon_loss(batch: BatchFeatures, cfg: LossConfig) -> ContrastiveResult:
    """Cross-modal supervised contrastive loss; 0 when no anchor is valid."""
    if cfg.variant is not LossVariant.CROSS_MODAL:
        raise ValueError("cm_supcon_loss requires the CROSS_MODAL variant")
    return _contrastive(batch.z, batch.y, batch.m, cfg.tau, cross_modal=True)


def vanilla_supcon_loss(batch: BatchFeatures, cfg: LossConfig) -> float:
    """Ablation variant: all same-label samples are positives, modality ignored."""
    if cfg.variant is not LossVariant.VANILLA:
        raise ValueError("vanilla_supcon_loss requires the VANILLA variant")
    return _contrastive(batch.z, batch.y, batch.m, cfg.tau, cross_modal=False).loss


def contrastive_loss(batch: BatchFeatures, cfg: LossConfig) -> float:
    """Dispatch on cfg.variant."""
    return _contrastive(
        batch.z, batch.y, batch.m, cfg.tau, cross_modal=cfg.variant is LossVariant.CROSS_MODAL
    ).loss


def contrastive_grad(batch: BatchFeatures, cfg: LossConfig) -> np.ndarray:
    """Gradient of the configured variant w.r.t. the pre-normalization z."""
    return _contrastive_grad(
        batch.z,
        batch.y,
        batch.m,
        cfg.tau,
        cross_modal=cfg.variant is LossVariant.CROSS_MODAL,
    )


def cm_supcon_grad(batch: BatchFeatures, cfg: LossConfig) -> np.ndarray:
    """Analytic gradient of cm_supcon_loss w.r.t. the pre-normalization z.

    Includes the chain rule through the row normalization; validated
    against central finite differences in the test suite.
    """
    if cfg.variant is not LossVariant.CROSS_MODAL:
        raise ValueError("cm_supcon_grad requires the CROSS_MODAL variant")
    return _contrastive_grad(batch.z, batch.y, batch.m, cfg.tau, cross_modal=True)


def _contrastive_grad(
    z: np.ndarray, y: np.ndarray, m: np.ndarray, tau: float, cross_modal: bool
) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    bad = np.flatnonzero(norms <= _NORM_FLOOR)
    if bad.size:
        raise ZeroNormRowError(int(bad[0]))
    zhat = z / norms[:, None]
    n = z.shape[0]
    mask = _positive_mask(y, m, cross_modal)
    pos_counts = mask.sum(axis=1)
    valid = np.flatnonzero(pos_counts > 0)
    if valid.size == 0:
        return np.zeros_like(z)
    sims = zhat @ zhat.T / tau
    logits = sims.copy()
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1)
    softmax = np.exp(logits - row_max[:, None])
    softmax /= softmax.sum(axis=1, keepdims=True)
    # dL/ds[i, j]: softmax minus the positive-indicator average, per valid anchor
    grad_s = np.zeros((n, n))
    inv_v = 1.0 / valid.size
    for i in valid:
        grad_s[i] = inv_v * (softmax[i] - mask[i] / pos_counts[i])
        grad_s[i, i] = 0.0
    grad_zhat = (grad_s + grad_s.T) @ zhat / tau
    # chain rule through row normalization
    inner = np.sum(grad_zhat * zhat, axis=1, keepdims=True)
    return (grad_zhat - inner * zhat) / norms[:, None]


@dataclass(frozen=True)
class JointLossResult:
    bce: float
    contrastive: float
    total: float


def binary_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean BCE of sigmoid(logit) vs 0/1 targets, in the stable logit form."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    per = np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    return float(per.mean())


def bce_grad(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """d(mean BCE)/d(logits) = (sigmoid(logits) - targets) / n."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    return (expit(logits) - targets) / logits.shape[0]


def joint_loss(
    logits: np.ndarray,
    targets,
    batch: BatchFeatures,
    lam: float,
    cfg: LossConfig,
) -> JointLossResult:
    """total = mean BCE + lam * contrastive term of the configured variant."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    logits = np.asarray(logits, dtype=np.float64)
    target_arr = _as_binary_array(targets, "targets")
    if logits.ndim != 1 or len(logits) != len(target_arr):
        raise LengthMismatchError(
            f"{len(logits)} logits vs {len(target_arr)} targets"
        )
    if len(logits) != batch.n:
        raise LengthMismatchError(f"{len(logits)} logits vs batch of {batch.n}")
    bce = binary_cross_entropy(logits, target_arr.astype(np.float64))
    cm = contrastive_loss(batch, cfg)
    total = bce + lam * cm
    return JointLossResult(bce=bce, contrastive=cm, total=total)
