"""Desk-scale differentiable model, optimizer, batch sampling, training loop.

The model is a one-hidden-layer MLP with a projection head for the
contrastive feature and a linear classifier head; gradients are analytic
and finite-difference checked. The synthetic generator builds a
cross-modal dataset with a designed shortcut: a coordinate that predicts
the class for images but is pure noise for video frames, so image-only
training fails on the video domain.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .cmsupcon import (
    DEFAULT_LAMBDA,
    DEFAULT_TAU,
    BatchFeatures,
    LossConfig,
    LossVariant,
    bce_grad,
    binary_cross_entropy,
    contrastive_grad,
    contrastive_loss,
)
from .core import Label, Modality
from .errors import (
    BothPoolsEmptyError,
    DimMismatchError,
    InvalidSpecError,
    NonFiniteLossError,
    ShapeMismatchError,
)

CHECKPOINT_FORMAT = "xmodal-checkpoint"
CHECKPOINT_VERSION = 1

PARAM_NAMES = ("w1", "b1", "wp", "wc", "bc")


@dataclass(frozen=True)
class ToyModel:
    """relu MLP: h = relu(x W1 + b1); z = h Wp (projection); logit = h wc + bc."""

    w1: np.ndarray
    b1: np.ndarray
    wp: np.ndarray
    wc: np.ndarray
    bc: np.ndarray  # shape (1,)

    def __post_init__(self):
        arrays = {}
        for name in PARAM_NAMES:
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter {name} contains non-finite values")
            arrays[name] = arr
        w1, b1, wp, wc, bc = (arrays[n] for n in PARAM_NAMES)
        if w1.ndim != 2 or b1.shape != (w1.shape[1],):
            raise ShapeMismatchError("w1 must be (d_in, d_h) with b1 (d_h,)")
        if wp.ndim != 2 or wp.shape[0] != w1.shape[1]:
            raise ShapeMismatchError("wp must be (d_h, d_z)")
        if wc.shape != (w1.shape[1],) or bc.shape != (1,):
            raise ShapeMismatchError("wc must be (d_h,) and bc (1,)")
        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]

    @property
    def d_h(self) -> int:
        return self.w1.shape[1]

    @property
    def d_z(self) -> int:
        return self.wp.shape[1]

    @classmethod
    def init(
        cls, d_in: int, d_h: int, d_z: int, rng: np.random.Generator
    ) -> "ToyModel":
        return cls(
            w1=rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, d_h)),
            b1=np.zeros(d_h),
            wp=rng.normal(0.0, 1.0 / np.sqrt(d_h), size=(d_h, d_z)),
            wc=rng.normal(0.0, 1.0 / np.sqrt(d_h), size=d_h),
            bc=np.zeros(1),
        )

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def from_params(cls, params: dict[str, np.ndarray]) -> "ToyModel":
        return cls(**{name: params[name] for name in PARAM_NAMES})


@dataclass(frozen=True)
class ForwardResult:
    logits: np.ndarray
    z: np.ndarray
    h: np.ndarray
    pre_activation: np.ndarray


def forward(
    model: ToyModel, x: np.ndarray, feature_layer: str = "projection"
) -> ForwardResult:
    """Batched forward pass; z is the contrastive feature (pre-normalization)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d_in:
        raise DimMismatchError(
            f"expected input (n, {model.d_in}), got {x.shape}"
        )
    pre = x @ model.w1 + model.b1
    h = np.maximum(pre, 0.0)
    if feature_layer == "projection":
        z = h @ model.wp
    elif feature_layer == "hidden":
        z = h
    else:
        raise ValueError(f"unknown feature_layer {feature_layer!r}")
    logits = h @ model.wc + model.bc[0]
    return ForwardResult(logits=logits, z=z, h=h, pre_activation=pre)


_LIVE_NORM = 1e-12  # rows below this are dead (all-ReLU-off) and sit out the CM term


def _live_rows(z: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.linalg.norm(z, axis=1) > _LIVE_NORM)


def contrastive_term(
    z: np.ndarray, y: np.ndarray, m: np.ndarray, tau: float, variant: LossVariant
) -> float:
    """Contrastive loss over the live-feature subbatch (dead rows excluded)."""
    live = _live_rows(z)
    if live.size < 2:
        return 0.0
    batch = BatchFeatures(z[live], np.asarray(y)[live], np.asarray(m)[live])
    return contrastive_loss(batch, LossConfig(tau=tau, variant=variant))


def backward(
    model: ToyModel,
    x: np.ndarray,
    targets: np.ndarray,
    lam: float,
    tau: float,
    modalities: np.ndarray,
    feature_layer: str = "projection",
    variant: LossVariant = LossVariant.CROSS_MODAL,
) -> dict[str, np.ndarray]:
    """Analytic gradients of the joint objective w.r.t. every parameter.

    The contrastive path is skipped entirely when lam == 0 so a pure-BCE
    run is bit-identical to setting lam to zero. Samples whose feature row
    is dead (zero norm, all ReLUs off) sit out the contrastive term.
    """
    out = forward(model, x, feature_layer)
    targets = np.asarray(targets, dtype=np.float64)
    modalities = np.asarray(modalities)
    g_logit = bce_grad(out.logits, targets)
    grads = {name: np.zeros_like(getattr(model, name)) for name in PARAM_NAMES}
    g_h = g_logit[:, None] * model.wc[None, :]
    grads["wc"] = out.h.T @ g_logit
    grads["bc"] = np.array([g_logit.sum()])
    if lam > 0:
        live = _live_rows(out.z)
        if live.size >= 2:
            batch = BatchFeatures(
                out.z[live], targets[live].astype(np.int8), modalities[live]
            )
            g_z = np.zeros_like(out.z)
            g_z[live] = lam * contrastive_grad(
                batch, LossConfig(tau=tau, variant=variant)
            )
            if feature_layer == "projection":
                grads["wp"] = out.h.T @ g_z
                g_h = g_h + g_z @ model.wp.T
            else:
                g_h = g_h + g_z
    g_pre = g_h * (out.pre_activation > 0)
    grads["w1"] = np.asarray(x, dtype=np.float64).T @ g_pre
    grads["b1"] = g_pre.sum(axis=0)
    return grads


@dataclass(frozen=True)
class OptimState:
    """AdamW accumulator state: bias-corrected moments, decoupled decay."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")

    @classmethod
    def init(
        cls,
        params: dict[str, np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> "OptimState":
        zeros = {k: np.zeros_like(p) for k, p in params.items()}
        return cls(
            m=zeros,
            v={k: np.zeros_like(p) for k, p in params.items()},
            step=0,
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            weight_decay=weight_decay,
        )


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimState,
) -> tuple[dict[str, np.ndarray], OptimState]:
    """One AdamW update. Pure: returns new parameter and state dicts."""
    if set(params) != set(grads):
        raise ShapeMismatchError("params and grads must share keys")
    step = state.step + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    bc1 = 1.0 - state.beta1**step
    bc2 = 1.0 - state.beta2**step
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeMismatchError(
                f"{key}: gradient shape {g.shape} != parameter shape {p.shape}"
            )
        m = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[key] + (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        updated = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        if state.weight_decay:
            updated = updated - state.lr * state.weight_decay * p
        new_params[key] = updated
        new_m[key] = m
        new_v[key] = v
    return new_params, replace(state, m=new_m, v=new_v, step=step)


@dataclass(frozen=True)
class MixPolicy:
    """How mixed-modality batches are assembled."""

    video_fraction: float = 0.5
    guarantee_both: bool = True

    def __post_init__(self):
        if not 0.0 <= self.video_fraction <= 1.0:
            raise ValueError("video_fraction must lie in [0, 1]")


def mixed_batch_sampler(
    image_pool: np.ndarray,
    video_pool: np.ndarray,
    batch_size: int,
    policy: MixPolicy,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """One epoch of index batches covering both pools without replacement.

    Each slot draws its modality Bernoulli(video_fraction); with
    guarantee_both, every full batch contains at least one sample of each
    modality while both pools still have samples left.
    """
    image_pool = np.asarray(image_pool, dtype=np.int64)
    video_pool = np.asarray(video_pool, dtype=np.int64)
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    if image_pool.size == 0 and video_pool.size == 0:
        raise BothPoolsEmptyError("need at least one non-empty pool")
    if image_pool.size == 0 or video_pool.size == 0:
        missing = "video" if video_pool.size == 0 else "image"
        warnings.warn(
            f"{missing} pool is empty: batches are single-modality and the "
            "cross-modal contrastive term will be inert",
            stacklevel=2,
        )
    img_queue = list(rng.permutation(image_pool))
    vid_queue = list(rng.permutation(video_pool))
    batches: list[np.ndarray] = []
    while img_queue or vid_queue:
        take = min(batch_size, len(img_queue) + len(vid_queue))
        batch: list[int] = []
        if policy.guarantee_both and img_queue and vid_queue and take >= 2:
            batch.append(int(img_queue.pop()))
            batch.append(int(vid_queue.pop()))
        while len(batch) < take:
            want_video = rng.random() < policy.video_fraction
            queue = vid_queue if want_video else img_queue
            if not queue:
                queue = img_queue if want_video else vid_queue
            batch.append(int(queue.pop()))
        batches.append(np.asarray(batch, dtype=np.int64))
    return batches


@dataclass(frozen=True)
class FeatureDataset:
    """Feature-level dataset: rows x with 0/1 labels y and modalities m."""

    x: np.ndarray
    y: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int8)
        m = np.ascontiguousarray(self.m, dtype=np.int8)
        if x.ndim != 2:
            raise InvalidSpecError("x must be a 2-d array")
        if not (x.shape[0] == len(y) == len(m)):
            raise InvalidSpecError("x, y, m must agree in length")
        for arr in (x, y, m):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "m", m)

    def __len__(self) -> int:
        return self.x.shape[0]

    def restrict_modality(self, modality: Modality) -> "FeatureDataset":
        keep = self.m == modality.numeric
        if not keep.any():
            raise InvalidSpecError(f"no {modality.value} samples to restrict to")
        return FeatureDataset(self.x[keep], self.y[keep], self.m[keep])


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    The toy-scale optimizer defaults (lr 1e-3) are deliberately hotter than
    a fine-tuning setup for a large backbone would use. feature_layer
    selects where the contrastive feature comes from: 'hidden' binds the
    alignment to the representation the classifier reads, which is what
    makes the cross-modal term effective at this scale; 'projection' routes
    it through the separate head instead.
    """

    epochs: int = 150
    batch_size: int = 32
    lam: float = DEFAULT_LAMBDA
    tau: float = DEFAULT_TAU
    seed: int = 0
    patience: int = 20
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    video_fraction: float = 0.5
    guarantee_both: bool = True
    feature_layer: str = "hidden"
    variant: LossVariant = LossVariant.CROSS_MODAL
    hidden_dim: int = 16
    feature_dim: int = 8

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidSpecError("epochs must be >= 1")
        if self.lam < 0:
            raise InvalidSpecError("lambda must be >= 0")
        if self.lam > 0 and self.batch_size < 2:
            raise InvalidSpecError("batch_size must be >= 2 when lambda > 0")
        if self.patience < 0:
            raise InvalidSpecError("patience must be >= 0")
        if self.feature_layer not in ("projection", "hidden"):
            raise InvalidSpecError("feature_layer must be 'projection' or 'hidden'")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_bce: float
    train_cm: float
    train_total: float
    val_total: float
    train_acc: float
    val_acc: float


@dataclass(frozen=True)
class TrainResult:
    model: ToyModel
    history: tuple[EpochStats, ...]
    best_epoch: int
    best_val: float
    stopped_early: bool


def _dataset_stats(
    model: ToyModel, data: FeatureDataset, config: TrainConfig
) -> tuple[float, float, float, float]:
    """(bce, cm, total, accuracy) of the full dataset under the model."""
    out = forward(model, data.x, config.feature_layer)
    bce = binary_cross_entropy(out.logits, data.y.astype(np.float64))
    cm = (
        contrastive_term(out.z, data.y, data.m, config.tau, config.variant)
        if config.lam > 0
        else 0.0
    )
    total = bce + config.lam * cm
    acc = float(((out.logits >= 0.0).astype(np.int8) == data.y).mean())
    return bce, cm, total, acc


def train(
    model: ToyModel,
    train_data: FeatureDataset,
    val_data: FeatureDataset,
    config: TrainConfig,
) -> TrainResult:
    """Mini-batch AdamW training with early stopping on validation loss.

    Returns the checkpoint with the best validation loss seen, plus the
    per-epoch history. Deterministic given (data, config, seed).
    """
    if len(val_data) == 0:
        raise InvalidSpecError("validation set must be non-empty")
    rng = np.random.default_rng(config.seed)
    params = model.params()
    state = OptimState.init(
        params,
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    policy = MixPolicy(
        video_fraction=config.video_fraction, guarantee_both=config.guarantee_both
    )
    image_pool = np.flatnonzero(train_data.m == 0)
    video_pool = np.flatnonzero(train_data.m == 1)
    history: list[EpochStats] = []
    best_val = np.inf
    best_params = {k: p.copy() for k, p in params.items()}
    best_epoch = -1
    bad_epochs = 0
    stopped_early = False
    for epoch in range(config.epochs):
        if epoch == 0:
            batches = mixed_batch_sampler(
                image_pool, video_pool, config.batch_size, policy, rng
            )
        else:
            # the single-modality warning, if any, was surfaced on epoch 0
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                batches = mixed_batch_sampler(
                    image_pool, video_pool, config.batch_size, policy, rng
                )
        for batch_idx in batches:
            current = ToyModel.from_params(params)
            grads = backward(
                current,
                train_data.x[batch_idx],
                train_data.y[batch_idx].astype(np.float64),
                config.lam,
                config.tau,
                train_data.m[batch_idx],
                config.feature_layer,
                config.variant,
            )
            params, state = optimizer_step(params, grads, state)
        current = ToyModel.from_params(params)
        tr_bce, tr_cm, tr_total, tr_acc = _dataset_stats(current, train_data, config)
        _, _, val_total, val_acc = _dataset_stats(current, val_data, config)
        if not (np.isfinite(tr_total) and np.isfinite(val_total)):
            raise NonFiniteLossError(
                f"non-finite loss at epoch {epoch}: "
                f"train={tr_total}, val={val_total}"
            )
        history.append(
            EpochStats(
                epoch=epoch,
                train_bce=tr_bce,
                train_cm=tr_cm,
                train_total=tr_total,
                val_total=val_total,
                train_acc=tr_acc,
                val_acc=val_acc,
            )
        )
        if val_total < best_val:
            best_val = val_total
            best_params = {k: p.copy() for k, p in params.items()}
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.patience:
                stopped_early = True
                break
    return TrainResult(
        model=ToyModel.from_params(best_params),
        history=tuple(history),
        best_epoch=best_epoch,
        best_val=float(best_val),
        stopped_early=stopped_early,
    )


# --- synthetic cross-modal data -------------------------------------------------

GROUP_ORDER: tuple[tuple[Label, Modality], ...] = (
    (Label.REAL, Modality.IMAGE),
    (Label.FAKE, Modality.IMAGE),
    (Label.REAL, Modality.VIDEO),
    (Label.FAKE, Modality.VIDEO),
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian cluster layout for the four (label, modality) groups.

    means/stds have shape (4, dim) in GROUP_ORDER. The default layout
    plants a shortcut trap: coordinate 1 separates the classes for images
    but carries no class information for video frames (and is shifted in
    the video domain, so an image-trained classifier reads every video as
    leaning fake), while coordinate 0 is a weaker cue that works in both
    domains. Video clusters are further displaced on two modality-marker
    coordinates, and the default training split has no fake videos at all:
    the fake side of the video domain must be reached by cross-modal
    alignment, not by direct supervision.
    """

    means: np.ndarray
    stds: np.ndarray
    train_counts: tuple[int, int, int, int]
    val_counts: tuple[int, int, int, int]
    test_counts: tuple[int, int, int, int]
    seed: int = 0

    def __post_init__(self):
        means = np.ascontiguousarray(self.means, dtype=np.float64)
        stds = np.ascontiguousarray(self.stds, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] != 4 or means.shape[1] < 2:
            raise InvalidSpecError("means must have shape (4, dim) with dim >= 2")
        if stds.shape != means.shape:
            raise InvalidSpecError("stds must match means in shape")
        if np.any(stds <= 0):
            raise InvalidSpecError("stds must be positive")
        for counts in (self.train_counts, self.val_counts, self.test_counts):
            if len(counts) != 4 or any(c < 0 for c in counts):
                raise InvalidSpecError("counts must be four non-negative integers")
        means.setflags(write=False)
        stds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "train_counts", tuple(self.train_counts))
        object.__setattr__(self, "val_counts", tuple(self.val_counts))
        object.__setattr__(self, "test_counts", tuple(self.test_counts))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def default(
        cls,
        dim: int = 6,
        signal_sep: float = 5.0,
        shortcut_sep: float = 7.0,
        noise_std: float = 1.0,
        video_shift: Optional[tuple[float, ...]] = None,
        train_counts: tuple[int, int, int, int] = (200, 200, 80, 0),
        val_counts: tuple[int, int, int, int] = (60, 60, 26, 0),
        test_counts: tuple[int, int, int, int] = (400, 400, 400, 400),
        seed: int = 0,
    ) -> "SyntheticSpec":
        if dim < 4:
            raise InvalidSpecError("default layout needs dim >= 4")
        if video_shift is None:
            # shift the shortcut axis (class-blind in video) plus two
            # modality-marker coordinates
            shift = np.zeros(dim)
            shift[1] = 3.0
            shift[2] = 2.5
            shift[3] = -2.5
        else:
            shift = np.asarray(video_shift, dtype=np.float64)
            if shift.shape != (dim,):
                raise InvalidSpecError(f"video_shift must have length {dim}")
        means = np.zeros((4, dim))
        for g, (label, modality) in enumerate(GROUP_ORDER):
            sign = 1.0 if label is Label.FAKE else -1.0
            means[g, 0] = sign * signal_sep / 2.0
            if modality is Modality.IMAGE:
                means[g, 1] = sign * shortcut_sep / 2.0
            else:
                means[g] += shift
        stds = np.full((4, dim), noise_std)
        return cls(
            means=means,
            stds=stds,
            train_counts=train_counts,
            val_counts=val_counts,
            test_counts=test_counts,
            seed=seed,
        )


@dataclass(frozen=True)
class SyntheticData:
    train: FeatureDataset
    val: FeatureDataset
    test: FeatureDataset


def _sample_split(
    spec: SyntheticSpec, counts: tuple[int, int, int, int], rng: np.random.Generator
) -> FeatureDataset:
    xs, ys, ms = [], [], []
    for g, (label, modality) in enumerate(GROUP_ORDER):
        n = counts[g]
        if n == 0:
            continue
        xs.append(rng.normal(spec.means[g], spec.stds[g], size=(n, spec.dim)))
        ys.append(np.full(n, label.numeric, dtype=np.int8))
        ms.append(np.full(n, modality.numeric, dtype=np.int8))
    if not xs:
        raise InvalidSpecError("split has zero samples")
    return FeatureDataset(np.vstack(xs), np.concatenate(ys), np.concatenate(ms))


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Draw disjoint train/val/test splits; deterministic per spec.seed."""
    rng = np.random.default_rng(spec.seed)
    train = _sample_split(spec, spec.train_counts, rng)
    val = _sample_split(spec, spec.val_counts, rng)
    test = _sample_split(spec, spec.test_counts, rng)
    return SyntheticData(train=train, val=val, test=test)


# --- checkpoint serialization ------------------------------------------------------


def save_checkpoint(
    model: ToyModel, config: TrainConfig, path: str | Path, seed: Optional[int] = None
) -> None:
    """Versioned JSON checkpoint: shapes, row-major values, config, seed."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": config.seed if seed is None else seed,
        "feature_layer": config.feature_layer,
        "config": {
            **{
                k: (v.value if isinstance(v, LossVariant) else v)
                for k, v in asdict(config).items()
            }
        },
        "params": {
            name: {
                "shape": list(getattr(model, name).shape),
                "data": getattr(model, name).ravel().tolist(),
            }
            for name in PARAM_NAMES
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ToyModel, TrainConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise InvalidSpecError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise InvalidSpecError(f"{path}: unsupported version {doc.get('version')}")
    params = {}
    for name in PARAM_NAMES:
        entry = doc["params"][name]
        params[name] = np.asarray(entry["data"], dtype=np.float64).reshape(
            entry["shape"]
        )
    cfg_doc = dict(doc["config"])
    cfg_doc["variant"] = LossVariant(cfg_doc["variant"])
    config = TrainConfig(**cfg_doc)
    return ToyModel.from_params(params), config
