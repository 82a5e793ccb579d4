"""Training loop and whole-scene inference for the micro FCN."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ..losscore import DEFAULT as DEFAULT_LOSS
from ..losscore import CEVariant, LossConfig, LossKind, class_weights, loss_gradient, loss_value
from ..losscore import multiclass_gradient, multiclass_loss
from ..raster.augment import geometric_augment
from ..raster.tiling import Overlap, argmax_mask, binarize, crop, extract_patches, normalize
from ..raster.tiling import resize_bilinear, stitch
from .model import MicroFCN, ModelConfig, build_model
from .optim import Adam, PlateauSchedule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-4
    plateau_patience: int = 15
    lr_decay_factor: float = 0.3
    lr_floor: float = 1e-8
    batch_size: int = 4
    val_fraction: float = 0.2
    epochs: int = 30
    seed: int = 0
    augment: bool = True
    # keep the parameters of the epoch with the lowest validation loss
    keep_best: bool = True

    def __post_init__(self):
        if self.lr0 <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("lr0 and batch_size must be positive, epochs non-negative")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    best_val: float


@dataclass
class TrainResult:
    model: MicroFCN
    history: list[EpochRecord]
    train_indices: list[int]
    val_indices: list[int]
    best_epoch: int


def lacks_empty_gradient(kind: LossKind | str, cfg: LossConfig = DEFAULT_LOSS) -> bool:
    """True when the loss gives no useful gradient on an all-background target.

    Soft Jaccard's gradient there is of order epsilon; the as-written
    cross-entropy (and FJL2 built on it) keeps only foreground terms.
    """
    kind = LossKind(kind)
    if kind is LossKind.JACCARD:
        return True
    return kind in (LossKind.CE, LossKind.FJL2) and cfg.ce_variant is CEVariant.AS_WRITTEN


def split_indices(n: int, val_fraction: float, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    order = rng.permutation(n)
    n_val = int(round(n * val_fraction))
    if val_fraction > 0 and n > 1:
        n_val = min(max(n_val, 1), n - 1)
    return sorted(order[n_val:].tolist()), sorted(order[:n_val].tolist())


def _gt_channels(gt: np.ndarray, classes: int) -> np.ndarray:
    """``(H, W)`` or ``(H, W, K)`` GT as a ``(K, H, W)`` float array."""
    gt = np.asarray(gt, dtype=np.float64)
    if gt.ndim == 2:
        gt = gt[..., None]
    if gt.shape[-1] != classes:
        raise ValueError(f"GT has {gt.shape[-1]} channels, model predicts {classes}")
    return gt.transpose(2, 0, 1)


def batch_loss(kind, cfg: LossConfig, gts: np.ndarray, probs: np.ndarray, weights=None):
    """Mean per-image loss over a batch and its gradient w.r.t. ``probs``.

    ``gts`` and ``probs`` are ``(B, K, H, W)``. Each image is scored as one
    flattened vector, as the losses are defined per image.
    """
    b, k = probs.shape[:2]
    total = 0.0
    grad = np.empty_like(probs)
    for i in range(b):
        if k == 1:
            t, y = gts[i, 0].ravel(), probs[i, 0].ravel()
            total += loss_value(kind, t, y, cfg)
            grad[i, 0] = loss_gradient(kind, t, y, cfg).reshape(probs.shape[2:])
        else:
            t = gts[i].reshape(k, -1).T
            y = probs[i].reshape(k, -1).T
            total += multiclass_loss(t, y, kind, cfg, weights)
            grad[i] = multiclass_gradient(t, y, kind, cfg, weights).T.reshape(probs.shape[1:])
    return total / b, grad / b


def _batch_weights(gts: np.ndarray):
    if gts.shape[1] == 1:
        return None
    return class_weights(gts.sum(axis=(0, 2, 3)))


def evaluate_loss(model: MicroFCN, samples, indices, kind, cfg: LossConfig, batch_size: int) -> float:
    losses = []
    for start in range(0, len(indices), batch_size):
        idx = indices[start:start + batch_size]
        x = np.stack([samples[i][0].transpose(2, 0, 1) for i in idx])
        gts = np.stack([_gt_channels(samples[i][1], model.cfg.classes) for i in idx])
        loss, _ = batch_loss(kind, cfg, gts, model.forward(x), _batch_weights(gts))
        losses.append(loss * len(idx))
    return float(np.sum(losses) / len(indices))


def train(samples, loss_kind: LossKind | str, train_cfg: TrainConfig = TrainConfig(),
          model_cfg: ModelConfig = ModelConfig(), loss_cfg: LossConfig = DEFAULT_LOSS,
          callback=None) -> TrainResult:
    """Fit a fresh model to ``samples``, a sequence of ``(image, gt)`` pairs.

    ``image`` is a normalized ``(H, W, C)`` float array and ``gt`` a binary
    ``(H, W)`` mask or ``(H, W, K)`` one-hot stack. All samples must share one
    size. The split, initialization and augmentation each draw from their own
    stream derived from ``train_cfg.seed``.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("empty dataset")
    kind = LossKind(loss_kind)
    if lacks_empty_gradient(kind, loss_cfg) and all(not np.any(gt) for _, gt in samples):
        warnings.warn(f"every GT is empty and {kind.value} has no gradient there", RuntimeWarning, stacklevel=2)

    split_ss, init_ss, aug_ss = np.random.SeedSequence(train_cfg.seed).spawn(3)
    train_idx, val_idx = split_indices(len(samples), train_cfg.val_fraction, np.random.default_rng(split_ss))
    model = build_model(model_cfg, int(init_ss.generate_state(1)[0]))
    rng = np.random.default_rng(aug_ss)
    params = model.parameters()
    adam = Adam()
    schedule = PlateauSchedule(train_cfg.lr0, train_cfg.plateau_patience,
                               train_cfg.lr_decay_factor, train_cfg.lr_floor)
    history: list[EpochRecord] = []
    best = [p.copy() for p in params]
    best_epoch = 0
    bs = train_cfg.batch_size

    for epoch in range(1, train_cfg.epochs + 1):
        lr = schedule.lr
        order = rng.permutation(train_idx)
        running = 0.0
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            xs, gs = [], []
            for i in idx:
                image, gt = samples[i]
                if train_cfg.augment:
                    image, gt = geometric_augment(image, gt, rng)
                xs.append(image.transpose(2, 0, 1))
                gs.append(_gt_channels(gt, model_cfg.classes))
            x, gts = np.stack(xs), np.stack(gs)
            loss, dprob = batch_loss(kind, loss_cfg, gts, model.forward(x), _batch_weights(gts))
            model.backward(dprob)
            adam.step(params, model.gradients(), lr)
            running += loss * len(idx)
        train_loss = running / len(order)
        if val_idx:
            val_loss = evaluate_loss(model, samples, val_idx, kind, loss_cfg, bs)
        else:
            val_loss = train_loss
        improved = val_loss < schedule.best
        schedule.update(val_loss)
        if improved:
            best = [p.copy() for p in params]
            best_epoch = epoch
        record = EpochRecord(epoch, train_loss, val_loss, lr, schedule.best)
        history.append(record)
        log.debug("epoch %d train %.5f val %.5f lr %.2e", epoch, train_loss, val_loss, lr)
        if callback is not None:
            callback(record)
        if schedule.exhausted:
            break

    if train_cfg.keep_best and history:
        for p, b in zip(params, best):
            p[...] = b
    return TrainResult(model, history, train_idx, val_idx, best_epoch)


def predict_patches(model: MicroFCN, patches: np.ndarray, batch_size: int = 8) -> np.ndarray:
    """``(N, H, W, C)`` normalized patches to ``(N, H, W, K)`` probabilities."""
    out = []
    for start in range(0, len(patches), batch_size):
        x = np.asarray(patches[start:start + batch_size]).transpose(0, 3, 1, 2)
        out.append(model.forward(x).transpose(0, 2, 3, 1))
    return np.concatenate(out)


def predict_scene(model: MicroFCN, raster: np.ndarray, patch_size: int,
                  overlap: Overlap | str = Overlap.NONE, input_size: int | None = None,
                  threshold: float = 0.5, batch_size: int = 8):
    """Tile, normalize, resize, predict and stitch a ``(H, W, C)`` DN raster.

    Returns ``(prob_map, mask)``: ``(H, W)`` probabilities and a boolean mask
    for a binary model, ``(H, W, K)`` probabilities and one-hot masks for a
    multiclass one.
    """
    h, w = raster.shape[:2]
    size = min(patch_size, h, w)
    origins = extract_patches(h, w, size, overlap)
    patches = []
    for origin in origins:
        p = normalize(crop(raster, origin, size))
        if input_size and input_size != size:
            p = resize_bilinear(p, input_size, input_size)
        patches.append(p)
    probs = predict_patches(model, np.stack(patches), batch_size)
    if input_size and input_size != size:
        probs = [resize_bilinear(p, size, size) for p in probs]
    prob_map = stitch(probs, origins, h, w)
    if prob_map.shape[-1] == 1:
        prob_map = prob_map[..., 0]
        return prob_map, binarize(prob_map, threshold)
    return prob_map, argmax_mask(prob_map)
