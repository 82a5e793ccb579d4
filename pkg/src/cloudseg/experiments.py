"""Dataset assembly, scene evaluation and the loss-comparison experiment."""
from __future__ import annotations

import logging
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .losscore import LossConfig, LossKind
from .microfcn.model import MicroFCN, ModelConfig
from .microfcn.train import TrainConfig, predict_scene, train
from .raster.labels import from_masks
from .raster.synth import synth_scene
from .raster.tiling import Overlap, crop, extract_patches, is_empty_patch, normalize, resize_bilinear
from .raster.tiling import resize_nearest
from .sdaa import Scene

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthSpec:
    n_scenes: int = 60
    size: int = 64
    empty_fraction: float = 0.3
    cloud_cover: tuple[float, float] = (0.1, 0.5)
    bright_ground: float = 0.15


def synth_dataset(spec, seed: int) -> list[Scene]:
    """``spec.n_scenes`` synthetic scenes, exactly ``round(n * empty_fraction)`` of them cloud-free.

    ``spec`` is any object with the :class:`SynthSpec` attributes.
    """
    rng = np.random.default_rng(seed)
    n = spec.n_scenes
    empty = np.zeros(n, dtype=bool)
    empty[rng.permutation(n)[:int(round(n * spec.empty_fraction))]] = True
    scene_seeds = rng.integers(0, 2**63, size=n)
    covers = rng.uniform(*spec.cloud_cover, size=n)
    scenes = []
    for i in range(n):
        scenes.append(synth_scene(int(scene_seeds[i]), (spec.size, spec.size),
                                  cloud_cover=0.0 if empty[i] else float(covers[i]),
                                  bright_ground=spec.bright_ground, scene_id=f"synth_{i:04d}"))
    return scenes


def task_target(scene: Scene, task: str) -> np.ndarray:
    """Binary ``(H, W)`` mask for cloud/shadow tasks, one-hot ``(H, W, 3)`` for multiclass."""
    gt = from_masks(scene.cloud_mask, scene.shadow_mask, task)
    if task == "multiclass":
        return gt.stack()
    return gt.masks[task]


def scene_samples(scenes, task: str, patch_size: int, overlap: Overlap | str = Overlap.NONE,
                  input_size: int | None = None):
    """Normalized training patches and targets, dropping mostly-empty patches.

    With ``input_size`` each patch is resized bilinearly and its target by
    nearest neighbour.
    """
    out = []
    for scene in scenes:
        h, w = scene.raster.shape[:2]
        size = min(patch_size, h, w)
        target = task_target(scene, task)
        for origin in extract_patches(h, w, size, overlap):
            patch = crop(scene.raster, origin, size)
            if is_empty_patch(patch):
                continue
            image, gt = normalize(patch), crop(target, origin, size)
            if input_size and input_size != size:
                image = resize_bilinear(image, input_size, input_size)
                gt = resize_nearest(gt, input_size, input_size)
            out.append((image, gt))
    return out


def evaluate_scenes(model: MicroFCN, scenes, task: str, patch_size: int,
                    overlap: Overlap | str = Overlap.NONE, threshold: float = 0.5,
                    input_size: int | None = None) -> metrics.MetricReport:
    """Scene-pooled metrics of ``model`` against the scenes' own masks."""
    binary, matrices = [], []
    for scene in scenes:
        _, mask = predict_scene(model, scene.raster, patch_size, overlap, input_size, threshold)
        target = task_target(scene, task)
        if task == "multiclass":
            matrices.append(metrics.multiclass_confusion(target.argmax(-1), mask.argmax(-1), target.shape[-1]))
        else:
            binary.append(metrics.confusion(target, mask, scene.scene_id))
    if task == "multiclass":
        return metrics.multiclass_report(matrices, ["cloud", "shadow", "clear"])
    return metrics.aggregate(binary)


def holdout_split(n: int, fraction: float, seed: int, strata=None) -> tuple[list[int], list[int]]:
    """Random train/test index split; with ``strata`` each group is split at ``fraction`` on its own."""
    rng = np.random.default_rng(seed)
    groups = [np.arange(n)] if strata is None else [np.flatnonzero(np.asarray(strata) == v)
                                                    for v in np.unique(strata)]
    train_idx, test_idx = [], []
    for group in groups:
        order = rng.permutation(group)
        n_test = max(1, int(round(len(group) * fraction)))
        train_idx += order[n_test:].tolist()
        test_idx += order[:n_test].tolist()
    return sorted(train_idx), sorted(test_idx)


@dataclass(frozen=True)
class LossEffectConfig:
    """Settings of the FJL1 versus soft Jaccard comparison."""

    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    kinds: tuple[str, ...] = ("jaccard", "fjl1")
    synth: SynthSpec = field(default_factory=SynthSpec)
    holdout_fraction: float = 1 / 3
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(lr0=3e-4, epochs=40))
    loss: LossConfig = field(default_factory=LossConfig)


@dataclass
class LossEffectResult:
    jaccard: dict[str, list[float]]
    seconds: float

    def median(self, kind: str) -> float:
        return statistics.median(self.jaccard[kind])


def loss_effect(cfg: LossEffectConfig = LossEffectConfig(), progress=None) -> LossEffectResult:
    """Train one model per (seed, loss) on the same data and score held-out scenes.

    Each seed draws its own dataset and a split stratified by empty GT; both
    losses see identical data, initialization and augmentation streams.
    """
    start = time.perf_counter()
    scores: dict[str, list[float]] = {k: [] for k in cfg.kinds}
    for seed in cfg.seeds:
        data_seed, split_seed = np.random.SeedSequence(seed).generate_state(2)
        scenes = synth_dataset(cfg.synth, int(data_seed))
        empty = [not s.cloud_mask.any() for s in scenes]
        train_idx, test_idx = holdout_split(len(scenes), cfg.holdout_fraction, int(split_seed), empty)
        samples = scene_samples([scenes[i] for i in train_idx], "cloud", cfg.synth.size)
        test = [scenes[i] for i in test_idx]
        for kind in cfg.kinds:
            result = train(samples, LossKind(kind), TrainConfig(**{**cfg.train.__dict__, "seed": seed}),
                           cfg.model, cfg.loss)
            report = evaluate_scenes(result.model, test, "cloud", cfg.synth.size)
            scores[kind].append(report.jaccard)
            log.info("seed %d %s jaccard %.4f", seed, kind, report.jaccard)
            if progress is not None:
                progress(seed, kind, report)
    return LossEffectResult(scores, time.perf_counter() - start)
