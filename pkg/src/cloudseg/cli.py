"""Command-line entry point: ``cloudseg <command> [options]``.

Exit status is 0 on success, 1 when validation fails (bad config, failed
check, unusable data) and 2 on I/O errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import metrics
from .config import RunConfig, subsystem_seed
from .experiments import evaluate_scenes, holdout_split, scene_samples, synth_dataset, task_target
from .losscore import LossKind, loss_gradient
from .microfcn import checkpoint
from .microfcn.train import predict_scene, train
from .raster.datasets import patch_id, write_cloud38_patch
from .raster.io import list_scenes, read_mask, read_scene, write_mask, write_prob_map, write_scene
from .raster.tiling import crop, extract_patches, is_empty_patch
from .sdaa import Scene, ShadowFreeSceneError, augment_all
from .selfcheck import run_losscheck

log = logging.getLogger("cloudseg")

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    p.add_argument("--loss", dest="loss_kind", choices=[k.value for k in LossKind])
    p.add_argument("--ce-variant", choices=["as-written", "symmetric"])
    p.add_argument("--patch-size", type=int)
    p.add_argument("--overlap", choices=["none", "half"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--task", choices=list(config_mod.TASKS))
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", type=str, help="output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cloudseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_common()]

    p = sub.add_parser("synth", parents=common, help="write synthetic scenes")
    p.add_argument("--n-scenes", type=int)
    p.add_argument("--size", type=int)

    p = sub.add_parser("augment", parents=common, help="apply SDAA to every scene")
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("tile", parents=common, help="cut scenes into patches")
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("train", parents=common, help="train the micro FCN")
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("predict", parents=common, help="predict masks for scenes")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)

    p = sub.add_parser("evaluate", parents=common, help="score predicted masks against GT")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)

    p = sub.add_parser("losscheck", parents=common, help="verify loss properties and gradients")
    p.add_argument("--inject-wrong-gradient", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("gridsearch", parents=common, help="rank SDAA settings against a baseline")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--limit", type=int, help="only try the first N combinations")

    p = sub.add_parser("crossval", parents=common, help="k-fold cross-validation")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--folds", type=int)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = config_mod.load(args.config) if args.config else RunConfig()
    return config_mod.with_overrides(
        cfg, seed=args.seed, loss_kind=args.loss_kind, ce_variant=args.ce_variant,
        patch_size=args.patch_size, overlap=args.overlap, threshold=args.threshold,
        task=args.task, epochs=args.epochs, out=args.out, folds=getattr(args, "folds", None),
    )


def _load_scenes(root) -> list[Scene]:
    return [read_scene(d) for d in list_scenes(root)]


def _model_config(cfg: RunConfig):
    if cfg.task == "multiclass" and cfg.model.classes == 1:
        return replace(cfg.model, classes=3, head=None)
    return cfg.model


def _train(cfg: RunConfig, scenes):
    t = cfg.tiling
    samples = scene_samples(scenes, cfg.task, t.patch_size, input_size=t.train_input_size)
    if not samples:
        raise ValueError("no usable training patches")
    return train(samples, cfg.loss_kind, cfg.train_config(), _model_config(cfg), cfg.loss)


def _evaluate(cfg: RunConfig, model, scenes) -> metrics.MetricReport:
    t = cfg.tiling
    return evaluate_scenes(model, scenes, cfg.task, t.patch_size, t.overlap, t.threshold, t.predict_input_size)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def cmd_synth(cfg: RunConfig, args) -> int:
    spec = cfg.synth
    if args.n_scenes is not None:
        spec = replace(spec, n_scenes=args.n_scenes)
    if args.size is not None:
        spec = replace(spec, size=args.size)
    out = Path(cfg.out)
    for scene in synth_dataset(spec, subsystem_seed(cfg.seed, "synth")):
        write_scene(out, scene)
    print(f"wrote {spec.n_scenes} scenes to {out}")
    return 0


def cmd_augment(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    params = cfg.sdaa.params()
    written = 0
    for scene in _load_scenes(args.data):
        try:
            samples = augment_all(scene, params)
        except ShadowFreeSceneError:
            log.info("skipping %s: scene is free of shadow", scene.scene_id)
            continue
        except ValueError as e:
            log.info("skipping %s: %s", scene.scene_id, e)
            continue
        for s in samples:
            d = write_scene(out / scene.scene_id,
                            Scene(s.raster, s.cloud_mask, s.ssm, scene.geometry, s.params.tag))
            (d / "provenance.json").write_text(s.provenance_json())
            written += 1
    print(f"wrote {written} augmented samples to {out}")
    return 0


def cmd_tile(cfg: RunConfig, args) -> int:
    if cfg.task == "multiclass":
        raise ValueError("tiling writes one binary GT per patch; use task cloud or shadow")
    out = Path(cfg.out)
    count = 0
    for index, scene in enumerate(_load_scenes(args.data), start=1):
        h, w = scene.raster.shape[:2]
        size = min(cfg.tiling.patch_size, h, w)
        origins = extract_patches(h, w, size, cfg.tiling.overlap)
        rows = sorted({r for r, _ in origins})
        cols = sorted({c for _, c in origins})
        gt = task_target(scene, cfg.task)
        for origin in origins:
            patch = crop(scene.raster, origin, size)
            if is_empty_patch(patch):
                continue
            pid = patch_id(index, rows.index(origin[0]), cols.index(origin[1]))
            write_cloud38_patch(out, "train", pid, scene.scene_id, patch, crop(gt, origin, size))
            count += 1
    print(f"wrote {count} patches to {out}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    result = _train(cfg, _load_scenes(args.data))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out / "model.ckpt", result.model, result.best_epoch,
                    {"task": cfg.task, "loss": cfg.loss_kind.value})
    checkpoint.write_history(out / "history.csv", result.history)
    (out / "config.json").write_text(config_mod.dumps(cfg))
    last = result.history[-1] if result.history else None
    print(f"trained {len(result.history)} epochs, best epoch {result.best_epoch}"
          + (f", best val loss {last.best_val:.5f}" if last else ""))
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    model, header = checkpoint.load(args.model)
    task = header.get("extra", {}).get("task", cfg.task)
    out = Path(cfg.out)
    t = cfg.tiling
    scenes = _load_scenes(args.data)
    for scene in scenes:
        prob, mask = predict_scene(model, scene.raster, t.patch_size, t.overlap, t.predict_input_size, t.threshold)
        d = out / scene.scene_id
        d.mkdir(parents=True, exist_ok=True)
        write_prob_map(d / "prob", prob, scene.scene_id)
        if task == "multiclass":
            write_mask(d / "cloud.tif", mask[..., 0])
            write_mask(d / "shadow.tif", mask[..., 1])
        else:
            write_mask(d / f"{task}.tif", mask)
    print(f"predicted {len(scenes)} scenes into {out}")
    return 0


def _read_labels(directory: Path, task: str) -> np.ndarray:
    if task == "multiclass":
        cloud = read_mask(directory / "cloud.tif")
        shadow = read_mask(directory / "shadow.tif")
        return np.where(cloud, 0, np.where(shadow, 1, 2))
    return read_mask(directory / f"{task}.tif")


def cmd_evaluate(cfg: RunConfig, args) -> int:
    binary, matrices = [], []
    for d in list_scenes(args.gt):
        gt = _read_labels(d, cfg.task)
        pred = _read_labels(args.pred / d.name, cfg.task)
        if cfg.task == "multiclass":
            matrices.append(metrics.multiclass_confusion(gt, pred, 3))
        else:
            binary.append(metrics.confusion(gt, pred, d.name))
    if cfg.task == "multiclass":
        report = metrics.multiclass_report(matrices, ["cloud", "shadow", "clear"])
    else:
        report = metrics.aggregate(binary)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    print(report.to_table(), end="")
    return 0


def cmd_losscheck(cfg: RunConfig, args) -> int:
    gradient = loss_gradient
    if args.inject_wrong_gradient:
        gradient = lambda kind, t, y, c: 1.01 * loss_gradient(kind, t, y, c)  # noqa: E731
    results, notes = run_losscheck(cfg.loss, subsystem_seed(cfg.seed, "losscheck"), gradient)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    for note in notes:
        print(note)
    return 0 if all(r.passed for r in results) else 1


def gridsearch(cfg: RunConfig, scenes, params) -> dict:
    """Shadow Jaccard of original-only training versus each SDAA setting.

    Every run shares the split and training seed, so only the added samples
    differ. Returns the baseline, every result, and the settings that beat the
    baseline ranked by Jaccard (ties broken by tag).
    """
    cfg = replace(cfg, task="shadow")
    train_idx, test_idx = holdout_split(len(scenes), cfg.holdout_fraction, subsystem_seed(cfg.seed, "split"))
    train_scenes = [scenes[i] for i in train_idx]
    test_scenes = [scenes[i] for i in test_idx]
    try:
        baseline_model = _train(cfg, train_scenes).model
    except ValueError as e:
        raise ValueError(f"baseline run missing: {e}") from e
    baseline = _evaluate(cfg, baseline_model, test_scenes).jaccard
    log.info("baseline shadow jaccard %.4f", baseline)

    sources = []
    for scene in train_scenes:
        try:
            sources.append((scene, augment_all(scene, params)))
        except ValueError:
            log.info("no augmentation from %s", scene.scene_id)
    results = []
    for k, prm in enumerate(params):
        extra = [Scene(samples[k].raster, samples[k].cloud_mask, samples[k].ssm, scene.geometry,
                       f"{scene.scene_id}_{prm.tag}") for scene, samples in sources]
        model = _train(cfg, train_scenes + extra).model
        j = _evaluate(cfg, model, test_scenes).jaccard
        log.info("%s shadow jaccard %.4f", prm.tag, j)
        results.append({"tag": prm.tag, "jaccard": j, "azimuth_offset_deg": prm.azimuth_offset_deg,
                        "shift_r_px": prm.shift_r_px, "gamma": prm.gamma})
    selected = sorted((r for r in results if r["jaccard"] > baseline), key=lambda r: (-r["jaccard"], r["tag"]))
    return {"baseline": baseline, "results": results, "selected": selected}


def cmd_gridsearch(cfg: RunConfig, args) -> int:
    params = cfg.sdaa.params()
    if args.limit is not None:
        params = params[:args.limit]
    summary = gridsearch(cfg, _load_scenes(args.data), params)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "gridsearch.json", summary)
    print(f"baseline {100 * summary['baseline']:.2f}")
    for r in summary["selected"]:
        print(f"{r['tag']}  {100 * r['jaccard']:.2f}")
    return 0


def crossval(cfg: RunConfig, scenes) -> dict:
    folds = metrics.make_folds(range(len(scenes)), cfg.folds, subsystem_seed(cfg.seed, "folds"))
    reports = []
    for k, fold in enumerate(folds):
        held = set(fold)
        model = _train(cfg, [s for i, s in enumerate(scenes) if i not in held]).model
        report = _evaluate(cfg, model, [scenes[i] for i in fold])
        reports.append({"fold": k, "scenes": [scenes[i].scene_id for i in fold], **report.to_dict()})
    keys = ("jaccard", "precision", "recall", "accuracy")
    average = {key: statistics.fmean(r[key] for r in reports) for key in keys}
    return {"folds": reports, "average": average}


def cmd_crossval(cfg: RunConfig, args) -> int:
    summary = crossval(cfg, _load_scenes(args.data))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "crossval.json", summary)
    for r in summary["folds"]:
        print(f"fold {r['fold']}  jaccard {100 * r['jaccard']:.2f}")
    print(f"average  jaccard {100 * summary['average']['jaccard']:.2f}")
    return 0


COMMANDS = {
    "synth": cmd_synth, "augment": cmd_augment, "tile": cmd_tile, "train": cmd_train,
    "predict": cmd_predict, "evaluate": cmd_evaluate, "losscheck": cmd_losscheck,
    "gridsearch": cmd_gridsearch, "crossval": cmd_crossval,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
