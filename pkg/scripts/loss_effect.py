"""Compare FJL1 against soft Jaccard on synthetic scenes, one model per seed and loss.

Prints held-out Jaccard per seed and the median gain of FJL1 in points.
"""
import argparse
import logging
from dataclasses import replace

from cloudseg.experiments import LossEffectConfig, loss_effect


def main(argv=None):
    defaults = LossEffectConfig()
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=list(defaults.seeds))
    ap.add_argument("--epochs", type=int, default=defaults.train.epochs)
    ap.add_argument("--lr", type=float, default=defaults.train.lr0)
    ap.add_argument("--n-scenes", type=int, default=defaults.synth.n_scenes)
    ap.add_argument("--empty-fraction", type=float, default=defaults.synth.empty_fraction)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)

    cfg = replace(defaults, seeds=tuple(args.seeds),
                  train=replace(defaults.train, epochs=args.epochs, lr0=args.lr),
                  synth=replace(defaults.synth, n_scenes=args.n_scenes, empty_fraction=args.empty_fraction))

    def progress(seed, kind, report):
        print(f"seed {seed}  {kind:8s}  jaccard {100 * report.jaccard:6.2f}  "
              f"precision {100 * report.precision:6.2f}  recall {100 * report.recall:6.2f}", flush=True)

    result = loss_effect(cfg, progress)
    med = {k: result.median(k) for k in cfg.kinds}
    for kind, value in med.items():
        print(f"median {kind:8s} {100 * value:6.2f}")
    if {"jaccard", "fjl1"} <= med.keys():
        print(f"gain {100 * (med['fjl1'] - med['jaccard']):+.2f} pts in {result.seconds:.0f}s")


if __name__ == "__main__":
    main()
