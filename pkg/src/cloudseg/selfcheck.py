"""Property checks of the loss functions, runnable from the command line."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losscore as lc
from .gradcheck import numeric_gradient, relative_error
from .losscore import CEVariant, LossConfig, LossKind


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _pairs(rng, count, n_max=32):
    for i in range(count):
        n = int(rng.integers(1, n_max + 1))
        t = (rng.random(n) < (0.0 if i % 3 == 0 else rng.uniform(0.1, 0.9))).astype(float)
        yield t, rng.uniform(0.01, 0.99, n)


def check_filter_switch(cfg: LossConfig, rng) -> CheckResult:
    worst = 0.0
    for t, y in _pairs(rng, 1000):
        for kind, comp in ((LossKind.FJL1, lc.inverse_jaccard), (LossKind.FJL2, lc.normalized_ce)):
            ref = comp(t, y, cfg) if t.sum() == 0 else lc.soft_jaccard(t, y, cfg)
            worst = max(worst, abs(lc.fjl(t, y, kind, cfg) - ref))
    return CheckResult("filter switch", worst < 1e-12, f"max |FJL - branch| = {worst:.3g}")


def check_gradients(cfg: LossConfig, rng, gradient=lc.loss_gradient) -> list[CheckResult]:
    """Analytic versus central-difference gradients, 100 instances per loss.

    Entries below 1e-6 in magnitude are compared absolutely, since a float64
    central difference cannot resolve them relative to a loss of order one.
    """
    out = []
    for kind in LossKind:
        worst = 0.0
        for t, y in _pairs(rng, 100, 24):
            numeric = numeric_gradient(lambda: lc.loss_value(kind, t, y, cfg), y, h=1e-6)
            worst = max(worst, relative_error(gradient(kind, t, y, cfg), numeric, floor=1e-6).max())
        out.append(CheckResult(f"gradient {kind.value}", bool(worst < 1e-4), f"max relative error = {worst:.3g}"))
    return out


def check_over_penalization(cfg: LossConfig) -> CheckResult:
    t = np.zeros(4)
    good, bad = np.full(4, 0.01), np.full(4, 0.99)
    j = (lc.soft_jaccard(t, good, cfg), lc.soft_jaccard(t, bad, cfg))
    f = (lc.fjl(t, good, "fjl1", cfg), lc.fjl(t, bad, "fjl1", cfg))
    ok = abs(j[0] - 1) < 1e-5 and abs(j[1] - 1) < 1e-5 and abs(f[0] - 0.01) < 1e-3 and abs(f[1] - 0.99) < 1e-3
    return CheckResult("empty-target penalty", ok,
                       f"jaccard {j[0]:.6f}/{j[1]:.6f}, fjl1 {f[0]:.4f}/{f[1]:.4f}")


def check_ce_normalization(cfg: LossConfig) -> CheckResult:
    ratio = lc.cross_entropy(np.ones(8), np.zeros(8), cfg) / cfg.max_ce
    return CheckResult("ce normalization", abs(ratio - 1) < 1e-4, f"CE(1, 0) / max = {ratio:.6f}")


def degenerate_warnings(cfg: LossConfig) -> list[str]:
    notes = []
    t, y = np.zeros(16), np.linspace(0.05, 0.95, 16)
    if cfg.ce_variant is CEVariant.AS_WRITTEN:
        g = lc.loss_gradient(LossKind.FJL2, t, y, cfg)
        if np.max(np.abs(g)) < 1e-12:
            notes.append("warning: fjl2 with as-written cross-entropy has zero gradient on empty targets; "
                         "use --ce-variant symmetric to penalize false positives there")
    return notes


def run_losscheck(cfg: LossConfig = lc.DEFAULT, seed: int = 0, gradient=lc.loss_gradient):
    """All checks plus degenerate-configuration warnings."""
    rng = np.random.default_rng(seed)
    results = [check_filter_switch(cfg, rng), *check_gradients(cfg, rng, gradient),
               check_over_penalization(cfg), check_ce_normalization(cfg)]
    return results, degenerate_warnings(cfg)
