"""A small encoder-decoder FCN with skip connections and an aggregation branch.

Contracting blocks interleave a 1x1 convolution between adjacent 3x3
convolutions; expanding blocks use plain 3x3 stacks. In the parent design the
last two contracting blocks and every expanding block hold three 3x3 layers
and the rest hold two; with three or more contracting blocks the middle 3x3 of
the last two contracting blocks and of the first expanding block is dropped.
An optional aggregation branch resizes every expanding block's output to full
resolution and fuses them with one 1x1 convolution.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .layers import Conv2D, MaxPool2, ReLU, Sigmoid, Softmax, Upsample


class Head(str, enum.Enum):
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


@dataclass(frozen=True)
class ModelConfig:
    contracting_blocks: int = 3
    base_width: int = 8
    input_channels: int = 4
    classes: int = 1
    use_aggregation_branch: bool = True
    head: Head | None = None

    def __post_init__(self):
        if self.contracting_blocks < 2:
            raise ValueError("need at least two contracting blocks")
        if self.base_width < 1 or self.input_channels < 1 or self.classes < 1:
            raise ValueError("widths and class count must be positive")
        head = Head(self.head) if self.head is not None else (
            Head.SIGMOID if self.classes == 1 else Head.SOFTMAX)
        if head is Head.SIGMOID and self.classes != 1:
            raise ValueError("sigmoid head is for a single binary class")
        if head is Head.SOFTMAX and self.classes < 2:
            raise ValueError("softmax head needs at least two classes")
        object.__setattr__(self, "head", head)

    @property
    def expanding_blocks(self) -> int:
        return self.contracting_blocks - 1

    @property
    def downsampling(self) -> int:
        return 2 ** (self.contracting_blocks - 1)

    def width(self, level: int) -> int:
        return self.base_width * 2**level

    @property
    def trimmed(self) -> bool:
        return self.contracting_blocks >= 3

    def contracting_kernels(self, i: int) -> list[int]:
        deep = i >= self.contracting_blocks - 2
        n3 = 3 if deep and not self.trimmed else 2
        return [3] + [1, 3] * (n3 - 1)

    def expanding_kernels(self, j: int) -> list[int]:
        return [3] * (2 if self.trimmed and j == 0 else 3)


class ConvBlock:
    """Convolutions of one block, each followed by ReLU."""

    def __init__(self, in_ch: int, out_ch: int, kernels, rng):
        self.convs = []
        self.relus = []
        c = in_ch
        for k in kernels:
            self.convs.append(Conv2D(c, out_ch, k, rng))
            self.relus.append(ReLU())
            c = out_ch

    def forward(self, x):
        for conv, relu in zip(self.convs, self.relus):
            x = relu.forward(conv.forward(x))
        return x

    def backward(self, dout):
        for conv, relu in zip(reversed(self.convs), reversed(self.relus)):
            dout = conv.backward(relu.backward(dout))
        return dout


class MicroFCN:
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        rng = np.random.default_rng(seed)
        n = cfg.contracting_blocks
        self.down = []
        c = cfg.input_channels
        for i in range(n):
            self.down.append(ConvBlock(c, cfg.width(i), cfg.contracting_kernels(i), rng))
            c = cfg.width(i)
        self.pools = [MaxPool2() for _ in range(n - 1)]
        self.up = []
        self.ups = []
        for j in range(cfg.expanding_blocks):
            level = n - 2 - j
            self.ups.append(Upsample())
            self.up.append(ConvBlock(c + cfg.width(level), cfg.width(level), cfg.expanding_kernels(j), rng))
            c = cfg.width(level)
        if cfg.use_aggregation_branch:
            self.ab_ups = [Upsample() for _ in range(cfg.expanding_blocks)]
            fuse_in = sum(cfg.width(n - 2 - j) for j in range(cfg.expanding_blocks))
        else:
            self.ab_ups = []
            fuse_in = c
        self.fuse = Conv2D(fuse_in, cfg.classes, 1, rng)
        self.head = Sigmoid() if cfg.head is Head.SIGMOID else Softmax()
        self._split = None

    def layers(self) -> list[Conv2D]:
        """Parameterized layers in declaration order."""
        convs = [conv for block in self.down + self.up for conv in block.convs]
        return convs + [self.fuse]

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        names = [f"down{i}" for i in range(len(self.down))] + [f"up{j}" for j in range(len(self.up))]
        for name, block in zip(names, self.down + self.up):
            for k, conv in enumerate(block.convs):
                out += [(f"{name}.conv{k}.W", conv.params["W"]), (f"{name}.conv{k}.b", conv.params["b"])]
        out += [("fuse.W", self.fuse.params["W"]), ("fuse.b", self.fuse.params["b"])]
        return out

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers() for p in (layer.params["W"], layer.params["b"])]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers() for g in (layer.grads["W"], layer.grads["b"])]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def activation_signature(self) -> bytes:
        """ReLU on/off states and pooling winners of the last forward pass."""
        parts = [np.packbits(r._cached()).tobytes() for block in self.down + self.up for r in block.relus]
        parts += [pool._cached()[0].astype(np.uint8).tobytes() for pool in self.pools]
        return b"".join(parts)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """``(B, C, H, W)`` normalized input to ``(B, classes, H, W)`` probabilities."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != self.cfg.input_channels:
            raise ValueError(f"expected (B, {self.cfg.input_channels}, H, W), got {x.shape}")
        h, w = x.shape[2:]
        f = self.cfg.downsampling
        if h % f or w % f:
            raise ValueError(f"spatial dims {h}x{w} not divisible by {f}")
        skips = []
        for i, block in enumerate(self.down):
            x = block.forward(x)
            if i < len(self.pools):
                skips.append(x)
                x = self.pools[i].forward(x)
        outs = []
        for up, block, skip in zip(self.ups, self.up, reversed(skips)):
            u = up.forward(x, *skip.shape[2:])
            x = block.forward(np.concatenate([u, skip], axis=1))
            outs.append(x)
        if self.ab_ups:
            feats = [up.forward(o, h, w) for up, o in zip(self.ab_ups, outs)]
            self._split = [f_.shape[1] for f_ in feats]
            x = np.concatenate(feats, axis=1)
        return self.head.forward(self.fuse.forward(x))

    def backward(self, dprob: np.ndarray) -> np.ndarray:
        """Populate parameter gradients from d(loss)/d(output); return d(loss)/d(input)."""
        dx = self.fuse.backward(self.head.backward(dprob))
        n_up = len(self.up)
        dskips = [None] * n_up
        d_outs = [None] * n_up
        if self.ab_ups:
            parts = np.split(dx, np.cumsum(self._split)[:-1], axis=1)
            for j, (up, part) in enumerate(zip(self.ab_ups, parts)):
                d_outs[j] = up.backward(part)
        else:
            d_outs[-1] = dx
        d = None
        for j in reversed(range(n_up)):
            d = d_outs[j] if d is None else (d + d_outs[j] if d_outs[j] is not None else d)
            dcat = self.up[j].backward(d)
            c_up = dcat.shape[1] - self.cfg.width(len(self.down) - 2 - j)
            d = self.ups[j].backward(dcat[:, :c_up])
            dskips[j] = dcat[:, c_up:]
        # d now flows into the bottleneck block
        for i in reversed(range(len(self.down))):
            if i < len(self.pools):
                d = self.pools[i].backward(d) + dskips[len(self.down) - 2 - i]
            d = self.down[i].backward(d)
        return d


def build_model(cfg: ModelConfig, seed: int = 0) -> MicroFCN:
    return MicroFCN(cfg, seed)
