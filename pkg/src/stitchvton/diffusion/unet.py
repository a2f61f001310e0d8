"""9-channel-in, 4-channel-out conv UNet with timestep embedding.

Three resolution levels (base width 32, doubled per level), two
residual blocks per level on both paths, group norm (4 groups) + SiLU,
and a sinusoidal timestep embedding projected into every block. The
architecture never depends on the conditioning mode, so the parameter
count is identical across all of them.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..numerics import (
    Tensor,
    add,
    avg_pool2,
    concat,
    conv2d,
    group_norm,
    kaiming_uniform,
    silu,
    upsample_nearest2,
)

__all__ = ["DenoiserNet", "sinusoidal_embedding"]

GROUPS = 4
SIN_DIM = 32
TEMB_DIM = 128


def sinusoidal_embedding(t, dim=SIN_DIM):
    """Classic sin/cos features of integer timesteps, shape (B, dim)."""
    t = np.asarray(t, dtype=np.float32).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float32)
                   / max(half - 1, 1))
    args = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


class DenoiserNet:
    """Epsilon-prediction network over spatially extended latents."""

    def __init__(self, in_channels=9, out_channels=4, base_width=32,
                 levels=3, blocks_per_level=2, seed=0):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.base_width = base_width
        self.levels = levels
        self.blocks_per_level = blocks_per_level
        self.widths = [base_width * (2 ** i) for i in range(levels)]
        self._rng = np.random.default_rng(seed)
        self.params = {}
        self._build()

    # -- construction -------------------------------------------------

    def _param(self, name, value):
        self.params[name] = Tensor(value, requires_grad=True)

    def _conv(self, name, cin, cout, k):
        self._param(name + ".w", kaiming_uniform((cout, cin, k, k), self._rng))
        self._param(name + ".b", np.zeros(cout, dtype=np.float32))

    def _gn(self, name, c):
        self._param(name + ".g", np.ones(c, dtype=np.float32))
        self._param(name + ".b", np.zeros(c, dtype=np.float32))

    def _resblock(self, name, cin, cout):
        self._gn(name + ".gn1", cin)
        self._conv(name + ".conv1", cin, cout, 3)
        self._conv(name + ".temb", TEMB_DIM, cout, 1)
        self._gn(name + ".gn2", cout)
        self._conv(name + ".conv2", cout, cout, 3)
        if cin != cout:
            self._conv(name + ".skip", cin, cout, 1)

    def _build(self):
        w = self.widths
        self._conv("temb.fc1", SIN_DIM, TEMB_DIM, 1)
        self._conv("temb.fc2", TEMB_DIM, TEMB_DIM, 1)
        self._conv("stem", self.in_channels, w[0], 3)
        cin = w[0]
        for lvl in range(self.levels):
            for b in range(self.blocks_per_level):
                self._resblock("enc%d.b%d" % (lvl, b), cin, w[lvl])
                cin = w[lvl]
        for lvl in range(self.levels - 2, -1, -1):
            cin = cin + w[lvl]  # skip concat
            for b in range(self.blocks_per_level):
                self._resblock("dec%d.b%d" % (lvl, b), cin, w[lvl])
                cin = w[lvl]
        self._gn("head.gn", w[0])
        self._conv("head.conv", w[0], self.out_channels, 3)

    # -- forward ------------------------------------------------------

    def _run_resblock(self, name, x, temb):
        p = self.params
        h = group_norm(x, p[name + ".gn1.g"], p[name + ".gn1.b"], GROUPS)
        h = silu(h)
        h = conv2d(h, p[name + ".conv1.w"], p[name + ".conv1.b"], padding=1)
        tproj = conv2d(temb, p[name + ".temb.w"], p[name + ".temb.b"])
        h = add(h, tproj)
        h = group_norm(h, p[name + ".gn2.g"], p[name + ".gn2.b"], GROUPS)
        h = silu(h)
        h = conv2d(h, p[name + ".conv2.w"], p[name + ".conv2.b"], padding=1)
        if name + ".skip.w" in p:
            x = conv2d(x, p[name + ".skip.w"], p[name + ".skip.b"])
        return add(h, x)

    def forward(self, x, t):
        """x: (B, 9, h, w) array or Tensor; t: (B,) integer timesteps."""
        if not isinstance(x, Tensor):
            x = Tensor(x)
        b, c, h, w = x.shape
        if c != self.in_channels:
            raise ShapeError("expected %d input channels, got %s"
                             % (self.in_channels, x.shape))
        down_factor = 2 ** (self.levels - 1)
        if h % down_factor or w % down_factor:
            raise ShapeError("spatial dims %s must divide by %d"
                             % ((h, w), down_factor))
        p = self.params

        emb = Tensor(sinusoidal_embedding(t)[:, :, None, None])
        emb = conv2d(emb, p["temb.fc1.w"], p["temb.fc1.b"])
        emb = silu(emb)
        emb = conv2d(emb, p["temb.fc2.w"], p["temb.fc2.b"])
        emb = silu(emb)

        hcur = conv2d(x, p["stem.w"], p["stem.b"], padding=1)
        skips = []
        for lvl in range(self.levels):
            for blk in range(self.blocks_per_level):
                hcur = self._run_resblock("enc%d.b%d" % (lvl, blk), hcur, emb)
            if lvl < self.levels - 1:
                skips.append(hcur)
                hcur = avg_pool2(hcur)
        for lvl in range(self.levels - 2, -1, -1):
            hcur = upsample_nearest2(hcur)
            hcur = concat([hcur, skips.pop()], axis=1)
            for blk in range(self.blocks_per_level):
                hcur = self._run_resblock("dec%d.b%d" % (lvl, blk), hcur, emb)
        hcur = group_norm(hcur, p["head.gn.g"], p["head.gn.b"], GROUPS)
        hcur = silu(hcur)
        return conv2d(hcur, p["head.conv.w"], p["head.conv.b"], padding=1)

    # -- bookkeeping --------------------------------------------------

    def param_count(self):
        return int(sum(p.data.size for p in self.params.values()))

    def state_dict(self):
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, state):
        missing = set(self.params) ^ set(state)
        if missing:
            raise ShapeError("state dict key mismatch: %s" % sorted(missing))
        for k in self.params:
            arr = np.asarray(state[k], dtype=np.float32)
            if arr.shape != self.params[k].data.shape:
                raise ShapeError("param %r shape %s != expected %s"
                                 % (k, arr.shape, self.params[k].data.shape))
            self.params[k] = Tensor(arr, requires_grad=True)
