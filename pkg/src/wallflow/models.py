"""Policy and observer models.

Policy: wall pressure -> wall actuation, as a 2D FNO encoder, a
multiplicative-filter stage conditioning on the Reynolds number, and a 2D
FNO decoder whose output is made exactly zero-mean (no net mass injection).
The final projection starts at zero, so a fresh policy emits no actuation.

Observer: (actuation, wall pressure) -> interior velocity. A 2D FNO encoder
produces wall-plane features, conditioned on Re the same way; features are
inflated to 3D by concatenating Fourier positional embeddings of the wall
distance, and three 3D FNO heads decode u, v and w on the collocated
(cell-center) evaluation planes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffprog as dp
from .neuralop import Linear, MFNStack, SpectralConv, pos_embed


@dataclass
class ModelConfig:
    width2d: int = 12
    modes2d: tuple[int, int] = (8, 8)
    enc_blocks: int = 2
    dec_blocks: int = 2
    mfn_layers: int = 3
    use_mfn: bool = True
    width3d: int = 6
    modes3d: tuple[int, int, int] = (6, 6, 6)
    head_blocks: int = 1
    n_pos: int = 8
    observer_inputs: str = "both"  # both | phi | pw

    def to_dict(self) -> dict:
        return {
            "width2d": self.width2d,
            "modes2d": list(self.modes2d),
            "enc_blocks": self.enc_blocks,
            "dec_blocks": self.dec_blocks,
            "mfn_layers": self.mfn_layers,
            "use_mfn": self.use_mfn,
            "width3d": self.width3d,
            "modes3d": list(self.modes3d),
            "head_blocks": self.head_blocks,
            "n_pos": self.n_pos,
            "observer_inputs": self.observer_inputs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["modes2d"] = tuple(d["modes2d"])
        d["modes3d"] = tuple(d["modes3d"])
        return cls(**d)


def _as_batched(x, nsp: int) -> dp.DiffArray:
    a = dp.as_diff(x)
    if a.values.ndim == nsp:
        a = dp.reshape(a, (1,) + a.values.shape)
    return a


class PolicyModel:
    """Wall pressure (rms-normalized) -> zero-mean wall actuation."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator,
                 store: dp.ParameterStore | None = None):
        self.config = config
        self.store = store if store is not None else dp.ParameterStore()
        c = config.width2d
        self.lift = Linear(self.store, "policy.lift", 1, c, rng)
        self.enc = [SpectralConv(self.store, f"policy.enc{i}", c, c,
                                 config.modes2d, rng)
                    for i in range(config.enc_blocks)]
        self.mfn = MFNStack(self.store, "policy.mfn", c, config.mfn_layers, rng) \
            if config.use_mfn else None
        self.dec = [SpectralConv(self.store, f"policy.dec{i}", c, c,
                                 config.modes2d, rng)
                    for i in range(config.dec_blocks)]
        # Zero final projection: an untrained policy applies no control.
        self.proj = Linear(self.store, "policy.proj", c, 1, rng, zero_init=True)

    def forward(self, pw_norm, re_values) -> dp.DiffArray:
        """pw_norm: (batch, nx, nz) or (nx, nz); returns (batch, nx, nz)."""
        x = _as_batched(pw_norm, 2)
        b, nx, nz = x.values.shape
        x = dp.reshape(x, (b, 1, nx, nz))
        h = self.lift(x)
        for blk in self.enc:
            h = dp.gelu(blk(h))
        if self.mfn is not None:
            h = self.mfn(h, re_values)
        for i, blk in enumerate(self.dec):
            h = blk(h)
            if i < len(self.dec) - 1:
                h = dp.gelu(h)
        out = dp.reshape(self.proj(h), (b, nx, nz))
        m = dp.mul(dp.total_sum(out, axis=(1, 2)), 1.0 / (nx * nz))
        return out - dp.reshape(m, (b, 1, 1))


class ObserverModel:
    """(actuation, wall pressure) -> interior velocity on collocated planes."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator,
                 store: dp.ParameterStore | None = None):
        self.config = config
        self.store = store if store is not None else dp.ParameterStore()
        c = config.width2d
        self.n_in = {"both": 2, "phi": 1, "pw": 1}[config.observer_inputs]
        self.lift = Linear(self.store, "observer.lift", self.n_in, c, rng)
        self.enc = [SpectralConv(self.store, f"observer.enc{i}", c, c,
                                 config.modes2d, rng)
                    for i in range(config.enc_blocks)]
        self.mfn = MFNStack(self.store, "observer.mfn", c, config.mfn_layers, rng) \
            if config.use_mfn else None
        c3 = config.width3d
        d_in = c + config.n_pos
        self.heads = {}
        for comp in ("u", "v", "w"):
            lift3 = Linear(self.store, f"observer.{comp}.lift", d_in, c3, rng)
            blocks = [SpectralConv(self.store, f"observer.{comp}.sc{i}", c3, c3,
                                   config.modes3d, rng)
                      for i in range(config.head_blocks)]
            proj = Linear(self.store, f"observer.{comp}.proj", c3, 1, rng)
            self.heads[comp] = (lift3, blocks, proj)

    def encode(self, phi_norm, pw_norm, re_values) -> dp.DiffArray:
        mode = self.config.observer_inputs
        chans = []
        if mode in ("both", "phi"):
            chans.append(_as_batched(phi_norm, 2))
        if mode in ("both", "pw"):
            chans.append(_as_batched(pw_norm, 2))
        b, nx, nz = chans[0].values.shape
        x = dp.concat([dp.reshape(cc, (b, 1, nx, nz)) for cc in chans], axis=1)
        h = self.lift(x)
        for blk in self.enc:
            h = dp.gelu(blk(h))
        if self.mfn is not None:
            h = self.mfn(h, re_values)
        return h

    def forward(self, phi_norm, pw_norm, re_values, y_norm: np.ndarray):
        """Returns dict of (batch, nx, n_planes, nz) DiffArrays for u, v, w.

        y_norm holds the evaluation planes' wall distance scaled to [0, 1].
        The inflation concat([h_c, PosEmb(y)]) followed by each head's linear
        lift is evaluated in split form: the wall-feature half in 2D before
        broadcasting over y, the positional half once per plane set. That is
        the identical affine map at a fraction of the cost.
        """
        h_c = self.encode(phi_norm, pw_norm, re_values)
        b, c, nx, nz = h_c.values.shape
        nyd = len(y_norm)
        pos = pos_embed(np.asarray(y_norm), self.config.n_pos)
        ones_y = np.ones(nyd)
        out = {}
        for comp, (lift3, blocks, proj) in self.heads.items():
            c3 = lift3.c_out
            w_wall = lift3.w[0:c, :]
            w_pos = lift3.w[c:, :]
            h2 = dp.einsum("io,bixz->boxz", w_wall, h_c)
            h = dp.einsum("boxz,y->boxyz", h2, ones_y)
            pos_part = dp.einsum("io,iy->oy", w_pos, pos)
            h = h + dp.reshape(pos_part, (1, c3, 1, nyd, 1))
            h = h + dp.reshape(lift3.b, (1, c3, 1, 1, 1))
            for blk in blocks:
                h = dp.gelu(blk(h))
            out[comp] = dp.reshape(proj(h), (b, nx, nyd, nz))
        return out


def count_parameters(*stores: dp.ParameterStore) -> int:
    """Total trainable scalars across stores (complex entries count as 2)."""
    return sum(s.n_scalars() for s in stores)


def build_models(config: ModelConfig, seed: int):
    """Fresh policy/observer pair with independent parameter stores."""
    rng = np.random.default_rng(seed)
    policy = PolicyModel(config, rng)
    observer = ObserverModel(config, rng)
    return policy, observer
