"""Neural-operator building blocks: spectral convolution layers, the
multiplicative-filter conditioning stack, and Fourier positional features.

Spectral layers keep complex weights on retained low modes only and use the
size-independent FFT normalization (norm='forward'), so the same weights
evaluate consistently on any grid resolving those modes. Output spectra are
projected onto Hermitian symmetry, which keeps the inverse transform real to
roundoff. Negative-frequency slots exist for every axis except the last,
which stores the nonnegative half (its mirror comes from the projection).
"""

from __future__ import annotations

import numpy as np

from . import diffprog as dp

RE_NORMALIZER = 1.0e5  # fixed Reynolds normalization of the filter input


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.standard_normal(shape) * std


class Linear:
    """Pointwise channel-mixing layer applied over any spatial shape."""

    def __init__(self, store: dp.ParameterStore, prefix: str, c_in: int, c_out: int,
                 rng: np.random.Generator, zero_init: bool = False):
        w = np.zeros((c_in, c_out)) if zero_init else xavier(rng, c_in, c_out, (c_in, c_out))
        self.w = store.add(f"{prefix}.w", w)
        self.b = store.add(f"{prefix}.b", np.zeros(c_out))
        self.c_in = c_in
        self.c_out = c_out

    def __call__(self, x: dp.DiffArray) -> dp.DiffArray:
        nsp = x.values.ndim - 2
        sp = "xyzt"[:nsp]
        out = dp.einsum(f"io,bi{sp}->bo{sp}", self.w, x)
        bias = dp.reshape(self.b, (1, self.c_out) + (1,) * nsp)
        return out + bias


class SpectralConv:
    """FNO layer over nsp spatial dims: FFT, per-mode complex mixing on the
    retained corner blocks, Hermitian projection, inverse FFT, plus a
    pointwise linear bypass."""

    def __init__(self, store: dp.ParameterStore, prefix: str, c_in: int, c_out: int,
                 modes: tuple[int, ...], rng: np.random.Generator,
                 truncate: bool = True):
        self.c_in = c_in
        self.c_out = c_out
        self.modes = tuple(modes)
        self.nsp = len(self.modes)
        self.truncate = truncate
        # Symmetric retained set: wavenumbers -(m-1)..(m-1) on every axis but
        # the last, which keeps the nonnegative half 0..m-1 (mirrors come
        # from the Hermitian projection). 2m-1 slots per full axis.
        wshape = (c_in, c_out) + tuple(2 * m - 1 for m in self.modes[:-1]) + (self.modes[-1],)
        scale = 1.0 / (c_in * c_out)
        wv = scale * (rng.standard_normal(wshape) + 1j * rng.standard_normal(wshape))
        self.w = store.add(f"{prefix}.w", wv)
        self.bypass = store.add(
            f"{prefix}.bypass", xavier(rng, c_in, c_out, (c_in, c_out)))
        self.b = store.add(f"{prefix}.b", np.zeros(c_out))

    def init_identity(self):
        """Make the spectral path an exact low-pass filter (square channels).

        The Hermitian projection halves modes whose mirror slot is absent,
        so those get weight 2 to compensate.
        """
        if self.c_in != self.c_out:
            raise ValueError("identity init needs c_in == c_out")
        w = np.zeros(self.w.values.shape, dtype=np.complex128)
        eye = np.eye(self.c_in)
        w[..., 0] = eye[(...,) + (None,) * (self.nsp - 1)]
        if self.modes[-1] > 1:
            w[..., 1:] = 2.0 * eye[(...,) + (None,) * self.nsp]
        self.w.values = w
        self.bypass.values = np.zeros_like(self.bypass.values)
        self.b.values = np.zeros_like(self.b.values)

    def _mode_layout(self, spatial: tuple[int, ...]):
        eff = []
        for m, n in zip(self.modes, spatial):
            me = min(m, n // 2)
            if me < m and not self.truncate:
                raise ValueError(
                    f"mode count {m} exceeds grid Nyquist {n // 2} and "
                    f"truncation is disabled")
            eff.append(me)
        grid_idx = []
        w_idx = []
        for ax, (m, me, n) in enumerate(zip(self.modes, eff, spatial)):
            if ax < self.nsp - 1:
                gi = np.concatenate([np.arange(me), np.arange(n - me + 1, n)])
                wi = np.concatenate([np.arange(me),
                                     np.arange(2 * m - me, 2 * m - 1)])
            else:
                gi = np.arange(me)
                wi = np.arange(me)
            grid_idx.append(gi.astype(np.intp))
            w_idx.append(wi.astype(np.intp))
        return grid_idx, w_idx

    def __call__(self, x: dp.DiffArray) -> dp.DiffArray:
        if x.values.ndim != 2 + self.nsp:
            raise ValueError(
                f"expected (batch, channels, {self.nsp} spatial dims), got {x.shape}")
        if x.values.shape[1] != self.c_in:
            raise ValueError(f"expected {self.c_in} channels, got {x.values.shape[1]}")
        spatial = x.values.shape[2:]
        axes = tuple(range(2, 2 + self.nsp))
        grid_idx, w_idx = self._mode_layout(spatial)
        gsel = (slice(None), slice(None)) + np.ix_(*grid_idx)
        wsel = (slice(None), slice(None)) + np.ix_(*w_idx)

        z = dp.fftn(x, axes=axes, norm="forward")
        zm = z[gsel]
        sp = "xyzt"[: self.nsp]
        y = dp.einsum(f"bi{sp},io{sp}->bo{sp}", zm, self.w[wsel])
        out_shape = (x.values.shape[0], self.c_out) + spatial
        zf = dp.scatter(y, out_shape, gsel)
        zh = dp.hermitianize(zf, axes=axes)
        spec = dp.real(dp.ifftn(zh, axes=axes, norm="forward"))

        lin = dp.einsum(f"io,bi{sp}->bo{sp}", self.bypass, x)
        bias = dp.reshape(self.b, (1, self.c_out) + (1,) * self.nsp)
        return spec + lin + bias


class MFNStack:
    """Multiplicative-filter conditioning on a scalar (the Reynolds number).

    Recursion over L linear layers; layers 2..L are gated by per-channel
    sinusoidal filters sin(omega * re / RE_NORMALIZER + tau), broadcast over
    space. L=1 reduces to a plain linear map.
    """

    def __init__(self, store: dp.ParameterStore, prefix: str, channels: int,
                 n_layers: int, rng: np.random.Generator):
        if n_layers < 1:
            raise ValueError("MFN needs at least one layer")
        self.channels = channels
        self.n_layers = n_layers
        self.w = []
        self.b = []
        for i in range(n_layers):
            self.w.append(store.add(
                f"{prefix}.w{i}", xavier(rng, channels, channels, (channels, channels))))
            self.b.append(store.add(f"{prefix}.b{i}", np.zeros(channels)))
        self.omega = []
        self.tau = []
        for i in range(1, n_layers):
            self.omega.append(store.add(
                f"{prefix}.omega{i}", rng.uniform(0.0, 2.0 * np.pi, channels)))
            self.tau.append(store.add(
                f"{prefix}.tau{i}", rng.uniform(0.0, 2.0 * np.pi, channels)))

    def __call__(self, h: dp.DiffArray, re_values) -> dp.DiffArray:
        nsp = h.values.ndim - 2
        sp = "xyzt"[:nsp]
        re_arr = np.asarray(re_values, dtype=float).reshape(-1, 1) / RE_NORMALIZER
        z = h

        def lin(i, x):
            out = dp.einsum(f"io,bi{sp}->bo{sp}", self.w[i], x)
            bias = dp.reshape(self.b[i], (1, self.channels) + (1,) * nsp)
            return out + bias

        for i in range(self.n_layers - 1):
            gate = dp.sin(dp.reshape(self.omega[i], (1, self.channels)) * re_arr
                          + dp.reshape(self.tau[i], (1, self.channels)))
            gate = dp.reshape(gate, re_arr.shape[:1] + (self.channels,) + (1,) * nsp)
            z = lin(i, z) * gate
        return lin(self.n_layers - 1, z)


def pos_embed(y_norm: np.ndarray, n_features: int) -> np.ndarray:
    """Fourier positional features of normalized wall distance y in [0, 1].

    Feature j (1-based) is cos(2^floor(j/2) * pi * y) for odd j and
    sin(2^floor(j/2) * pi * y) for even j; returns (n_features, len(y)).
    """
    y = np.asarray(y_norm, dtype=float)
    feats = np.empty((n_features, y.size))
    for j in range(1, n_features + 1):
        freq = 2.0 ** (j // 2) * np.pi
        feats[j - 1] = np.sin(freq * y) if j % 2 == 0 else np.cos(freq * y)
    return feats
