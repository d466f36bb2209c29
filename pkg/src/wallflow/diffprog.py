"""Minimal reverse-mode autodiff over dense numpy arrays.

Covers exactly the primitives the neural-operator models need: arithmetic
with broadcasting, einsum contractions, n-dimensional FFTs, Hermitian
spectrum projection, gather/scatter for retained Fourier modes, reductions,
trigonometric maps and a smooth GELU activation.

Complex arrays use the conjugate-cotangent convention: for a real loss L and
a complex value z, grad(z) = dL/dRe(z) + i * dL/dIm(z). With that choice the
product rule reads grad(a) = g * conj(b), and the adjoint of an FFT is the
matching inverse transform (scaled per the chosen norm).

Gradients are accumulated in reverse creation order, which is a valid
topological order of the recorded DAG and makes backward deterministic.
"""

from __future__ import annotations

import itertools

import numpy as np

_COUNTER = itertools.count()


class DiffArray:
    """A dense array with an optional gradient slot and tape node."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward", "_id")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._id = next(_COUNTER)

    # -- basic protocol ------------------------------------------------

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def __repr__(self):
        return f"DiffArray(shape={self.shape}, dtype={self.dtype}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.values)

    def _needs_tape(self) -> bool:
        return self.requires_grad or self._backward is not None or bool(self._parents)

    # -- operators -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, DiffArray):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)


def as_diff(x) -> DiffArray:
    return x if isinstance(x, DiffArray) else DiffArray(np.asarray(x))


def _make(values, parents, backward) -> DiffArray:
    out = DiffArray(values)
    if any(p._needs_tape() for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic ------------------------------------------------------------


def add(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.values + b.values

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), backward)


def sub(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.values - b.values

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, (a, b), backward)


def mul(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.values * b.values
    av, bv = a.values, b.values

    def backward(g):
        return (_unbroadcast(g * np.conj(bv), a.shape),
                _unbroadcast(g * np.conj(av), b.shape))

    return _make(out, (a, b), backward)


def power(a, p) -> DiffArray:
    """Elementwise power with a static (non-differentiated) exponent."""
    a = as_diff(a)
    out = a.values**p
    av = a.values

    def backward(g):
        return (g * p * av ** (p - 1),)

    return _make(out, (a,), backward)


def absolute(a) -> DiffArray:
    a = as_diff(a)
    if np.iscomplexobj(a.values):
        raise TypeError("absolute() supports real arrays only")
    out = np.abs(a.values)
    sgn = np.sign(a.values)

    def backward(g):
        return (g * sgn,)

    return _make(out, (a,), backward)


def sin(a) -> DiffArray:
    a = as_diff(a)
    c = np.cos(a.values)

    def backward(g):
        return (g * c,)

    return _make(np.sin(a.values), (a,), backward)


def cos(a) -> DiffArray:
    a = as_diff(a)
    s = np.sin(a.values)

    def backward(g):
        return (-g * s,)

    return _make(np.cos(a.values), (a,), backward)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a) -> DiffArray:
    """Smooth activation 0.5*x*(1 + tanh(c*(x + 0.044715*x^3)))."""
    a = as_diff(a)
    x = a.values
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)
    dinner = _GELU_C * (1.0 + 3.0 * 0.044715 * x**2)
    deriv = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner

    def backward(g):
        return (g * deriv,)

    return _make(out, (a,), backward)


# -- contractions -----------------------------------------------------------


def einsum(spec: str, a, b) -> DiffArray:
    """Two-operand einsum with exact adjoints.

    Every index of each operand must appear in the output or in the other
    operand (true for all channel-mixing contractions used here).
    """
    a, b = as_diff(a), as_diff(b)
    lhs, out_sub = spec.replace(" ", "").split("->")
    sub_a, sub_b = lhs.split(",")
    for s, name in ((sub_a, "first"), (sub_b, "second")):
        lonely = set(s) - set(out_sub) - set(sub_b if name == "first" else sub_a)
        if lonely:
            raise ValueError(f"einsum indices {lonely} appear only in the {name} operand")
    out = np.einsum(spec, a.values, b.values)
    av, bv = a.values, b.values

    def backward(g):
        ga = np.einsum(f"{out_sub},{sub_b}->{sub_a}", g, np.conj(bv))
        gb = np.einsum(f"{sub_a},{out_sub}->{sub_b}", np.conj(av), g)
        return ga, gb

    return _make(out, (a, b), backward)


def matmul(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ValueError("matmul expects 2D operands; use einsum otherwise")
    return einsum("ij,jk->ik", a, b)


# -- reductions and shaping --------------------------------------------------


def total_sum(a, axis=None) -> DiffArray:
    a = as_diff(a)
    out = a.values.sum(axis=axis)
    shape = a.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        gx = np.expand_dims(g, axis)
        return (np.broadcast_to(gx, shape).copy(),)

    return _make(out, (a,), backward)


def mean(a, axis=None) -> DiffArray:
    a = as_diff(a)
    n = a.values.size if axis is None else a.values.shape[axis]
    return mul(total_sum(a, axis=axis), 1.0 / n)


def reshape(a, shape) -> DiffArray:
    a = as_diff(a)
    old = a.shape

    def backward(g):
        return (g.reshape(old),)

    return _make(a.values.reshape(shape), (a,), backward)


def concat(arrays, axis: int = 0) -> DiffArray:
    arrays = [as_diff(x) for x in arrays]
    out = np.concatenate([x.values for x in arrays], axis=axis)
    sizes = [x.values.shape[axis] for x in arrays]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(arrays), backward)


def take(a, idx) -> DiffArray:
    """Static indexing/gather; adjoint scatter-adds into the input shape."""
    a = as_diff(a)
    out = a.values[idx]
    shape, dtype = a.shape, a.dtype

    def backward(g):
        gx = np.zeros(shape, dtype=g.dtype if np.iscomplexobj(g) else dtype)
        np.add.at(gx, idx, g)
        return (gx,)

    return _make(out, (a,), backward)


def scatter(a, shape, idx) -> DiffArray:
    """Place a into zeros(shape) at static indices; adjoint gathers."""
    a = as_diff(a)

    def backward(g):
        return (g[idx],)

    out = np.zeros(shape, dtype=a.dtype)
    out[idx] = a.values
    return _make(out, (a,), backward)


def roll(a, shift: int, axis: int) -> DiffArray:
    """Periodic shift; the adjoint is the opposite shift."""
    a = as_diff(a)

    def backward(g):
        return (np.roll(g, -shift, axis=axis),)

    return _make(np.roll(a.values, shift, axis=axis), (a,), backward)


# -- spectral ops ------------------------------------------------------------

_FFT_SCALE = {"backward": None, "ortho": None, "forward": None}


def _fft_sizes(shape, axes):
    n = 1
    for ax in axes:
        n *= shape[ax]
    return n


def fftn(a, axes, norm: str = "backward") -> DiffArray:
    a = as_diff(a)
    axes = tuple(axes)
    was_real = not np.iscomplexobj(a.values)
    out = np.fft.fftn(a.values, axes=axes, norm=norm)
    nfft = _fft_sizes(a.shape, axes)

    def backward(g):
        if norm == "backward":
            gx = np.fft.ifftn(g, axes=axes) * nfft
        elif norm == "ortho":
            gx = np.fft.ifftn(g, axes=axes, norm="ortho")
        elif norm == "forward":
            gx = np.fft.ifftn(g, axes=axes)  # (1/N) F^H
        else:
            raise ValueError(f"unknown norm {norm!r}")
        return (gx.real if was_real else gx,)

    return _make(out, (a,), backward)


def ifftn(a, axes, norm: str = "backward") -> DiffArray:
    a = as_diff(a)
    axes = tuple(axes)
    was_real = not np.iscomplexobj(a.values)
    out = np.fft.ifftn(a.values, axes=axes, norm=norm)
    nfft = _fft_sizes(a.shape, axes)

    def backward(g):
        if norm == "backward":
            gx = np.fft.fftn(g, axes=axes) / nfft
        elif norm == "ortho":
            gx = np.fft.fftn(g, axes=axes, norm="ortho")
        elif norm == "forward":
            gx = np.fft.fftn(g, axes=axes)
        else:
            raise ValueError(f"unknown norm {norm!r}")
        return (gx.real if was_real else gx,)

    return _make(out, (a,), backward)


def conj_mirror(z: np.ndarray, axes) -> np.ndarray:
    """conj(Z(-k)) on the given axes (index negation modulo length)."""
    out = z
    for ax in axes:
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return np.conj(out)


def hermitianize(a, axes) -> DiffArray:
    """Project a spectrum onto Hermitian symmetry along the given axes.

    The inverse FFT of the result is real up to roundoff. Self-adjoint under
    the real inner product, so the backward pass applies the same map.
    """
    a = as_diff(a)
    axes = tuple(axes)
    out = 0.5 * (a.values + conj_mirror(a.values, axes))

    def backward(g):
        return (0.5 * (g + conj_mirror(g, axes)),)

    return _make(out, (a,), backward)


def real(a) -> DiffArray:
    a = as_diff(a)
    was_complex = np.iscomplexobj(a.values)

    def backward(g):
        return (g.astype(np.complex128) if was_complex else g,)

    return _make(a.values.real.copy() if was_complex else a.values, (a,), backward)


# -- backward driver ---------------------------------------------------------


def backward(root: DiffArray):
    """Reverse-mode sweep from a scalar root; fills .grad on leaf parameters."""
    if root.values.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    if root._backward is None and not root.requires_grad:
        raise RuntimeError("backward called on an array with no recorded graph")

    # Collect the reachable subgraph; reverse creation order is topological.
    seen = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node._id in seen:
            continue
        seen[node._id] = node
        stack.extend(node._parents)
    order = sorted(seen.values(), key=lambda n: n._id, reverse=True)

    grads = {root._id: np.ones_like(root.values)}
    for node in order:
        g = grads.pop(node._id, None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent._needs_tape():
                continue
            if parent._id in grads:
                grads[parent._id] = grads[parent._id] + pg
            else:
                grads[parent._id] = pg


# -- parameters and the optimizer --------------------------------------------


class ParameterStore:
    """Named trainable arrays plus Adam moment state."""

    def __init__(self):
        self.params: dict[str, DiffArray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, values: np.ndarray) -> DiffArray:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = DiffArray(np.asarray(values), requires_grad=True)
        self.params[name] = p
        self._m[name] = np.zeros_like(p.values)
        self._v[name] = np.zeros(p.values.shape, dtype=np.float64)
        return p

    def __getitem__(self, name: str) -> DiffArray:
        return self.params[name]

    def names(self):
        return list(self.params.keys())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def set_trainable(self, flag: bool):
        for p in self.params.values():
            p.requires_grad = flag

    def n_scalars(self) -> int:
        """Trainable scalar count; complex entries count twice."""
        total = 0
        for p in self.params.values():
            total += p.values.size * (2 if np.iscomplexobj(p.values) else 1)
        return total

    def adam_step(self, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                  allow_unused: bool = False):
        """Standard Adam with bias correction; complex parameters use
        elementwise |g|^2 second moments.

        A missing gradient is an error unless allow_unused is set (losses
        that legitimately touch only part of a model opt in explicitly).
        """
        b1, b2 = betas
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            if not p.requires_grad:
                continue
            if p.grad is None:
                if allow_unused:
                    continue
                raise RuntimeError(f"parameter {name!r} has no gradient")
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * np.conj(g)).real
            mhat = m / (1.0 - b1**t)
            vhat = v / (1.0 - b2**t)
            p.values = p.values - lr * mhat / (np.sqrt(vhat) + eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flat view for checkpointing: parameters and optimizer moments."""
        out = {}
        for name, p in self.params.items():
            out[f"param/{name}"] = p.values
            out[f"adam_m/{name}"] = self._m[name]
            out[f"adam_v/{name}"] = self._v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], step_count: int = 0):
        for name, p in self.params.items():
            p.values = np.array(arrays[f"param/{name}"])
            self._m[name] = np.array(arrays[f"adam_m/{name}"])
            self._v[name] = np.array(arrays[f"adam_v/{name}"]).real.astype(np.float64)
        self.step_count = step_count
