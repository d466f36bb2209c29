import numpy as np
import pytest

import wallflow.diffprog as dp


def fd_gradient(build_loss, param, idx, eps=1e-6):
    orig = param.values[idx]
    if np.iscomplexobj(param.values):
        out = np.zeros(2)
        for part, delta in enumerate((eps, 1j * eps)):
            param.values[idx] = orig + delta
            lp = build_loss().item()
            param.values[idx] = orig - delta
            lm = build_loss().item()
            out[part] = (lp - lm) / (2 * eps)
        param.values[idx] = orig
        return out[0] + 1j * out[1]
    param.values[idx] = orig + eps
    lp = build_loss().item()
    param.values[idx] = orig - eps
    lm = build_loss().item()
    param.values[idx] = orig
    return (lp - lm) / (2 * eps)


def check_gradients(build_loss, params, n_probe=5, rtol=1e-6, seed=0):
    loss = build_loss()
    for p in params:
        p.grad = None
    dp.backward(loss)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        assert p.grad is not None
        flat = [tuple(idx) for idx in np.ndindex(p.values.shape)]
        picks = rng.choice(len(flat), size=min(n_probe, len(flat)), replace=False)
        for pi in picks:
            idx = flat[pi]
            fd = fd_gradient(build_loss, p, idx)
            an = p.grad[idx]
            if abs(fd) > 1e-8:
                worst = max(worst, abs(an - fd) / abs(fd))
    assert worst < rtol, f"worst relative gradient error {worst}"


def test_mean_gradient_is_inverse_count():
    x = dp.DiffArray(np.arange(6.0).reshape(2, 3), requires_grad=True)
    dp.backward(dp.mean(x))
    assert np.allclose(x.grad, 1.0 / 6.0)


def test_identity_chain_and_diamond():
    x = dp.DiffArray(np.array(2.0), requires_grad=True)
    y = dp.add(dp.mul(x, 1.0), 0.0)
    dp.backward(y)
    assert x.grad == 1.0
    x.grad = None
    # diamond: z = x*x + x -> dz/dx = 2x + 1
    z = dp.add(dp.mul(x, x), x)
    dp.backward(z)
    assert x.grad == pytest.approx(2 * 2.0 + 1.0)


def test_complex_mul_wirtinger_rule():
    # 2x2 hand计算: L = Re(sum(a*b)); grad_a = conj(b) by the product rule
    a = dp.DiffArray(np.array([[1 + 2j, 0.5 - 1j], [0.3 + 0j, -1 + 1j]]),
                     requires_grad=True)
    bv = np.array([[0.7 - 0.2j, 1.1 + 0.4j], [-0.3 + 0.9j, 0.25 - 0.5j]])
    L = dp.real(dp.total_sum(dp.mul(a, bv)))
    dp.backward(L)
    assert np.allclose(a.grad, np.conj(bv))


@pytest.mark.parametrize("op", ["add", "mul", "einsum", "fft", "ifft", "herm",
                                "sin", "cos", "gelu", "power", "abs", "mean",
                                "concat", "slice", "roll", "scatter"])
def test_primitive_finite_differences(op):
    rng = np.random.default_rng(42)
    x = dp.DiffArray(rng.standard_normal((3, 4)), requires_grad=True)
    y = dp.DiffArray(rng.standard_normal((3, 4)), requires_grad=True)
    zc = dp.DiffArray(rng.standard_normal((3, 4))
                      + 1j * rng.standard_normal((3, 4)), requires_grad=True)

    if op == "add":
        fn = lambda: dp.mean(dp.power(dp.add(x, y), 2.0))
        params = [x, y]
    elif op == "mul":
        fn = lambda: dp.mean(dp.power(dp.mul(x, y), 2.0))
        params = [x, y]
    elif op == "einsum":
        w = dp.DiffArray(rng.standard_normal((4, 5)), requires_grad=True)
        fn = lambda: dp.mean(dp.power(dp.einsum("ij,jk->ik", x, w), 2.0))
        params = [x, w]
    elif op == "fft":
        fn = lambda: dp.mean(dp.power(dp.real(dp.fftn(x, axes=(0, 1))), 2.0))
        params = [x]
    elif op == "ifft":
        fn = lambda: dp.mean(dp.power(dp.real(dp.ifftn(zc, axes=(0, 1))), 2.0))
        params = [zc]
    elif op == "herm":
        fn = lambda: dp.mean(dp.power(dp.real(
            dp.ifftn(dp.hermitianize(zc, axes=(0, 1)), axes=(0, 1))), 2.0))
        params = [zc]
    elif op == "sin":
        fn = lambda: dp.mean(dp.sin(x))
        params = [x]
    elif op == "cos":
        fn = lambda: dp.mean(dp.cos(x))
        params = [x]
    elif op == "gelu":
        fn = lambda: dp.mean(dp.gelu(x))
        params = [x]
    elif op == "power":
        fn = lambda: dp.mean(dp.power(dp.add(dp.mul(x, x), 1.0), 1.5))
        params = [x]
    elif op == "abs":
        fn = lambda: dp.mean(dp.absolute(x))
        params = [x]
    elif op == "mean":
        fn = lambda: dp.power(dp.mean(x, axis=1)[0], 2.0)
        params = [x]
    elif op == "concat":
        fn = lambda: dp.mean(dp.power(dp.concat([x, y], axis=0), 2.0))
        params = [x, y]
    elif op == "slice":
        fn = lambda: dp.mean(dp.power(x[1:, :2], 2.0))
        params = [x]
    elif op == "roll":
        fn = lambda: dp.mean(dp.mul(dp.roll(x, 1, 0), x))
        params = [x]
    elif op == "scatter":
        idx = (np.array([0, 2])[:, None], np.array([1, 3])[None, :])
        small = dp.DiffArray(rng.standard_normal((2, 2)), requires_grad=True)
        fn = lambda: dp.mean(dp.power(dp.scatter(small, (3, 4), idx), 2.0))
        params = [small]
    check_gradients(fn, params)


def test_fft_unitary_inner_product():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(32)
    y = rng.standard_normal(32)
    fx = dp.fftn(dp.DiffArray(x), axes=(0,), norm="ortho").values
    fy = dp.fftn(dp.DiffArray(y), axes=(0,), norm="ortho").values
    assert np.vdot(fx, fy).real == pytest.approx(np.dot(x, y), rel=1e-12)


def test_backward_linearity():
    rng = np.random.default_rng(1)
    x = dp.DiffArray(rng.standard_normal(7), requires_grad=True)
    a, b = 2.0, -3.0

    def g_of(scale1, scale2):
        x.grad = None
        L = dp.add(dp.mul(dp.mean(dp.mul(x, x)), scale1),
                   dp.mul(dp.mean(dp.sin(x)), scale2))
        dp.backward(L)
        return x.grad.copy()

    combined = g_of(a, b)
    only1 = g_of(a, 0.0)
    only2 = g_of(0.0, b)
    assert np.max(np.abs(combined - only1 - only2)) < 1e-12


def test_backward_errors():
    x = dp.DiffArray(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError):
        dp.backward(dp.mul(x, 2.0))  # non-scalar root
    const = dp.DiffArray(np.array(1.0))
    with pytest.raises(RuntimeError):
        dp.backward(const)  # nothing recorded


def test_einsum_rejects_lonely_index():
    a = dp.DiffArray(np.zeros((2, 3)))
    b = dp.DiffArray(np.zeros((4, 5)))
    with pytest.raises(ValueError):
        dp.einsum("ij,kl->il", a, b)


def test_adam_zero_gradient_no_change():
    st = dp.ParameterStore()
    p = st.add("w", np.array([1.0, -2.0]))
    p.grad = np.zeros(2)
    st.adam_step()
    assert np.array_equal(p.values, [1.0, -2.0])


def test_adam_constant_gradient_closed_form():
    # With g constant: mhat = g, vhat = g^2, so each step moves by
    # -lr * g / (|g| + eps) = -lr * sign(g) up to eps rounding.
    st = dp.ParameterStore()
    p = st.add("w", np.array([0.0, 0.0]))
    g = np.array([0.4, -0.02])
    lr = 0.05
    for t in range(5):
        p.grad = g.copy()
        st.adam_step(lr=lr)
    expect = -5 * lr * g / (np.abs(g) + 1e-8)
    assert np.allclose(p.values, expect, rtol=1e-6)


def test_adam_missing_gradient_raises():
    st = dp.ParameterStore()
    st.add("w", np.zeros(2))
    with pytest.raises(RuntimeError):
        st.adam_step()


def test_adam_bitwise_reproducible():
    def run():
        rng = np.random.default_rng(9)
        st = dp.ParameterStore()
        p = st.add("w", rng.standard_normal(6))
        for _ in range(7):
            st.zero_grad()
            L = dp.mean(dp.power(dp.mul(p, p), 2.0))
            dp.backward(L)
            st.adam_step(lr=1e-2)
        return p.values.copy()

    assert np.array_equal(run(), run())


def test_parameter_store_counts_complex_twice():
    st = dp.ParameterStore()
    st.add("a", np.zeros((3, 4)))
    st.add("b", np.zeros((2, 2), dtype=complex))
    assert st.n_scalars() == 12 + 8
    with pytest.raises(ValueError):
        st.add("a", np.zeros(1))
