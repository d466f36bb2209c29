import numpy as np
import pytest

from wallflow import fieldops as fo
from wallflow.grid import build_grid, wavenumbers

from conftest import random_mac_fields
import oracles


def test_divergence_uniform_flow(tiny_grid):
    g = tiny_grid
    u = np.ones(fo.expected_shape("u", g))
    v = np.zeros(fo.expected_shape("v", g))
    w = np.zeros(fo.expected_shape("w", g))
    assert np.max(np.abs(fo.divergence(u, v, w, g))) == 0.0


def test_divergence_linear_field_interior(tiny_grid):
    g = tiny_grid
    xf = np.arange(g.nx) * g.dx
    u = np.broadcast_to(xf[:, None, None], fo.expected_shape("u", g)).copy()
    v = np.broadcast_to(-g.y_nodes[None, :, None], fo.expected_shape("v", g)).copy()
    w = np.zeros(fo.expected_shape("w", g))
    div = fo.divergence(u, v, w, g)
    # interior in x (the wrap column sees the sawtooth jump)
    assert np.max(np.abs(div[1:-1, :, :])) < 1e-12


def test_divergence_of_discrete_curl(stretched_grid, rng):
    g = stretched_grid
    psi_x = rng.standard_normal((g.nx, g.ny, g.nz))
    psi_y = rng.standard_normal((g.nx, g.ncy, g.nz))
    psi_z = rng.standard_normal((g.nx, g.ny, g.nz))
    psi_x[:, 0, :] = psi_x[:, -1, :] = 0.0
    psi_z[:, 0, :] = psi_z[:, -1, :] = 0.0
    dyc = g.dy_cells[None, :, None]
    u = (psi_z[:, 1:, :] - psi_z[:, :-1, :]) / dyc - (np.roll(psi_y, -1, 2) - psi_y) / g.dz
    v = (np.roll(psi_x, -1, 2) - psi_x) / g.dz - (np.roll(psi_z, -1, 0) - psi_z) / g.dx
    w = (np.roll(psi_y, -1, 0) - psi_y) / g.dx - (psi_x[:, 1:, :] - psi_x[:, :-1, :]) / dyc
    div = fo.divergence(u, v, w, g)
    assert np.max(np.abs(div)) < 1e-12 * max(np.max(np.abs(u)), 1.0)


def test_divergence_integral_equals_boundary_flux(stretched_grid, rng):
    g = stretched_grid
    u, v, w = random_mac_fields(g, rng)
    v[:, 0, :] = rng.standard_normal((g.nx, g.nz))
    v[:, -1, :] = rng.standard_normal((g.nx, g.nz))
    div = fo.divergence(u, v, w, g)
    vol_integral = float((div * g.cell_volumes()[None, :, None]).sum())
    boundary = float((v[:, -1, :].sum() - v[:, 0, :].sum()) * g.dx * g.dz)
    assert vol_integral == pytest.approx(boundary, abs=1e-12 * abs(boundary) + 1e-12)


def test_divergence_grid_mismatch(tiny_grid, stretched_grid, rng):
    u, v, w = random_mac_fields(tiny_grid, rng)
    with pytest.raises(ValueError):
        fo.divergence(u, v, w, stretched_grid)


def test_advect_uniform_flow_is_zero(tiny_grid):
    g = tiny_grid
    u = np.full(fo.expected_shape("u", g), 0.7)
    v = np.zeros(fo.expected_shape("v", g))
    w = np.zeros(fo.expected_shape("w", g))
    for comp in ("u", "v", "w"):
        t = fo.advect(u, v, w, g, comp)
        assert np.max(np.abs(t)) < 1e-14
        t2 = fo.advect(u, v, w, g, comp, form="advective")
        assert np.max(np.abs(t2)) < 1e-14


def test_advect_linear_shear_by_constant_v():
    # u(y) = y advected by constant v: tendency -v du/dy = -c at interior.
    # A hand stencil on the uniform grid gives exactly -c away from walls.
    g = build_grid(8, 17, 8, 1.0, 1.0, 1e-7)
    c = 0.3
    u = np.broadcast_to(g.y_centers[None, :, None], fo.expected_shape("u", g)).copy()
    v = np.full(fo.expected_shape("v", g), c)
    w = np.zeros(fo.expected_shape("w", g))
    t = fo.advect(u, v, w, g, "u")
    interior = t[:, 2:-2, :]
    assert np.max(np.abs(interior + c)) < 1e-12


def test_advect_matches_loop_oracle(stretched_grid, rng):
    g = stretched_grid
    u, v, w = random_mac_fields(g, rng)
    got = fo.advect(u, v, w, g, "u")
    want = oracles.advect_u_loops(u, v, w, g)
    assert np.max(np.abs(got - want)) < 1e-12 * max(1.0, np.max(np.abs(want)))


def test_laplacian_linear_in_y_is_zero(stretched_grid):
    g = stretched_grid
    f = np.broadcast_to(g.y_centers[None, :, None], fo.expected_shape("u", g)).copy()
    # interior only: the wall rows see the no-slip boundary value, where a
    # linear profile with nonzero wall value is not the no-slip extension
    lap = fo.laplacian(f, g, "u")
    assert np.max(np.abs(lap[:, 1:-1, :])) < 1e-10


def test_laplacian_quadratic_convergence(rng):
    # Conservative stencil on the smooth tanh map: second order under
    # refinement, measured on f = y^2 where the answer is exactly 2.
    errs = []
    for ny in (33, 65, 129):
        g = build_grid(8, ny, 8, 1.0, 1.0, 1.8)
        f = np.broadcast_to((g.y_centers**2)[None, :, None],
                            fo.expected_shape("u", g)).copy()
        lap = fo.laplacian(f, g, "u", wall_kind="freeslip")
        # freeslip would zero wall flux; use interior rows only
        err = np.max(np.abs(lap[:, 2:-2, :] - 2.0))
        errs.append(err)
    order = np.log2(errs[1] / errs[2])
    assert order >= 1.9


def test_laplacian_spectral_identity(tiny_grid):
    g = tiny_grid
    _, k2 = wavenumbers(g.nx, g.lx)
    xf = np.arange(g.nx) * g.dx
    f = np.broadcast_to(np.sin(2 * np.pi * xf / g.lx)[:, None, None],
                        fo.expected_shape("u", g)).copy()
    lap = fo.laplacian(f, g, "u", wall_kind="freeslip")
    assert np.max(np.abs(lap + k2[1] * f)) < 1e-10


def test_laplacian_parabola_exact_on_uniform_grid(tiny_grid):
    # Quadratic wall flux makes the no-slip parabola stencil-exact,
    # including the wall rows.
    g = tiny_grid
    prof = 1.5 * g.y_centers * (2.0 - g.y_centers)
    f = np.broadcast_to(prof[None, :, None], fo.expected_shape("u", g)).copy()
    lap = fo.laplacian(f, g, "u")
    assert np.max(np.abs(lap + 3.0)) < 1e-10


def test_operators_linear(stretched_grid, rng):
    g = stretched_grid
    u1, v1, w1 = random_mac_fields(g, rng)
    u2, v2, w2 = random_mac_fields(g, rng)
    a, b = 1.7, -0.4
    for op in (lambda u, v, w: fo.divergence(u, v, w, g),
               lambda u, v, w: fo.laplacian(u, g, "u")):
        lhs = op(a * u1 + b * u2, a * v1 + b * v2, a * w1 + b * w2)
        rhs = a * op(u1, v1, w1) + b * op(u2, v2, w2)
        assert np.max(np.abs(lhs - rhs)) < 1e-11 * max(1.0, np.max(np.abs(rhs)))


def test_integration_by_parts(stretched_grid, rng):
    # <div u, p> + <u, grad p> equals the wall boundary term exactly.
    g = stretched_grid
    u, v, w = random_mac_fields(g, rng)
    v[:, 0, :] = rng.standard_normal((g.nx, g.nz))
    v[:, -1, :] = rng.standard_normal((g.nx, g.nz))
    p = rng.standard_normal(fo.expected_shape("p", g))
    vols = g.cell_volumes()[None, :, None]
    div_term = float((fo.divergence(u, v, w, g) * p * vols).sum())
    gx, gy, gz = fo.grad_p(p, g)
    vol_u = g.dx * g.dz * g.dy_cells[None, :, None]
    vol_v = g.dx * g.dz * g.h_centers[None, :, None]
    grad_term = float((u * gx * vol_u).sum() + (v[:, 1:-1, :] * gy * vol_v).sum()
                      + (w * gz * vol_u).sum())
    # boundary term: wall-normal flux times adjacent-cell pressure
    bc = float(((v[:, -1, :] * p[:, -1, :]).sum()
                - (v[:, 0, :] * p[:, 0, :]).sum()) * g.dx * g.dz)
    assert div_term + grad_term == pytest.approx(bc, rel=1e-12, abs=1e-11)


def test_fft_xz_roundtrip_and_parseval(rng):
    plane = rng.standard_normal((16, 12))
    sp = fo.fft_xz(plane)
    back = fo.ifft_xz(sp)
    assert np.max(np.abs(back - plane)) < 1e-13
    assert (np.abs(sp.values) ** 2).sum() / plane.size == pytest.approx(
        (plane**2).sum(), rel=1e-12)


def test_fft_xz_impulse_and_single_mode():
    plane = np.zeros((8, 8))
    plane[0, 0] = 1.0
    sp = fo.fft_xz(plane)
    assert np.allclose(np.abs(sp.values), 1.0)
    x = np.arange(8) / 8
    mode = np.cos(2 * np.pi * x)[:, None] * np.ones((1, 8))
    spm = fo.fft_xz(mode).values
    mags = np.abs(spm)
    assert mags[1, 0] == pytest.approx(32.0)
    mags[1, 0] = mags[-1, 0] = 0.0
    assert np.max(mags) < 1e-12


def test_fft_xz_size_mismatch():
    sp = fo.SpectralPlane(np.zeros((4, 4), dtype=complex), 8, 8)
    with pytest.raises(ValueError):
        fo.ifft_xz(sp)
    with pytest.raises(ValueError):
        fo.fft_xz(np.zeros((4, 4, 4)))


def test_interpolate_constant_and_linear(tiny_grid):
    g = tiny_grid
    c = np.full(fo.expected_shape("u", g), 2.5)
    assert np.array_equal(fo.interpolate(c, "u", "p", g), c)
    xf = np.arange(g.nx) * g.dx
    xc = xf + 0.5 * g.dx
    u = np.broadcast_to(np.sin(0 * xf)[:, None, None] + xf[:, None, None],
                        fo.expected_shape("u", g)).copy()
    got = fo.interpolate(u, "u", "p", g)
    # linear in x preserved exactly at the centers (interior wrap excluded)
    assert np.max(np.abs(got[:-1] - xc[:-1, None, None])) < 1e-13


def test_interpolate_matches_loop_oracle(tiny_grid, rng):
    g = tiny_grid
    u = rng.standard_normal(fo.expected_shape("u", g))
    assert np.array_equal(fo.interpolate(u, "u", "p", g),
                          oracles.interp_u_to_centers_loops(u))


def test_interpolate_unsupported_pair(tiny_grid, rng):
    u = rng.standard_normal(fo.expected_shape("u", tiny_grid))
    with pytest.raises(ValueError):
        fo.interpolate(u, "u", "w", tiny_grid)


def test_staggered_field_validation(tiny_grid):
    with pytest.raises(ValueError):
        fo.StaggeredField("u", np.zeros((3, 3, 3)), tiny_grid)
    with pytest.raises(ValueError):
        fo.StaggeredField("q", np.zeros(fo.expected_shape("u", tiny_grid)), tiny_grid)
    f = fo.StaggeredField("v", np.zeros(fo.expected_shape("v", tiny_grid)), tiny_grid)
    assert f.component == "v"


def test_convergence_order_manufactured(rng):
    # Grid halving reduces the advection-operator error by ~4 on a smooth
    # manufactured field.
    def run(nx, ny):
        g = build_grid(nx, ny, nx, 2 * np.pi, 2 * np.pi, 1.2)
        xf = np.arange(nx) * g.dx
        xc = xf + g.dx / 2
        zc = (np.arange(nx) + 0.5) * g.dz
        zf = np.arange(nx) * g.dz
        yc, yn = g.y_centers, g.y_nodes
        sy_c = np.sin(np.pi * yc / 2)
        u = np.sin(xf)[:, None, None] * sy_c[None, :, None] * np.ones((1, 1, nx))
        v = np.zeros((nx, ny, nx))
        w = np.cos(zf)[None, None, :] * sy_c[None, :, None] * np.ones((nx, 1, 1))
        got = fo.advect(u, v, w, g, "u")
        # analytic divergence-form tendency for v=0:
        # -(d(uu)/dx + d(wu)/dz)
        x3 = xf[:, None, None]
        z3 = zc[None, None, :]
        y3 = sy_c[None, :, None]
        exact = -(2 * np.sin(x3) * np.cos(x3) * y3**2
                  + np.sin(x3) * y3**2 * -np.sin(z3) * 1.0
                  + 0.0)
        # w u flux: d/dz[cos(z) sy * sin(x) sy] = sin(x) sy^2 * (-sin z)
        return np.max(np.abs(got - exact))

    e1 = run(16, 33)
    e2 = run(32, 65)
    assert e1 / e2 == pytest.approx(4.0, rel=0.35)
