"""Discrete operators on MAC-staggered channel fields.

Array layout (see grid.GridSpec):

    u: (nx, ny-1, nz)  at (x_face, y_center, z_center)
    v: (nx, ny,   nz)  at (x_center, y_node, z_center), wall rows included
    w: (nx, ny-1, nz)  at (x_center, y_center, z_face)
    p: (nx, ny-1, nz)  at cell centers

x and z are periodic (roll indexing); y walls carry Dirichlet data: zero
tangential velocity for no-slip, prescribed wall-normal velocity in the
v wall rows. Wall viscous fluxes for the tangential components come from
a quadratic fit through (wall value, first cell, second cell), which keeps
the y second difference exact for parabolas on uniform grids and
second-order accurate on smoothly stretched ones.

All operators are pure functions of ndarrays; tendencies follow the sign
convention du/dt = advect(...) + nu * laplacian(...) + forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec

VALID_COMPONENTS = ("u", "v", "w", "p")


@dataclass
class StaggeredField:
    """A field tied to one staggering location of a grid."""

    component: str
    data: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        if self.component not in VALID_COMPONENTS:
            raise ValueError(f"unknown component {self.component!r}")
        want = expected_shape(self.component, self.grid)
        if self.data.shape != want:
            raise ValueError(
                f"component {self.component!r} expects shape {want}, "
                f"got {self.data.shape}"
            )


def expected_shape(component: str, grid: GridSpec) -> tuple[int, int, int]:
    ny = grid.ny if component == "v" else grid.ny - 1
    return (grid.nx, ny, grid.nz)


def _check_shape(name: str, arr: np.ndarray, component: str, grid: GridSpec):
    if arr.shape != expected_shape(component, grid):
        raise ValueError(
            f"{name}: expected {expected_shape(component, grid)} for "
            f"component {component!r}, got {arr.shape}"
        )


# ---------------------------------------------------------------------------
# interpolation helpers


def _theta_nodes(grid: GridSpec) -> np.ndarray:
    """Linear-interp weights taking cell-center data to interior y-nodes."""
    return (grid.y_nodes[1:-1] - grid.y_centers[:-1]) / grid.h_centers


def interp_yc_to_yn(f: np.ndarray, grid: GridSpec, bot, top) -> np.ndarray:
    """y-interpolate a center field to all ny nodes with given wall values.

    Distance-weighted two-point interpolation: exact for fields linear in y.
    """
    nx, _, nz = f.shape
    th = _theta_nodes(grid)[None, :, None]
    out = np.empty((nx, grid.ny, nz), dtype=f.dtype)
    out[:, 1:-1, :] = (1.0 - th) * f[:, :-1, :] + th * f[:, 1:, :]
    out[:, 0, :] = bot
    out[:, -1, :] = top
    return out


def interpolate(f: np.ndarray, from_stag: str, to_stag: str, grid: GridSpec) -> np.ndarray:
    """Two-point interpolation between staggering locations.

    Supported pairs: u->p, v->p, w->p (to cell centers) and p->u, p->w.
    """
    pair = (from_stag, to_stag)
    if pair == ("u", "p"):
        _check_shape("interpolate", f, "u", grid)
        return 0.5 * (f + np.roll(f, -1, axis=0))
    if pair == ("v", "p"):
        _check_shape("interpolate", f, "v", grid)
        return 0.5 * (f[:, :-1, :] + f[:, 1:, :])
    if pair == ("w", "p"):
        _check_shape("interpolate", f, "w", grid)
        return 0.5 * (f + np.roll(f, -1, axis=2))
    if pair == ("p", "u"):
        _check_shape("interpolate", f, "p", grid)
        return 0.5 * (f + np.roll(f, 1, axis=0))
    if pair == ("p", "w"):
        _check_shape("interpolate", f, "p", grid)
        return 0.5 * (f + np.roll(f, 1, axis=2))
    raise ValueError(f"unsupported staggering pair {from_stag!r} -> {to_stag!r}")


# ---------------------------------------------------------------------------
# divergence and pressure gradient


def divergence(u: np.ndarray, v: np.ndarray, w: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Cell-centered divergence of a MAC velocity field."""
    _check_shape("divergence", u, "u", grid)
    _check_shape("divergence", v, "v", grid)
    _check_shape("divergence", w, "w", grid)
    dyc = grid.dy_cells[None, :, None]
    out = (np.roll(u, -1, axis=0) - u) / grid.dx
    out += (v[:, 1:, :] - v[:, :-1, :]) / dyc
    out += (np.roll(w, -1, axis=2) - w) / grid.dz
    return out


def grad_p(p: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pressure gradient at the velocity points.

    Returns (dpdx at u, dpdy at interior v-nodes, dpdz at w); the y part has
    ny-2 rows since wall-normal velocity at the walls is boundary data.
    """
    _check_shape("grad_p", p, "p", grid)
    gx = (p - np.roll(p, 1, axis=0)) / grid.dx
    gy = (p[:, 1:, :] - p[:, :-1, :]) / grid.h_centers[None, :, None]
    gz = (p - np.roll(p, 1, axis=2)) / grid.dz
    return gx, gy, gz


# ---------------------------------------------------------------------------
# wall fluxes for tangential components


def _wall_flux_coeffs(s0: float, s1: float) -> tuple[float, float, float]:
    """Coefficients (cw, c0, c1) of the quadratic-fit derivative at the wall.

    q through (0, fw), (s0, f0), (s1, f1); returns q'(0) weights.
    """
    cw = -(s0 + s1) / (s0 * s1)
    c0 = s1 / (s0 * (s1 - s0))
    c1 = -s0 / (s1 * (s1 - s0))
    return cw, c0, c1


def _tangential_wall_fluxes(f: np.ndarray, grid: GridSpec, wall_kind: str):
    """df/dy at both walls for a y-center field with zero tangential wall value.

    Free-slip walls have zero tangential flux by definition.
    """
    if wall_kind == "freeslip":
        zero = np.zeros_like(f[:, 0, :])
        return zero, zero
    if wall_kind != "noslip":
        raise ValueError(f"unknown wall_kind {wall_kind!r}")
    yc = grid.y_centers
    two_delta = 2.0 * grid.delta
    _, c0, c1 = _wall_flux_coeffs(yc[0], yc[1])
    f_bot = c0 * f[:, 0, :] + c1 * f[:, 1, :]
    _, d0, d1 = _wall_flux_coeffs(two_delta - yc[-1], two_delta - yc[-2])
    # Mirrored coordinate: +y flux at the top is minus the mirrored derivative.
    f_top = -(d0 * f[:, -1, :] + d1 * f[:, -2, :])
    return f_bot, f_top


# ---------------------------------------------------------------------------
# Laplacians


def _lap_xz(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = (np.roll(f, -1, axis=0) - 2.0 * f + np.roll(f, 1, axis=0)) / grid.dx**2
    out += (np.roll(f, -1, axis=2) - 2.0 * f + np.roll(f, 1, axis=2)) / grid.dz**2
    return out


def laplacian(f: np.ndarray, grid: GridSpec, component: str, wall_kind: str = "noslip") -> np.ndarray:
    """Second-order Laplacian at the component's own staggering.

    y uses the conservative flux form (F_{j+1} - F_j) / dy_j for cell-centered
    components with the quadratic wall flux; v uses the node form on its dual
    cells (walls are boundary rows and get no tendency).
    """
    _check_shape("laplacian", f, component, grid)
    if component in ("u", "w", "p"):
        flux = np.empty((f.shape[0], grid.ny, f.shape[2]), dtype=f.dtype)
        flux[:, 1:-1, :] = (f[:, 1:, :] - f[:, :-1, :]) / grid.h_centers[None, :, None]
        fb, ft = _tangential_wall_fluxes(f, grid, wall_kind)
        flux[:, 0, :] = fb
        flux[:, -1, :] = ft
        out = _lap_xz(f, grid)
        out += (flux[:, 1:, :] - flux[:, :-1, :]) / grid.dy_cells[None, :, None]
        return out
    if component == "v":
        dy = grid.dy_cells
        out = _lap_xz(f[:, 1:-1, :], grid)
        hm = dy[:-1][None, :, None]
        hp = dy[1:][None, :, None]
        out += ((f[:, 2:, :] - f[:, 1:-1, :]) / hp - (f[:, 1:-1, :] - f[:, :-2, :]) / hm) / (
            0.5 * (hm + hp)
        )
        return out
    raise ValueError(f"unknown component {component!r}")


# ---------------------------------------------------------------------------
# advection


def advect(
    u: np.ndarray,
    v: np.ndarray,
    w: np.ndarray,
    grid: GridSpec,
    component: str,
    wall_kind: str = "noslip",
    form: str = "divergence",
) -> np.ndarray:
    """Advective tendency -d(u_j q)/dx_j (divergence form, default) or
    -u_j dq/dx_j (advective form) for the requested component q."""
    _check_shape("advect", u, "u", grid)
    _check_shape("advect", v, "v", grid)
    _check_shape("advect", w, "w", grid)
    if form == "divergence":
        fn = {"u": _advect_u_div, "v": _advect_v_div, "w": _advect_w_div}
    elif form == "advective":
        fn = {"u": _advect_u_adv, "v": _advect_v_adv, "w": _advect_w_adv}
    else:
        raise ValueError(f"unknown advection form {form!r}")
    if component not in fn:
        raise ValueError(f"unknown component {component!r}")
    return fn[component](u, v, w, grid, wall_kind)


def _advect_u_div(u, v, w, grid, wall_kind):
    dx, dz = grid.dx, grid.dz
    # d(uu)/dx via cell-centered flux
    uc = 0.5 * (u + np.roll(u, -1, axis=0))
    f1 = uc * uc
    out = -(f1 - np.roll(f1, 1, axis=0)) / dx
    # d(vu)/dy via fluxes on (x_face, y_node) corners
    vbar = 0.5 * (v + np.roll(v, 1, axis=0))
    if wall_kind == "noslip":
        ubar = interp_yc_to_yn(u, grid, 0.0, 0.0)
    else:
        ubar = interp_yc_to_yn(u, grid, u[:, 0, :], u[:, -1, :])
    f2 = vbar * ubar
    out -= (f2[:, 1:, :] - f2[:, :-1, :]) / grid.dy_cells[None, :, None]
    # d(wu)/dz via fluxes on (x_face, z_face) corners
    wbar = 0.5 * (w + np.roll(w, 1, axis=0))
    util = 0.5 * (u + np.roll(u, 1, axis=2))
    f3 = wbar * util
    out -= (np.roll(f3, -1, axis=2) - f3) / dz
    return out


def _advect_w_div(u, v, w, grid, wall_kind):
    dx, dz = grid.dx, grid.dz
    wc = 0.5 * (w + np.roll(w, -1, axis=2))
    f1 = wc * wc
    out = -(f1 - np.roll(f1, 1, axis=2)) / dz
    vbar = 0.5 * (v + np.roll(v, 1, axis=2))
    if wall_kind == "noslip":
        wbar = interp_yc_to_yn(w, grid, 0.0, 0.0)
    else:
        wbar = interp_yc_to_yn(w, grid, w[:, 0, :], w[:, -1, :])
    f2 = vbar * wbar
    out -= (f2[:, 1:, :] - f2[:, :-1, :]) / grid.dy_cells[None, :, None]
    ubar = 0.5 * (u + np.roll(u, 1, axis=2))
    wtil = 0.5 * (w + np.roll(w, 1, axis=0))
    f3 = ubar * wtil
    out -= (np.roll(f3, -1, axis=0) - f3) / dx
    return out


def _advect_v_div(u, v, w, grid, wall_kind):
    """Tendency at interior v-nodes (shape (nx, ny-2, nz))."""
    dx, dz = grid.dx, grid.dz
    if wall_kind == "noslip":
        ubar = interp_yc_to_yn(u, grid, 0.0, 0.0)
        wbar = interp_yc_to_yn(w, grid, 0.0, 0.0)
    else:
        ubar = interp_yc_to_yn(u, grid, u[:, 0, :], u[:, -1, :])
        wbar = interp_yc_to_yn(w, grid, w[:, 0, :], w[:, -1, :])
    vtil_x = 0.5 * (v + np.roll(v, 1, axis=0))
    f1 = ubar * vtil_x
    out = -((np.roll(f1, -1, axis=0) - f1) / dx)[:, 1:-1, :]
    vc = 0.5 * (v[:, :-1, :] + v[:, 1:, :])
    f2 = vc * vc
    out -= (f2[:, 1:, :] - f2[:, :-1, :]) / grid.h_centers[None, :, None]
    vtil_z = 0.5 * (v + np.roll(v, 1, axis=2))
    f3 = wbar * vtil_z
    out -= ((np.roll(f3, -1, axis=2) - f3) / dz)[:, 1:-1, :]
    return out


def _ddy_centers(f: np.ndarray, grid: GridSpec, bot, top) -> np.ndarray:
    """df/dy at y-centers from center data plus wall values (quadratic-exact)."""
    ys = np.concatenate(([0.0], grid.y_centers, [2.0 * grid.delta]))
    nxd, _, nzd = f.shape
    ext = np.empty((nxd, grid.ny + 1, nzd), dtype=f.dtype)
    ext[:, 1:-1, :] = f
    ext[:, 0, :] = bot
    ext[:, -1, :] = top
    return nonuniform_ddy(ext, ys)


def _advect_u_adv(u, v, w, grid, wall_kind):
    dx, dz = grid.dx, grid.dz
    dudx = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2.0 * dx)
    dudz = (np.roll(u, -1, axis=2) - np.roll(u, 1, axis=2)) / (2.0 * dz)
    if wall_kind == "noslip":
        dudy = _ddy_centers(u, grid, 0.0, 0.0)
    else:
        q = interp_yc_to_yn(u, grid, u[:, 0, :], u[:, -1, :])
        dudy = _ddy_centers(u, grid, q[:, 0, :], q[:, -1, :])
    v_at_u = 0.5 * (v[:, :-1, :] + v[:, 1:, :])
    v_at_u = 0.5 * (v_at_u + np.roll(v_at_u, 1, axis=0))
    w_at_u = 0.5 * (w + np.roll(w, -1, axis=2))
    w_at_u = 0.5 * (w_at_u + np.roll(w_at_u, 1, axis=0))
    return -(u * dudx + v_at_u * dudy + w_at_u * dudz)


def _advect_w_adv(u, v, w, grid, wall_kind):
    dx, dz = grid.dx, grid.dz
    dwdx = (np.roll(w, -1, axis=0) - np.roll(w, 1, axis=0)) / (2.0 * dx)
    dwdz = (np.roll(w, -1, axis=2) - np.roll(w, 1, axis=2)) / (2.0 * dz)
    if wall_kind == "noslip":
        dwdy = _ddy_centers(w, grid, 0.0, 0.0)
    else:
        q = interp_yc_to_yn(w, grid, w[:, 0, :], w[:, -1, :])
        dwdy = _ddy_centers(w, grid, q[:, 0, :], q[:, -1, :])
    u_at_w = 0.5 * (u + np.roll(u, -1, axis=0))
    u_at_w = 0.5 * (u_at_w + np.roll(u_at_w, 1, axis=2))
    v_at_w = 0.5 * (v[:, :-1, :] + v[:, 1:, :])
    v_at_w = 0.5 * (v_at_w + np.roll(v_at_w, 1, axis=2))
    return -(u_at_w * dwdx + v_at_w * dwdy + w * dwdz)


def _advect_v_adv(u, v, w, grid, wall_kind):
    dx, dz = grid.dx, grid.dz
    vi = v[:, 1:-1, :]
    dvdx = (np.roll(vi, -1, axis=0) - np.roll(vi, 1, axis=0)) / (2.0 * dx)
    dvdz = (np.roll(vi, -1, axis=2) - np.roll(vi, 1, axis=2)) / (2.0 * dz)
    dvdy = nonuniform_ddy(v, grid.y_nodes)
    if wall_kind == "noslip":
        ubar = interp_yc_to_yn(u, grid, 0.0, 0.0)[:, 1:-1, :]
        wbar = interp_yc_to_yn(w, grid, 0.0, 0.0)[:, 1:-1, :]
    else:
        ubar = interp_yc_to_yn(u, grid, u[:, 0, :], u[:, -1, :])[:, 1:-1, :]
        wbar = interp_yc_to_yn(w, grid, w[:, 0, :], w[:, -1, :])[:, 1:-1, :]
    u_at_v = 0.5 * (ubar + np.roll(ubar, -1, axis=0))
    w_at_v = 0.5 * (wbar + np.roll(wbar, -1, axis=2))
    return -(u_at_v * dvdx + vi * dvdy + w_at_v * dvdz)


# ---------------------------------------------------------------------------
# spectral helpers


@dataclass
class SpectralPlane:
    """Full complex 2D spectrum of a wall-parallel plane."""

    values: np.ndarray
    nx: int
    nz: int


def fft_xz(plane: np.ndarray) -> SpectralPlane:
    """Forward 2D FFT of an (nx, nz) plane."""
    if plane.ndim != 2:
        raise ValueError(f"fft_xz expects a 2D plane, got shape {plane.shape}")
    return SpectralPlane(np.fft.fft2(plane), plane.shape[0], plane.shape[1])


def ifft_xz(sp: SpectralPlane) -> np.ndarray:
    """Inverse of fft_xz; returns the real part."""
    if sp.values.shape != (sp.nx, sp.nz):
        raise ValueError(
            f"spectral plane shape {sp.values.shape} does not match ({sp.nx}, {sp.nz})"
        )
    return np.fft.ifft2(sp.values).real


# ---------------------------------------------------------------------------
# collocated nonuniform stencils (diagnostics and PDE-residual use)


def nonuniform_ddy(f_ext: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """First y-derivative at interior points of an extended array.

    f_ext has values at all positions ys (boundaries included); returns the
    quadratic-exact 3-point derivative at ys[1:-1], along axis 1.
    """
    hm = np.diff(ys)[:-1][None, :, None]
    hp = np.diff(ys)[1:][None, :, None]
    am = -hp / (hm * (hm + hp))
    a0 = (hp - hm) / (hm * hp)
    ap = hm / (hp * (hm + hp))
    return am * f_ext[:, :-2, :] + a0 * f_ext[:, 1:-1, :] + ap * f_ext[:, 2:, :]


def nonuniform_d2dy(f_ext: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Second y-derivative analogue of nonuniform_ddy (quadratic-exact)."""
    hm = np.diff(ys)[:-1][None, :, None]
    hp = np.diff(ys)[1:][None, :, None]
    am = 2.0 / (hm * (hm + hp))
    a0 = -2.0 / (hm * hp)
    ap = 2.0 / (hp * (hm + hp))
    return am * f_ext[:, :-2, :] + a0 * f_ext[:, 1:-1, :] + ap * f_ext[:, 2:, :]


def extend_with_walls(f: np.ndarray, ys: np.ndarray, delta: float, bot, top, bc: str = "dirichlet"):
    """Attach wall planes to a collocated y-sampled field.

    Returns (f_ext, ys_ext) with the wall positions prepended/appended.
    bc='dirichlet' uses the provided wall values; bc='neumann0' builds wall
    values from a zero-derivative quadratic through the first two planes.
    """
    ys_ext = np.concatenate(([0.0], ys, [2.0 * delta]))
    nxd, _, nzd = f.shape
    out = np.empty((nxd, f.shape[1] + 2, nzd), dtype=f.dtype)
    out[:, 1:-1, :] = f
    if bc == "dirichlet":
        out[:, 0, :] = bot
        out[:, -1, :] = top
    elif bc == "neumann0":
        s0, s1 = ys[0], ys[1]
        out[:, 0, :] = (f[:, 0, :] * s1**2 - f[:, 1, :] * s0**2) / (s1**2 - s0**2)
        t0 = 2.0 * delta - ys[-1]
        t1 = 2.0 * delta - ys[-2]
        out[:, -1, :] = (f[:, -1, :] * t1**2 - f[:, -2, :] * t0**2) / (t1**2 - t0**2)
    else:
        raise ValueError(f"unknown bc {bc!r}")
    return out, ys_ext


def ddx_collocated(f: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * dx)


def ddz_collocated(f: np.ndarray, dz: float) -> np.ndarray:
    return (np.roll(f, -1, axis=2) - np.roll(f, 1, axis=2)) / (2.0 * dz)


def d2dx_collocated(f: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(f, -1, axis=0) - 2.0 * f + np.roll(f, 1, axis=0)) / dx**2


def d2dz_collocated(f: np.ndarray, dz: float) -> np.ndarray:
    return (np.roll(f, -1, axis=2) - 2.0 * f + np.roll(f, 1, axis=2)) / dz**2
