"""Fused single-pass kernels for the DNS inner loop.

These reproduce the fieldops discretizations exactly (same stencils, same
wall treatment) but fuse advection + diffusion + forcing into one sweep per
component, which is what makes desk-scale turbulence runs affordable. The
test suite pins them against the fieldops reference to tight tolerances.

All kernels are compiled single-threaded: results are deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import fieldops as fo
from .grid import GridSpec


@njit(cache=True)
def _tend_u(u, v, w, dx, dz, inv_dyc, inv_hc, theta, c0b, c1b, c0t, c1t, nu, forcing,
            freeslip, out):
    nx, ncy, nz = u.shape
    ny = ncy + 1
    inv_dx = 1.0 / dx
    inv_dz = 1.0 / dz
    inv_dx2 = inv_dx * inv_dx
    inv_dz2 = inv_dz * inv_dz
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        im = i - 1 if i > 0 else nx - 1
        for k in range(nz):
            kp = k + 1 if k + 1 < nz else 0
            km = k - 1 if k > 0 else nz - 1
            for j in range(ncy):
                uc = u[i, j, k]
                # x advection: -d(uu)/dx with cell-centered flux
                ucp = 0.5 * (uc + u[ip, j, k])
                ucm = 0.5 * (u[im, j, k] + uc)
                adv = -(ucp * ucp - ucm * ucm) * inv_dx
                # y advection: corner fluxes at nodes j and j+1
                jn = j
                if jn == 0:
                    ub_lo = u[i, 0, k] if freeslip else 0.0
                else:
                    th = theta[jn - 1]
                    ub_lo = (1.0 - th) * u[i, jn - 1, k] + th * u[i, jn, k]
                vb_lo = 0.5 * (v[im, jn, k] + v[i, jn, k])
                jn = j + 1
                if jn == ny - 1:
                    ub_hi = u[i, ncy - 1, k] if freeslip else 0.0
                else:
                    th = theta[jn - 1]
                    ub_hi = (1.0 - th) * u[i, jn - 1, k] + th * u[i, jn, k]
                vb_hi = 0.5 * (v[im, jn, k] + v[i, jn, k])
                adv -= (vb_hi * ub_hi - vb_lo * ub_lo) * inv_dyc[j]
                # z advection: corner fluxes at z-faces k and k+1
                wb_lo = 0.5 * (w[im, j, k] + w[i, j, k])
                ut_lo = 0.5 * (u[i, j, km] + uc)
                wb_hi = 0.5 * (w[im, j, kp] + w[i, j, kp])
                ut_hi = 0.5 * (uc + u[i, j, kp])
                adv -= (wb_hi * ut_hi - wb_lo * ut_lo) * inv_dz
                # viscous
                visc = (u[ip, j, k] - 2.0 * uc + u[im, j, k]) * inv_dx2
                visc += (u[i, j, kp] - 2.0 * uc + u[i, j, km]) * inv_dz2
                if j == 0:
                    flo = 0.0 if freeslip else (c0b * u[i, 0, k] + c1b * u[i, 1, k])
                else:
                    flo = (u[i, j, k] - u[i, j - 1, k]) * inv_hc[j - 1]
                if j == ncy - 1:
                    fhi = 0.0 if freeslip else -(c0t * u[i, ncy - 1, k] + c1t * u[i, ncy - 2, k])
                else:
                    fhi = (u[i, j + 1, k] - u[i, j, k]) * inv_hc[j]
                visc += (fhi - flo) * inv_dyc[j]
                out[i, j, k] = adv + nu * visc + forcing


@njit(cache=True)
def _tend_w(u, v, w, dx, dz, inv_dyc, inv_hc, theta, c0b, c1b, c0t, c1t, nu, freeslip, out):
    nx, ncy, nz = w.shape
    ny = ncy + 1
    inv_dx = 1.0 / dx
    inv_dz = 1.0 / dz
    inv_dx2 = inv_dx * inv_dx
    inv_dz2 = inv_dz * inv_dz
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        im = i - 1 if i > 0 else nx - 1
        for k in range(nz):
            kp = k + 1 if k + 1 < nz else 0
            km = k - 1 if k > 0 else nz - 1
            for j in range(ncy):
                wc = w[i, j, k]
                wcp = 0.5 * (wc + w[i, j, kp])
                wcm = 0.5 * (w[i, j, km] + wc)
                adv = -(wcp * wcp - wcm * wcm) * inv_dz
                jn = j
                if jn == 0:
                    wb_lo = w[i, 0, k] if freeslip else 0.0
                else:
                    th = theta[jn - 1]
                    wb_lo = (1.0 - th) * w[i, jn - 1, k] + th * w[i, jn, k]
                vb_lo = 0.5 * (v[i, jn, km] + v[i, jn, k])
                jn = j + 1
                if jn == ny - 1:
                    wb_hi = w[i, ncy - 1, k] if freeslip else 0.0
                else:
                    th = theta[jn - 1]
                    wb_hi = (1.0 - th) * w[i, jn - 1, k] + th * w[i, jn, k]
                vb_hi = 0.5 * (v[i, jn, km] + v[i, jn, k])
                adv -= (vb_hi * wb_hi - vb_lo * wb_lo) * inv_dyc[j]
                ub_lo = 0.5 * (u[i, j, km] + u[i, j, k])
                wt_lo = 0.5 * (w[im, j, k] + wc)
                ub_hi = 0.5 * (u[ip, j, km] + u[ip, j, k])
                wt_hi = 0.5 * (wc + w[ip, j, k])
                adv -= (ub_hi * wt_hi - ub_lo * wt_lo) * inv_dx
                visc = (w[ip, j, k] - 2.0 * wc + w[im, j, k]) * inv_dx2
                visc += (w[i, j, kp] - 2.0 * wc + w[i, j, km]) * inv_dz2
                if j == 0:
                    flo = 0.0 if freeslip else (c0b * w[i, 0, k] + c1b * w[i, 1, k])
                else:
                    flo = (w[i, j, k] - w[i, j - 1, k]) * inv_hc[j - 1]
                if j == ncy - 1:
                    fhi = 0.0 if freeslip else -(c0t * w[i, ncy - 1, k] + c1t * w[i, ncy - 2, k])
                else:
                    fhi = (w[i, j + 1, k] - w[i, j, k]) * inv_hc[j]
                visc += (fhi - flo) * inv_dyc[j]
                out[i, j, k] = adv + nu * visc


@njit(cache=True)
def _tend_v(u, v, w, dx, dz, inv_dyc, inv_hc, inv_dual, theta, nu, freeslip, out):
    """Tendency at interior v-nodes; out has shape (nx, ny-2, nz)."""
    nx, ny, nz = v.shape
    inv_dx = 1.0 / dx
    inv_dz = 1.0 / dz
    inv_dx2 = inv_dx * inv_dx
    inv_dz2 = inv_dz * inv_dz
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        im = i - 1 if i > 0 else nx - 1
        for k in range(nz):
            kp = k + 1 if k + 1 < nz else 0
            km = k - 1 if k > 0 else nz - 1
            for jn in range(1, ny - 1):
                th = theta[jn - 1]
                vc = v[i, jn, k]
                # x advection: fluxes on x-faces i and i+1
                ub_lo = (1.0 - th) * u[i, jn - 1, k] + th * u[i, jn, k]
                vt_lo = 0.5 * (v[im, jn, k] + vc)
                ub_hi = (1.0 - th) * u[ip, jn - 1, k] + th * u[ip, jn, k]
                vt_hi = 0.5 * (vc + v[ip, jn, k])
                adv = -(ub_hi * vt_hi - ub_lo * vt_lo) * inv_dx
                # y advection: center fluxes above and below the node
                vch = 0.5 * (vc + v[i, jn + 1, k])
                vcl = 0.5 * (v[i, jn - 1, k] + vc)
                adv -= (vch * vch - vcl * vcl) * inv_hc[jn - 1]
                # z advection: fluxes on z-faces k and k+1 (jn is interior,
                # so the w interpolation never touches the wall rows)
                wb_lo = (1.0 - th) * w[i, jn - 1, k] + th * w[i, jn, k]
                wb_hi = (1.0 - th) * w[i, jn - 1, kp] + th * w[i, jn, kp]
                vt_lo = 0.5 * (v[i, jn, km] + vc)
                vt_hi = 0.5 * (vc + v[i, jn, kp])
                adv -= (wb_hi * vt_hi - wb_lo * vt_lo) * inv_dz
                # viscous
                visc = (v[ip, jn, k] - 2.0 * vc + v[im, jn, k]) * inv_dx2
                visc += (v[i, jn, kp] - 2.0 * vc + v[i, jn, km]) * inv_dz2
                visc += ((v[i, jn + 1, k] - vc) * inv_dyc[jn]
                         - (vc - v[i, jn - 1, k]) * inv_dyc[jn - 1]) * inv_dual[jn - 1]
                out[i, jn - 1, k] = adv + nu * visc


@njit(cache=True)
def _divergence(u, v, w, dx, dz, inv_dyc, out):
    nx, ncy, nz = u.shape
    inv_dx = 1.0 / dx
    inv_dz = 1.0 / dz
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        for k in range(nz):
            kp = k + 1 if k + 1 < nz else 0
            for j in range(ncy):
                out[i, j, k] = ((u[ip, j, k] - u[i, j, k]) * inv_dx
                                + (v[i, j + 1, k] - v[i, j, k]) * inv_dyc[j]
                                + (w[i, j, kp] - w[i, j, k]) * inv_dz)


@njit(cache=True)
def _apply_projection(u, v, w, psi, dx, dz, inv_hc):
    """Subtract grad(psi) in place (interior v-nodes only)."""
    nx, ncy, nz = u.shape
    inv_dx = 1.0 / dx
    inv_dz = 1.0 / dz
    for i in range(nx):
        im = i - 1 if i > 0 else nx - 1
        for k in range(nz):
            km = k - 1 if k > 0 else nz - 1
            for j in range(ncy):
                u[i, j, k] -= (psi[i, j, k] - psi[im, j, k]) * inv_dx
                w[i, j, k] -= (psi[i, j, k] - psi[i, j, km]) * inv_dz
            for j in range(1, ncy):
                v[i, j, k] -= (psi[i, j, k] - psi[i, j - 1, k]) * inv_hc[j - 1]


@njit(cache=True)
def _thomas(work, a, wfac, cwfac):
    """In-place tridiagonal sweep over (ny-1, nmodes) mode columns."""
    ncy, nm = work.shape
    for m in range(nm):
        work[0, m] *= wfac[0, m]
    for j in range(1, ncy):
        aj = a[j]
        for m in range(nm):
            work[j, m] = (work[j, m] - aj * work[j - 1, m]) * wfac[j, m]
    for j in range(ncy - 2, -1, -1):
        for m in range(nm):
            work[j, m] -= cwfac[j, m] * work[j + 1, m]


@njit(cache=True)
def _max_advective_rate(u, v, w, dx, dz, inv_dyc):
    nx, ncy, nz = u.shape
    inv_dx = 1.0 / dx
    inv_dz = 1.0 / dz
    rate = 0.0
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        for k in range(nz):
            kp = k + 1 if k + 1 < nz else 0
            for j in range(ncy):
                r = abs(u[i, j, k] + u[ip, j, k]) * 0.5 * inv_dx
                r += abs(v[i, j, k] + v[i, j + 1, k]) * 0.5 * inv_dyc[j]
                r += abs(w[i, j, k] + w[i, j, kp]) * 0.5 * inv_dz
                if r > rate:
                    rate = r
    return rate


@njit(cache=True)
def _combo(a0, x0, b, x, bdt, f, out):
    """out = a0*x0 + b*x + bdt*f over 3D arrays (Shu-Osher stage update)."""
    n0, n1, n2 = x.shape
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                out[i, j, k] = a0 * x0[i, j, k] + b * x[i, j, k] + bdt * f[i, j, k]


@njit(cache=True)
def _combo_nof(a0, x0, b, x, out):
    n0, n1, n2 = x.shape
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                out[i, j, k] = a0 * x0[i, j, k] + b * x[i, j, k]


class KernelOps:
    """Grid-bound wrappers around the compiled kernels."""

    def __init__(self, grid: GridSpec, nu: float, wall_kind: str):
        self.grid = grid
        self.nu = nu
        self.freeslip = wall_kind == "freeslip"
        g = grid
        yc = g.y_centers
        two_delta = 2.0 * g.delta
        _, c0b, c1b = fo._wall_flux_coeffs(yc[0], yc[1])
        _, c0t, c1t = fo._wall_flux_coeffs(two_delta - yc[-1], two_delta - yc[-2])
        self._wall = (c0b, c1b, c0t, c1t)
        self._theta = np.ascontiguousarray(
            (g.y_nodes[1:-1] - g.y_centers[:-1]) / g.h_centers)
        self._inv_dyc = np.ascontiguousarray(1.0 / g.dy_cells)
        self._inv_hc = np.ascontiguousarray(1.0 / g.h_centers)
        self._inv_dual = np.ascontiguousarray(
            2.0 / (g.dy_cells[:-1] + g.dy_cells[1:]))

    def tendencies(self, u, v, w, forcing):
        g = self.grid
        c0b, c1b, c0t, c1t = self._wall
        fu = np.empty_like(u)
        fv = np.empty((g.nx, g.ny - 2, g.nz))
        fw = np.empty_like(w)
        _tend_u(u, v, w, g.dx, g.dz, self._inv_dyc, self._inv_hc, self._theta,
                c0b, c1b, c0t, c1t, self.nu, forcing, self.freeslip, fu)
        _tend_v(u, v, w, g.dx, g.dz, self._inv_dyc, self._inv_hc, self._inv_dual,
                self._theta, self.nu, self.freeslip, fv)
        _tend_w(u, v, w, g.dx, g.dz, self._inv_dyc, self._inv_hc, self._theta,
                c0b, c1b, c0t, c1t, self.nu, self.freeslip, fw)
        return fu, fv, fw

    def divergence(self, u, v, w):
        out = np.empty_like(u)
        _divergence(u, v, w, self.grid.dx, self.grid.dz, self._inv_dyc, out)
        return out

    def apply_projection(self, u, v, w, psi):
        _apply_projection(u, v, w, psi, self.grid.dx, self.grid.dz, self._inv_hc)

    def max_advective_rate(self, u, v, w):
        return _max_advective_rate(u, v, w, self.grid.dx, self.grid.dz, self._inv_dyc)
