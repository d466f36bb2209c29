"""Measured quantities: drag reduction, vortex indicator, kinetic energy,
mean/rms profiles, joint velocity PDFs, and premultiplied energy spectra.

Conventions: spectra are one-sided, per unit wavenumber, so the premultiplied
value at mode m is m * E_m with E_m the per-mode energy; profile statistics
use a numerically stable one-pass (mean/M2) accumulation merged across
snapshots with Chan's parallel update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fieldops as fo
from .dns import FlowState
from .grid import GridSpec, WallUnits

STATS_COLUMNS = ("step", "time", "dpdx", "u_b", "u_tau", "dr", "tke", "cfl",
                 "phi_rms_top", "phi_rms_bot")


def drag_reduction(dpdx_uncontrolled: float, dpdx_controlled: float) -> float:
    """Relative drop of the mean pressure gradient against the baseline."""
    if dpdx_uncontrolled <= 0.0:
        raise ValueError(f"baseline dpdx must be positive, got {dpdx_uncontrolled}")
    return (dpdx_uncontrolled - dpdx_controlled) / dpdx_uncontrolled


# ---------------------------------------------------------------------------
# pointwise fields


def _center_velocity(state: FlowState, grid: GridSpec):
    uc = fo.interpolate(state.u, "u", "p", grid)
    vc = fo.interpolate(state.v, "v", "p", grid)
    wc = fo.interpolate(state.w, "w", "p", grid)
    return uc, vc, wc


def _center_gradients(f: np.ndarray, grid: GridSpec, bot, top):
    dx = fo.ddx_collocated(f, grid.dx)
    dz = fo.ddz_collocated(f, grid.dz)
    ext, ys_ext = fo.extend_with_walls(f, grid.y_centers, grid.delta, bot, top)
    dy = fo.nonuniform_ddy(ext, ys_ext)
    return dx, dy, dz


def q_criterion(state: FlowState, grid: GridSpec) -> np.ndarray:
    """Q = 0.5 * (||Omega||^2 - ||S||^2) of the cell-centered velocity."""
    uc, vc, wc = _center_velocity(state, grid)
    grads = {}
    grads["u"] = _center_gradients(uc, grid, 0.0, 0.0)
    grads["v"] = _center_gradients(vc, grid, state.v[:, 0, :], state.v[:, -1, :])
    grads["w"] = _center_gradients(wc, grid, 0.0, 0.0)
    a = np.empty((3, 3) + uc.shape)
    for i, comp in enumerate(("u", "v", "w")):
        for j in range(3):
            a[i, j] = grads[comp][j]
    om2 = 0.0
    s2 = 0.0
    for i in range(3):
        for j in range(3):
            s2 = s2 + 0.25 * (a[i, j] + a[j, i]) ** 2
            om2 = om2 + 0.25 * (a[i, j] - a[j, i]) ** 2
    return 0.5 * (om2 - s2)


def tke(state: FlowState, grid: GridSpec, fluctuations_only: bool = False) -> float:
    """Quadrature of |u|^2 over the channel with stretched cell volumes."""
    uc, vc, wc = _center_velocity(state, grid)
    if fluctuations_only:
        uc = uc - uc.mean(axis=(0, 2), keepdims=True)
        vc = vc - vc.mean(axis=(0, 2), keepdims=True)
        wc = wc - wc.mean(axis=(0, 2), keepdims=True)
    vols = grid.cell_volumes()[None, :, None]
    return float(np.sum((uc * uc + vc * vc + wc * wc) * vols))


# ---------------------------------------------------------------------------
# profiles


@dataclass
class ProfileSet:
    y: np.ndarray
    y_plus: np.ndarray
    u_mean: np.ndarray
    u_rms: np.ndarray
    v_rms: np.ndarray
    w_rms: np.ndarray
    n_samples: int


class ProfileAccumulator:
    """One-pass xz+time statistics of velocity per wall-normal cell row."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        ncy = grid.ncy
        self.count = 0.0
        self.mean = {c: np.zeros(ncy) for c in ("u", "v", "w")}
        self.m2 = {c: np.zeros(ncy) for c in ("u", "v", "w")}
        self.n_states = 0

    def add(self, state: FlowState):
        uc, vc, wc = _center_velocity(state, self.grid)
        nplane = uc.shape[0] * uc.shape[2]
        for comp, f in (("u", uc), ("v", vc), ("w", wc)):
            pm = f.mean(axis=(0, 2))
            pm2 = ((f - pm[None, :, None]) ** 2).sum(axis=(0, 2))
            self._merge(comp, nplane, pm, pm2)
        self.count += nplane
        self.n_states += 1

    def _merge(self, comp, n2, mean2, m2_2):
        n1 = self.count
        if n1 == 0.0:
            self.mean[comp] = mean2
            self.m2[comp] = m2_2
            return
        delta = mean2 - self.mean[comp]
        n = n1 + n2
        self.mean[comp] += delta * (n2 / n)
        self.m2[comp] += m2_2 + delta**2 * (n1 * n2 / n)

    def merge(self, other: "ProfileAccumulator"):
        """Associative combination of two accumulators."""
        if other.count == 0.0:
            return
        n1, n2 = self.count, other.count
        for comp in ("u", "v", "w"):
            if n1 == 0.0:
                self.mean[comp] = other.mean[comp].copy()
                self.m2[comp] = other.m2[comp].copy()
            else:
                delta = other.mean[comp] - self.mean[comp]
                n = n1 + n2
                self.mean[comp] = self.mean[comp] + delta * (n2 / n)
                self.m2[comp] = self.m2[comp] + other.m2[comp] + delta**2 * (n1 * n2 / n)
        self.count = n1 + n2
        self.n_states += other.n_states

    def profiles(self, wall_units: WallUnits | None = None) -> ProfileSet:
        if self.n_states == 0:
            raise ValueError("no samples accumulated")
        g = self.grid
        y = np.concatenate(([0.0], g.y_centers, [2.0 * g.delta]))

        def pad(arr, wall_val=0.0):
            return np.concatenate(([wall_val], arr, [wall_val]))

        var = {c: self.m2[c] / self.count for c in ("u", "v", "w")}
        y_plus = (np.minimum(y, 2.0 * g.delta - y) * wall_units.u_tau0 / wall_units.nu
                  if wall_units else np.full_like(y, np.nan))
        return ProfileSet(
            y=y,
            y_plus=y_plus,
            u_mean=pad(self.mean["u"]),
            u_rms=pad(np.sqrt(np.maximum(var["u"], 0.0))),
            v_rms=pad(np.sqrt(np.maximum(var["v"], 0.0))),
            w_rms=pad(np.sqrt(np.maximum(var["w"], 0.0))),
            n_samples=self.n_states,
        )


# ---------------------------------------------------------------------------
# joint PDF


def plane_fluctuations(state: FlowState, grid: GridSpec, y_target: float):
    """(u', v') samples at the cell-center plane nearest y_target.

    Returns (u_samples, v_samples, actual_y)."""
    j = int(np.argmin(np.abs(grid.y_centers - y_target)))
    uc = fo.interpolate(state.u, "u", "p", grid)[:, j, :]
    vc = fo.interpolate(state.v, "v", "p", grid)[:, j, :]
    up = (uc - uc.mean()).ravel()
    vp = (vc - vc.mean()).ravel()
    return up, vp, float(grid.y_centers[j])


def joint_pdf(u_samples: np.ndarray, v_samples: np.ndarray, bins: int = 64,
              u_tau0: float = 1.0, extent: float | None = None):
    """2D probability density of (u'/u_tau0, v'/u_tau0).

    Returns (density, u_edges, v_edges); the density integrates to one over
    the bin area.
    """
    u_samples = np.asarray(u_samples).ravel()
    v_samples = np.asarray(v_samples).ravel()
    if u_samples.size == 0:
        raise ValueError("no samples given")
    uu = u_samples / u_tau0
    vv = v_samples / u_tau0
    if extent is None:
        lim_u = float(np.max(np.abs(uu))) or 1.0
        lim_v = float(np.max(np.abs(vv))) or 1.0
    else:
        lim_u = lim_v = extent
    hist, ue, ve = np.histogram2d(
        uu, vv, bins=bins, range=[[-lim_u, lim_u], [-lim_v, lim_v]], density=True)
    return hist, ue, ve


# ---------------------------------------------------------------------------
# spectra


class SpectraAccumulator:
    """Time-averaged one-sided streamwise/spanwise spectra of u' per y row."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.ex = np.zeros((grid.ncy, grid.nx // 2 + 1))
        self.ez = np.zeros((grid.ncy, grid.nz // 2 + 1))
        self.n_states = 0

    def add(self, state: FlowState):
        g = self.grid
        up = state.u - state.u.mean(axis=(0, 2), keepdims=True)
        fx = np.fft.rfft(up, axis=0) / g.nx
        px = (np.abs(fx) ** 2).mean(axis=2)  # (nxr, ncy)
        ex = 2.0 * px
        ex[0] *= 0.5
        if g.nx % 2 == 0:
            ex[-1] *= 0.5
        fz = np.fft.rfft(up, axis=2) / g.nz
        pz = (np.abs(fz) ** 2).mean(axis=0)
        ez = 2.0 * pz
        ez[:, 0] *= 0.5
        if g.nz % 2 == 0:
            ez[:, -1] *= 0.5
        self.ex += ex.T
        self.ez += ez
        self.n_states += 1

    def spectra(self):
        """Per-mode energies E(y, m); sum over m equals the u' variance."""
        if self.n_states == 0:
            raise ValueError("no samples accumulated")
        return self.ex / self.n_states, self.ez / self.n_states

    def premultiplied(self):
        """k * E per unit wavenumber: equals m * E_m at mode m.

        Returns dicts for x and z with modes, wavelengths, and the map
        (ncy, n_modes) over positive modes only.
        """
        ex, ez = self.spectra()
        g = self.grid
        mx = np.arange(1, ex.shape[1])
        mz = np.arange(1, ez.shape[1])
        return (
            {"modes": mx, "wavelength": g.lx / mx, "map": ex[:, 1:] * mx[None, :]},
            {"modes": mz, "wavelength": g.lz / mz, "map": ez[:, 1:] * mz[None, :]},
        )
