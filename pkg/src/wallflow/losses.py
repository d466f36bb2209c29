"""Training objectives: data loss, equation-residual loss, and policy loss.

All three run on the observation grid's collocated planes and are recorded
on the autodiff tape. Fields enter the residual loss nondimensionalized by
the uncontrolled friction velocity and the half-height, so the viscous
coefficient is exactly 1/Re_tau and the mean forcing enters as
dpdx * delta / u_tau0^2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import diffprog as dp
from .grid import WallUnits
from .sampling import ObservationGrid

log = logging.getLogger(__name__)

RMS_FLOOR_FRACTION = 1e-6  # of the bulk velocity


@dataclass
class LossReport:
    l_data: float = 0.0
    l_pde: float = 0.0
    l_policy: float = 0.0
    l_total: float = 0.0
    tke_term: float = 0.0
    actuation_term: float = 0.0


def data_loss(pred: dict, gt: dict, rms_profiles: dict, u_b: float = 1.0) -> dp.DiffArray:
    """Mean squared pointwise error normalized by the per-plane rms profile,
    averaged over the three velocity components.

    pred: component -> DiffArray (batch, nx, n_planes, nz); gt and
    rms_profiles are plain arrays (rms has shape (n_planes,)).
    """
    floor = RMS_FLOOR_FRACTION * u_b
    terms = []
    for comp in ("u", "v", "w"):
        rms = np.asarray(rms_profiles[comp], dtype=float)
        if np.any(rms <= 0.0):
            raise ValueError(f"rms profile for {comp!r} must be positive")
        n_floored = int(np.sum(rms < floor))
        if n_floored:
            log.debug("data_loss: %d rms entries for %s floored at %g",
                      n_floored, comp, floor)
        denom = np.maximum(rms, floor)[None, None, :, None]
        diff = pred[comp] - np.asarray(gt[comp], dtype=float)
        terms.append(dp.mean(dp.power(diff * (1.0 / denom), 2.0)))
    return dp.mul(terms[0] + terms[1] + terms[2], 1.0 / 3.0)


# -- collocated stencils on the observation grid (tape-recorded) -------------


def ddx(f: dp.DiffArray, dx: float) -> dp.DiffArray:
    return (dp.roll(f, -1, 1) - dp.roll(f, 1, 1)) * (1.0 / (2 * dx))


def ddz(f: dp.DiffArray, dz: float) -> dp.DiffArray:
    return (dp.roll(f, -1, 3) - dp.roll(f, 1, 3)) * (1.0 / (2 * dz))


def d2dx(f: dp.DiffArray, dx: float) -> dp.DiffArray:
    return (dp.roll(f, -1, 1) + dp.roll(f, 1, 1) - f * 2.0) * (1.0 / dx**2)


def d2dz(f: dp.DiffArray, dz: float) -> dp.DiffArray:
    return (dp.roll(f, -1, 3) + dp.roll(f, 1, 3) - f * 2.0) * (1.0 / dz**2)


def _y_coeffs(ys_ext: np.ndarray, order: int):
    """Quadratic-exact 3-point coefficients at all interior positions."""
    hm = np.diff(ys_ext)[:-1]
    hp = np.diff(ys_ext)[1:]
    if order == 1:
        am = -hp / (hm * (hm + hp))
        a0 = (hp - hm) / (hm * hp)
        ap = hm / (hp * (hm + hp))
    else:
        am = 2.0 / (hm * (hm + hp))
        a0 = -2.0 / (hm * hp)
        ap = 2.0 / (hp * (hm + hp))
    shape = (1, 1, -1, 1)
    return am.reshape(shape), a0.reshape(shape), ap.reshape(shape)


def _extend_y(f: dp.DiffArray, og: ObservationGrid, bot, top) -> dp.DiffArray:
    """Concatenate wall planes (constant boundary data) along the y axis."""
    b, nx, _, nz = f.values.shape

    def plane(val):
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 0:
            arr = np.full((b, nx, 1, nz), float(arr))
        elif arr.ndim == 2:
            arr = np.broadcast_to(arr[None, :, None, :], (b, nx, 1, nz)).copy()
        elif arr.ndim == 3:
            arr = arr[:, :, None, :]
        return dp.DiffArray(arr)

    return dp.concat([plane(bot), f, plane(top)], axis=2)


def ddy(f: dp.DiffArray, og: ObservationGrid, bot, top) -> dp.DiffArray:
    ys_ext = np.concatenate(([0.0], og.y_planes, [2.0 * og.grid.delta]))
    am, a0, ap = _y_coeffs(ys_ext, order=1)
    ext = _extend_y(f, og, bot, top)
    n = ext.values.shape[2]
    return (ext[:, :, 0:n - 2, :] * am + ext[:, :, 1:n - 1, :] * a0
            + ext[:, :, 2:n, :] * ap)


def d2dy(f: dp.DiffArray, og: ObservationGrid, bot, top) -> dp.DiffArray:
    ys_ext = np.concatenate(([0.0], og.y_planes, [2.0 * og.grid.delta]))
    am, a0, ap = _y_coeffs(ys_ext, order=2)
    ext = _extend_y(f, og, bot, top)
    n = ext.values.shape[2]
    return (ext[:, :, 0:n - 2, :] * am + ext[:, :, 1:n - 1, :] * a0
            + ext[:, :, 2:n, :] * ap)


def _pressure_gradients(p: np.ndarray, og: ObservationGrid):
    """Plain-numpy gradient of the (constant, batched) pressure snapshot."""
    g = og.grid
    gx = (np.roll(p, -1, axis=1) - np.roll(p, 1, axis=1)) / (2.0 * og.dx)
    gz = (np.roll(p, -1, axis=3) - np.roll(p, 1, axis=3)) / (2.0 * og.dz)
    ys = og.y_planes
    # Zero-normal-derivative wall values from a quadratic through the first
    # two planes (the projection's Neumann condition).
    s0, s1 = ys[0], ys[1]
    bot = (p[:, :, 0, :] * s1**2 - p[:, :, 1, :] * s0**2) / (s1**2 - s0**2)
    t0 = 2.0 * g.delta - ys[-1]
    t1 = 2.0 * g.delta - ys[-2]
    top = (p[:, :, -1, :] * t1**2 - p[:, :, -2, :] * t0**2) / (t1**2 - t0**2)
    ext = np.concatenate([bot[:, :, None, :], p, top[:, :, None, :]], axis=2)
    ys_ext = np.concatenate(([0.0], ys, [2.0 * g.delta]))
    am, a0, ap = _y_coeffs(ys_ext, order=1)
    gy = ext[:, :, :-2, :] * am + ext[:, :, 1:-1, :] * a0 + ext[:, :, 2:, :] * ap
    return gx, gy, gz


def pde_loss(pred_t: dict, pred_t2: dict, p_t: np.ndarray, dpdx_t: float,
             dt: float, wall_units: WallUnits, og: ObservationGrid,
             phi_bc: dict | None = None, squared: bool = False) -> dp.DiffArray:
    """Momentum-equation residual of consecutive predicted fields.

    The time derivative is the forward difference between the two
    predictions; the right-hand side (advection, mean forcing, pressure
    gradient from the stored solver field, viscous term with 1/Re_tau) is
    evaluated on the earlier one. L1 by default.
    """
    if p_t is None:
        raise ValueError("pde_loss needs the solver pressure snapshot")
    ut = wall_units.u_tau0
    if ut <= 0.0:
        raise ValueError("wall_units.u_tau0 must be positive")
    g = og.grid
    inv_ut = 1.0 / ut

    def per_sample(x):
        arr = np.asarray(x, dtype=float)
        return arr.reshape(-1, 1, 1, 1) if arr.ndim == 1 else float(arr)

    dt_plus = per_sample(dt) * (ut / g.delta)
    re_tau = wall_units.re_tau

    if phi_bc is None:
        phi_bc = {"bot": 0.0, "top": 0.0}
    bc = {
        "u": (0.0, 0.0),
        "v": (np.asarray(phi_bc["bot"]) * inv_ut, np.asarray(phi_bc["top"]) * inv_ut),
        "w": (0.0, 0.0),
    }

    vel = {c: pred_t[c] * inv_ut for c in ("u", "v", "w")}
    vel2 = {c: pred_t2[c] * inv_ut for c in ("u", "v", "w")}

    p_plus = np.asarray(p_t, dtype=float) * inv_ut**2
    gpx, gpy, gpz = _pressure_gradients(p_plus, og)
    gp = {"u": gpx, "v": gpy, "w": gpz}
    dpdx_plus = per_sample(dpdx_t) * (g.delta / ut**2)

    total = None
    for comp in ("u", "v", "w"):
        f = vel[comp]
        b0, b1 = bc[comp]
        dudt = (vel2[comp] - f) * (1.0 / dt_plus)
        adv = (vel["u"] * ddx(f, og.dx)
               + vel["v"] * ddy(f, og, b0, b1)
               + vel["w"] * ddz(f, og.dz))
        lap = d2dx(f, og.dx) + d2dy(f, og, b0, b1) + d2dz(f, og.dz)
        rhs = -adv - gp[comp] + lap * (1.0 / re_tau)
        if comp == "u":
            rhs = rhs + dpdx_plus
        res = dudt - rhs
        term = dp.mean(dp.power(res, 2.0)) if squared else dp.mean(dp.absolute(res))
        total = term if total is None else total + term
    return total


def policy_loss(phi_fields, pred: dict, og: ObservationGrid, lam_n: float = 0.5,
                dt: float | None = None) -> tuple[dp.DiffArray, dict]:
    """Predicted-energy plus actuation-cost objective, batch mean.

    phi_fields: list of wall actuation DiffArrays, each (batch, nx, nz).
    pred: observer output on og's planes. The actuation time integral over
    one action interval cancels the 1/dt prefactor, leaving
    lam_n * sum(phi^2) dS.
    """
    b = pred["u"].values.shape[0]
    dv = og.cell_volume() * og.weights_y[None, None, :, None]
    tke = None
    for comp in ("u", "v", "w"):
        t = dp.total_sum(pred[comp] * pred[comp] * dv)
        tke = t if tke is None else tke + t
    da = og.grid.dx * og.grid.dz  # actuation lives on the full wall grid
    act = None
    for phi in phi_fields:
        t = dp.total_sum(phi * phi * da)
        act = t if act is None else act + t
    act = dp.mul(act, lam_n)
    total = dp.mul(tke + act, 1.0 / b)
    parts = {"tke_term": float(tke.values) / b, "actuation_term": float(act.values) / b}
    return total, parts
