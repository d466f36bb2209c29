"""Channel-flow DNS environment.

Incompressible Navier-Stokes on the MAC grid, advanced with a three-stage
third-order Runge-Kutta (Shu-Osher form) where every stage does

    explicit advection + viscous tendency + mean forcing
    -> provisional velocity
    -> wall boundary conditions (no-slip tangential, prescribed wall-normal)
    -> pressure projection (FFT in x/z, tridiagonal in y per mode)
    -> uniform streamwise correction restoring the bulk flux exactly

The flux corrections are accounted into the instantaneous mean pressure
gradient, which is the drag readout: at statistical equilibrium
dpdx * 2*delta balances the wall friction. The flow is driven at constant
mass flux; dpdx adapts every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fieldops as fo
from .grid import GridSpec, WallUnits, build_grid, fit_stretching, wavenumbers
from .kernels import KernelOps, _thomas

RK3_VISC_STAB = 2.51  # real-axis stability bound of the three-stage scheme


class SolverBlowupError(RuntimeError):
    def __init__(self, step: int, what: str = "non-finite field"):
        super().__init__(f"solver blow-up at step {step}: {what}")
        self.step = step


class CompatibilityError(ValueError):
    """Net wall volume flux must vanish for the pressure solve to exist."""


@dataclass
class ControlBC:
    """Blowing/suction wall boundary condition.

    phi_bot/phi_top are the wall-normal velocities at y=0 and y=2*delta
    (positive v points from bottom wall to top wall at both). Each wall field
    is zero-mean so no net mass is injected.
    """

    phi_bot: np.ndarray
    phi_top: np.ndarray
    clamp: float

    def is_zero(self) -> bool:
        return not (np.any(self.phi_bot) or np.any(self.phi_top))


def zero_control(grid: GridSpec, clamp: float = 0.3) -> ControlBC:
    shape = (grid.nx, grid.nz)
    return ControlBC(np.zeros(shape), np.zeros(shape), clamp)


def _zero_mean_clip(x: np.ndarray, bound: float) -> np.ndarray:
    """Project onto {zero mean} intersected with {|phi| <= bound}.

    Equivalent to clip(x - lam) with the shift lam chosen (by bisection; the
    clipped mean is monotone in lam) so the result is exactly zero-mean.
    """
    shifted = x - x.mean()
    if np.max(np.abs(shifted)) <= bound:
        return shifted
    lo = float(x.min()) - bound
    hi = float(x.max()) + bound
    for _ in range(80):
        lam = 0.5 * (lo + hi)
        m = np.clip(x - lam, -bound, bound).mean()
        if m > 0.0:
            lo = lam
        else:
            hi = lam
    out = np.clip(x - 0.5 * (lo + hi), -bound, bound)
    return out - out.mean()  # residual is far below the clip scale


def apply_control(raw_bot: np.ndarray, raw_top: np.ndarray, u_b: float = 1.0,
                  clamp: float = 0.3) -> ControlBC:
    """Normalize raw wall fields into a valid ControlBC.

    Each wall field is made exactly zero-mean (no net mass injection) while
    respecting the amplitude clamp of clamp * u_b.
    """
    raw_bot = np.asarray(raw_bot, dtype=float)
    raw_top = np.asarray(raw_top, dtype=float)
    if not (np.all(np.isfinite(raw_bot)) and np.all(np.isfinite(raw_top))):
        raise ValueError("control field contains NaN or Inf")
    bound = clamp * u_b
    return ControlBC(_zero_mean_clip(raw_bot, bound),
                     _zero_mean_clip(raw_top, bound), clamp)


@dataclass
class FlowState:
    """Instantaneous flow fields plus the drag bookkeeping."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    p: np.ndarray
    dpdx: float
    time: float
    step: int
    ub_target: float

    def copy(self) -> "FlowState":
        return FlowState(self.u.copy(), self.v.copy(), self.w.copy(), self.p.copy(),
                         self.dpdx, self.time, self.step, self.ub_target)


@dataclass
class EnvConfig:
    re_b: float
    grid: GridSpec
    cfl: float = 0.5
    dt_max: float = 1e-2
    init: str = "laminar"  # laminar | perturbed | zero
    seed: int | None = None
    u_b: float = 1.0
    perturbation_rms: float = 0.10
    wall_kind: str = "noslip"
    advection_form: str = "divergence"

    def __post_init__(self):
        if self.re_b <= 0:
            raise ValueError(f"re_b must be positive, got {self.re_b}")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")

    @property
    def nu(self) -> float:
        return self.u_b * self.grid.delta / self.re_b


def bulk_velocity(u: np.ndarray, grid: GridSpec) -> float:
    """Discrete flux average (1/2delta) * sum_j <u>_xz(j) * dy_j."""
    prof = u.mean(axis=(0, 2))
    return float(np.dot(prof, grid.dy_cells) / (2.0 * grid.delta))


def wall_shear_rates(u: np.ndarray, grid: GridSpec) -> tuple[float, float]:
    """|d<u>/dy| at the bottom and top wall from the quadratic wall fit."""
    prof = u.mean(axis=(0, 2))
    yc = grid.y_centers
    two_delta = 2.0 * grid.delta
    _, c0, c1 = fo._wall_flux_coeffs(yc[0], yc[1])
    bot = c0 * prof[0] + c1 * prof[1]
    _, d0, d1 = fo._wall_flux_coeffs(two_delta - yc[-1], two_delta - yc[-2])
    top = d0 * prof[-1] + d1 * prof[-2]
    return abs(float(bot)), abs(float(top))


class ChannelEnv:
    """Owns the grid, the Poisson solver and the time stepper.

    States are value objects: step() returns a new FlowState and never
    mutates its input, which keeps bitwise-reproducibility tests simple.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.grid = config.grid
        self.nu = config.nu
        self.poisson = PoissonSolver(self.grid)
        self.kernels = KernelOps(self.grid, self.nu, config.wall_kind)
        g = self.grid
        # Viscous stability: exact spectral radius of the separable operator.
        lam_xz = 4.0 / g.dx**2 + 4.0 / g.dz**2
        lam_y = _max_y_eigenvalue(g, config.wall_kind)
        self._visc_rate = self.nu * (lam_xz + lam_y)

    # -- initialization ------------------------------------------------

    def initialize(self) -> FlowState:
        cfg = self.config
        g = self.grid
        if cfg.init == "laminar":
            u, v, w = self._laminar_fields()
        elif cfg.init == "perturbed":
            if cfg.seed is None:
                raise ValueError("perturbed initialization requires a seed")
            u, v, w = self._laminar_fields()
            up, vp, wp = self._solenoidal_perturbation(np.random.default_rng(cfg.seed))
            u += up
            v += vp
            w += wp
        elif cfg.init == "zero":
            u = np.zeros(fo.expected_shape("u", g))
            v = np.zeros(fo.expected_shape("v", g))
            w = np.zeros(fo.expected_shape("w", g))
        else:
            raise ValueError(f"unknown init {cfg.init!r}")
        p = np.zeros(fo.expected_shape("p", g))
        dpdx0 = 3.0 * cfg.u_b * self.nu / g.delta**2 if cfg.init != "zero" else 0.0
        return FlowState(u, v, w, p, dpdx=dpdx0, time=0.0, step=0,
                         ub_target=bulk_velocity(u, g))

    def make_state(self, u, v, w, dpdx: float = 0.0) -> FlowState:
        """Wrap raw fields as a state (tests and restart loading)."""
        g = self.grid
        for name, comp, arr in (("u", "u", u), ("v", "v", v), ("w", "w", w)):
            if arr.shape != fo.expected_shape(comp, g):
                raise ValueError(f"{name} has shape {arr.shape}")
        p = np.zeros(fo.expected_shape("p", g))
        return FlowState(np.asarray(u, float), np.asarray(v, float),
                         np.asarray(w, float), p, dpdx=dpdx, time=0.0, step=0,
                         ub_target=bulk_velocity(u, g))

    def _laminar_fields(self):
        g = self.grid
        yhat = g.y_centers / g.delta
        prof = 1.5 * self.config.u_b * yhat * (2.0 - yhat)
        u = np.broadcast_to(prof[None, :, None],
                            fo.expected_shape("u", g)).copy()
        v = np.zeros(fo.expected_shape("v", g))
        w = np.zeros(fo.expected_shape("w", g))
        return u, v, w

    def _solenoidal_perturbation(self, rng: np.random.Generator):
        """Divergence-free noise from a discrete vector potential.

        The curl is taken with the same staggered differences the divergence
        uses, so div(u', v', w') telescopes to zero exactly. Wall rows of the
        tangential potentials vanish, making the wall-normal component zero
        at both walls.
        """
        g = self.grid
        ny, ncy = g.ny, g.ncy

        def smooth_noise(shape, zero_wall_rows):
            a = rng.standard_normal(shape)
            # Low-pass in x and z to keep the energy at large scales.
            ah = np.fft.rfftn(a, axes=(0, 2))
            kx = np.fft.fftfreq(shape[0])[:, None, None]
            kz = np.fft.rfftfreq(shape[2])[None, None, :]
            ah *= np.exp(-36.0 * (kx**2 + kz**2))
            a = np.fft.irfftn(ah, s=(shape[0], shape[2]), axes=(0, 2))
            # Mild smoothing in y.
            for _ in range(2):
                a[:, 1:-1, :] = 0.25 * a[:, :-2, :] + 0.5 * a[:, 1:-1, :] + 0.25 * a[:, 2:, :]
            if zero_wall_rows:
                a[:, 0, :] = 0.0
                a[:, -1, :] = 0.0
            # Pull energy toward the channel interior.
            yy = g.y_nodes if shape[1] == ny else g.y_centers
            env = np.sin(np.pi * yy / (2.0 * g.delta)) ** 2
            return a * env[None, :, None]

        psi_x = smooth_noise((g.nx, ny, g.nz), True)
        psi_y = smooth_noise((g.nx, ncy, g.nz), False)
        psi_z = smooth_noise((g.nx, ny, g.nz), True)

        dyc = g.dy_cells[None, :, None]
        up = (psi_z[:, 1:, :] - psi_z[:, :-1, :]) / dyc
        up -= (np.roll(psi_y, -1, axis=2) - psi_y) / g.dz
        vp = (np.roll(psi_x, -1, axis=2) - psi_x) / g.dz
        vp -= (np.roll(psi_z, -1, axis=0) - psi_z) / g.dx
        wp = (np.roll(psi_y, -1, axis=0) - psi_y) / g.dx
        wp -= (psi_x[:, 1:, :] - psi_x[:, :-1, :]) / dyc

        vols = g.cell_volumes()[None, :, None]
        vol = 2.0 * g.delta * g.lx * g.lz
        e = float(np.sum(up * up * vols) + np.sum(wp * wp * vols)
                  + np.sum((0.5 * (vp[:, :-1, :] + vp[:, 1:, :])) ** 2 * vols))
        rms = np.sqrt(e / (3.0 * vol))
        scale = self.config.perturbation_rms * self.config.u_b / max(rms, 1e-300)
        up *= scale
        vp *= scale
        wp *= scale
        up -= bulk_velocity(up, g)  # uniform shift keeps div and walls intact
        return up, vp, wp

    # -- stepping --------------------------------------------------------

    def compute_dt(self, state: FlowState) -> float:
        adv_rate = self.kernels.max_advective_rate(state.u, state.v, state.w)
        dt = self.config.cfl * min(
            1.0 / max(adv_rate, 1e-12),
            RK3_VISC_STAB / max(self._visc_rate, 1e-300),
        )
        return min(dt, self.config.dt_max)

    def advective_cfl(self, state: FlowState, dt: float) -> float:
        return dt * self.kernels.max_advective_rate(state.u, state.v, state.w)

    def _tendency(self, u, v, w, forcing):
        if self.config.advection_form == "divergence":
            return self.kernels.tendencies(u, v, w, forcing)
        g = self.grid
        wk = self.config.wall_kind
        form = self.config.advection_form
        fu = fo.advect(u, v, w, g, "u", wk, form)
        fu += self.nu * fo.laplacian(u, g, "u", wk)
        fu += forcing
        fv = fo.advect(u, v, w, g, "v", wk, form)
        fv += self.nu * fo.laplacian(v, g, "v", wk)
        fw = fo.advect(u, v, w, g, "w", wk, form)
        fw += self.nu * fo.laplacian(w, g, "w", wk)
        return fu, fv, fw

    def project(self, u, v, w, copy: bool = True):
        """Pressure projection onto the discretely divergence-free space.

        Returns corrected (u, v, w) and the solve field psi with
        div correction = grad psi (time step absorbed into psi).
        """
        g = self.grid
        net = float(np.sum(v[:, -1, :]) - np.sum(v[:, 0, :])) * g.dx * g.dz
        scale = 2.0 * g.delta * g.lx * g.lz * max(self.config.u_b, 1e-300)
        if abs(net) > 1e-10 * scale:
            raise CompatibilityError(
                f"net wall volume flux {net:.3e} violates solvability")
        rhs = self.kernels.divergence(u, v, w)
        psi = self.poisson.solve(rhs)
        if copy:
            u = u.copy()
            v = v.copy()
            w = w.copy()
        self.kernels.apply_projection(u, v, w, psi)
        return u, v, w, psi

    def _stage(self, u0c, v0c, w0c, a0, u, v, w, cdt, forcing, control):
        """One Shu-Osher stage: combo + cdt * F, BCs, projection."""
        from .kernels import _combo
        fu, fv, fw = self._tendency(u, v, w, forcing)
        us = np.empty_like(u)
        vs = np.empty_like(v)
        ws = np.empty_like(w)
        if a0 == 0.0:
            u0c, v0c, w0c = u, v, w  # unused slot; keeps the kernel signature
            b = 1.0
        else:
            b = 1.0 - a0
        _combo(a0, u0c, b, u, b * cdt, fu, us)
        _combo(a0, v0c[:, 1:-1, :], b, v[:, 1:-1, :], b * cdt, fv, vs[:, 1:-1, :])
        _combo(a0, w0c, b, w, b * cdt, fw, ws)
        vs[:, 0, :] = control.phi_bot
        vs[:, -1, :] = control.phi_top
        us, vs, ws, psi = self.project(us, vs, ws, copy=False)
        return us, vs, ws, psi

    def step(self, state: FlowState, control: ControlBC | None = None) -> FlowState:
        g = self.grid
        if control is None:
            control = zero_control(g)
        dt = self.compute_dt(state)
        forcing = state.dpdx
        target = state.ub_target

        u0, v0, w0 = state.u, state.v, state.w
        # Stage 1 sees this step's control on the wall rows as well.
        v0 = v0.copy()
        v0[:, 0, :] = control.phi_bot
        v0[:, -1, :] = control.phi_top

        u1, v1, w1, _ = self._stage(None, None, None, 0.0, u0, v0, w0, dt,
                                    forcing, control)
        d1 = target - bulk_velocity(u1, g)
        u1 += d1

        u2, v2, w2, _ = self._stage(u0, v0, w0, 0.75, u1, v1, w1, dt,
                                    forcing, control)
        d2 = target - bulk_velocity(u2, g)
        u2 += d2

        un, vn, wn, psi = self._stage(u0, v0, w0, 1.0 / 3.0, u2, v2, w2, dt,
                                      forcing, control)
        d3 = target - bulk_velocity(un, g)
        un += d3

        if not np.isfinite(un).all() or not np.isfinite(vn).all():
            raise SolverBlowupError(state.step)

        dpdx = forcing + (d1 / 6.0 + 2.0 * d2 / 3.0 + d3) / dt
        p = psi / ((2.0 / 3.0) * dt)
        p -= float(np.sum(p * g.cell_volumes()[None, :, None])
                   / (2.0 * g.delta * g.lx * g.lz))
        return FlowState(un, vn, wn, p, dpdx=dpdx, time=state.time + dt,
                         step=state.step + 1, ub_target=target)

    # -- observation -----------------------------------------------------

    def observe(self, state: FlowState, snr_inv: float = 0.0,
                rng: np.random.Generator | None = None):
        """Wall observations: pressure at the first cell-center row per wall.

        Returns a dict with raw and rms-normalized wall pressures plus the
        current drag. Optional additive Gaussian noise with standard
        deviation snr_inv * rms(signal), applied before normalization.
        """
        p_bot = state.p[:, 0, :].copy()
        p_top = state.p[:, -1, :].copy()
        if snr_inv > 0.0:
            if rng is None:
                raise ValueError("noise requires an rng")
            p_bot = p_bot + rng.standard_normal(p_bot.shape) * (snr_inv * _rms(p_bot))
            p_top = p_top + rng.standard_normal(p_top.shape) * (snr_inv * _rms(p_top))
        return {
            "p_bot": p_bot,
            "p_top": p_top,
            "p_bot_norm": p_bot / max(_rms(p_bot), 1e-300),
            "p_top_norm": p_top / max(_rms(p_top), 1e-300),
            "dpdx": state.dpdx,
            "time": state.time,
            "step": state.step,
        }

    def u_tau(self, state: FlowState) -> float:
        bot, top = wall_shear_rates(state.u, self.grid)
        return float(np.sqrt(self.nu * 0.5 * (bot + top)))

    def wall_units_from_dpdx(self, dpdx: float) -> WallUnits:
        """Friction scaling from the mean-momentum balance dpdx = u_tau^2/delta."""
        u_tau0 = float(np.sqrt(max(dpdx, 0.0) * self.grid.delta))
        return WallUnits.from_u_tau(u_tau0, self.nu, self.grid.delta)


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a * a)))


def _max_y_eigenvalue(grid: GridSpec, wall_kind: str) -> float:
    """Largest |eigenvalue| of the 1D wall-normal diffusion operators."""
    g = grid
    ncy = g.ncy
    dy = g.dy_cells
    h = g.h_centers
    A = np.zeros((ncy, ncy))
    for j in range(ncy):
        if j > 0:
            A[j, j - 1] += 1.0 / (dy[j] * h[j - 1])
            A[j, j] -= 1.0 / (dy[j] * h[j - 1])
        if j < ncy - 1:
            A[j, j + 1] += 1.0 / (dy[j] * h[j])
            A[j, j] -= 1.0 / (dy[j] * h[j])
    if wall_kind == "noslip":
        _, c0b, c1b = fo._wall_flux_coeffs(g.y_centers[0], g.y_centers[1])
        A[0, 0] -= c0b / dy[0]
        A[0, 1] -= c1b / dy[0]
        two_delta = 2.0 * g.delta
        _, c0t, c1t = fo._wall_flux_coeffs(two_delta - g.y_centers[-1],
                                           two_delta - g.y_centers[-2])
        A[-1, -1] -= c0t / dy[-1]
        A[-1, -2] -= c1t / dy[-1]
    lam_u = float(np.max(np.abs(np.linalg.eigvals(A).real)))
    nvi = g.ny - 2
    B = np.zeros((nvi, nvi))
    for r in range(nvi):
        jn = r + 1
        hm, hp = dy[jn - 1], dy[jn]
        dual = 0.5 * (hm + hp)
        if r > 0:
            B[r, r - 1] += 1.0 / (hm * dual)
        B[r, r] -= (1.0 / hm + 1.0 / hp) / dual
        if r < nvi - 1:
            B[r, r + 1] += 1.0 / (hp * dual)
    lam_v = float(np.max(np.abs(np.linalg.eigvals(B).real)))
    return max(lam_u, lam_v)


def run_uncontrolled(env: ChannelEnv, state: FlowState, n_steps: int,
                     window_fraction: float = 0.5):
    """Advance with zero control; return (final state, stats dict).

    The baseline drag is the dpdx average over the trailing window (by step
    count), and u_tau/re_tau follow from the momentum balance.
    """
    bc = zero_control(env.grid)
    dpdx_series = np.empty(n_steps)
    time_series = np.empty(n_steps)
    for i in range(n_steps):
        state = env.step(state, bc)
        dpdx_series[i] = state.dpdx
        time_series[i] = state.time
    k0 = int(n_steps * (1.0 - window_fraction))
    dpdx_avg = float(dpdx_series[k0:].mean())
    u_tau = float(np.sqrt(max(dpdx_avg, 0.0) * env.grid.delta))
    return state, {
        "dpdx_series": dpdx_series,
        "time_series": time_series,
        "dpdx_avg": dpdx_avg,
        "u_tau": u_tau,
        "re_tau": u_tau * env.grid.delta / env.nu,
    }


class PoissonSolver:
    """Direct solver for the projection Poisson problem.

    FFT in x and z with the second-order modified wavenumbers, then one
    tridiagonal solve per (kx, kz) mode in y (Neumann walls). The zero mode
    is gauge-fixed by pinning its first cell, and the returned field is not
    mean-adjusted (callers fix the gauge they want). Thomas factors are
    precomputed once per grid.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        g = grid
        ncy = g.ncy
        nzr = g.nz // 2 + 1
        _, kx2 = wavenumbers(g.nx, g.lx)
        _, kz2full = wavenumbers(g.nz, g.lz)
        kz2 = kz2full[:nzr]
        lam = kx2[:, None] + kz2[None, :]  # (nx, nzr)

        h = g.h_centers
        dy = g.dy_cells
        a = np.zeros(ncy)
        c = np.zeros(ncy)
        a[1:] = 1.0 / (dy[1:] * h)
        c[:-1] = 1.0 / (dy[:-1] * h)
        self._a = a

        b = -(a + c)[:, None, None] - lam[None, :, :]  # (ncy, nx, nzr)
        # Gauge pin for the (0, 0) mode: first row becomes p = 0. The unpinned
        # system is singular there, so give the generic sweep a dummy shift
        # and overwrite that mode's factors below.
        b00 = b[:, 0, 0].copy()
        b00[0] = 1.0
        c00 = c.copy()
        c00[0] = 0.0
        b[:, 0, 0] -= 1.0

        w = np.empty_like(b)
        cw = np.empty_like(b)
        w[0] = 1.0 / b[0]
        cw[0] = c[0] * w[0]
        for j in range(1, ncy):
            w[j] = 1.0 / (b[j] - a[j] * cw[j - 1])
            cw[j] = c[j] * w[j]
        # Overwrite the pinned mode's factors.
        w00 = np.empty(ncy)
        cw00 = np.empty(ncy)
        w00[0] = 1.0 / b00[0]
        cw00[0] = c00[0] * w00[0]
        for j in range(1, ncy):
            w00[j] = 1.0 / (b00[j] - a[j] * cw00[j - 1])
            cw00[j] = c00[j] * w00[j]
        w[:, 0, 0] = w00
        cw[:, 0, 0] = cw00
        self._w = w
        self._cw = cw
        self._wflat = np.ascontiguousarray(w.reshape(ncy, -1))
        self._cwflat = np.ascontiguousarray(cw.reshape(ncy, -1))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        g = self.grid
        if rhs.shape != fo.expected_shape("p", g):
            raise ValueError(f"rhs shape {rhs.shape} does not match grid")
        ncy = g.ncy
        nzr = g.nz // 2 + 1
        rh = np.fft.rfftn(rhs, axes=(0, 2))
        work = np.ascontiguousarray(rh.transpose(1, 0, 2)).reshape(ncy, -1)
        work[0, 0] = 0.0  # pinned gauge row
        _thomas(work, self._a, self._wflat, self._cwflat)
        ph = work.reshape(ncy, g.nx, nzr).transpose(1, 0, 2)
        return np.fft.irfftn(ph, s=(g.nx, g.nz), axes=(0, 2))


def make_channel_env(re_b: float, nx: int, ny: int, nz: int, lx: float, lz: float,
                     re_tau_nominal: float | None = None,
                     target_max_dy_plus: float = 7.6, **kwargs) -> ChannelEnv:
    """Convenience constructor fitting the wall-normal stretching to the
    usual wall-unit target at the nominal friction Reynolds number."""
    if re_tau_nominal is None:
        re_tau_nominal = nominal_re_tau(re_b)
    gamma = fit_stretching(ny, re_tau_nominal, target_max_dy_plus)
    g = build_grid(nx, ny, nz, lx, lz, gamma)
    return ChannelEnv(EnvConfig(re_b=re_b, grid=g, **kwargs))


def nominal_re_tau(re_b: float) -> float:
    """Friction Reynolds estimate used for grid design (178 at re_b=3000)."""
    return 178.0 * (re_b / 3000.0) ** 0.88
