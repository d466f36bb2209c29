"""Straight-line reference implementations used as independent oracles.

Everything here is written with explicit loops or direct formula
evaluation, deliberately not sharing code with the package internals.
"""

import numpy as np


def divergence_loops(u, v, w, grid):
    nx, ncy, nz = u.shape
    out = np.zeros((nx, ncy, nz))
    for i in range(nx):
        for j in range(ncy):
            for k in range(nz):
                dy = grid.y_nodes[j + 1] - grid.y_nodes[j]
                out[i, j, k] = ((u[(i + 1) % nx, j, k] - u[i, j, k]) / grid.dx
                                + (v[i, j + 1, k] - v[i, j, k]) / dy
                                + (w[i, j, (k + 1) % nz] - w[i, j, k]) / grid.dz)
    return out


def interp_u_to_centers_loops(u):
    nx = u.shape[0]
    out = np.zeros_like(u)
    for i in range(nx):
        out[i] = 0.5 * (u[i] + u[(i + 1) % nx])
    return out


def advect_u_loops(u, v, w, grid):
    """Divergence-form streamwise advective tendency, interior formula."""
    nx, ncy, nz = u.shape
    ny = ncy + 1
    yn, yc = grid.y_nodes, grid.y_centers
    out = np.zeros_like(u)

    def ubar_at_node(i, jn, k):
        if jn == 0 or jn == ny - 1:
            return 0.0
        th = (yn[jn] - yc[jn - 1]) / (yc[jn] - yc[jn - 1])
        return (1 - th) * u[i, jn - 1, k] + th * u[i, jn, k]

    for i in range(nx):
        im = (i - 1) % nx
        ip = (i + 1) % nx
        for j in range(ncy):
            for k in range(nz):
                km = (k - 1) % nz
                kp = (k + 1) % nz
                ucp = 0.5 * (u[i, j, k] + u[ip, j, k])
                ucm = 0.5 * (u[im, j, k] + u[i, j, k])
                t = -(ucp**2 - ucm**2) / grid.dx
                f_lo = 0.5 * (v[im, j, k] + v[i, j, k]) * ubar_at_node(i, j, k)
                f_hi = 0.5 * (v[im, j + 1, k] + v[i, j + 1, k]) * ubar_at_node(i, j + 1, k)
                t -= (f_hi - f_lo) / (yn[j + 1] - yn[j])
                f_lo = 0.5 * (w[im, j, k] + w[i, j, k]) * 0.5 * (u[i, j, km] + u[i, j, k])
                f_hi = 0.5 * (w[im, j, kp] + w[i, j, kp]) * 0.5 * (u[i, j, k] + u[i, j, kp])
                t -= (f_hi - f_lo) / grid.dz
                out[i, j, k] = t
    return out


def q_criterion_loops(uc, vc, wc, grid, v_bot, v_top):
    """Q from dense velocity-gradient tensors at each interior-safe cell."""
    nx, ncy, nz = uc.shape
    yc = grid.y_centers
    ys = np.concatenate(([0.0], yc, [2.0 * grid.delta]))
    out = np.zeros((nx, ncy, nz))

    def grad(f, bot, top, i, j, k):
        im, ip = (i - 1) % nx, (i + 1) % nx
        km, kp = (k - 1) % nz, (k + 1) % nz
        gx = (f[ip, j, k] - f[im, j, k]) / (2 * grid.dx)
        gz = (f[i, j, kp] - f[i, j, km]) / (2 * grid.dz)
        vals = np.concatenate(([bot[i, k] if hasattr(bot, "shape") else bot],
                               f[i, :, k],
                               [top[i, k] if hasattr(top, "shape") else top]))
        jj = j + 1
        hm = ys[jj] - ys[jj - 1]
        hp = ys[jj + 1] - ys[jj]
        gy = (-hp / (hm * (hm + hp)) * vals[jj - 1]
              + (hp - hm) / (hm * hp) * vals[jj]
              + hm / (hp * (hm + hp)) * vals[jj + 1])
        return gx, gy, gz

    for i in range(nx):
        for j in range(ncy):
            for k in range(nz):
                a = np.zeros((3, 3))
                a[0] = grad(uc, 0.0, 0.0, i, j, k)
                a[1] = grad(vc, v_bot, v_top, i, j, k)
                a[2] = grad(wc, 0.0, 0.0, i, j, k)
                s = 0.5 * (a + a.T)
                om = 0.5 * (a - a.T)
                out[i, j, k] = 0.5 * (np.trace(om @ om.T) - np.trace(s @ s.T))
    return out


def mfn_loops(h, re, ws, bs, omegas, taus, re_m=1e5):
    """Direct transcription of the conditioning recursion for one sample."""
    z = h.copy()
    L = len(ws)
    for i in range(L - 1):
        lin = np.einsum("io,i...->o...", ws[i], z) + bs[i][(...,) + (None,) * (z.ndim - 1)]
        gate = np.sin(omegas[i] * re / re_m + taus[i])
        z = lin * gate[(...,) + (None,) * (z.ndim - 1)]
    return np.einsum("io,i...->o...", ws[L - 1], z) + bs[L - 1][(...,) + (None,) * (z.ndim - 1)]


def pos_embed_loops(y, n_p):
    out = []
    for j in range(1, n_p + 1):
        freq = 2.0 ** (j // 2) * np.pi
        out.append(np.sin(freq * y) if j % 2 == 0 else np.cos(freq * y))
    return np.array(out)


def tke_loops(uc, vc, wc, grid, fluctuations_only):
    nx, ncy, nz = uc.shape
    total = 0.0
    fields = [uc.copy(), vc.copy(), wc.copy()]
    if fluctuations_only:
        for f in fields:
            for j in range(ncy):
                f[:, j, :] -= f[:, j, :].mean()
    for j in range(ncy):
        dv = grid.dx * grid.dz * (grid.y_nodes[j + 1] - grid.y_nodes[j])
        for f in fields:
            total += (f[:, j, :] ** 2).sum() * dv
    return total


def spectrum_1d_loops(signal, l):
    """One-sided per-mode energy by direct DFT sums."""
    n = len(signal)
    e = np.zeros(n // 2 + 1)
    for m in range(n // 2 + 1):
        re = sum(signal[i] * np.cos(2 * np.pi * m * i / n) for i in range(n))
        im = sum(-signal[i] * np.sin(2 * np.pi * m * i / n) for i in range(n))
        p = (re**2 + im**2) / n**2
        if m == 0 or (n % 2 == 0 and m == n // 2):
            e[m] = p
        else:
            e[m] = 2 * p
    return e


def two_pass_profiles(states_fields):
    """Plain two-pass mean and rms over a list of (nx, ncy, nz) samples."""
    per_y = [f.transpose(1, 0, 2).reshape(f.shape[1], -1) for f in states_fields]
    flat = np.concatenate(per_y, axis=1)
    return flat.mean(axis=1), flat.std(axis=1)


def data_loss_loops(pred, gt, rms, floor):
    total = 0.0
    count = 0
    for comp in ("u", "v", "w"):
        p = pred[comp]
        g = gt[comp]
        r = rms[comp]
        b, nx, nyd, nz = p.shape
        acc = 0.0
        for bi in range(b):
            for i in range(nx):
                for j in range(nyd):
                    for k in range(nz):
                        d = (g[bi, i, j, k] - p[bi, i, j, k]) / max(r[j], floor)
                        acc += d * d
        total += acc / (b * nx * nyd * nz)
        count += 1
    return total / count


def policy_loss_loops(phis, pred, weights_y, dx, dz, lam_n):
    b = pred["u"].shape[0]
    tke = 0.0
    for comp in ("u", "v", "w"):
        f = pred[comp]
        for bi in range(b):
            for j in range(f.shape[2]):
                tke += (f[bi, :, j, :] ** 2).sum() * weights_y[j] * dx * dz
    act = 0.0
    for phi in phis:
        for bi in range(phi.shape[0]):
            act += (phi[bi] ** 2).sum() * dx * dz
    return (tke + lam_n * act) / b
