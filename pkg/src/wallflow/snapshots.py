"""Flow snapshot files: restart and post-processing storage.

Layout (all little-endian, independent of host byte order):

    magic   4 bytes  b"PNPC"
    version u32      (currently 1)
    nx, ny, nz       i32 each
    lx, lz, gamma_s, re_b, time, dpdx   f64 each
    u, v, w, p       float64 payloads, x-fastest ordering

u, w, p carry nx*(ny-1)*nz values; v carries nx*ny*nz (wall rows included).
Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dns import ChannelEnv, FlowState, bulk_velocity
from .grid import GridSpec, build_grid

MAGIC = b"PNPC"
VERSION = 1
_HEADER = struct.Struct("<4sIiii6d")


class SnapshotError(ValueError):
    pass


@dataclass
class SnapshotHeader:
    nx: int
    ny: int
    nz: int
    lx: float
    lz: float
    gamma_s: float
    re_b: float
    time: float
    dpdx: float


def _pack_field(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").ravel(order="F").tobytes()


def _unpack_field(buf: memoryview, offset: int, shape) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape))
    nbytes = count * 8
    if offset + nbytes > len(buf):
        raise SnapshotError("snapshot truncated: payload shorter than header implies")
    arr = np.frombuffer(buf[offset:offset + nbytes], dtype="<f8")
    return arr.reshape(shape, order="F").astype(np.float64), offset + nbytes


def save_snapshot(path: str, state: FlowState, grid: GridSpec, re_b: float):
    header = _HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny, grid.nz,
                          grid.lx, grid.lz, grid.gamma_s, re_b,
                          state.time, state.dpdx)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_pack_field(state.u))
        fh.write(_pack_field(state.v))
        fh.write(_pack_field(state.w))
        fh.write(_pack_field(state.p))


def load_snapshot(path: str) -> tuple[SnapshotHeader, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotError("snapshot truncated: no complete header")
    magic, version, nx, ny, nz, lx, lz, gamma_s, re_b, time, dpdx = \
        _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}; not a snapshot file")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    hdr = SnapshotHeader(nx, ny, nz, lx, lz, gamma_s, re_b, time, dpdx)
    buf = memoryview(raw)
    off = _HEADER.size
    fields = {}
    for name, shape in (("u", (nx, ny - 1, nz)), ("v", (nx, ny, nz)),
                        ("w", (nx, ny - 1, nz)), ("p", (nx, ny - 1, nz))):
        fields[name], off = _unpack_field(buf, off, shape)
    if off != len(raw):
        raise SnapshotError("snapshot has trailing bytes; file corrupt")
    return hdr, fields


def grid_from_header(hdr: SnapshotHeader) -> GridSpec:
    return build_grid(hdr.nx, hdr.ny, hdr.nz, hdr.lx, hdr.lz, hdr.gamma_s)


def state_from_snapshot(env: ChannelEnv, path: str) -> FlowState:
    """Load a snapshot as a FlowState for the given environment.

    The snapshot's grid must match the environment's exactly.
    """
    hdr, fields = load_snapshot(path)
    g = env.grid
    if (hdr.nx, hdr.ny, hdr.nz) != (g.nx, g.ny, g.nz):
        raise SnapshotError(
            f"snapshot grid {hdr.nx}x{hdr.ny}x{hdr.nz} does not match "
            f"environment grid {g.nx}x{g.ny}x{g.nz}")
    state = FlowState(fields["u"], fields["v"], fields["w"], fields["p"],
                      dpdx=hdr.dpdx, time=hdr.time, step=0,
                      ub_target=bulk_velocity(fields["u"], g))
    return state


def regrid_state(state: FlowState, src: GridSpec, env_new: ChannelEnv) -> FlowState:
    """Interpolate a state onto a finer/coarser grid and re-project.

    Linear interpolation per component onto the new staggering, followed by
    one pressure projection to restore the discrete divergence constraint.
    Used to warm-start higher-Reynolds runs from a developed low-Re field.
    """
    dst = env_new.grid

    def interp3(arr, xs_s, ys_s, zs_s, xs_d, ys_d, zs_d, lx, lz):
        # linear interpolation along each axis in turn; x/z wrap periodically
        def lin_axis(a, coords_s, coords_d, axis, period=None):
            cs = np.asarray(coords_s)
            cd = np.asarray(coords_d)
            if period is not None:
                csx = np.concatenate([cs, [cs[0] + period]])
                a = np.concatenate([a, np.take(a, [0], axis=axis)], axis=axis)
                cs = csx
                cd = np.mod(cd, period)
            idx = np.searchsorted(cs, cd, side="right") - 1
            idx = np.clip(idx, 0, len(cs) - 2)
            w = (cd - cs[idx]) / (cs[idx + 1] - cs[idx])
            lo = np.take(a, idx, axis=axis)
            hi = np.take(a, idx + 1, axis=axis)
            shape = [1] * a.ndim
            shape[axis] = len(cd)
            w = w.reshape(shape)
            return lo * (1 - w) + hi * w

        a = lin_axis(arr, xs_s, xs_d, 0, period=lx)
        a = lin_axis(a, ys_s, ys_d, 1)
        a = lin_axis(a, zs_s, zs_d, 2, period=lz)
        return a

    xc_s = (np.arange(src.nx) + 0.5) * src.dx
    xf_s = np.arange(src.nx) * src.dx
    zc_s = (np.arange(src.nz) + 0.5) * src.dz
    zf_s = np.arange(src.nz) * src.dz
    xc_d = (np.arange(dst.nx) + 0.5) * dst.dx
    xf_d = np.arange(dst.nx) * dst.dx
    zc_d = (np.arange(dst.nz) + 0.5) * dst.dz
    zf_d = np.arange(dst.nz) * dst.dz

    u = interp3(state.u, xf_s, src.y_centers, zc_s, xf_d, dst.y_centers, zc_d,
                src.lx, src.lz)
    v = interp3(state.v, xc_s, src.y_nodes, zc_s, xc_d, dst.y_nodes, zc_d,
                src.lx, src.lz)
    w = interp3(state.w, xc_s, src.y_centers, zf_s, xc_d, dst.y_centers, zf_d,
                src.lx, src.lz)
    v[:, 0, :] = 0.0
    v[:, -1, :] = 0.0
    u2, v2, w2, _ = env_new.project(u, v, w)
    u2 += env_new.config.u_b - bulk_velocity(u2, dst)
    return FlowState(u2, v2, w2, np.zeros((dst.nx, dst.ncy, dst.nz)),
                     dpdx=state.dpdx, time=0.0, step=0,
                     ub_target=bulk_velocity(u2, dst))
