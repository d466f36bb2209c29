"""Observation grid: the collocated, wall-normal-decimated evaluation planes
shared by the observer model, its losses, and the replay buffer.

Solver fields live on the staggered grid; model training works on velocity
interpolated to cell centers and restricted to every s-th center plane. On
production grids (130 wall-normal nodes) the default stride 4 keeps replay
memory and 3D FFT cost at desk scale while the tanh clustering preserves
near-wall coverage. Tiny test grids use stride 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fieldops as fo
from .dns import FlowState
from .grid import GridSpec


@dataclass(frozen=True, eq=False)
class ObservationGrid:
    grid: GridSpec
    stride: int
    stride_xz: int
    plane_indices: np.ndarray  # indices into y_centers
    y_planes: np.ndarray       # physical positions
    y_norm: np.ndarray         # y / (2 delta), positional-embedding input
    weights_y: np.ndarray      # quadrature weights for volume integrals
    dx: float                  # spacing of the kept x columns
    dz: float

    @classmethod
    def build(cls, grid: GridSpec, stride: int = 1, stride_xz: int = 1) -> "ObservationGrid":
        if stride < 1 or stride_xz < 1:
            raise ValueError(f"strides must be >= 1, got {stride}, {stride_xz}")
        if (grid.ncy - 1) % stride != 0:
            raise ValueError(
                f"wall-normal stride {stride} must divide {grid.ncy - 1} so the "
                f"kept planes stay reflection-symmetric")
        if grid.nx % stride_xz != 0 or grid.nz % stride_xz != 0:
            raise ValueError(f"stride_xz {stride_xz} must divide nx and nz")
        idx = np.arange(0, grid.ncy, stride, dtype=np.intp)
        ys = grid.y_centers[idx]
        # Plane quadrature weights: midpoints between kept planes, walls at the ends.
        edges = np.empty(ys.size + 1)
        edges[0] = 0.0
        edges[-1] = 2.0 * grid.delta
        edges[1:-1] = 0.5 * (ys[:-1] + ys[1:])
        wy = np.diff(edges)
        return cls(grid=grid, stride=stride, stride_xz=stride_xz,
                   plane_indices=idx, y_planes=ys,
                   y_norm=ys / (2.0 * grid.delta), weights_y=wy,
                   dx=grid.dx * stride_xz, dz=grid.dz * stride_xz)

    @property
    def n_planes(self) -> int:
        return self.plane_indices.size

    @property
    def nx(self) -> int:
        return self.grid.nx // self.stride_xz

    @property
    def nz(self) -> int:
        return self.grid.nz // self.stride_xz

    def nearest_plane(self, y_target: float) -> int:
        """Index (into the kept planes) closest to a physical y."""
        return int(np.argmin(np.abs(self.y_planes - y_target)))

    def cell_volume(self) -> float:
        return self.dx * self.dz

    def restrict_wall(self, field: np.ndarray) -> np.ndarray:
        """Subsample a full-resolution wall field onto the kept columns."""
        s = self.stride_xz
        return field[..., ::s, ::s]


def collocate_velocity(state: FlowState, grid: GridSpec):
    """Interpolate the staggered velocity to cell centers."""
    uc = fo.interpolate(state.u, "u", "p", grid)
    vc = fo.interpolate(state.v, "v", "p", grid)
    wc = fo.interpolate(state.w, "w", "p", grid)
    return uc, vc, wc


def restrict_state(state: FlowState, og: ObservationGrid, dtype=np.float32):
    """Collocated, decimated velocity and pressure snapshots for replay."""
    uc, vc, wc = collocate_velocity(state, og.grid)
    sl = og.plane_indices
    s = og.stride_xz
    return {
        "u": uc[::s, sl, ::s].astype(dtype),
        "v": vc[::s, sl, ::s].astype(dtype),
        "w": wc[::s, sl, ::s].astype(dtype),
        "p": state.p[::s, sl, ::s].astype(dtype),
    }
