"""Staggered channel grid: tanh wall-normal stretching, spectral wavenumbers,
and wall-unit conversions.

MAC layout used throughout the package: pressure at cell centers, u on
x-faces, w on z-faces, v on y-nodes (wall nodes included). x and z are
uniform and periodic; y stretches toward both walls with

    y_j = delta * (1 + tanh(gamma_s * (2j/(ny-1) - 1)) / tanh(gamma_s))

so node 0 sits on the bottom wall and node ny-1 on the top wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAMMA_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Geometry of the staggered channel grid.

    Attributes:
        nx, ny, nz: grid counts; ny counts wall-normal *nodes* (walls included)
        lx, lz: periodic extents in units of delta
        delta: channel half-height (1.0 in code units)
        gamma_s: tanh stretching parameter
        y_nodes: (ny,) node coordinates in [0, 2*delta]
        y_centers: (ny-1,) cell-center coordinates
        dx, dz: uniform spacings
        dy_cells: (ny-1,) cell heights, diff(y_nodes)
        h_centers: (ny-2,) distances between adjacent cell centers
    """

    nx: int
    ny: int
    nz: int
    lx: float
    lz: float
    delta: float
    gamma_s: float
    y_nodes: np.ndarray
    y_centers: np.ndarray
    dx: float
    dz: float
    dy_cells: np.ndarray = field(init=False)
    h_centers: np.ndarray = field(init=False)

    def __post_init__(self):
        dy = np.diff(self.y_nodes)
        h = np.diff(self.y_centers)
        for arr in (self.y_nodes, self.y_centers, dy, h):
            arr.setflags(write=False)
        object.__setattr__(self, "dy_cells", dy)
        object.__setattr__(self, "h_centers", h)

    @property
    def ncy(self) -> int:
        """Number of cells in y (= ny - 1)."""
        return self.ny - 1

    def cell_volumes(self) -> np.ndarray:
        """(ny-1,) cell volumes dx * dy_j * dz."""
        return self.dx * self.dz * self.dy_cells

    def same_geometry(self, other: "GridSpec") -> bool:
        return (
            (self.nx, self.ny, self.nz) == (other.nx, other.ny, other.nz)
            and np.isclose(self.lx, other.lx)
            and np.isclose(self.lz, other.lz)
            and np.isclose(self.gamma_s, other.gamma_s)
        )


@dataclass(frozen=True)
class WallUnits:
    """Friction scaling of a channel flow.

    Attributes:
        re_tau: friction Reynolds number u_tau0 * delta / nu
        u_tau0: friction velocity of the uncontrolled flow
        nu: kinematic viscosity
        delta: channel half-height
    """

    re_tau: float
    u_tau0: float
    nu: float
    delta: float = 1.0

    def __post_init__(self):
        ref = self.u_tau0 * self.delta / self.nu
        if not np.isclose(self.re_tau, ref, rtol=1e-12, atol=0.0):
            raise ValueError(
                f"inconsistent wall units: re_tau={self.re_tau} but "
                f"u_tau0*delta/nu={ref}"
            )

    @classmethod
    def from_u_tau(cls, u_tau0: float, nu: float, delta: float = 1.0) -> "WallUnits":
        return cls(re_tau=u_tau0 * delta / nu, u_tau0=u_tau0, nu=nu, delta=delta)


def build_grid(
    nx: int,
    ny: int,
    nz: int,
    lx: float,
    lz: float,
    gamma_s: float,
    delta: float = 1.0,
) -> GridSpec:
    """Build the staggered grid with tanh wall-normal stretching.

    gamma_s -> 0 gives uniform spacing 2*delta/(ny-1); larger gamma_s
    clusters nodes at both walls symmetrically.
    """
    if nx < 4 or nx % 2 != 0:
        raise ValueError(f"nx must be even and >= 4, got {nx}")
    if nz < 4 or nz % 2 != 0:
        raise ValueError(f"nz must be even and >= 4, got {nz}")
    if ny < 5:
        raise ValueError(f"ny must be >= 5, got {ny}")
    if lx <= 0 or lz <= 0 or delta <= 0:
        raise ValueError(f"extents must be positive, got lx={lx}, lz={lz}, delta={delta}")
    if gamma_s <= 0:
        raise ValueError(f"gamma_s must be > 0, got {gamma_s}")

    xi = 2.0 * np.arange(ny) / (ny - 1) - 1.0
    y_nodes = delta * (1.0 + np.tanh(gamma_s * xi) / np.tanh(gamma_s))
    # Pin the endpoints exactly; tanh rounding can leave ~1 ulp residue.
    y_nodes[0] = 0.0
    y_nodes[-1] = 2.0 * delta
    y_centers = 0.5 * (y_nodes[:-1] + y_nodes[1:])
    return GridSpec(
        nx=nx,
        ny=ny,
        nz=nz,
        lx=lx,
        lz=lz,
        delta=delta,
        gamma_s=gamma_s,
        y_nodes=y_nodes,
        y_centers=y_centers,
        dx=lx / nx,
        dz=lz / nz,
    )


def max_dy_plus(ny: int, re_tau: float, gamma_s: float, delta: float = 1.0) -> float:
    """Centerline spacing of the tanh grid in wall units."""
    xi = 2.0 * np.arange(ny) / (ny - 1) - 1.0
    y = delta * (1.0 + np.tanh(gamma_s * xi) / np.tanh(gamma_s))
    return float(np.max(np.diff(y)) * re_tau / delta)


def fit_stretching(
    ny: int,
    re_tau: float,
    target_max_dy_plus: float,
    delta: float = 1.0,
    tol: float = 1e-4,
) -> float:
    """Solve for gamma_s so the centerline spacing matches a wall-unit target.

    Deterministic bisection on the (monotone) centerline spacing. Returns a
    value floored at GAMMA_FLOOR; raises if the target is below the uniform
    spacing of the grid, where no stretching can reach it.
    """
    uniform = 2.0 * re_tau / (ny - 1)
    if target_max_dy_plus < uniform * (1.0 - 1e-12):
        raise ValueError(
            f"target max dy+ {target_max_dy_plus} is below the uniform spacing "
            f"{uniform}; no gamma_s can reach it"
        )
    lo, hi = GAMMA_FLOOR, 1.0
    while max_dy_plus(ny, re_tau, hi, delta) < target_max_dy_plus and hi < 64.0:
        hi *= 2.0
    if max_dy_plus(ny, re_tau, lo, delta) >= target_max_dy_plus:
        return GAMMA_FLOOR
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if max_dy_plus(ny, re_tau, mid, delta) < target_max_dy_plus:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def wavenumbers(n: int, l: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact and modified squared wavenumbers for a periodic direction.

    Returns (k, k2mod) in numpy FFT ordering. k_m = 2*pi*m/l; the modified
    values k2mod = (2 - 2*cos(k*dx)) / dx**2 are the eigenvalues of the
    second-order central second difference, so a Poisson solve built on them
    is exactly consistent with the divergence/gradient stencils.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    if l <= 0:
        raise ValueError(f"l must be positive, got {l}")
    dx = l / n
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    k2mod = (2.0 - 2.0 * np.cos(k * dx)) / dx**2
    return k, k2mod


def to_plus(y, wall_units: WallUnits):
    """Distance to the nearest wall in wall units."""
    y = np.asarray(y, dtype=float)
    two_delta = 2.0 * wall_units.delta
    if np.any(y < 0.0) or np.any(y > two_delta):
        raise ValueError(f"y must lie in [0, {two_delta}]")
    dist = np.minimum(y, two_delta - y)
    out = dist * wall_units.u_tau0 / wall_units.nu
    return float(out) if out.ndim == 0 else out
