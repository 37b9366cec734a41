"""2D finite-difference heat diffusion on the substrate carrying the devices.

The 3D substrate is reduced to a 2D plane of ``effective_thickness`` at film
depth; heat escaping into the bulk is lumped into a linear out-of-plane loss
coefficient.  The stepper integrates

    rho*c * dT/dt = k * laplacian(T) + q_src / V_cell - h * (T - ambient) / thickness

with forward-time central-space differencing; source power is spread uniformly
over the switch and sensor footprints.  Fluxes are written in conservative
(face flux) form so energy bookkeeping closes to machine precision.
"""

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import SolverError


@dataclass(frozen=True)
class MaterialProps:
    """Substrate material constants (defaults: sapphire)."""
    thermal_conductivity: float = 35.0   # k (W/(m K))
    density: float = 3980.0              # rho (kg/m^3)
    specific_heat: float = 760.0         # c (J/(kg K))

    def __post_init__(self):
        for name in ("thermal_conductivity", "density", "specific_heat"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def diffusivity(self) -> float:
        """alpha = k / (rho * c)  (m^2/s)."""
        return self.thermal_conductivity / (self.density * self.specific_heat)

    @property
    def volumetric_heat_capacity(self) -> float:
        """rho * c  (J/(m^3 K))."""
        return self.density * self.specific_heat


class Boundary(enum.Enum):
    FIXED_AMBIENT = "fixed_ambient"
    ADIABATIC = "adiabatic"


@dataclass(frozen=True)
class EdgeBoundaries:
    """Boundary condition per grid edge."""
    left: Boundary = Boundary.FIXED_AMBIENT
    right: Boundary = Boundary.FIXED_AMBIENT
    bottom: Boundary = Boundary.FIXED_AMBIENT
    top: Boundary = Boundary.FIXED_AMBIENT

    @classmethod
    def all_fixed(cls) -> "EdgeBoundaries":
        return cls()

    @classmethod
    def all_adiabatic(cls) -> "EdgeBoundaries":
        return cls(Boundary.ADIABATIC, Boundary.ADIABATIC,
                   Boundary.ADIABATIC, Boundary.ADIABATIC)

    @property
    def any_fixed(self) -> bool:
        return Boundary.FIXED_AMBIENT in (self.left, self.right, self.bottom, self.top)


@dataclass(frozen=True)
class CellRect:
    """Half-open cell-index rectangle [ix0, ix1) x [iy0, iy1)."""
    ix0: int
    ix1: int
    iy0: int
    iy1: int

    def __post_init__(self):
        if not (self.ix0 < self.ix1 and self.iy0 < self.iy1):
            raise ValueError(f"empty rectangle {self}")
        if self.ix0 < 0 or self.iy0 < 0:
            raise ValueError(f"negative index in {self}")

    @property
    def n_cells(self) -> int:
        return (self.ix1 - self.ix0) * (self.iy1 - self.iy0)

    @property
    def sl(self) -> tuple[slice, slice]:
        """(row, column) slices for indexing a (ny, nx) field array."""
        return slice(self.iy0, self.iy1), slice(self.ix0, self.ix1)

    def inside(self, nx: int, ny: int) -> bool:
        return self.ix1 <= nx and self.iy1 <= ny

    def overlaps(self, other: "CellRect") -> bool:
        return not (self.ix1 <= other.ix0 or other.ix1 <= self.ix0
                    or self.iy1 <= other.iy0 or other.iy1 <= self.iy0)


@dataclass(frozen=True)
class HeatSourceFootprint:
    """Switch and sensor heater rectangles on the grid."""
    switch: CellRect
    sensor: CellRect

    def __post_init__(self):
        if self.switch.overlaps(self.sensor):
            raise ValueError("switch and sensor footprints overlap")

    def separation(self, dx: float) -> float:
        """Edge-to-edge switch/sensor distance along x (m)."""
        if self.sensor.ix0 >= self.switch.ix1:
            gap = self.sensor.ix0 - self.switch.ix1
        else:
            gap = self.switch.ix0 - self.sensor.ix1
        return gap * dx

    def with_gap_cells(self, gap_cells: int) -> "HeatSourceFootprint":
        """Same switch rectangle, sensor moved to ``gap_cells`` to its right."""
        if gap_cells < 1:
            raise ValueError("gap must be at least one cell")
        w = self.sensor.ix1 - self.sensor.ix0
        ix0 = self.switch.ix1 + gap_cells
        sensor = CellRect(ix0, ix0 + w, self.sensor.iy0, self.sensor.iy1)
        return HeatSourceFootprint(self.switch, sensor)


def centered_footprints(nx: int, ny: int, dx: float, dy: float,
                        film_length: float, film_width: float,
                        d: float) -> HeatSourceFootprint:
    """Side-by-side switch/sensor pair, centered in the window at the default gap.

    The switch rectangle is anchored so that it does not move when the sensor
    is repositioned for a distance sweep; ``d`` snaps to whole cells.
    """
    cx = max(1, round(film_length / dx))
    cy = max(1, round(film_width / dy))
    gap = round(d / dx)
    if gap < 1:
        raise ValueError(f"separation {d} smaller than one cell ({dx})")
    sw_ix0 = nx // 2 - cx - (gap + 1) // 2
    iy0 = ny // 2 - cy // 2
    switch = CellRect(sw_ix0, sw_ix0 + cx, iy0, iy0 + cy)
    fp = HeatSourceFootprint(switch, CellRect(switch.ix1 + gap, switch.ix1 + gap + cx,
                                              iy0, iy0 + cy))
    if not (fp.switch.inside(nx, ny) and fp.sensor.inside(nx, ny)):
        raise ValueError("footprints do not fit inside the grid")
    return fp


@dataclass(frozen=True)
class ThermalGrid:
    """Uniform 2D temperature field plus everything needed to advance it."""
    nx: int
    ny: int
    dx: float  # (m)
    dy: float  # (m)
    temperature: np.ndarray  # (ny, nx), K
    material: MaterialProps = MaterialProps()
    effective_thickness: float = 50e-9   # 2D-reduction slab thickness (m)
    ambient: float = 293.0               # (K)
    boundaries: EdgeBoundaries = EdgeBoundaries()
    out_of_plane_loss: float = 0.0       # h (W/(m^2 K))

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid must be at least 3x3")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("cell size must be positive")
        if self.effective_thickness <= 0:
            raise ValueError("effective_thickness must be positive")
        if self.out_of_plane_loss < 0:
            raise ValueError("out_of_plane_loss must be >= 0")
        t = self.temperature
        if t.shape != (self.ny, self.nx):
            raise ValueError(f"temperature shape {t.shape} != (ny={self.ny}, nx={self.nx})")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("temperatures must be finite and >= 0 K")

    @classmethod
    def uniform(cls, nx: int, ny: int, dx: float, dy: float, **kwargs) -> "ThermalGrid":
        ambient = kwargs.get("ambient", 293.0)
        t = np.full((ny, nx), float(ambient))
        return cls(nx=nx, ny=ny, dx=dx, dy=dy, temperature=t, **kwargs)

    def with_temperature(self, temperature: np.ndarray) -> "ThermalGrid":
        return replace(self, temperature=temperature)

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.effective_thickness

    def clamped_mask(self) -> np.ndarray:
        """Cells held at ambient by FIXED_AMBIENT edges (the outermost ring)."""
        m = np.zeros((self.ny, self.nx), dtype=bool)
        b = self.boundaries
        if b.left is Boundary.FIXED_AMBIENT:
            m[:, 0] = True
        if b.right is Boundary.FIXED_AMBIENT:
            m[:, -1] = True
        if b.bottom is Boundary.FIXED_AMBIENT:
            m[0, :] = True
        if b.top is Boundary.FIXED_AMBIENT:
            m[-1, :] = True
        return m


@dataclass
class EnergyLedger:
    """Running energy totals (J) accumulated by the stepper."""
    injected: float = 0.0
    boundary_loss: float = 0.0
    out_of_plane_loss: float = 0.0


def stability_limit(grid: ThermalGrid) -> float:
    """Largest explicit timestep: dx^2*dy^2 / (2*alpha*(dx^2 + dy^2))."""
    a = grid.material.diffusivity
    dx2, dy2 = grid.dx ** 2, grid.dy ** 2
    return dx2 * dy2 / (2.0 * a * (dx2 + dy2))


def _conduction_power(grid: ThermalGrid) -> np.ndarray:
    """Net conductive power into each cell (W), zero flux through exterior faces."""
    t = grid.temperature
    k_t = grid.material.thermal_conductivity * grid.effective_thickness
    gx = k_t * grid.dy / grid.dx   # face conductance, x-neighbors (W/K)
    gy = k_t * grid.dx / grid.dy
    net = np.zeros_like(t)
    fx = gx * (t[:, :-1] - t[:, 1:])   # flow from column i to i+1
    net[:, :-1] -= fx
    net[:, 1:] += fx
    fy = gy * (t[:-1, :] - t[1:, :])
    net[:-1, :] -= fy
    net[1:, :] += fy
    return net


def _source_field(grid: ThermalGrid, footprints: HeatSourceFootprint,
                  switch_power: float, sensor_power: float) -> np.ndarray:
    for rect, power in ((footprints.switch, switch_power), (footprints.sensor, sensor_power)):
        if not rect.inside(grid.nx, grid.ny):
            raise ValueError(f"footprint {rect} outside {grid.nx}x{grid.ny} grid")
        if power < 0:
            raise ValueError(f"source power must be >= 0, got {power}")
    q = np.zeros((grid.ny, grid.nx))
    q[footprints.switch.sl] = switch_power / footprints.switch.n_cells
    q[footprints.sensor.sl] = sensor_power / footprints.sensor.n_cells
    return q


def step_thermal(grid: ThermalGrid, footprints: HeatSourceFootprint,
                 switch_power: float, sensor_power: float, dt: float,
                 ledger: EnergyLedger | None = None) -> ThermalGrid:
    """Advance the field one explicit step of length ``dt``.

    Rejects ``dt`` above the explicit stability bound.  When a ledger is
    passed, injected energy and boundary / out-of-plane losses for the step
    are accumulated onto it; the totals satisfy the discrete energy balance
    exactly (up to float roundoff).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    limit = stability_limit(grid)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds explicit stability bound {limit:g}")
    t = grid.temperature
    q = _source_field(grid, footprints, switch_power, sensor_power)
    cond = _conduction_power(grid)
    oop = (grid.out_of_plane_loss * grid.dx * grid.dy) * (t - grid.ambient)
    free = ~grid.clamped_mask()
    heat_cap = grid.material.volumetric_heat_capacity * grid.cell_volume
    t_new = t.copy()
    net = cond + q - oop
    t_new[free] += dt * net[free] / heat_cap
    if ledger is not None:
        ledger.injected += (switch_power + sensor_power) * dt
        ledger.boundary_loss += float(cond[~free].sum()) * dt
        ledger.out_of_plane_loss += float(oop[free].sum()) * dt
    return grid.with_temperature(t_new)


def probe_temperature(grid: ThermalGrid, rect: CellRect) -> float:
    """Area-weighted mean temperature over the footprint cells (K)."""
    if not rect.inside(grid.nx, grid.ny):
        raise ValueError(f"footprint {rect} outside {grid.nx}x{grid.ny} grid")
    return float(grid.temperature[rect.sl].mean())


def energy_above_ambient(grid: ThermalGrid) -> float:
    """Heat content relative to the uniform-ambient field (J)."""
    heat_cap = grid.material.volumetric_heat_capacity * grid.cell_volume
    return float((grid.temperature - grid.ambient).sum()) * heat_cap


def steady_state_solve(grid: ThermalGrid, footprints: HeatSourceFootprint,
                       switch_power: float, sensor_power: float) -> ThermalGrid:
    """Temperature field with dT/dt = 0 under the given source powers.

    Direct sparse solve of the same conservative discretization the stepper
    uses, so stepping the returned field changes nothing.  Requires at least
    one fixed-ambient edge or a positive out-of-plane loss; otherwise no
    steady state exists under nonzero power.
    """
    if not grid.boundaries.any_fixed and grid.out_of_plane_loss == 0.0:
        raise ValueError("all-adiabatic grid with zero out-of-plane loss has no steady state")
    q = _source_field(grid, footprints, switch_power, sensor_power)
    free = ~grid.clamped_mask()
    n = int(free.sum())
    index = np.full((grid.ny, grid.nx), -1, dtype=np.int64)
    index[free] = np.arange(n)

    k_t = grid.material.thermal_conductivity * grid.effective_thickness
    gx = k_t * grid.dy / grid.dx
    gy = k_t * grid.dx / grid.dy
    h_cell = grid.out_of_plane_loss * grid.dx * grid.dy

    rows, cols, vals = [], [], []
    diag = np.full(n, -h_cell)

    def couple(p_idx, q_idx, g):
        # p free, any q in-domain: conductance g between them
        both = q_idx >= 0
        rows.append(p_idx[both])
        cols.append(q_idx[both])
        vals.append(np.full(both.sum(), g))
        np.add.at(diag, p_idx, -g)

    for shift in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        dj, di = shift
        jj, ii = np.nonzero(free)
        nj, ni = jj + dj, ii + di
        ok = (0 <= nj) & (nj < grid.ny) & (0 <= ni) & (ni < grid.nx)
        jj, ii, nj, ni = jj[ok], ii[ok], nj[ok], ni[ok]
        g = gy if dj != 0 else gx
        couple(index[jj, ii], index[nj, ni], g)

    a = scipy.sparse.coo_matrix(
        (np.concatenate(vals + [diag]),
         (np.concatenate(rows + [np.arange(n)]),
          np.concatenate(cols + [np.arange(n)]))),
        shape=(n, n)).tocsr()
    b = -q[free]
    u = scipy.sparse.linalg.spsolve(a, b)

    scale = max(float(np.abs(b).max()), 1e-30)
    residual = float(np.abs(a @ u - b).max()) / scale
    if residual > 1e-8:
        raise SolverError(f"steady-state solve residual {residual:g} above 1e-8")

    t_new = np.full((grid.ny, grid.nx), float(grid.ambient))
    t_new[free] = grid.ambient + u
    return grid.with_temperature(t_new)


def field_to_text(grid: ThermalGrid) -> str:
    """Plain-text snapshot: one row of comma-separated kelvin values per y row."""
    lines = [",".join(format(v, ".17e") for v in row) for row in grid.temperature]
    return "\n".join(lines) + "\n"
