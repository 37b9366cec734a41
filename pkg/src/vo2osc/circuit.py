"""Transient co-simulation of the two oscillator topologies.

The capacitor circuit integrates C*dV/dt = I_dd - V/R_sw with the switch
resistance frozen within a step (exact exponential update), flipping the phase
at threshold crossings.  The capacitorless circuit alternates a Newton solve
of the series network V_dd -> MOSFET -> R_i -> switch (gate driven by the
R_b / sensor divider) with an explicit thermal step that carries the switch
Joule power; the delayed sensor heating closes the feedback loop that replaces
the capacitor.
"""

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from .devices import (MosfetParams, SensorParams, SwitchParams, SwitchState,
                      SwitchPhase, ThresholdMode, mosfet_channel_conductance,
                      mosfet_drain_current, sensor_resistance,
                      switch_resistance_behavioral,
                      update_switch_phase_behavioral,
                      update_switch_phase_physical)
from .errors import SolverError
from .thermal import (HeatSourceFootprint, ThermalGrid, probe_temperature,
                      steady_state_solve, step_thermal)


class SwitchMode(enum.Enum):
    BEHAVIORAL_STATIC = "behavioral_static"
    BEHAVIORAL_DYNAMIC = "behavioral_dynamic"
    PHYSICAL = "physical"


@dataclass(frozen=True)
class CapacitorCircuitConfig:
    """Current-biased oscillator: I_dd feeds the switch with capacitor C across it.

    Oscillation requires i_th < i_dd < i_h (bias inside the NDR window); bias
    outside the window is legal and settles at an operating point.
    """
    i_dd: float = 0.6e-3   # supply current (A)
    c: float = 10e-12      # capacitance (F)
    switch: SwitchParams = SwitchParams()
    switch_mode: SwitchMode = SwitchMode.BEHAVIORAL_DYNAMIC

    def __post_init__(self):
        if self.i_dd <= 0 or self.c <= 0:
            raise ValueError("i_dd and c must be positive")


@dataclass(frozen=True)
class CapacitorlessCircuitConfig:
    """Voltage-supplied series stack V_dd -> MOSFET -> R_i -> switch.

    The gate is driven by the divider formed by r_b (supply side) and the VO2
    sensor (ground side), so sensor heating lowers the gate voltage.
    """
    v_dd: float = 5.0
    r_b: float = 60e3     # gate divider resistance (ohm)
    r_i: float = 200.0    # current-limiting resistance (ohm)
    mosfet: MosfetParams = MosfetParams()
    switch: SwitchParams = SwitchParams()
    sensor: SensorParams = SensorParams()
    footprints: HeatSourceFootprint | None = None
    sensor_joule: bool = False  # inject divider Joule power into the sensor footprint

    def __post_init__(self):
        if self.v_dd <= 0 or self.r_b <= 0 or self.r_i <= 0:
            raise ValueError("v_dd, r_b and r_i must be positive")

    def divider_open_at_ambient(self) -> bool:
        """True when the cold-state gate voltage exceeds the MOSFET threshold."""
        v_gs = divider_gate_voltage(self.v_dd, self.r_b, self.sensor.r_off_ref)
        return v_gs > self.mosfet.v_t0


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled circuit and temperature records."""
    t: np.ndarray         # (s)
    v_sw: np.ndarray      # (V)
    i_sw: np.ndarray      # (A)
    r_s: np.ndarray       # sensor resistance (ohm); 0 where no sensor exists
    t_switch: np.ndarray  # (K)
    t_sensor: np.ndarray  # (K)
    phase: np.ndarray     # 0 insulating, 1 metallic

    def __post_init__(self):
        n = len(self.t)
        for name in ("v_sw", "i_sw", "r_s", "t_switch", "t_sensor", "phase"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"field {name} length != len(t)")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("t must be strictly increasing")
        for name in ("t", "v_sw", "i_sw", "r_s", "t_switch", "t_sensor"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in {name}")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def sample_interval(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def decimate(self, every: int) -> "Waveform":
        if every < 1:
            raise ValueError("decimation factor must be >= 1")
        if every == 1:
            return self
        return Waveform(*(getattr(self, f)[::every] for f in
                          ("t", "v_sw", "i_sw", "r_s", "t_switch", "t_sensor", "phase")))


def capacitor_period_closed_form(params: SwitchParams, i_dd: float, c: float,
                                 mode: ThresholdMode = ThresholdMode.DYNAMIC) -> float:
    """Exact RC charge/discharge period of the behavioral capacitor oscillator.

    Charge leg: V relaxes toward i_dd*r_off until it reaches the turn-on
    voltage; discharge leg: toward i_dd*r_on until the holder voltage.
    """
    v_on, v_off = params.thresholds(mode)
    v_inf_off = i_dd * params.r_off
    v_inf_on = i_dd * params.r_on
    if v_inf_off <= v_on or v_inf_on >= v_off:
        raise ValueError("bias does not produce oscillation between the thresholds")
    t_charge = params.r_off * c * math.log((v_inf_off - v_off) / (v_inf_off - v_on))
    t_discharge = params.r_on * c * math.log((v_on - v_inf_on) / (v_off - v_inf_on))
    return t_charge + t_discharge


def divider_gate_voltage(v_dd: float, r_b: float, r_s: float) -> float:
    """Gate voltage of the r_b / sensor divider (gate draws no current)."""
    return v_dd * r_s / (r_b + r_s)


@dataclass(frozen=True)
class SeriesNetwork:
    """Snapshot of the series stack for one Newton solve.

    ``r_load`` is the fixed series resistance (R_i plus any MOSFET parasitic);
    ``mosfet=None`` degenerates to a plain source-resistor-switch loop.
    """
    v_dd: float
    r_load: float
    r_switch: float
    mosfet: MosfetParams | None = None
    v_gs: float = 0.0


@dataclass(frozen=True)
class NetworkSolution:
    v_ds: float      # voltage across the MOSFET channel (V)
    v_sw: float      # voltage across the switch (V)
    i: float         # loop current (A)
    v_gs: float      # gate drive used for the solve (V)
    residual: float  # |KVL residual| / v_dd
    iterations: int


def newton_solve_network(net: SeriesNetwork, v_ds_guess: float = 0.0,
                         rel_tol: float = 1e-12, max_iter: int = 100) -> NetworkSolution:
    """Damped Newton solve of the series network.

    The unknown is the MOSFET channel voltage; the KVL residual
    f(v_ds) = v_ds + (r_load + r_switch)*I(v_gs, v_ds) - v_dd is monotone, so
    Newton steps are bracketed in [0, v_dd] and halved whenever the residual
    grows.
    """
    if net.r_load < 0 or net.r_switch <= 0:
        raise ValueError("resistances must be positive")
    r_tot = net.r_load + net.r_switch
    if net.mosfet is None:
        i = net.v_dd / r_tot
        return NetworkSolution(0.0, i * net.r_switch, i, net.v_gs, 0.0, 0)

    scale = max(abs(net.v_dd), 1.0)

    def f(v):
        return v + r_tot * mosfet_drain_current(net.v_gs, v, net.mosfet) - net.v_dd

    lo, hi = 0.0, net.v_dd
    v = min(max(v_ds_guess, lo), hi)
    fv = f(v)
    for it in range(1, max_iter + 1):
        if abs(fv) <= rel_tol * scale:
            i = mosfet_drain_current(net.v_gs, v, net.mosfet)
            return NetworkSolution(v, i * net.r_switch, i, net.v_gs, abs(fv) / scale, it - 1)
        if fv > 0:
            hi = v
        else:
            lo = v
        slope = 1.0 + r_tot * mosfet_channel_conductance(net.v_gs, v, net.mosfet)
        step = -fv / slope
        v_new = v + step
        if not (lo < v_new < hi):
            v_new = 0.5 * (lo + hi)
        f_new = f(v_new)
        # halve the step while the residual grows
        halvings = 0
        while abs(f_new) > abs(fv) and halvings < 60:
            v_new = 0.5 * (v + v_new)
            f_new = f(v_new)
            halvings += 1
        v, fv = v_new, f_new
    raise SolverError(f"network Newton solve did not converge; residual {abs(fv) / scale:g}")


def run_capacitor_oscillator(config: CapacitorCircuitConfig, t_end: float, dt: float,
                             grid: ThermalGrid | None = None,
                             footprints: HeatSourceFootprint | None = None) -> Waveform:
    """Simulate the capacitor oscillator; one record per timestep.

    Behavioral modes need no thermal grid; physical mode advances ``grid`` with
    the switch Joule power and drives the phase from the footprint temperature.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    physical = config.switch_mode is SwitchMode.PHYSICAL
    if physical and (grid is None or footprints is None):
        raise ValueError("physical switch mode requires a thermal grid and footprints")
    mode = (ThresholdMode.DYNAMIC if config.switch_mode is SwitchMode.BEHAVIORAL_DYNAMIC
            else ThresholdMode.STATIC)
    n = int(round(t_end / dt))
    if n < 1:
        raise ValueError("t_end shorter than one step")
    params = config.switch
    ambient = grid.ambient if physical else 293.0
    state = SwitchState(SwitchPhase.INSULATING, ambient)

    t = np.arange(n) * dt
    v_sw = np.empty(n)
    i_sw = np.empty(n)
    t_switch = np.full(n, ambient)
    t_sensor = np.full(n, ambient)
    phase = np.zeros(n, dtype=np.uint8)

    v = 0.0
    for k in range(n):
        try:
            r = switch_resistance_behavioral(state, params)
            v_sw[k] = v
            i_sw[k] = v / r
            phase[k] = state.phase.value
            if physical:
                t_switch[k] = state.channel_temperature
                t_sensor[k] = probe_temperature(grid, footprints.sensor)
            # exact RC relaxation with the resistance frozen over the step
            v_inf = config.i_dd * r
            v = v_inf + (v - v_inf) * math.exp(-dt / (r * config.c))
            if physical:
                grid = step_thermal(grid, footprints, v_sw[k] ** 2 / r, 0.0, dt)
                state = replace(state,
                                channel_temperature=probe_temperature(grid, footprints.switch))
                state = update_switch_phase_physical(state, params)
            else:
                state = update_switch_phase_behavioral(state, v, v / r, params, mode)
        except (ValueError, SolverError) as exc:
            raise SolverError(f"capacitor run failed at step {k} (t={k * dt:g} s): {exc}") from exc

    return Waveform(t, v_sw, i_sw, np.zeros(n), t_switch, t_sensor, phase)


def run_capacitorless_oscillator(config: CapacitorlessCircuitConfig, grid: ThermalGrid,
                                 t_end: float, dt: float, thermal_feedback: bool = True,
                                 return_final_grid: bool = False):
    """Simulate the capacitorless oscillator on the given thermal grid.

    Per step: solve the series network with the gate voltage set by the sensor
    divider, inject the switch Joule power into its footprint, advance the
    field by ``dt``, then update the switch phase from the new footprint
    temperature.  ``thermal_feedback=False`` freezes the field at its initial
    state (the circuit then settles at a static operating point).
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    fp = config.footprints
    if fp is None:
        raise ValueError("capacitorless config needs heat source footprints")
    n = int(round(t_end / dt))
    if n < 1:
        raise ValueError("t_end shorter than one step")

    switch = config.switch
    state = SwitchState(SwitchPhase.INSULATING, grid.ambient)

    t = np.arange(n) * dt
    v_sw = np.empty(n)
    i_sw = np.empty(n)
    r_s = np.empty(n)
    t_switch = np.empty(n)
    t_sensor = np.empty(n)
    phase = np.zeros(n, dtype=np.uint8)

    r_fixed = config.r_i + config.mosfet.r_series
    v_ds = config.v_dd
    for k in range(n):
        try:
            t_sw = probe_temperature(grid, fp.switch)
            t_se = probe_temperature(grid, fp.sensor)
            rs = sensor_resistance(t_se, config.sensor)
            v_gs = divider_gate_voltage(config.v_dd, config.r_b, rs)
            r_sw = switch_resistance_behavioral(state, switch)
            net = SeriesNetwork(config.v_dd, r_fixed, r_sw, config.mosfet, v_gs)
            sol = newton_solve_network(net, v_ds_guess=v_ds)
            v_ds = sol.v_ds

            v_sw[k] = sol.v_sw
            i_sw[k] = sol.i
            r_s[k] = rs
            t_switch[k] = t_sw
            t_sensor[k] = t_se
            phase[k] = state.phase.value

            if thermal_feedback:
                p_switch = sol.i ** 2 * r_sw
                p_sensor = 0.0
                if config.sensor_joule:
                    i_div = config.v_dd / (config.r_b + rs)
                    p_sensor = i_div ** 2 * rs
                grid = step_thermal(grid, fp, p_switch, p_sensor, dt)
                state = replace(state,
                                channel_temperature=probe_temperature(grid, fp.switch))
                state = update_switch_phase_physical(state, switch)
        except (ValueError, SolverError) as exc:
            raise SolverError(
                f"capacitorless run failed at step {k} (t={k * dt:g} s): {exc}") from exc

    w = Waveform(t, v_sw, i_sw, r_s, t_switch, t_sensor, phase)
    if return_final_grid:
        return w, grid
    return w


@dataclass(frozen=True)
class IVCurve:
    """Quasi-static sweep result; one (bias, current, direction, branch) per point."""
    v_sw: np.ndarray
    i_sw: np.ndarray
    direction: np.ndarray  # "up" / "down"
    branch: np.ndarray     # "off" / "on"

    def transition_voltage(self, direction: str) -> float:
        """Bias where the sweep leg leaves its starting branch (nan if it never does).

        Up leg: lowest bias found on the on branch.  Down leg: highest bias
        back on the off branch, provided the leg started on the on branch.
        """
        sel = self.direction == direction
        v, branch = self.v_sw[sel], self.branch[sel]
        if direction == "up":
            on = branch == "on"
            return float(v[on].min()) if on.any() else math.nan
        if not (branch == "on").any():
            return math.nan
        off = branch == "off"
        return float(v[off].max()) if off.any() else math.nan


def quasi_static_iv_sweep(switch: SwitchParams, grid: ThermalGrid,
                          footprints: HeatSourceFootprint, v_max: float,
                          n_points: int = 61, max_iter: int = 20) -> IVCurve:
    """Voltage-driven hysteresis loop: up-sweep then down-sweep.

    Each bias point is the self-consistent fixed point of the steady-state
    field and the temperature-driven phase; the phase is carried between
    points, which is what produces the loop.
    """
    if v_max <= 0:
        raise ValueError("v_max must be positive")
    if n_points < 2:
        raise ValueError("need at least two sweep points")
    biases_up = np.linspace(0.0, v_max, n_points)
    biases = [(v, "up") for v in biases_up] + [(v, "down") for v in biases_up[::-1]]

    phase = SwitchPhase.INSULATING
    vs, cs, ds, br = [], [], [], []
    for v, direction in biases:
        for _ in range(max_iter):
            r = switch.r_off if phase is SwitchPhase.INSULATING else switch.r_on
            field = steady_state_solve(grid, footprints, v * v / r, 0.0)
            t_sw = probe_temperature(field, footprints.switch)
            new_state = update_switch_phase_physical(SwitchState(phase, t_sw), switch)
            if new_state.phase is phase:
                break
            phase = new_state.phase
        else:
            raise SolverError(f"phase did not settle at bias {v:g} V ({direction}-sweep)")
        vs.append(v)
        cs.append(v / r)
        ds.append(direction)
        br.append("off" if phase is SwitchPhase.INSULATING else "on")
    return IVCurve(np.array(vs), np.array(cs), np.array(ds, dtype="<U4"),
                   np.array(br, dtype="<U3"))


@dataclass(frozen=True)
class CalibrationResult:
    """Thermal-reduction parameters that pin the quasi-static turn-on voltage."""
    out_of_plane_loss: float     # h (W/(m^2 K))
    effective_thickness: float   # (m)
    achieved_v_th: float         # quasi-static turn-on voltage of the model (V)
    predicted_v_h: float         # quasi-static turn-off voltage implied by linearity (V)
    thermal_resistance: float    # switch footprint self-heating (K/W)

    def apply(self, grid: ThermalGrid) -> ThermalGrid:
        return replace(grid, out_of_plane_loss=self.out_of_plane_loss,
                       effective_thickness=self.effective_thickness)


def calibrate_switch_thermal(switch: SwitchParams, grid_template: ThermalGrid,
                             footprints: HeatSourceFootprint,
                             rel_tol: float = 1e-6) -> CalibrationResult:
    """Root-find the out-of-plane loss so the up-sweep transition sits at v_th.

    The steady field is linear in the injected power, so the transition
    voltage satisfies theta(h) * v_th^2 / r_off = (t_th + dt_hyst/2 - ambient)
    with theta the footprint self-heating resistance; the root-find targets
    that identity directly.  If even a lossless plane cannot reach the target
    (the insulating-state power is too small), the 2D-reduction thickness is
    scaled down first, exploiting theta proportional to 1/thickness at h = 0,
    and the scaled thickness is reported alongside the loss coefficient.
    """
    ambient = grid_template.ambient
    dt_up = switch.t_th + switch.dt_hyst / 2 - ambient
    if dt_up <= 0:
        raise ValueError("transition temperature must exceed ambient")
    p_th = switch.v_th ** 2 / switch.r_off
    theta_target = dt_up / p_th

    def theta(grid):
        field = steady_state_solve(grid, footprints, p_th, 0.0)
        return (probe_temperature(field, footprints.switch) - ambient) / p_th

    grid = grid_template
    theta_lossless = theta(replace(grid, out_of_plane_loss=0.0))
    if theta_lossless < theta_target:
        # thin the plane so a lossless solve overshoots the target by 1.5x,
        # leaving the loss coefficient a bracketable remainder
        thickness = grid.effective_thickness * theta_lossless / (1.5 * theta_target)
        grid = replace(grid, effective_thickness=thickness)
        theta_lossless = theta(replace(grid, out_of_plane_loss=0.0))
        if theta_lossless < theta_target:
            v_reach = math.sqrt(dt_up * switch.r_off / theta_lossless)
            raise SolverError(
                f"calibration bracket failure: achievable v_th >= {v_reach:g} V "
                f"exceeds target {switch.v_th:g} V")

    def f(h):
        return theta(replace(grid, out_of_plane_loss=h)) - theta_target

    h_hi = 1e4
    while f(h_hi) > 0:
        h_hi *= 4.0
        if h_hi > 1e12:
            raise SolverError("calibration bracket failure: loss coefficient diverged")
    h = scipy.optimize.brentq(f, 0.0, h_hi, rtol=rel_tol)

    theta_cal = theta(replace(grid, out_of_plane_loss=h))
    v_th_achieved = math.sqrt(dt_up * switch.r_off / theta_cal)
    if abs(v_th_achieved - switch.v_th) > 0.02 * switch.v_th:
        raise SolverError(
            f"calibration landed at v_th={v_th_achieved:g} V, outside 2% of {switch.v_th:g} V")
    dt_down = switch.t_th - switch.dt_hyst / 2 - ambient
    v_h_pred = math.sqrt(dt_down * switch.r_on / theta_cal)
    return CalibrationResult(h, grid.effective_thickness, v_th_achieved, v_h_pred, theta_cal)
