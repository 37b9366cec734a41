"""Device models for the oscillator circuits.

The VO2 switch is a two-terminal element that jumps between a high-resistance
(insulating) and a low-resistance (metallic) branch.  Two interchangeable phase
update rules are provided: a behavioral one driven by electrical thresholds and
a physical one driven by the channel temperature computed by the thermal
solver.  The VO2 thermal sensor is the same film operated permanently on the
high-resistance branch, so only its Arrhenius resistance-temperature law is
modeled.  The transistor is a square-law n-channel MOSFET used as a
thermally-controlled load resistance.
"""

import enum
import math
from dataclasses import dataclass, replace


class SwitchPhase(enum.Enum):
    INSULATING = 0
    METALLIC = 1


class ThresholdMode(enum.Enum):
    """Electrical threshold set used by the behavioral phase update."""
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class SwitchParams:
    """Electrical and thermal parameters of the VO2 switch."""
    r_off: float = 56e3     # high-resistance branch (ohm)
    r_on: float = 620.0     # low-resistance branch (ohm)
    v_th: float = 4.7       # static turn-on voltage (V)
    i_th: float = 1.2e-4    # current at turn-on (A)
    v_h: float = 1.2        # static holder (turn-off) voltage (V)
    i_h: float = 1.5e-3     # current at turn-off (A)
    v_th_dyn: float = 5.0   # dynamic turn-on voltage (V)
    v_h_dyn: float = 0.5    # dynamic holder voltage (V)
    t_th: float = 340.0     # transition temperature (K)
    dt_hyst: float = 4.0    # thermal hysteresis band width (K)
    film_length: float = 1e-6     # (m)
    film_width: float = 1e-6      # (m)
    film_thickness: float = 100e-9  # (m)

    def __post_init__(self):
        if not (self.r_off > self.r_on > 0):
            raise ValueError(f"need r_off > r_on > 0, got {self.r_off}, {self.r_on}")
        if not (self.v_th > self.v_h > 0):
            raise ValueError(f"need v_th > v_h > 0, got {self.v_th}, {self.v_h}")
        if not (self.i_h > self.i_th > 0):
            raise ValueError(f"need i_h > i_th > 0, got {self.i_h}, {self.i_th}")
        if self.v_th_dyn < self.v_th or self.v_h_dyn > self.v_h:
            raise ValueError("dynamic window must enclose the static window")
        if self.dt_hyst < 0:
            raise ValueError("dt_hyst must be >= 0")
        for name in ("film_length", "film_width", "film_thickness"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def thresholds(self, mode: ThresholdMode) -> tuple[float, float]:
        """(turn-on, turn-off) voltages for the given threshold set."""
        if mode is ThresholdMode.DYNAMIC:
            return self.v_th_dyn, self.v_h_dyn
        return self.v_th, self.v_h


@dataclass(frozen=True)
class SwitchState:
    """Phase memory of the switch plus the last known channel temperature."""
    phase: SwitchPhase = SwitchPhase.INSULATING
    channel_temperature: float = 293.0  # (K)


@dataclass(frozen=True)
class MosfetParams:
    """Square-law n-channel MOSFET."""
    v_t0: float = 1.8        # gate threshold voltage (V)
    k_gain: float = 1.37e-3  # transconductance parameter (A/V^2)
    r_series: float = 0.0    # parasitic series resistance (ohm)

    def __post_init__(self):
        if self.v_t0 <= 0:
            raise ValueError("v_t0 must be positive")
        if self.k_gain <= 0:
            raise ValueError("k_gain must be positive")
        if self.r_series < 0:
            raise ValueError("r_series must be >= 0")


@dataclass(frozen=True)
class SensorParams:
    """VO2 thermal sensor, high-resistance branch only.

    R_s(T) = r_off_ref * exp(activation_temperature * (1/T - 1/t_ref)),
    strictly decreasing in T for positive activation_temperature.
    """
    r_off_ref: float = 56e3               # resistance at t_ref (ohm)
    activation_temperature: float = 2900.0  # Arrhenius slope Ea/kB (K)
    t_ref: float = 293.0                  # reference temperature (K)

    def __post_init__(self):
        if self.r_off_ref <= 0 or self.t_ref <= 0:
            raise ValueError("r_off_ref and t_ref must be positive")
        if self.activation_temperature <= 0:
            raise ValueError("activation_temperature must be positive")


@dataclass(frozen=True)
class OperatingPoint:
    """Intersection of the load line with one branch of the switch I-V."""
    v_sw: float   # (V)
    i_sw: float   # (A)
    branch: str   # "off" or "on"


def switch_resistance_behavioral(state: SwitchState, params: SwitchParams) -> float:
    """Two-valued switch resistance: r_on when metallic, r_off when insulating."""
    if state.phase is SwitchPhase.METALLIC:
        return params.r_on
    return params.r_off


def update_switch_phase_behavioral(state: SwitchState, v_sw: float, i_sw: float,
                                   params: SwitchParams,
                                   mode: ThresholdMode = ThresholdMode.STATIC) -> SwitchState:
    """Voltage-threshold phase update with hysteresis memory.

    Turn-on at v_sw >= the active threshold voltage, turn-off at v_sw <= the
    active holder voltage, no change in between.  ``i_sw`` is accepted for
    interface symmetry; the thresholds are voltage-referred.
    """
    v_on, v_off = params.thresholds(mode)
    if state.phase is SwitchPhase.INSULATING and v_sw >= v_on:
        return replace(state, phase=SwitchPhase.METALLIC)
    if state.phase is SwitchPhase.METALLIC and v_sw <= v_off:
        return replace(state, phase=SwitchPhase.INSULATING)
    return state


def update_switch_phase_physical(state: SwitchState, params: SwitchParams) -> SwitchState:
    """Temperature-driven phase update with a hysteresis band around t_th.

    Turn-on at T >= t_th + dt_hyst/2, turn-off at T <= t_th - dt_hyst/2; the
    band keeps the discrete stepper from chattering at the transition.
    """
    t = state.channel_temperature
    if state.phase is SwitchPhase.INSULATING and t >= params.t_th + params.dt_hyst / 2:
        return replace(state, phase=SwitchPhase.METALLIC)
    if state.phase is SwitchPhase.METALLIC and t <= params.t_th - params.dt_hyst / 2:
        return replace(state, phase=SwitchPhase.INSULATING)
    return state


def sensor_resistance(t_sensor: float, params: SensorParams) -> float:
    """Arrhenius resistance of the sensor film at temperature ``t_sensor``."""
    if t_sensor <= 0:
        raise ValueError(f"sensor temperature must be positive, got {t_sensor}")
    return params.r_off_ref * math.exp(
        params.activation_temperature * (1.0 / t_sensor - 1.0 / params.t_ref))


def mosfet_drain_current(v_gs: float, v_ds: float, params: MosfetParams) -> float:
    """Square-law drain current, forward conduction only (v_ds >= 0).

    Cutoff below v_t0, triode for v_ds < v_gs - v_t0, saturation above;
    continuous and nondecreasing in both arguments.
    """
    if v_ds < 0:
        raise ValueError(f"v_ds must be >= 0, got {v_ds}")
    v_ov = v_gs - params.v_t0
    if v_ov <= 0:
        return 0.0
    if v_ds < v_ov:
        return params.k_gain * (v_ov * v_ds - 0.5 * v_ds * v_ds)
    return 0.5 * params.k_gain * v_ov * v_ov


def mosfet_channel_conductance(v_gs: float, v_ds: float, params: MosfetParams) -> float:
    """dI/dV_ds of the square-law model (0 in cutoff and saturation)."""
    if v_ds < 0:
        raise ValueError(f"v_ds must be >= 0, got {v_ds}")
    v_ov = v_gs - params.v_t0
    if v_ov <= 0 or v_ds >= v_ov:
        return 0.0
    return params.k_gain * (v_ov - v_ds)


def mosfet_gain_for_cold_load(sensor: SensorParams, v_dd: float, r_b: float,
                              r_i: float, v_t0: float, target_r_l: float) -> float:
    """Transconductance that makes the cold-state load r_channel + r_i equal
    ``target_r_l``.

    At ambient the divider puts v_gs = v_dd*r_s/(r_b + r_s) on the gate and the
    deep-triode channel resistance is 1/(k_gain*(v_gs - v_t0)).
    """
    r_s = sensor.r_off_ref
    v_gs = v_dd * r_s / (r_b + r_s)
    v_ov = v_gs - v_t0
    if v_ov <= 0:
        raise ValueError("transistor not open at ambient; check divider values")
    r_channel = target_r_l - r_i
    if r_channel <= 0:
        raise ValueError("target_r_l must exceed r_i")
    return 1.0 / (r_channel * v_ov)


def load_line_operating_points(params: SwitchParams, v_dd: float,
                               r_l: float) -> list[OperatingPoint]:
    """Intersections of the load line I = (v_dd - V)/r_l with the switch I-V.

    The off branch I = V/r_off is valid for V <= v_th; the on branch
    I = V/r_on is valid for I >= i_h.  Points outside their branch validity
    range are discarded; an empty list marks the negative-differential-
    resistance gap where a real circuit oscillates.
    """
    if v_dd < 0:
        raise ValueError("v_dd must be >= 0")
    if r_l <= 0:
        raise ValueError("r_l must be positive")
    points = []
    # off branch: V = v_dd*r_off/(r_l + r_off)
    v = v_dd * params.r_off / (r_l + params.r_off)
    if v <= params.v_th:
        points.append(OperatingPoint(v, v / params.r_off, "off"))
    # on branch: V = v_dd*r_on/(r_l + r_on)
    v = v_dd * params.r_on / (r_l + params.r_on)
    i = v / params.r_on
    if i >= params.i_h:
        points.append(OperatingPoint(v, i, "on"))
    return points
