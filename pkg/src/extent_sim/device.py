"""Closed-form MTJ switching physics.

Everything here is a pure function of its arguments. Quantities are SI
(ohm, ampere, second, kelvin, tesla, A/m) unless a name says otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError, RegimeError

ELEMENTARY_CHARGE = 1.602176634e-19  # C
BOHR_MAGNETON = 9.2740100783e-24  # J/T
MU0 = 4e-7 * math.pi  # H/m
BOLTZMANN = 1.380649e-23  # J/K
T_REFERENCE = 300.0  # K, reference point of the tabulated resistances


class CellState(enum.Enum):
    PARALLEL = "P"
    ANTIPARALLEL = "AP"

    @property
    def stored_bit(self) -> int:
        return 1 if self is CellState.ANTIPARALLEL else 0

    @classmethod
    def from_bit(cls, bit: int) -> "CellState":
        return cls.ANTIPARALLEL if bit else cls.PARALLEL


class WerModel(enum.Enum):
    THERMAL = "thermal"
    LLG = "llg"
    EXPONENTIAL = "exp"


class CriticalCurrentMode(enum.Enum):
    TABULATED = "tabulated"
    PHYSICS = "physics"


class Direction(enum.Enum):
    P_TO_AP = "p_to_ap"
    AP_TO_P = "ap_to_p"


@dataclass(frozen=True)
class MtjParams:
    r_p: float = 4200.0
    r_ap: float = 6600.0
    tmr0: float = 2.0  # informational only, TMR is derived from r_p/r_ap
    i_c: float = 200e-6
    delta: float = 60.0
    tau0: float = 1e-9
    lambda_: float = 0.2333
    c_tech: float = 1e9
    theta0: float = 0.0314
    alpha_damp: float = 0.01
    gamma_gyro: float = 1.760859e11
    m_s: float = 1.1e6
    h_k: float = 1.0e5
    v_st: float = 1.3e-9 * 16e-15
    e_barrier: float = 60.0 * BOLTZMANN * T_REFERENCE
    t_fl: float = 1.3e-9
    spin_p: float = 0.6
    h_ex: float = 0.0
    h_dip: float = 0.0
    h_ki: float = 1.2e5
    h_d: float = -2.0e4
    v_c0: float = 1.2
    temperature: float = 300.0
    tmr_temp_coeff: float = 1.0e-3
    tmr_bias_coeff: float = 0.0
    area: float = 16e-15
    ra_product: float = 5e-12
    t_ox: float = 8.5e-10

    def __post_init__(self):
        problems = []
        if not self.r_ap > self.r_p > 0:
            problems.append("require r_ap > r_p > 0")
        if self.i_c <= 0:
            problems.append("i_c must be positive")
        if self.tau0 <= 0:
            problems.append("tau0 must be positive")
        if self.delta <= 0:
            problems.append("delta must be positive")
        if not 0 < self.theta0 < math.pi / 2:
            problems.append("theta0 must lie in (0, pi/2)")
        if not 0 <= self.spin_p < 1:
            problems.append("spin_p must lie in [0, 1)")
        if self.temperature <= 0:
            problems.append("temperature must be positive")
        if self.lambda_ <= 0:
            problems.append("lambda must be positive")
        if problems:
            raise DomainError("invalid MtjParams: " + "; ".join(problems))

    @property
    def tmr_cell(self) -> float:
        return (self.r_ap - self.r_p) / self.r_p


def tmr_effective(t: float, v_bias: float, p: MtjParams) -> float:
    """Linear falloff of the cell TMR with temperature (and optionally bias)."""
    if t <= 0:
        raise DomainError(f"temperature must be positive, got {t}")
    thermal = max(0.0, 1.0 - p.tmr_temp_coeff * (t - T_REFERENCE))
    bias = max(0.0, 1.0 - p.tmr_bias_coeff * abs(v_bias))
    return p.tmr_cell * thermal * bias


def resistance(state: CellState, t: float, v_bias: float, p: MtjParams) -> float:
    if t <= 0:
        raise DomainError(f"temperature must be positive, got {t}")
    if state is CellState.PARALLEL:
        return p.r_p
    return p.r_p * (1.0 + tmr_effective(t, v_bias, p))


def spin_efficiency_from_tmr(tmr: float) -> float:
    if tmr <= 0:
        raise DomainError(f"TMR must be positive, got {tmr}")
    if math.isinf(tmr):
        return 0.5
    return math.sqrt(tmr * (tmr + 2.0)) / (2.0 * (tmr + 1.0))


def spin_efficiency_thermal(t: float, v: float, p: MtjParams) -> float:
    return spin_efficiency_from_tmr(tmr_effective(t, v, p))


def spin_efficiency_angle(theta: float, p: MtjParams) -> float:
    c = math.cos(theta)
    # cos(pi/2) evaluates to ~6e-17, not zero
    if abs(c) < 1e-12:
        raise DomainError("spin efficiency is singular at theta = pi/2")
    return 1.0 / (2.0 * (1.0 + p.spin_p**2) * c)


def critical_current(p: MtjParams, t: float, mode=CriticalCurrentMode.TABULATED) -> float:
    mode = CriticalCurrentMode(mode)
    if mode is CriticalCurrentMode.TABULATED:
        return p.i_c
    g = spin_efficiency_thermal(t, 0.0, p)
    if g == 0:
        raise DomainError("zero thermal spin efficiency")
    return 2.0 * p.alpha_damp * (p.gamma_gyro * ELEMENTARY_CHARGE / (BOHR_MAGNETON * g)) * p.e_barrier


def critical_current_density(direction, p: MtjParams) -> float:
    """Threshold current density in A/m^2.

    Both directions evaluate the efficiency at theta = 0. Field terms are
    held in A/m and converted to tesla through mu0.
    """
    Direction(direction)
    g = spin_efficiency_angle(0.0, p)
    if g == 0:
        raise DomainError("zero angular spin efficiency")
    fields = (p.h_ex + p.h_dip) + (p.h_ki + p.h_d)
    prefactor = p.alpha_damp * p.gamma_gyro * ELEMENTARY_CHARGE * p.t_fl * p.m_s / (BOHR_MAGNETON * g)
    return prefactor * MU0 * fields


def precession_threshold(p: MtjParams) -> float:
    """Lowest current for which the precessional switching law applies."""
    return p.lambda_ * p.i_c


def mean_switching_time(i_w: float, p: MtjParams) -> float:
    overdrive = i_w / precession_threshold(p) - 1.0
    if overdrive <= 0:
        raise RegimeError(
            f"write current {i_w:.4g} A is at or below lambda*I_c = "
            f"{precession_threshold(p):.4g} A: thermal-activation regime, "
            "precessional switching-time law inapplicable"
        )
    return p.tau0 * math.log(math.pi / (2.0 * p.theta0)) / overdrive


def _relaxation_bracket(i_ratio: float, rate_t: float, reading: str) -> float:
    u = i_ratio - 1.0
    if reading == "bracketed":
        denom = i_ratio * math.exp(min(rate_t * u, 700.0)) - 1.0
        return u / denom
    if reading == "printed":
        return u / (i_ratio * math.exp(min(rate_t * u, 700.0)))
    raise DomainError(f"unknown LLG reading {reading!r}")


def wer(model, i_w: float, t_w: float, p: MtjParams, *, llg_reading: str = "bracketed") -> float:
    """Write error rate of one pulse of amplitude ``i_w`` and width ``t_w``."""
    model = WerModel(model)
    if t_w < 0:
        raise DomainError(f"pulse width must be non-negative, got {t_w}")
    if model is WerModel.EXPONENTIAL:
        t_sw = mean_switching_time(i_w, p)
        return wer_exponential(t_w, t_sw)
    i_ratio = i_w / p.i_c
    if i_ratio <= 1.0:
        raise RegimeError(f"I_w/I_c = {i_ratio:.4g} <= 1: sub-critical write, WER law inapplicable")
    if model is WerModel.THERMAL:
        x = _relaxation_bracket(i_ratio, p.c_tech * t_w, "bracketed")
        value = 1.0 - math.exp(-math.pi**2 * p.delta * x / 4.0)
    else:
        rate = 2.0 * p.alpha_damp * p.gamma_gyro * MU0 * p.h_k / (1.0 + p.alpha_damp**2)
        x = _relaxation_bracket(i_ratio, rate * t_w, llg_reading)
        value = 1.0 - math.exp(-math.pi**2 / 4.0 * x)
        if llg_reading == "printed":
            value -= 1.0
    return min(1.0, max(0.0, value))


def wer_exponential(t_w: float, t_sw: float) -> float:
    if t_w < 0:
        raise DomainError(f"pulse width must be non-negative, got {t_w}")
    if t_sw <= 0:
        raise DomainError(f"switching time must be positive, got {t_sw}")
    return math.exp(-t_w / t_sw)


def switching_probability(t_p: float, v: float, p: MtjParams) -> float:
    """Thermally activated switching probability of a voltage pulse."""
    if t_p < 0:
        raise DomainError(f"pulse width must be non-negative, got {t_p}")
    if p.v_c0 <= 0:
        raise DomainError("v_c0 must be positive")
    exponent = p.delta * (1.0 - v / p.v_c0)
    tau = p.tau0 * math.exp(min(exponent, 700.0))
    return -math.expm1(-t_p / tau)


def sample_switching_time(u: float, t_sw: float) -> float:
    if not 0.0 <= u < 1.0:
        raise DomainError(f"uniform sample must lie in [0, 1), got {u}")
    if t_sw <= 0:
        raise DomainError(f"switching time must be positive, got {t_sw}")
    return -t_sw * math.log1p(-u)


def conditional_mean_switch_time(t_sw: float, t_pulse: float) -> float:
    """E[t | t <= t_pulse] for an exponential switching time with mean ``t_sw``."""
    r = t_pulse / t_sw
    p_switch = -math.expm1(-r)
    if p_switch == 0.0:
        return 0.0
    return t_sw - t_pulse * math.exp(-r) / p_switch


def truncated_mean_switch_time(t_sw: float, t_pulse: float) -> float:
    """E[min(t, t_pulse)]: mean time the driver stays on under a pulse cap."""
    return -t_sw * math.expm1(-t_pulse / t_sw)
