"""Behavioral model of the dual-supply, four-level write driver.

The transistor equations are exposed for parameter studies and to derive
the on-resistance of one driver pair; the write hot path only needs the
resolved ohmic operating point from :func:`drive_current`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import DomainError, RegimeError, UsageError


class QualityLevel(enum.Enum):
    Q00 = "00"  # normal / default
    Q01 = "01"  # least important data
    Q10 = "10"  # low priority
    Q11 = "11"  # high priority, exact

    @classmethod
    def parse(cls, text: str) -> "QualityLevel":
        key = str(text).strip().lower().lstrip("q")
        for level in cls:
            if level.value == key:
                return level
        raise UsageError(f"invalid priority {text!r} (expected 00, 01, 10 or 11)")

    @property
    def tag(self) -> str:
        return "q" + self.value


class Supply(enum.Enum):
    VDDL = "vddl"
    VDDH = "vddh"


@dataclass(frozen=True)
class PathSpec:
    supply: Supply
    pairs: int

    def __post_init__(self):
        if self.pairs not in (1, 2, 3):
            raise UsageError(f"active pairs must be 1, 2 or 3, got {self.pairs}")

    @classmethod
    def parse(cls, text: str) -> "PathSpec":
        try:
            supply, pairs = text.strip().lower().split(":")
            return cls(Supply(supply), int(pairs))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"invalid path descriptor {text!r}, expected e.g. 'vddl:1'") from exc

    def __str__(self):
        return f"{self.supply.value}:{self.pairs}"


DEFAULT_LEVEL_MAP = {
    QualityLevel.Q01: PathSpec(Supply.VDDL, 1),
    QualityLevel.Q10: PathSpec(Supply.VDDL, 2),
    QualityLevel.Q00: PathSpec(Supply.VDDH, 3),
    QualityLevel.Q11: PathSpec(Supply.VDDH, 3),
}
ZERO_WRITE_PATH = PathSpec(Supply.VDDL, 1)


@dataclass(frozen=True)
class TransistorParams:
    v_th0: float = 0.35
    gamma_body: float = 0.4
    phi_f2: float = 0.7
    s_slope: float = 0.09
    i_s: float = 5.8e-7
    w: float = 64e-9
    l: float = 32e-9
    c_ox: float = 0.029
    mu_ref: float = 0.025
    t_ref: float = 300.0
    k_u: float = 1.5
    v_sb: float = 0.0
    v_stitch: float = 0.1

    def __post_init__(self):
        for name in ("w", "l", "c_ox", "s_slope", "mu_ref", "t_ref"):
            if getattr(self, name) <= 0:
                raise DomainError(f"TransistorParams.{name} must be positive")
        if self.k_u < 0:
            raise DomainError("TransistorParams.k_u must be non-negative")


@dataclass(frozen=True)
class DriverConfig:
    # driver constants below are calibration outputs (see calibration.calibrate)
    vddl: float = 0.86001
    vddh: float = 0.9
    t_pulse: float = 10e-9
    r_on_pair: float = 2507.836990595611
    # supply current drawn by one enabled driver pair on top of the cell current
    i_leg: float = 0.012391098341753433
    e_detector: float = 1.0524401654607784e-10
    e_sense: float = 2e-12
    level_map: dict = field(default_factory=lambda: dict(DEFAULT_LEVEL_MAP))
    exact_levels: frozenset = frozenset({QualityLevel.Q00, QualityLevel.Q11})
    # conventional fixed-pulse cell used as the comparison baseline
    basic_t_pulse: float = 19e-9
    basic_i_supply: float = 0.06116959064327484

    def __post_init__(self):
        if not 0 < self.vddl < self.vddh:
            raise DomainError("require 0 < vddl < vddh")
        if self.r_on_pair <= 0:
            raise DomainError("r_on_pair must be positive")
        if self.t_pulse <= 0:
            raise DomainError("t_pulse must be positive")
        if self.i_leg < 0 or self.e_detector < 0 or self.e_sense < 0:
            raise DomainError("driver overheads must be non-negative")
        missing = set(QualityLevel) - set(self.level_map)
        if missing:
            raise UsageError(f"level_map lacks {sorted(m.tag for m in missing)}")

    def supply_voltage(self, supply: Supply) -> float:
        return self.vddh if supply is Supply.VDDH else self.vddl

    def path(self, level: QualityLevel, bit: int) -> PathSpec:
        if bit == 0:
            return ZERO_WRITE_PATH
        return self.level_map[level]

    def is_exact(self, level: QualityLevel, bit: int) -> bool:
        # only logic-one writes are approximated
        return bit == 0 or level in self.exact_levels


def threshold_voltage(v_sb: float, p: TransistorParams) -> float:
    if p.phi_f2 <= 0:
        raise DomainError("2*phi_F must be positive")
    return p.v_th0 + p.gamma_body * (math.sqrt(abs(p.phi_f2 + v_sb)) - math.sqrt(abs(p.phi_f2)))


def subthreshold_current(v_gs: float, v_ds: float, p: TransistorParams, v_th: float) -> float:
    return p.i_s * 10.0 ** ((v_gs - v_th) / p.s_slope) * (1.0 - 10.0 ** (-v_ds / p.s_slope))


def triode_current(v_gs: float, v_ds: float, mu: float, p: TransistorParams, v_th: float) -> float:
    overdrive = v_gs - v_th
    if overdrive <= 0 or not 0 <= v_ds <= overdrive:
        raise RegimeError(
            f"triode equation needs v_gs > v_th and 0 <= v_ds <= v_gs - v_th "
            f"(v_gs={v_gs}, v_th={v_th}, v_ds={v_ds})"
        )
    return mu * p.c_ox * (p.w / p.l) * (overdrive - v_ds / 2.0) * v_ds


def mobility(t: float, p: TransistorParams) -> float:
    if t <= 0:
        raise DomainError(f"temperature must be positive, got {t}")
    return p.mu_ref * (t / p.t_ref) ** (-p.k_u)


def drain_current(v_gs: float, v_ds: float, t: float, p: TransistorParams) -> float:
    """Region-stitched drain current: subthreshold below the stitch point,
    triode above it (saturation is clamped to the triode edge)."""
    v_th = threshold_voltage(p.v_sb, p)
    if v_gs - v_th <= p.v_stitch:
        return subthreshold_current(v_gs, v_ds, p, v_th)
    v_ds = min(v_ds, v_gs - v_th)
    return triode_current(v_gs, v_ds, mobility(t, p), p, v_th)


def pair_on_resistance(v_gate: float, t: float, p: TransistorParams) -> float:
    """Small-signal on-resistance of one driver pair (two devices in series)."""
    v_th = threshold_voltage(p.v_sb, p)
    overdrive = v_gate - v_th
    if overdrive <= 0:
        raise RegimeError(f"gate drive {v_gate} V does not exceed v_th = {v_th:.4g} V")
    k = mobility(t, p) * p.c_ox * (p.w / p.l)
    return 2.0 / (k * overdrive)


def drive_current(level: QualityLevel, bit: int, r_mtj: float, cfg: DriverConfig) -> float:
    if r_mtj <= 0:
        raise DomainError(f"MTJ resistance must be positive, got {r_mtj}")
    path = cfg.path(level, bit)
    return cfg.supply_voltage(path.supply) / (cfg.r_on_pair / path.pairs + r_mtj)
