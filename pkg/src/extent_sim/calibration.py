"""Fit the free driver constants to the published write anchors.

The solver is a fixed sequence of bracketed root finds over closed-form
expected-value outcomes, so it is deterministic and needs no sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.optimize import brentq

from .driver import DriverConfig, QualityLevel, pair_on_resistance
from .engine import WriteConfig, basic_write, expected_write, resolve_path
from .errors import CalibrationError, DomainError, RegimeError

_XTOL = 1e-15
_RTOL = 1e-13


@dataclass(frozen=True)
class CalibrationTargets:
    e_write1_exact: float = 337.2e-12
    t_write1_exact: float = 6.9e-9
    e_basic: float = 1046.0e-12
    t_basic: float = 19.0e-9
    # write-1 over write-0 ratio, applied to both energy and latency
    asymmetry: float = 2.5
    tol_energy: float = 0.005
    tol_latency: float = 0.005
    tol_basic: float = 0.01

    def __post_init__(self):
        for name in ("tol_energy", "tol_latency", "tol_basic"):
            if not 0 < getattr(self, name) <= 0.05:
                raise DomainError(f"{name} must lie in (0, 0.05]")


@dataclass(frozen=True)
class Residual:
    target: str
    achieved: float
    wanted: float
    tolerance: float

    @property
    def relative(self) -> float:
        return (self.achieved - self.wanted) / self.wanted

    @property
    def ok(self) -> bool:
        return abs(self.relative) <= self.tolerance


@dataclass(frozen=True)
class CalibrationResult:
    driver: DriverConfig
    write: WriteConfig
    residuals: tuple

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.residuals)

    def report(self) -> str:
        lines = ["target,achieved,wanted,relative_residual"]
        for r in self.residuals:
            lines.append(f"{r.target},{r.achieved:.9g},{r.wanted:.9g},{r.relative:.3e}")
        return "\n".join(lines) + "\n"


def _root(fn, lo, hi, target_name):
    try:
        f_lo, f_hi = fn(lo), fn(hi)
    except (DomainError, OverflowError) as exc:
        raise CalibrationError(f"{target_name}: cannot evaluate bracket ({exc})") from exc
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise CalibrationError(f"{target_name}: target not reachable (no sign change in [{lo:.4g}, {hi:.4g}])")
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    return brentq(fn, lo, hi, xtol=_XTOL, rtol=_RTOL, maxiter=500)


def _solve_ic_scale(level, bit, t_target, driver, mtj, write, attr, name):
    """Critical-current scale that makes the mean switching time ``t_target``."""
    if not t_target > 0:
        raise CalibrationError(f"{name}: switching time target must be positive, got {t_target}")

    def t_sw(scale):
        w = replace(write, **{attr: scale})
        try:
            return resolve_path(level, bit, driver, mtj, w).require_t_sw()
        except RegimeError:
            return math.inf

    # the switching time is ~ scale / (1 - scale * k); work in log space of the time
    def residual(scale):
        t = t_sw(scale)
        return 1e6 if math.isinf(t) else math.log(t / t_target)

    lo = 1e-9
    hi = lo
    while t_sw(hi) < math.inf and hi < 1e9:
        hi *= 2.0
    # shrink the upper end to the last finite point below the regime boundary
    hi_fin = hi / 2.0
    if hi_fin <= lo:
        hi_fin = lo
    for _ in range(200):
        mid = 0.5 * (hi_fin + hi)
        if t_sw(mid) < math.inf:
            hi_fin = mid
        else:
            hi = mid
    return _root(residual, lo, hi_fin, name)


def calibrate(
    targets: CalibrationTargets,
    driver: DriverConfig,
    mtj,
    write: WriteConfig = WriteConfig(),
    cmos=None,
    level: QualityLevel = QualityLevel.Q11,
) -> CalibrationResult:
    """Solve r_on_pair, the critical-current scales, i_leg, e_detector and
    the baseline supply current so the targets are met.

    ``r_on_pair`` comes from the transistor model when ``cmos`` is given.
    """
    for name in ("e_write1_exact", "t_write1_exact", "e_basic", "t_basic", "asymmetry"):
        if not getattr(targets, name) > 0:
            raise CalibrationError(f"{name}: target must be positive, got {getattr(targets, name)!r}")
    if not driver.is_exact(level, 1):
        raise CalibrationError(f"level {level.tag} is not configured as exact")
    if cmos is not None:
        driver = replace(driver, r_on_pair=pair_on_resistance(driver.vddh, mtj.temperature, cmos))

    t1 = targets.t_write1_exact
    t0 = t1 / targets.asymmetry
    e1 = targets.e_write1_exact
    e0 = e1 / targets.asymmetry

    s1 = _solve_ic_scale(level, 1, t1, driver, mtj, write, "p_to_ap_ic_scale", "t_write1_exact")
    write = replace(write, p_to_ap_ic_scale=s1)
    s0 = _solve_ic_scale(level, 0, t0, driver, mtj, write, "ap_to_p_ic_scale", "asymmetry (latency)")
    write = replace(write, ap_to_p_ic_scale=s0)

    p1 = resolve_path(level, 1, driver, mtj, write)
    p0 = resolve_path(level, 0, driver, mtj, write)
    # energy = V * (i_w + pairs * i_leg) * t + e_det, linear in (i_leg, e_det)
    a1, b1 = p1.supply_v * p1.pairs * t1, p1.supply_v * p1.i_w * t1
    a0, b0 = p0.supply_v * p0.pairs * t0, p0.supply_v * p0.i_w * t0

    def e_det_for(i_leg):
        return e0 - b0 - a0 * i_leg

    def residual(i_leg):
        return (a1 * i_leg + b1 + e_det_for(i_leg) - e1) / e1

    i_leg_max = (e0 - b0) / a0
    if i_leg_max < 0:
        raise CalibrationError("asymmetry (energy): write-0 energy target is below the bare cell energy")
    i_leg = _root(residual, 0.0, i_leg_max, "e_write1_exact")
    e_det = max(0.0, e_det_for(i_leg))
    driver = replace(driver, i_leg=i_leg, e_detector=e_det)

    if not targets.t_basic > 0:
        raise CalibrationError("t_basic: target must be positive")
    i_basic = _root(
        lambda i: driver.vddh * i * targets.t_basic / targets.e_basic - 1.0, 0.0, 10.0, "e_basic"
    )
    driver = replace(driver, basic_i_supply=i_basic, basic_t_pulse=targets.t_basic)
    return CalibrationResult(driver, write, residuals(targets, driver, mtj, write, level))


def residuals(targets: CalibrationTargets, driver, mtj, write, level=QualityLevel.Q11) -> tuple:
    w1 = expected_write(level, 1, driver, mtj, write)
    w0 = expected_write(level, 0, driver, mtj, write)
    e_b, t_b = basic_write(driver)
    return (
        Residual("e_write1_exact_pj", w1.energy * 1e12, targets.e_write1_exact * 1e12, targets.tol_energy),
        Residual("t_write1_exact_ns", w1.latency * 1e9, targets.t_write1_exact * 1e9, targets.tol_latency),
        Residual("energy_asymmetry", w1.energy / w0.energy, targets.asymmetry, targets.tol_energy),
        Residual("latency_asymmetry", w1.latency / w0.latency, targets.asymmetry, targets.tol_latency),
        Residual("e_basic_pj", e_b * 1e12, targets.e_basic * 1e12, targets.tol_basic),
        Residual("t_basic_ns", t_b * 1e9, targets.t_basic * 1e9, targets.tol_basic),
    )
