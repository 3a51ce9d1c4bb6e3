"""Write transactions: repetitive-write suppression, stochastic switching,
self-termination, energy/latency accounting and particle strikes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import device
from .device import CellState, CriticalCurrentMode, MtjParams
from .driver import DriverConfig, QualityLevel, drive_current
from .errors import DomainError, RegimeError, UsageError


class SkipMode(enum.Enum):
    BIT = "bit"
    WORD = "word"
    NONE = "none"


@dataclass(frozen=True)
class WriteConfig:
    sense_latency: float = 0.5e-9
    # critical-current scale for P->AP switching (the effective overdrive knob)
    p_to_ap_ic_scale: float = 2.4442099125396655
    # AP->P critical current relative to the P->AP one
    ap_to_p_ic_scale: float = 0.34247080731676116
    skip_mode: SkipMode = SkipMode.BIT
    ic_mode: CriticalCurrentMode = CriticalCurrentMode.TABULATED

    def __post_init__(self):
        if self.sense_latency < 0:
            raise DomainError("sense latency must be non-negative")
        if self.p_to_ap_ic_scale <= 0 or self.ap_to_p_ic_scale <= 0:
            raise DomainError("critical-current scales must be positive")


@dataclass(frozen=True)
class SoftErrorConfig:
    q_delay: float = 50e-15
    q_fail: float = 1e-12
    tau_rise: float = 50e-12
    tau_fall: float = 200e-12


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class SoftErrorEvent:
    charge: float
    polarity: Polarity = Polarity.NEGATIVE
    t_strike: float = 0.0
    tau_rise: float = 50e-12
    tau_fall: float = 200e-12

    def __post_init__(self):
        if not self.tau_fall > self.tau_rise > 0:
            raise DomainError("require tau_fall > tau_rise > 0")
        if self.charge < 0:
            raise DomainError("injected charge magnitude must be non-negative")
        if self.t_strike < 0:
            raise DomainError("strike time must be non-negative")


# Presets matching the two strike waveforms: a 200 fC hit delays the write,
# a 50 pC hit makes it fail.
WEAK_STRIKE = SoftErrorEvent(charge=200e-15, t_strike=1e-9)
STRONG_STRIKE = SoftErrorEvent(charge=50e-12, t_strike=1e-9)


class StrikeEffect(enum.Enum):
    NONE = "none"
    DELAYED = "delayed"
    FAILED_WRITE = "failed_write"


@dataclass(frozen=True)
class StrikeSummary:
    delta_q: float
    classification: StrikeEffect
    extra_latency: float


class WriteResult(enum.Enum):
    SKIPPED = "skipped"
    SWITCHED = "switched"
    FAILED = "failed"


@dataclass(frozen=True)
class WriteRequest:
    target_bit: int
    level: QualityLevel = QualityLevel.Q00

    def __post_init__(self):
        if self.target_bit not in (0, 1):
            raise UsageError(f"target bit must be 0 or 1, got {self.target_bit}")


@dataclass(frozen=True)
class WriteOutcome:
    result: WriteResult
    latency: float
    energy: float
    t_switch_sampled: Optional[float] = None
    soft_error_applied: bool = False


@dataclass(frozen=True)
class ResolvedPath:
    """Operating point of one (level, target bit, source state) combination."""

    supply_v: float
    pairs: int
    i_w: float
    supply_current: float
    exact: bool
    t_sw: Optional[float]
    regime_error: Optional[str] = None

    def energy(self, duration: float, e_detector: float) -> float:
        return self.supply_v * self.supply_current * duration + e_detector

    def require_t_sw(self) -> float:
        if self.t_sw is None:
            raise RegimeError(self.regime_error)
        return self.t_sw


def switching_params(target_bit: int, mtj: MtjParams, write: WriteConfig) -> MtjParams:
    """Device parameters with the direction-dependent critical current applied."""
    i_c = device.critical_current(mtj, mtj.temperature, write.ic_mode) * write.p_to_ap_ic_scale
    if target_bit == 0:
        i_c *= write.ap_to_p_ic_scale
    return replace(mtj, i_c=i_c)


def resolve_path(
    level: QualityLevel,
    target_bit: int,
    driver: DriverConfig,
    mtj: MtjParams,
    write: WriteConfig = WriteConfig(),
    source: Optional[CellState] = None,
) -> ResolvedPath:
    if source is None:
        source = CellState.from_bit(1 - target_bit)
    r_source = device.resistance(source, mtj.temperature, 0.0, mtj)
    path = driver.path(level, target_bit)
    i_w = drive_current(level, target_bit, r_source, driver)
    t_sw, err = None, None
    try:
        t_sw = device.mean_switching_time(i_w, switching_params(target_bit, mtj, write))
    except RegimeError as exc:
        err = str(exc)
    return ResolvedPath(
        supply_v=driver.supply_voltage(path.supply),
        pairs=path.pairs,
        i_w=i_w,
        supply_current=i_w + path.pairs * driver.i_leg,
        exact=driver.is_exact(level, target_bit),
        t_sw=t_sw,
        regime_error=err,
    )


def injected_charge(ev: SoftErrorEvent, window: float) -> float:
    """Charge of the double-exponential glitch delivered within ``window``."""
    if window <= 0:
        return 0.0
    scale = ev.charge / (ev.tau_fall - ev.tau_rise)
    return scale * (
        -ev.tau_fall * math.expm1(-window / ev.tau_fall) + ev.tau_rise * math.expm1(-window / ev.tau_rise)
    )


def inject_soft_error(
    ev: SoftErrorEvent, i_w: float, cfg: DriverConfig, soft: SoftErrorConfig = SoftErrorConfig()
) -> StrikeSummary:
    if ev.t_strike > cfg.t_pulse:
        raise DomainError("strike falls outside the write pulse")
    q = injected_charge(ev, cfg.t_pulse - ev.t_strike)
    if ev.polarity is Polarity.NEGATIVE:
        q = -q
    # a positive glitch is absorbed by the compensation path
    if ev.polarity is Polarity.POSITIVE or abs(q) < soft.q_delay:
        return StrikeSummary(q, StrikeEffect.NONE, 0.0)
    if abs(q) < soft.q_fail:
        return StrikeSummary(q, StrikeEffect.DELAYED, abs(q) / i_w)
    return StrikeSummary(q, StrikeEffect.FAILED_WRITE, 0.0)


def write_cell(
    cell: CellState,
    req: WriteRequest,
    cfg: DriverConfig,
    mtj: MtjParams,
    rng,
    *,
    write: WriteConfig = WriteConfig(),
    strike: Optional[SoftErrorEvent] = None,
    soft: SoftErrorConfig = SoftErrorConfig(),
):
    """Apply one write to one cell.  Returns ``(new_state, outcome)``.

    ``rng`` needs a ``random()`` method; one uniform is consumed per
    attempted transition and none for skipped or repeated writes.
    """
    if cell.stored_bit == req.target_bit:
        if write.skip_mode is not SkipMode.NONE:
            return cell, WriteOutcome(WriteResult.SKIPPED, write.sense_latency, cfg.e_sense)
        # rewrite of the stored value: the detector never fires, pulse runs out
        path = resolve_path(req.level, req.target_bit, cfg, mtj, write, source=cell)
        return cell, WriteOutcome(WriteResult.SWITCHED, cfg.t_pulse, path.energy(cfg.t_pulse, cfg.e_detector))

    path = resolve_path(req.level, req.target_bit, cfg, mtj, write)
    t_sw = path.require_t_sw()
    t_switch = device.sample_switching_time(rng.random(), t_sw)
    switched = path.exact or t_switch <= cfg.t_pulse
    latency = t_switch if switched else cfg.t_pulse

    applied = False
    if strike is not None:
        summary = inject_soft_error(strike, path.i_w, cfg, soft)
        applied = summary.classification is not StrikeEffect.NONE
        if summary.classification is StrikeEffect.FAILED_WRITE:
            switched, latency = False, cfg.t_pulse
        elif summary.classification is StrikeEffect.DELAYED and switched:
            latency += summary.extra_latency
            if not path.exact and latency > cfg.t_pulse:
                switched, latency = False, cfg.t_pulse

    outcome = WriteOutcome(
        WriteResult.SWITCHED if switched else WriteResult.FAILED,
        latency,
        path.energy(latency, cfg.e_detector),
        t_switch,
        applied,
    )
    return (CellState.from_bit(req.target_bit) if switched else cell), outcome


@dataclass(frozen=True)
class WordOutcome:
    energy: float
    latency: float
    skipped: int
    switched: int
    failed: int
    failed_mask: np.ndarray
    bit_energy: np.ndarray


@dataclass(frozen=True)
class BulkResult:
    bits: np.ndarray  # final stored bits, same shape as the input
    energy: np.ndarray  # per-bit energy, J
    latency: np.ndarray  # per-bit latency, s
    skipped: np.ndarray
    failed: np.ndarray
    attempted: np.ndarray


class PathTable:
    """Resolved operating points for one level under one configuration."""

    def __init__(self, level, driver, mtj, write=WriteConfig()):
        self.level = level
        self.driver = driver
        self.write = write
        self.transition = {b: resolve_path(level, b, driver, mtj, write) for b in (0, 1)}
        self.rewrite = {
            b: resolve_path(level, b, driver, mtj, write, source=CellState.from_bit(b)) for b in (0, 1)
        }


def write_bits(old, new, table: PathTable, rng) -> BulkResult:
    """Vectorised per-bit write of equally shaped 0/1 arrays.

    The last axis is the word; word-level skip compares whole rows.
    Uniforms are drawn for attempted transitions in C order, which matches
    a sequence of :func:`write_cell` calls over the flattened arrays.
    """
    old = np.asarray(old, dtype=np.uint8)
    new = np.asarray(new, dtype=np.uint8)
    if old.shape != new.shape:
        raise UsageError(f"word width mismatch: {old.shape} vs {new.shape}")
    drv, wcfg = table.driver, table.write
    differ = old != new
    if wcfg.skip_mode is SkipMode.BIT:
        skipped = ~differ
    elif wcfg.skip_mode is SkipMode.WORD:
        same_word = ~differ.any(axis=-1, keepdims=True)
        skipped = np.broadcast_to(same_word, old.shape).copy()
    else:
        skipped = np.zeros(old.shape, dtype=bool)
    rewrite = ~skipped & ~differ
    attempted = differ

    energy = np.zeros(old.shape)
    latency = np.zeros(old.shape)
    energy[skipped] = drv.e_sense
    latency[skipped] = wcfg.sense_latency
    for b in (0, 1):
        sel = rewrite & (new == b)
        if sel.any():
            energy[sel] = table.rewrite[b].energy(drv.t_pulse, drv.e_detector)
            latency[sel] = drv.t_pulse

    failed = np.zeros(old.shape, dtype=bool)
    n_att = int(attempted.sum())
    if n_att:
        flat_idx = np.flatnonzero(attempted)
        u = rng.random(n_att)
        targets = new.reshape(-1)[flat_idx]
        t_switch = np.empty(n_att)
        e = np.empty(n_att)
        lat = np.empty(n_att)
        fail = np.zeros(n_att, dtype=bool)
        for b in (0, 1):
            sel = targets == b
            if not sel.any():
                continue
            path = table.transition[b]
            t_sw = path.require_t_sw()
            t_switch[sel] = -t_sw * np.log1p(-u[sel])
            if path.exact:
                lat[sel] = t_switch[sel]
            else:
                fail[sel] = t_switch[sel] > drv.t_pulse
                lat[sel] = np.minimum(t_switch[sel], drv.t_pulse)
            e[sel] = path.supply_v * path.supply_current * lat[sel] + drv.e_detector
        energy.reshape(-1)[flat_idx] = e
        latency.reshape(-1)[flat_idx] = lat
        failed.reshape(-1)[flat_idx] = fail

    bits = np.where(attempted & ~failed, new, old).astype(np.uint8)
    return BulkResult(bits, energy, latency, skipped, failed, attempted)


def _as_bits(word) -> np.ndarray:
    arr = np.asarray(word)
    if arr.ndim != 1:
        raise UsageError("a word must be a one-dimensional bit vector")
    if not np.isin(arr, (0, 1)).all():
        raise UsageError("bit vectors may only contain 0 and 1")
    return arr.astype(np.uint8)


def write_word(word_old, word_new, level, cfg: DriverConfig, mtj: MtjParams, rng, *, write=WriteConfig()):
    """Write a bit vector; failed bits keep their old value.

    Returns ``(bits, WordOutcome)`` with summed energy and max latency.
    """
    old, new = _as_bits(word_old), _as_bits(word_new)
    if old.shape != new.shape:
        raise UsageError(f"word width mismatch: {old.size} vs {new.size} bits")
    res = write_bits(old, new, PathTable(level, cfg, mtj, write), rng)
    return res.bits, WordOutcome(
        energy=float(res.energy.sum()),
        latency=float(res.latency.max()) if res.latency.size else 0.0,
        skipped=int(res.skipped.sum()),
        switched=int((res.attempted & ~res.failed).sum()),
        failed=int(res.failed.sum()),
        failed_mask=res.failed,
        bit_energy=res.energy,
    )


@dataclass(frozen=True)
class ExpectedWrite:
    """Closed-form expectation of one transition write."""

    i_w: float
    t_sw: float
    wer: float
    latency: float  # expected driver-on time of the transaction
    switched_latency: float  # E[t_switch | switched]
    energy: float


def expected_write(level, target_bit, driver, mtj, write=WriteConfig()) -> ExpectedWrite:
    path = resolve_path(level, target_bit, driver, mtj, write)
    t_sw = path.require_t_sw()
    wer = device.wer_exponential(driver.t_pulse, t_sw)
    if path.exact:
        latency = switched = t_sw
    else:
        latency = device.truncated_mean_switch_time(t_sw, driver.t_pulse)
        switched = device.conditional_mean_switch_time(t_sw, driver.t_pulse)
    return ExpectedWrite(path.i_w, t_sw, wer, latency, switched, path.energy(latency, driver.e_detector))


def fixed_pulse_energy(level, target_bit, driver, mtj, write=WriteConfig()) -> float:
    """Energy of a completed write that runs the full pulse (no termination)."""
    path = resolve_path(level, target_bit, driver, mtj, write)
    return path.energy(driver.t_pulse, driver.e_detector)


def basic_write(driver: DriverConfig):
    """(energy, latency) of the conventional fixed-pulse cell."""
    return driver.vddh * driver.basic_i_supply * driver.basic_t_pulse, driver.basic_t_pulse
