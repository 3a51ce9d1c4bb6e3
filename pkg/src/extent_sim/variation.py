"""Process-variation Monte Carlo and deterministic parameter sweeps.

Trials draw from per-trial substreams seeded by ``(seed, trial)``, so a run
split across worker processes reproduces the serial run exactly.
"""

from __future__ import annotations

import enum
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import device
from .driver import QualityLevel, pair_on_resistance
from .engine import WriteConfig, expected_write, resolve_path
from .errors import UsageError

N_BINS = 32


@dataclass(frozen=True)
class Distribution:
    """Gaussian around the nominal value, optionally clamped."""

    sigma_fraction: float
    clamp_fraction: Optional[float] = None

    def __post_init__(self):
        if self.sigma_fraction < 0:
            raise UsageError("sigma_fraction must be non-negative")
        if self.clamp_fraction is not None and self.clamp_fraction < self.sigma_fraction:
            raise UsageError("clamp_fraction must be at least sigma_fraction")

    @classmethod
    def parse(cls, text: str) -> "Distribution":
        """``"0.03:0.10"`` (sigma:clamp) or ``"0.03:none"``."""
        try:
            sigma, _, clamp = text.strip().partition(":")
            clamp = clamp.strip().lower()
            return cls(float(sigma), None if clamp in ("", "none") else float(clamp))
        except ValueError as exc:
            raise UsageError(f"invalid distribution {text!r}, expected sigma:clamp") from exc

    def __str__(self):
        clamp = "none" if self.clamp_fraction is None else repr(self.clamp_fraction)
        return f"{self.sigma_fraction!r}:{clamp}"

    def draw(self, z: float) -> float:
        """Relative deviation for a standard-normal draw ``z``."""
        d = self.sigma_fraction * z
        if self.clamp_fraction is not None:
            d = min(self.clamp_fraction, max(-self.clamp_fraction, d))
        return d


def _default_entries():
    return {
        "mtj.t_ox": Distribution(0.03, 0.10),
        "mtj.t_fl": Distribution(0.03, 0.10),
        "mtj.resistance": Distribution(0.03, 0.05),
        "cmos.w": Distribution(0.03, 0.09),
        "cmos.l": Distribution(0.03, 0.09),
        "cmos.v_th0": Distribution(0.03, 0.09),
    }


@dataclass(frozen=True)
class VariationSpec:
    entries: dict = field(default_factory=_default_entries)
    # correlation between the r_p and r_ap draws of "mtj.resistance"
    r_correlation: float = 0.0
    # tunnelling sensitivity: r scales as exp(k_ox * dt_ox / t_ox)
    k_ox: float = 2.0

    def __post_init__(self):
        if not -1.0 <= self.r_correlation <= 1.0:
            raise UsageError("r_correlation must lie in [-1, 1]")

    def without_variation(self) -> "VariationSpec":
        return replace(self, entries={k: Distribution(0.0, None) for k in self.entries})


_SECTIONS = ("mtj", "cmos", "driver")


def _split(path: str):
    section, _, name = path.partition(".")
    if section not in _SECTIONS or not name:
        raise UsageError(f"unknown parameter path {path!r}")
    return section, name


def apply_relative(nominal, changes: dict, spec: VariationSpec = VariationSpec(), r_ap_rel=None):
    """Return ``nominal`` with each path scaled by ``1 + rel``.

    A few paths are composite: ``mtj.t_ox`` and ``mtj.t_fl`` also move the
    resistances and the critical current, and transistor geometry moves the
    driver on-resistance.
    """
    mtj_upd, cmos_upd, drv_upd = {}, {}, {}
    r_scale = 1.0
    for path, rel in changes.items():
        section, name = _split(path)
        factor = 1.0 + rel
        if path == "mtj.resistance":
            ap_factor = 1.0 + (rel if r_ap_rel is None else r_ap_rel)
            mtj_upd["r_p"] = nominal.mtj.r_p * factor
            mtj_upd["r_ap"] = nominal.mtj.r_ap * ap_factor
            continue
        obj = getattr(nominal, section)
        if not hasattr(obj, name) or name.startswith("_"):
            raise UsageError(f"unknown parameter path {path!r}")
        value = getattr(obj, name)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise UsageError(f"parameter {path!r} is not numeric")
        target = {"mtj": mtj_upd, "cmos": cmos_upd, "driver": drv_upd}[section]
        target[name] = value * factor
        if path == "mtj.t_ox":
            r_scale *= math.exp(spec.k_ox * rel)
        elif path == "mtj.t_fl":
            mtj_upd["i_c"] = mtj_upd.get("i_c", nominal.mtj.i_c) * factor
    if r_scale != 1.0:
        mtj_upd["r_p"] = mtj_upd.get("r_p", nominal.mtj.r_p) * r_scale
        mtj_upd["r_ap"] = mtj_upd.get("r_ap", nominal.mtj.r_ap) * r_scale
    mtj = replace(nominal.mtj, **mtj_upd) if mtj_upd else nominal.mtj
    cmos = replace(nominal.cmos, **cmos_upd) if cmos_upd else nominal.cmos
    drv = nominal.driver
    if cmos_upd:
        ratio = pair_on_resistance(drv.vddh, mtj.temperature, cmos) / pair_on_resistance(
            drv.vddh, mtj.temperature, nominal.cmos
        )
        drv_upd["r_on_pair"] = drv_upd.get("r_on_pair", drv.r_on_pair) * ratio
    drv = replace(drv, **drv_upd) if drv_upd else drv
    return replace(nominal, mtj=mtj, cmos=cmos, driver=drv)


def sample_parameters(spec: VariationSpec, rng, nominal):
    """One perturbed copy of ``nominal`` (any object with mtj/cmos/driver)."""
    changes, r_ap_rel = {}, None
    for path, dist in spec.entries.items():
        _split(path)
        z = rng.standard_normal()
        changes[path] = dist.draw(z)
        if path == "mtj.resistance":
            z_ind = rng.standard_normal()
            rho = spec.r_correlation
            r_ap_rel = dist.draw(rho * z + math.sqrt(1.0 - rho * rho) * z_ind)
    return apply_relative(nominal, changes, spec, r_ap_rel)


def with_parameter(nominal, path: str, value: float, spec: VariationSpec = VariationSpec()):
    """Set ``path`` to an absolute value, carrying composite effects along."""
    if path == "mtj.resistance":
        raise UsageError("mtj.resistance is relative only; sweep mtj.r_p or mtj.r_ap")
    section, name = _split(path)
    obj = getattr(nominal, section)
    if not hasattr(obj, name):
        raise UsageError(f"unknown parameter path {path!r}")
    base = getattr(obj, name)
    if base == 0:
        return replace(nominal, **{section: replace(obj, **{name: float(value)})})
    return apply_relative(nominal, {path: value / base - 1.0}, spec)


class ScenarioKind(enum.Enum):
    WRITE_ONE = "write1"
    WRITE_ZERO = "write0"


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind = ScenarioKind.WRITE_ONE
    level: QualityLevel = QualityLevel.Q11
    # run the whole pulse without termination (a completed, uniform write)
    full_pulse: bool = False

    @property
    def target_bit(self) -> int:
        return 1 if self.kind is ScenarioKind.WRITE_ONE else 0


@dataclass(frozen=True)
class McTrial:
    trial: int
    param_hash: str
    energy: float
    latency: float
    switched: bool
    wer: float
    regime_error: bool = False


@dataclass(frozen=True)
class MetricStats:
    min: float
    max: float
    mean: float
    std: float
    hist_counts: tuple
    hist_edges: tuple


@dataclass(frozen=True)
class McSummary:
    n_trials: int
    seed: int
    energy: MetricStats
    latency: MetricStats
    wer: MetricStats
    switched: int
    regime_errors: int
    trials: tuple = ()

    def trials_csv(self) -> str:
        lines = ["trial,param_hash,energy_pj,latency_ns,switched"]
        for t in self.trials:
            lines.append(
                f"{t.trial},{t.param_hash},{t.energy * 1e12:.6f},{t.latency * 1e9:.6f},{int(t.switched)}"
            )
        return "\n".join(lines) + "\n"

    def summary_csv(self) -> str:
        lines = ["metric,stat,value", f"trials,count,{self.n_trials}", f"seed,value,{self.seed}"]
        for name, unit, scale in (("energy", "pj", 1e12), ("latency", "ns", 1e9), ("wer", "", 1.0)):
            st = getattr(self, name)
            label = f"{name}_{unit}" if unit else name
            for stat in ("min", "max", "mean", "std"):
                lines.append(f"{label},{stat},{getattr(st, stat) * scale:.9g}")
        lines.append(f"switched,count,{self.switched}")
        lines.append(f"regime_errors,count,{self.regime_errors}")
        return "\n".join(lines) + "\n"


def _param_hash(cfg) -> str:
    key = repr((cfg.mtj, cfg.cmos, cfg.driver.r_on_pair, cfg.driver.vddl, cfg.driver.vddh))
    return hashlib.sha256(key.encode("ascii")).hexdigest()[:12]


def trial_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, k]))


def run_trial(k: int, scenario: Scenario, seed: int, spec: VariationSpec, nominal) -> McTrial:
    rng = trial_rng(seed, k)
    cfg = sample_parameters(spec, rng, nominal)
    write = getattr(cfg, "write", WriteConfig())
    drv = cfg.driver
    bit = scenario.target_bit
    path = resolve_path(scenario.level, bit, drv, cfg.mtj, write)
    h = _param_hash(cfg)
    if path.t_sw is None:
        return McTrial(k, h, path.energy(drv.t_pulse, drv.e_detector), drv.t_pulse, False, 1.0, True)
    wer = device.wer_exponential(drv.t_pulse, path.t_sw)
    if scenario.full_pulse:
        return McTrial(k, h, path.energy(drv.t_pulse, drv.e_detector), drv.t_pulse, True, wer)
    t_switch = device.sample_switching_time(rng.random(), path.t_sw)
    switched = path.exact or t_switch <= drv.t_pulse
    latency = t_switch if switched else drv.t_pulse
    return McTrial(k, h, path.energy(latency, drv.e_detector), latency, switched, wer)


def _run_chunk(args):
    ks, scenario, seed, spec, nominal = args
    return [run_trial(k, scenario, seed, spec, nominal) for k in ks]


def metric_stats(values) -> MetricStats:
    # sorting first makes the float sums independent of trial order
    v = np.sort(np.asarray(values, dtype=float))
    mean = math.fsum(v) / v.size
    std = math.sqrt(math.fsum((v - mean) ** 2) / v.size)
    lo, hi = float(v[0]), float(v[-1])
    counts, edges = np.histogram(v, bins=N_BINS, range=(lo, hi) if hi > lo else (lo - 0.5, lo + 0.5))
    mean = min(max(mean, lo), hi)
    return MetricStats(lo, hi, mean, std, tuple(int(c) for c in counts), tuple(float(e) for e in edges))


def summarize(trials, seed: int) -> McSummary:
    trials = tuple(sorted(trials, key=lambda t: t.trial))
    if not trials:
        raise UsageError("a Monte Carlo run needs at least one trial")
    return McSummary(
        n_trials=len(trials),
        seed=seed,
        energy=metric_stats([t.energy for t in trials]),
        latency=metric_stats([t.latency for t in trials]),
        wer=metric_stats([t.wer for t in trials]),
        switched=sum(t.switched for t in trials),
        regime_errors=sum(t.regime_error for t in trials),
        trials=trials,
    )


def run_monte_carlo(
    scenario: Scenario, n: int, seed: int, spec: VariationSpec, nominal, workers: int = 1
) -> McSummary:
    if n < 1:
        raise UsageError("number of trials must be at least 1")
    if workers <= 1:
        trials = [run_trial(k, scenario, seed, spec, nominal) for k in range(n)]
    else:
        chunks = [range(i, n, workers) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(c, scenario, seed, spec, nominal) for c in chunks])
            trials = [t for part in parts for t in part]
    return summarize(trials, seed)


@dataclass(frozen=True)
class SweepRow:
    value: float
    energy: float
    latency: float
    wer: float
    # below the precessional threshold: reported as a failed full pulse
    regime_error: bool = False


def evaluate(scenario: Scenario, cfg) -> SweepRow:
    """Expected-value outcome of ``scenario`` under ``cfg`` (value field unset)."""
    write = getattr(cfg, "write", WriteConfig())
    drv = cfg.driver
    path = resolve_path(scenario.level, scenario.target_bit, drv, cfg.mtj, write)
    full = path.energy(drv.t_pulse, drv.e_detector)
    if path.t_sw is None:
        return SweepRow(math.nan, full, drv.t_pulse, 1.0, True)
    ew = expected_write(scenario.level, scenario.target_bit, drv, cfg.mtj, write)
    if scenario.full_pulse:
        return SweepRow(math.nan, full, drv.t_pulse, ew.wer)
    return SweepRow(math.nan, ew.energy, ew.switched_latency, ew.wer)


def sweep(path: str, values, scenario: Scenario, nominal, spec: VariationSpec = VariationSpec()):
    values = list(values)
    if not values:
        raise UsageError("sweep needs at least one value")
    rows = []
    for v in values:
        row = evaluate(scenario, with_parameter(nominal, path, float(v), spec))
        rows.append(replace(row, value=float(v)))
    return rows


def sweep_csv(path: str, rows) -> str:
    lines = [f"{path},energy_pj,latency_ns,wer,regime_error"]
    for r in rows:
        lines.append(f"{r.value!r},{r.energy * 1e12:.6f},{r.latency * 1e9:.6f},{r.wer:.6e},{int(r.regime_error)}")
    return "\n".join(lines) + "\n"
