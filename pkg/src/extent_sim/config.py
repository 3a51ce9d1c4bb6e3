"""Run configuration: one immutable bundle of every section, loaded from a
plain ``[section]`` / ``key = value`` text file.

File values carry the unit in the key name; the dataclasses hold SI.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .device import CriticalCurrentMode, MtjParams
from .driver import DriverConfig, PathSpec, QualityLevel, TransistorParams
from .engine import SkipMode, SoftErrorConfig, WriteConfig
from .errors import UsageError
from .trace import TraceConfig
from .variation import Distribution, VariationSpec

CONFIG_ENV = "EXTENT_SIM_CONFIG"


@dataclass(frozen=True)
class SimConfig:
    mtj: MtjParams = field(default_factory=MtjParams)
    cmos: TransistorParams = field(default_factory=TransistorParams)
    driver: DriverConfig = field(default_factory=DriverConfig)
    write: WriteConfig = field(default_factory=WriteConfig)
    soft_error: SoftErrorConfig = field(default_factory=SoftErrorConfig)
    variation: VariationSpec = field(default_factory=VariationSpec)
    trace: TraceConfig = field(default_factory=TraceConfig)
    seed: int = 0
    out: Optional[str] = None


# (section, file key) -> (attribute on that section's dataclass, file-unit -> SI factor)
_SCALAR_KEYS = {
    "mtj": {
        "r_p_ohm": ("r_p", 1.0),
        "r_ap_ohm": ("r_ap", 1.0),
        "tmr0": ("tmr0", 1.0),
        "i_c_ua": ("i_c", 1e-6),
        "delta": ("delta", 1.0),
        "tau0_ns": ("tau0", 1e-9),
        "lambda": ("lambda_", 1.0),
        "c_tech_per_ns": ("c_tech", 1e9),
        "theta0_rad": ("theta0", 1.0),
        "temperature_k": ("temperature", 1.0),
        "tmr_temp_coeff_per_k": ("tmr_temp_coeff", 1.0),
        "tmr_bias_coeff_per_v": ("tmr_bias_coeff", 1.0),
        "v_c0_v": ("v_c0", 1.0),
        "spin_p": ("spin_p", 1.0),
        "t_fl_nm": ("t_fl", 1e-9),
        "t_ox_nm": ("t_ox", 1e-9),
        "alpha_damp": ("alpha_damp", 1.0),
        "gamma_gyro_per_t_s": ("gamma_gyro", 1.0),
        "m_s_a_per_m": ("m_s", 1.0),
        "h_k_a_per_m": ("h_k", 1.0),
        "v_st_m3": ("v_st", 1.0),
        "e_barrier_j": ("e_barrier", 1.0),
        "h_ex_a_per_m": ("h_ex", 1.0),
        "h_dip_a_per_m": ("h_dip", 1.0),
        "h_ki_a_per_m": ("h_ki", 1.0),
        "h_d_a_per_m": ("h_d", 1.0),
        "area_m2": ("area", 1.0),
        "ra_product_ohm_m2": ("ra_product", 1.0),
    },
    "cmos": {
        "v_th0_v": ("v_th0", 1.0),
        "gamma_body_sqrt_v": ("gamma_body", 1.0),
        "phi_f2_v": ("phi_f2", 1.0),
        "s_slope_v_per_dec": ("s_slope", 1.0),
        "i_s_a": ("i_s", 1.0),
        "w_nm": ("w", 1e-9),
        "l_nm": ("l", 1e-9),
        "c_ox_f_per_m2": ("c_ox", 1.0),
        "mu_ref_m2_per_v_s": ("mu_ref", 1.0),
        "t_ref_k": ("t_ref", 1.0),
        "k_u": ("k_u", 1.0),
        "v_sb_v": ("v_sb", 1.0),
        "v_stitch_v": ("v_stitch", 1.0),
    },
    "driver": {
        "vddl_v": ("vddl", 1.0),
        "vddh_v": ("vddh", 1.0),
        "t_pulse_ns": ("t_pulse", 1e-9),
        "r_on_pair_ohm": ("r_on_pair", 1.0),
        "i_leg_ma": ("i_leg", 1e-3),
        "e_detector_pj": ("e_detector", 1e-12),
        "e_sense_pj": ("e_sense", 1e-12),
        "basic_t_pulse_ns": ("basic_t_pulse", 1e-9),
        "basic_i_supply_ma": ("basic_i_supply", 1e-3),
    },
    "write": {
        "sense_latency_ns": ("sense_latency", 1e-9),
        "ap_to_p_ic_scale": ("ap_to_p_ic_scale", 1.0),
        "p_to_ap_ic_scale": ("p_to_ap_ic_scale", 1.0),
    },
    "soft_error": {
        "q_delay_fc": ("q_delay", 1e-15),
        "q_fail_fc": ("q_fail", 1e-15),
        "tau_rise_ps": ("tau_rise", 1e-12),
        "tau_fall_ps": ("tau_fall", 1e-12),
    },
    "variation": {
        "r_correlation": ("r_correlation", 1.0),
        "k_ox": ("k_ox", 1.0),
    },
    "trace": {
        "table_capacity": ("table_capacity", None),
        "block_bytes": ("block_bytes", None),
    },
}
_SPECIAL_KEYS = {
    "driver": {"level_map.q00", "level_map.q01", "level_map.q10", "level_map.q11", "exact_levels"},
    "write": {"skip_mode", "ic_mode"},
    "trace": {"default_level", "initial_store"},
    "run": {"seed", "out"},
}
SECTIONS = ("mtj", "cmos", "driver", "write", "soft_error", "variation", "trace", "run")


def _number(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"{where}: expected a number, got {text!r}") from exc


def _apply_section(section: str, obj, items: dict):
    updates = {}
    scalars = _SCALAR_KEYS.get(section, {})
    for key, text in items.items():
        where = f"[{section}] {key}"
        if key in scalars:
            attr, scale = scalars[key]
            if scale is None:
                updates[attr] = int(_number(text, where))
            else:
                updates[attr] = _number(text, where) * scale
        elif section == "driver" and key.startswith("level_map."):
            level = QualityLevel.parse(key.split(".", 1)[1])
            level_map = dict(updates.get("level_map", obj.level_map))
            level_map[level] = PathSpec.parse(text)
            updates["level_map"] = level_map
        elif section == "driver" and key == "exact_levels":
            names = [t for t in text.replace(",", " ").split() if t and t != "none"]
            updates["exact_levels"] = frozenset(QualityLevel.parse(t) for t in names)
        elif section == "write" and key == "skip_mode":
            updates["skip_mode"] = _enum(SkipMode, text, where)
        elif section == "write" and key == "ic_mode":
            updates["ic_mode"] = _enum(CriticalCurrentMode, text, where)
        elif section == "trace" and key == "default_level":
            updates["default_level"] = QualityLevel.parse(text)
        elif section == "trace" and key == "initial_store":
            if text not in ("zero", "random"):
                raise UsageError(f"{where}: expected 'zero' or 'random'")
            updates["initial_store"] = text
        elif section == "variation" and key.startswith("param."):
            path = key[len("param."):]
            entries = dict(updates.get("entries", obj.entries))
            if text.strip().lower() == "off":
                entries.pop(path, None)
            else:
                entries[path] = Distribution.parse(text)
            updates["entries"] = entries
        else:
            raise UsageError(f"unknown configuration key {where}")
    return replace(obj, **updates) if updates else obj


def _enum(cls, text, where):
    try:
        return cls(text.strip().lower())
    except ValueError as exc:
        choices = ", ".join(m.value for m in cls)
        raise UsageError(f"{where}: expected one of {choices}") from exc


def parse_config(text: str, base: Optional[SimConfig] = None) -> SimConfig:
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",), delimiters=("=",)
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"malformed configuration: {exc}") from exc
    cfg = base or SimConfig()
    parts = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise UsageError(f"unknown configuration section [{section}]")
        items = dict(parser.items(section))
        if section == "run":
            for key, value in items.items():
                if key == "seed":
                    parts["seed"] = int(_number(value, "[run] seed"))
                elif key == "out":
                    parts["out"] = value
                else:
                    raise UsageError(f"unknown configuration key [run] {key}")
            continue
        parts[section] = _apply_section(section, parts.get(section, getattr(cfg, section)), items)
    return replace(cfg, **parts)


def load_config(path=None, overrides=()) -> SimConfig:
    """Load a file (or ``$EXTENT_SIM_CONFIG``) and apply ``section.key=value`` overrides."""
    path = path or os.environ.get(CONFIG_ENV)
    cfg = SimConfig()
    if path:
        try:
            text = Path(path).read_text(encoding="ascii")
        except OSError as exc:
            raise UsageError(f"cannot read configuration {path}: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise UsageError(f"configuration {path} is not ASCII") from exc
        cfg = parse_config(text, cfg)
    return apply_overrides(cfg, overrides)


def apply_overrides(cfg: SimConfig, overrides) -> SimConfig:
    lines = {}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise UsageError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        lines.setdefault(section, []).append(f"{key} = {value.strip()}")
    if not lines:
        return cfg
    text = "\n".join(f"[{s}]\n" + "\n".join(body) for s, body in lines.items())
    return parse_config(text, cfg)


def _fmt(value: float, scale: float) -> str:
    """Shortest file-unit text that parses back to exactly ``value``."""
    x = value / scale
    for digits in (12, 15, 17):
        text = f"{x:.{digits}g}"
        if float(text) * scale == value:
            return text
    return repr(x)


def dump_section(cfg: SimConfig, section: str) -> str:
    """Render one section in the file format; round-trips through parse_config."""
    obj = getattr(cfg, section)
    out = io.StringIO()
    out.write(f"[{section}]\n")
    for key, (attr, scale) in _SCALAR_KEYS.get(section, {}).items():
        value = getattr(obj, attr)
        out.write(f"{key} = {value if scale is None else _fmt(value, scale)}\n")
    if section == "driver":
        for level in (QualityLevel.Q01, QualityLevel.Q10, QualityLevel.Q00, QualityLevel.Q11):
            out.write(f"level_map.{level.tag} = {obj.level_map[level]}\n")
        exact = sorted(lv.tag for lv in obj.exact_levels) or ["none"]
        out.write(f"exact_levels = {','.join(exact)}\n")
    elif section == "write":
        out.write(f"skip_mode = {obj.skip_mode.value}\nic_mode = {obj.ic_mode.value}\n")
    elif section == "trace":
        out.write(f"default_level = {obj.default_level.value}\ninitial_store = {obj.initial_store}\n")
    elif section == "variation":
        for path, dist in obj.entries.items():
            out.write(f"param.{path} = {dist}\n")
    return out.getvalue()


def dump_config(cfg: SimConfig) -> str:
    return "\n".join(dump_section(cfg, s) for s in SECTIONS[:-1])


def known_keys(section: str):
    return sorted(set(_SCALAR_KEYS.get(section, {})) | _SPECIAL_KEYS.get(section, set()))


__all__ = [
    "SimConfig",
    "parse_config",
    "load_config",
    "apply_overrides",
    "dump_section",
    "dump_config",
    "known_keys",
    "CONFIG_ENV",
]
