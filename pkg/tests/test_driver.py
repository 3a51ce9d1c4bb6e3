import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from extent_sim import driver as drv
from extent_sim.driver import DriverConfig, PathSpec, QualityLevel, Supply, TransistorParams
from extent_sim.errors import DomainError, RegimeError, UsageError

T = TransistorParams()


def test_threshold_voltage_examples():
    assert drv.threshold_voltage(0.0, T) == T.v_th0
    p = replace(T, v_th0=0.3, gamma_body=0.4, phi_f2=0.7)
    assert drv.threshold_voltage(1.0, p) == pytest.approx(0.3 + 0.4 * (math.sqrt(1.7) - math.sqrt(0.7)))
    assert round(drv.threshold_voltage(1.0, p), 4) == 0.4869
    assert drv.threshold_voltage(-0.7, p) == pytest.approx(0.3 - 0.4 * math.sqrt(0.7))


def test_threshold_voltage_rejects_bad_phi():
    with pytest.raises(DomainError):
        drv.threshold_voltage(0.0, replace(T, phi_f2=0.0))


@given(st.floats(-0.7, 3.0), st.floats(-0.7, 3.0))
def test_threshold_voltage_monotone_in_body_bias(a, b):
    lo, hi = sorted((a, b))
    assert drv.threshold_voltage(lo, T) <= drv.threshold_voltage(hi, T) + 1e-15


def test_subthreshold_current_examples():
    v_th = 0.35
    assert drv.subthreshold_current(v_th, 50.0, T, v_th) == pytest.approx(T.i_s)
    s = T.s_slope
    assert drv.subthreshold_current(v_th + s, s, T, v_th) == pytest.approx(10 * T.i_s * 0.9)
    drain = drv.subthreshold_current(v_th, s, T, v_th) / T.i_s
    assert drain == pytest.approx(0.9)


def test_triode_current_examples():
    k = 1e-3
    p = replace(T, w=1.0, l=1.0, c_ox=1.0)
    assert drv.triode_current(0.85, 0.0, k, p, 0.35) == 0.0
    assert drv.triode_current(0.85, 0.1, k, p, 0.35) == pytest.approx(45e-6)
    wide = replace(p, w=2.0)
    assert drv.triode_current(0.85, 0.1, k, wide, 0.35) == pytest.approx(90e-6)


@pytest.mark.parametrize("v_gs,v_ds", [(0.3, 0.1), (0.85, 0.6), (0.85, -0.1)])
def test_triode_current_out_of_region(v_gs, v_ds):
    with pytest.raises(RegimeError):
        drv.triode_current(v_gs, v_ds, 1e-3, T, 0.35)


def test_mobility():
    assert drv.mobility(T.t_ref, T) == T.mu_ref
    assert drv.mobility(2 * T.t_ref, T) / T.mu_ref == pytest.approx(2**-1.5)
    assert round(2**-1.5, 4) == 0.3536
    flat = replace(T, k_u=0.0)
    assert drv.mobility(450.0, flat) == flat.mu_ref
    with pytest.raises(DomainError):
        drv.mobility(0.0, T)


def test_region_stitch_continuity():
    v_th = drv.threshold_voltage(T.v_sb, T)
    v_gs = v_th + T.v_stitch
    v_ds = T.v_stitch / 2
    sub = drv.subthreshold_current(v_gs, v_ds, T, v_th)
    tri = drv.triode_current(v_gs, v_ds, drv.mobility(300.0, T), T, v_th)
    assert abs(sub - tri) / tri <= 0.10
    # the stitched function is the subthreshold law at and below the stitch point
    assert drv.drain_current(v_gs, v_ds, 300.0, T) == sub
    assert drv.drain_current(v_gs + 0.05, v_ds, 300.0, T) > sub


def test_transistor_invariants():
    with pytest.raises(DomainError):
        TransistorParams(w=0.0)
    with pytest.raises(DomainError):
        TransistorParams(k_u=-1.0)


def test_pair_on_resistance_matches_triode_slope():
    v_th = drv.threshold_voltage(0.0, T)
    k = drv.mobility(300.0, T) * T.c_ox * T.w / T.l
    assert drv.pair_on_resistance(0.9, 300.0, T) == pytest.approx(2 / (k * (0.9 - v_th)))
    with pytest.raises(RegimeError):
        drv.pair_on_resistance(0.2, 300.0, T)


# levels and paths ------------------------------------------------------------


def test_quality_level_parse():
    assert QualityLevel.parse("11") is QualityLevel.Q11
    assert QualityLevel.parse("q01") is QualityLevel.Q01
    assert QualityLevel.Q10.tag == "q10"
    with pytest.raises(UsageError, match="invalid priority"):
        QualityLevel.parse("12")


def test_path_spec_parse():
    assert PathSpec.parse("vddl:1") == PathSpec(Supply.VDDL, 1)
    assert str(PathSpec.parse("VDDH:3")) == "vddh:3"
    for bad in ("vddx:1", "vddl:4", "vddl", "vddl:x"):
        with pytest.raises(UsageError):
            PathSpec.parse(bad)


def test_driver_config_invariants():
    with pytest.raises(DomainError):
        DriverConfig(vddl=0.9, vddh=0.9)
    with pytest.raises(DomainError):
        DriverConfig(r_on_pair=0.0)
    with pytest.raises(DomainError):
        DriverConfig(t_pulse=0.0)
    with pytest.raises(UsageError):
        DriverConfig(level_map={QualityLevel.Q11: PathSpec(Supply.VDDH, 3)})


def test_drive_current_zero_write_path():
    cfg = DriverConfig()
    for level in QualityLevel:
        assert drv.drive_current(level, 0, 4200.0, cfg) == pytest.approx(cfg.vddl / (cfg.r_on_pair + 4200.0))


def test_drive_current_level_paths():
    cfg = DriverConfig()
    i11 = drv.drive_current(QualityLevel.Q11, 1, 4200.0, cfg)
    assert i11 == pytest.approx(oracles.ohmic_current(cfg.vddh, cfg.r_on_pair, 3, 4200.0))
    i10 = drv.drive_current(QualityLevel.Q10, 1, 4200.0, cfg)
    assert i10 == pytest.approx(oracles.ohmic_current(cfg.vddl, cfg.r_on_pair, 2, 4200.0))


def test_drive_current_halving_r_on_doubles_bare_current():
    cfg = DriverConfig()
    half = replace(cfg, r_on_pair=cfg.r_on_pair / 2)
    # r_mtj must be positive; a vanishing value approximates the short
    a = drv.drive_current(QualityLevel.Q01, 1, 1e-12, cfg)
    b = drv.drive_current(QualityLevel.Q01, 1, 1e-12, half)
    assert b == pytest.approx(2 * a)
    with pytest.raises(DomainError):
        drv.drive_current(QualityLevel.Q01, 1, 0.0, cfg)


@given(st.floats(100.0, 1e5), st.floats(100.0, 1e5), st.sampled_from(list(QualityLevel)), st.integers(0, 1))
def test_drive_current_decreasing_in_resistance(r1, r2, level, bit):
    cfg = DriverConfig()
    lo, hi = sorted((r1, r2))
    if hi > lo:
        assert drv.drive_current(level, bit, hi, cfg) < drv.drive_current(level, bit, lo, cfg)


@given(st.floats(100.0, 1e5), st.floats(100.0, 1e4))
def test_drive_current_ordering_and_pairs(r_mtj, r_on):
    cfg = replace(DriverConfig(), r_on_pair=r_on)
    i = [drv.drive_current(lv, 1, r_mtj, cfg) for lv in (QualityLevel.Q01, QualityLevel.Q10, QualityLevel.Q11)]
    assert i[0] <= i[1] <= i[2]
    # same supply, more pairs
    assert i[1] > i[0]


def test_exactness_flags():
    cfg = DriverConfig()
    assert cfg.is_exact(QualityLevel.Q01, 0)
    assert cfg.is_exact(QualityLevel.Q11, 1)
    assert cfg.is_exact(QualityLevel.Q00, 1)
    assert not cfg.is_exact(QualityLevel.Q10, 1)
