import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import FixedUniforms
from extent_sim import device
from extent_sim.config import SimConfig
from extent_sim.device import CellState
from extent_sim.driver import QualityLevel
from extent_sim.engine import (
    STRONG_STRIKE,
    WEAK_STRIKE,
    PathTable,
    Polarity,
    SkipMode,
    SoftErrorConfig,
    SoftErrorEvent,
    StrikeEffect,
    WriteRequest,
    WriteResult,
    expected_write,
    fixed_pulse_energy,
    inject_soft_error,
    injected_charge,
    resolve_path,
    write_bits,
    write_cell,
    write_word,
)
from extent_sim.errors import DomainError, RegimeError, UsageError

LEVELS = list(QualityLevel)


def _u_for(t, t_sw):
    return -math.expm1(-t / t_sw)


def test_repetitive_write_is_skipped(cfg, fixed_uniforms):
    rng = fixed_uniforms()
    state, out = write_cell(CellState.ANTIPARALLEL, WriteRequest(1, QualityLevel.Q01), cfg.driver, cfg.mtj, rng)
    assert state is CellState.ANTIPARALLEL
    assert out.result is WriteResult.SKIPPED
    assert out.energy == cfg.driver.e_sense
    assert out.latency == cfg.write.sense_latency
    assert out.t_switch_sampled is None


def test_exact_write_one_energy_anchor(cfg, fixed_uniforms):
    path = resolve_path(QualityLevel.Q11, 1, cfg.driver, cfg.mtj, cfg.write)
    rng = fixed_uniforms(_u_for(6.9e-9, path.t_sw))
    state, out = write_cell(CellState.PARALLEL, WriteRequest(1, QualityLevel.Q11), cfg.driver, cfg.mtj, rng)
    assert state is CellState.ANTIPARALLEL
    assert out.result is WriteResult.SWITCHED
    assert out.latency == pytest.approx(6.9e-9, rel=1e-12)
    assert out.energy == pytest.approx(337.2e-12, rel=0.005)


def test_approximate_write_fails_when_sample_exceeds_pulse(cfg, fixed_uniforms):
    path = resolve_path(QualityLevel.Q01, 1, cfg.driver, cfg.mtj, cfg.write)
    assert path.t_sw > cfg.driver.t_pulse
    state, out = write_cell(
        CellState.PARALLEL, WriteRequest(1, QualityLevel.Q01), cfg.driver, cfg.mtj, fixed_uniforms(0.99)
    )
    assert state is CellState.PARALLEL
    assert out.result is WriteResult.FAILED
    assert out.latency == cfg.driver.t_pulse
    assert out.energy == pytest.approx(path.energy(cfg.driver.t_pulse, cfg.driver.e_detector))


def test_energy_formula_uses_source_state_current(cfg, fixed_uniforms):
    for bit, source in ((1, CellState.PARALLEL), (0, CellState.ANTIPARALLEL)):
        path = resolve_path(QualityLevel.Q10, bit, cfg.driver, cfg.mtj, cfg.write)
        r = device.resistance(source, cfg.mtj.temperature, 0.0, cfg.mtj)
        v = cfg.driver.vddl
        pairs = 2 if bit else 1
        assert path.i_w == pytest.approx(oracles.ohmic_current(v, cfg.driver.r_on_pair, pairs, r))
        t = 1e-9
        _, out = write_cell(source, WriteRequest(bit, QualityLevel.Q10), cfg.driver, cfg.mtj, fixed_uniforms(_u_for(t, path.t_sw)))
        expect = v * (path.i_w + pairs * cfg.driver.i_leg) * t + cfg.driver.e_detector
        assert out.energy == pytest.approx(expect)


def test_regime_error_propagates(cfg, fixed_uniforms):
    weak = replace(cfg.write, p_to_ap_ic_scale=50.0)
    with pytest.raises(RegimeError):
        write_cell(CellState.PARALLEL, WriteRequest(1, QualityLevel.Q01), cfg.driver, cfg.mtj, fixed_uniforms(0.5), write=weak)


def test_no_skip_rewrite_runs_full_pulse(cfg, fixed_uniforms):
    w = replace(cfg.write, skip_mode=SkipMode.NONE)
    state, out = write_cell(CellState.PARALLEL, WriteRequest(0, QualityLevel.Q11), cfg.driver, cfg.mtj, fixed_uniforms(), write=w)
    assert state is CellState.PARALLEL
    assert out.result is WriteResult.SWITCHED
    assert out.latency == cfg.driver.t_pulse
    assert out.energy > cfg.driver.e_sense


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(LEVELS), st.integers(0, 1), st.integers(0, 1), st.floats(0.0, 0.999999))
def test_outcome_invariants(level, stored, target, u):
    c = SimConfig()
    _, out = write_cell(CellState.from_bit(stored), WriteRequest(target, level), c.driver, c.mtj, FixedUniforms(u))
    assert out.energy >= 0
    if out.result is WriteResult.SKIPPED:
        assert out.energy == c.driver.e_sense and out.latency == c.write.sense_latency
    elif out.result is WriteResult.FAILED:
        assert out.latency == c.driver.t_pulse
    elif not c.driver.is_exact(level, target):
        assert out.latency <= c.driver.t_pulse


def test_write_request_validation():
    with pytest.raises(UsageError):
        WriteRequest(2)


# words ----------------------------------------------------------------------------


def test_repetitive_word_costs_sense_only(cfg):
    word = np.array([1, 0, 1, 1, 0, 0, 1, 0])
    bits, out = write_word(word, word, QualityLevel.Q11, cfg.driver, cfg.mtj, np.random.default_rng(1))
    assert np.array_equal(bits, word)
    assert out.skipped == 8 and out.switched == 0
    assert out.energy == pytest.approx(8 * cfg.driver.e_sense)


def test_word_zero_to_f_exact(cfg):
    old, new = np.zeros(4, int), np.ones(4, int)
    bits, out = write_word(old, new, QualityLevel.Q11, cfg.driver, cfg.mtj, np.random.default_rng(2))
    assert np.array_equal(bits, new)
    assert out.switched == 4 and out.failed == 0 and out.skipped == 0
    assert out.latency > 0
    assert out.energy == pytest.approx(out.bit_energy.sum())


def test_word_width_mismatch(cfg):
    with pytest.raises(UsageError):
        write_word([0, 1], [0, 1, 1], QualityLevel.Q11, cfg.driver, cfg.mtj, np.random.default_rng(0))
    with pytest.raises(UsageError):
        write_word([0, 2], [0, 1], QualityLevel.Q11, cfg.driver, cfg.mtj, np.random.default_rng(0))


def test_word_failures_follow_binomial(cfg):
    table = PathTable(QualityLevel.Q01, cfg.driver, cfg.mtj, cfg.write)
    w = device.wer_exponential(cfg.driver.t_pulse, table.transition[1].t_sw)
    n_words = 100_000
    old = np.zeros((n_words, 8), np.uint8)
    res = write_bits(old, np.ones_like(old), table, np.random.default_rng(3))
    failed = int(res.failed.sum())
    assert oracles.within_binomial(failed, 8 * n_words, w)
    assert failed / n_words == pytest.approx(8 * w, rel=0.01)
    # failed bits keep their old value
    assert np.array_equal(res.bits[res.failed], old[res.failed])


def test_write_bits_matches_sequential_cells(cfg):
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    gen = np.random.default_rng(9)
    old = gen.integers(0, 2, 64).astype(np.uint8)
    new = gen.integers(0, 2, 64).astype(np.uint8)
    table = PathTable(QualityLevel.Q10, cfg.driver, cfg.mtj, cfg.write)
    res = write_bits(old, new, table, rng_a)
    for i in range(64):
        state, out = write_cell(CellState.from_bit(old[i]), WriteRequest(int(new[i]), QualityLevel.Q10), cfg.driver, cfg.mtj, rng_b)
        assert state.stored_bit == res.bits[i]
        assert out.energy == pytest.approx(res.energy[i], rel=1e-12)
        assert out.latency == pytest.approx(res.latency[i], rel=1e-12)


def test_word_skip_mode(cfg):
    w = replace(cfg.write, skip_mode=SkipMode.WORD)
    table = PathTable(QualityLevel.Q11, cfg.driver, cfg.mtj, w)
    old = np.array([[0, 1, 1, 0], [1, 1, 0, 0]], np.uint8)
    new = np.array([[0, 1, 1, 0], [1, 0, 0, 0]], np.uint8)
    res = write_bits(old, new, table, np.random.default_rng(0))
    assert res.skipped[0].all() and not res.skipped[1].any()
    # the unchanged bits of a changed word are rewritten for the full pulse
    assert res.latency[1, 0] == cfg.driver.t_pulse


def test_determinism(cfg):
    gen = np.random.default_rng(4)
    old = gen.integers(0, 2, (200, 64)).astype(np.uint8)
    new = gen.integers(0, 2, (200, 64)).astype(np.uint8)
    table = PathTable(QualityLevel.Q01, cfg.driver, cfg.mtj, cfg.write)
    a = write_bits(old, new, table, np.random.default_rng(77))
    b = write_bits(old, new, table, np.random.default_rng(77))
    assert np.array_equal(a.bits, b.bits)
    assert np.array_equal(a.energy, b.energy)


# statistics -------------------------------------------------------------------------


@pytest.mark.parametrize("level", LEVELS)
def test_failure_fraction_matches_exponential_law(cfg, level):
    table = PathTable(level, cfg.driver, cfg.mtj, cfg.write)
    t_sw = table.transition[1].t_sw
    n = 100_000
    rng = np.random.default_rng(21)
    u = rng.random(n)
    res = write_bits(np.zeros(n, np.uint8), np.ones(n, np.uint8), table, np.random.default_rng(21))
    w = device.wer_exponential(cfg.driver.t_pulse, t_sw)
    if table.transition[1].exact:
        # the pulse is extended, so the law shows up as overlong switching times
        k = int((-t_sw * np.log1p(-u) > cfg.driver.t_pulse).sum())
        assert res.failed.sum() == 0
    else:
        k = int(res.failed.sum())
    assert oracles.within_binomial(k, n, w)


@pytest.mark.parametrize("level", [QualityLevel.Q01, QualityLevel.Q10])
def test_self_termination_energy_against_quadrature(cfg, level):
    table = PathTable(level, cfg.driver, cfg.mtj, cfg.write)
    path = table.transition[1]
    n = 100_000
    res = write_bits(np.zeros(n, np.uint8), np.ones(n, np.uint8), table, np.random.default_rng(8))
    ok = ~res.failed
    mean_e = res.energy[ok].mean()
    t_cond = oracles.conditional_mean(path.t_sw, cfg.driver.t_pulse)
    expected = path.supply_v * path.supply_current * t_cond + cfg.driver.e_detector
    assert mean_e == pytest.approx(expected, rel=0.02)
    assert res.energy[ok].max() <= path.supply_v * path.supply_current * cfg.driver.t_pulse + cfg.driver.e_detector


def test_expected_write_modes(cfg):
    ex = expected_write(QualityLevel.Q11, 1, cfg.driver, cfg.mtj, cfg.write)
    assert ex.latency == ex.switched_latency == ex.t_sw
    ap = expected_write(QualityLevel.Q01, 1, cfg.driver, cfg.mtj, cfg.write)
    assert ap.latency == pytest.approx(oracles.truncated_mean(ap.t_sw, cfg.driver.t_pulse))
    assert ap.switched_latency == pytest.approx(oracles.conditional_mean(ap.t_sw, cfg.driver.t_pulse))
    assert ap.wer == pytest.approx(math.exp(-cfg.driver.t_pulse / ap.t_sw))
    assert fixed_pulse_energy(QualityLevel.Q01, 1, cfg.driver, cfg.mtj, cfg.write) >= ap.energy


def test_calibrated_asymmetry(cfg):
    e1 = expected_write(QualityLevel.Q11, 1, cfg.driver, cfg.mtj, cfg.write).energy
    e0 = expected_write(QualityLevel.Q11, 0, cfg.driver, cfg.mtj, cfg.write).energy
    assert 2.0 <= e1 / e0 <= 3.0


# soft errors ---------------------------------------------------------------------------


def test_injected_charge_against_quadrature():
    ev = SoftErrorEvent(charge=200e-15, tau_rise=50e-12, tau_fall=200e-12)
    for window in (10e-12, 100e-12, 1e-9, 9e-9):
        assert injected_charge(ev, window) == pytest.approx(
            oracles.glitch_charge(200e-15, 50e-12, 200e-12, window), rel=1e-6
        )
    assert injected_charge(ev, 0.0) == 0.0


def test_strike_classification(cfg):
    soft = SoftErrorConfig()
    i_w = 1.8e-4
    none = inject_soft_error(SoftErrorEvent(charge=0.0), i_w, cfg.driver, soft)
    assert none.classification is StrikeEffect.NONE and none.extra_latency == 0.0
    weak = inject_soft_error(WEAK_STRIKE, i_w, cfg.driver, soft)
    assert weak.classification is StrikeEffect.DELAYED
    assert weak.delta_q < 0
    assert weak.extra_latency == pytest.approx(abs(weak.delta_q) / i_w)
    strong = inject_soft_error(STRONG_STRIKE, i_w, cfg.driver, soft)
    assert strong.classification is StrikeEffect.FAILED_WRITE
    pos = replace(STRONG_STRIKE, polarity=Polarity.POSITIVE)
    assert inject_soft_error(pos, i_w, cfg.driver, soft).classification is StrikeEffect.NONE


def test_strike_outside_pulse(cfg):
    with pytest.raises(DomainError):
        inject_soft_error(SoftErrorEvent(charge=1e-13, t_strike=20e-9), 1e-4, cfg.driver)


def test_soft_error_event_validation():
    with pytest.raises(DomainError):
        SoftErrorEvent(charge=1e-13, tau_rise=2e-10, tau_fall=1e-10)
    with pytest.raises(DomainError):
        SoftErrorEvent(charge=-1.0)


def test_strikes_in_write_cell(cfg, fixed_uniforms):
    path = resolve_path(QualityLevel.Q11, 1, cfg.driver, cfg.mtj, cfg.write)
    u = _u_for(5e-9, path.t_sw)
    req = WriteRequest(1, QualityLevel.Q11)
    state, out = write_cell(CellState.PARALLEL, req, cfg.driver, cfg.mtj, fixed_uniforms(u), strike=STRONG_STRIKE)
    assert out.result is WriteResult.FAILED and state is CellState.PARALLEL and out.soft_error_applied
    state, out = write_cell(CellState.PARALLEL, req, cfg.driver, cfg.mtj, fixed_uniforms(u), strike=WEAK_STRIKE)
    assert out.result is WriteResult.SWITCHED and out.soft_error_applied
    assert out.latency > 5e-9
