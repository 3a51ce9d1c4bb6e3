"""``extent-sim`` command line.

Exit status: 0 on success, 1 on usage errors, 2 on domain, regime or
calibration errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import device, quality, trace, variation
from .calibration import CalibrationTargets, calibrate
from .config import dump_section, load_config
from .device import CellState, Direction, WerModel
from .driver import QualityLevel
from .engine import SkipMode
from .errors import CalibrationError, DomainError, UsageError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _level(text):
    return QualityLevel.parse(text)


def _levels(text):
    return [QualityLevel.parse(t) for t in text.split(",") if t.strip()]


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"invalid number list {text!r}") from exc


def _common(p):
    p.add_argument("--config", help="configuration file (default: $EXTENT_SIM_CONFIG)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one key")
    p.add_argument("--out", help="directory for output artifacts (default: print to stdout)")


def _emit(args, name: str, text: str):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / name, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="extent-sim", description="Approximate STT-RAM write simulator.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("device", help="evaluate a device formula or sweep a parameter")
    _common(p)
    p.add_argument(
        "--op",
        choices=["wer", "tsw", "psw", "sample", "resistance", "ic", "jc", "g-thermal", "g-angle"],
        default="wer",
    )
    p.add_argument("--model", choices=[m.value for m in WerModel], default="exp")
    p.add_argument("--tw-ns", type=float, help="pulse width for wer, ns")
    p.add_argument("--tsw-ns", type=float, help="mean switching time, ns (exp model shortcut)")
    p.add_argument("--iw-ua", type=float, help="write current, uA")
    p.add_argument("--tp-ns", type=float, help="pulse width for psw, ns")
    p.add_argument("--v-v", type=float, help="pulse voltage for psw, V")
    p.add_argument("--u", type=float, help="uniform sample for sample")
    p.add_argument("--temp-k", type=float, help="temperature, K (default: [mtj] temperature_k)")
    p.add_argument("--bias-v", type=float, default=0.0, help="bias voltage, V")
    p.add_argument("--theta-rad", type=float, default=0.0, help="angle for g-angle, rad")
    p.add_argument("--state", choices=["p", "ap"], default="p")
    p.add_argument("--direction", choices=[d.value for d in Direction], default="p_to_ap")
    p.add_argument("--ic-mode", choices=["tabulated", "physics"], default="tabulated")
    p.add_argument("--sweep", metavar="PATH", help="sweep a parameter, e.g. cmos.w or driver.vddl")
    p.add_argument("--values", type=_floats, help="comma-separated sweep values in SI units")
    p.add_argument("--level", type=_level, default=QualityLevel.Q11)
    p.add_argument("--bit", type=int, choices=[0, 1], default=1)
    p.add_argument("--full-pulse", action="store_true", help="run the whole pulse (no termination)")

    p = sub.add_parser("mc", help="Monte Carlo over process variation")
    _common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--level", type=_level, default=QualityLevel.Q11)
    p.add_argument("--bit", type=int, choices=[0, 1], default=1)
    p.add_argument("--full-pulse", action="store_true", help="run the whole pulse (no termination)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("trace", help="simulate a memory trace")
    _common(p)
    p.add_argument("--in", dest="input", required=True, help="trace file")
    p.add_argument("--seed", type=int)
    p.add_argument("--default-level", type=_level, help="level of untagged writes to unknown blocks")
    p.add_argument("--skip-mode", choices=[m.value for m in SkipMode])
    p.add_argument("--baselines", action="store_true", help="also emit improvements over the reference designs")

    p = sub.add_parser("image", help="store an image through the array and score it")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", help="binary PPM (P6) or PGM (P5) image")
    src.add_argument("--synthetic-px", metavar="WxH", help="generate a synthetic WxH test image")
    p.add_argument("--levels", type=_levels, default=_levels("q11,q10,q01"))
    p.add_argument("--seed", type=int)

    p = sub.add_parser("calibrate", help="fit driver constants to the write anchors")
    _common(p)
    p.add_argument("--e-write1-pj", type=float, default=337.2)
    p.add_argument("--t-write1-ns", type=float, default=6.9)
    p.add_argument("--e-basic-pj", type=float, default=1046.0)
    p.add_argument("--t-basic-ns", type=float, default=19.0)
    p.add_argument("--asymmetry", type=float, default=2.5)
    p.add_argument("--keep-r-on", action="store_true", help="keep r_on_pair instead of deriving it")

    p = sub.add_parser("gen-trace", help="generate a synthetic trace with a given transition mix")
    _common(p)
    p.add_argument("--writes", type=int, default=10000)
    p.add_argument("--mix", default="0->1=0.8,0->0=0.2", help="e.g. 0->1=0.8,0->0=0.1,1->1=0.1")
    p.add_argument("--seed", type=int)
    p.add_argument("--level", type=_level, help="tag every write with this level")
    return parser


def _seed(args, cfg):
    return cfg.seed if getattr(args, "seed", None) is None else args.seed


def cmd_device(args, cfg):
    mtj = cfg.mtj
    if args.sweep:
        if not args.values:
            raise UsageError("--sweep needs --values")
        kind = variation.ScenarioKind.WRITE_ONE if args.bit else variation.ScenarioKind.WRITE_ZERO
        scen = variation.Scenario(kind, args.level, args.full_pulse)
        rows = variation.sweep(args.sweep, args.values, scen, cfg, cfg.variation)
        _emit(args, "sweep.csv", variation.sweep_csv(args.sweep, rows))
        return
    t = mtj.temperature if args.temp_k is None else args.temp_k
    op = args.op
    if op == "wer":
        if args.tw_ns is None:
            raise UsageError("--op wer needs --tw-ns")
        tw = args.tw_ns * 1e-9
        if args.model == "exp" and args.tsw_ns is not None:
            value = device.wer_exponential(tw, args.tsw_ns * 1e-9)
        else:
            value = device.wer(args.model, _need(args.iw_ua, "--iw-ua") * 1e-6, tw, mtj)
    elif op == "tsw":
        value = device.mean_switching_time(_need(args.iw_ua, "--iw-ua") * 1e-6, mtj)
    elif op == "psw":
        value = device.switching_probability(_need(args.tp_ns, "--tp-ns") * 1e-9, _need(args.v_v, "--v-v"), mtj)
    elif op == "sample":
        value = device.sample_switching_time(_need(args.u, "--u"), _need(args.tsw_ns, "--tsw-ns") * 1e-9)
    elif op == "resistance":
        state = CellState.PARALLEL if args.state == "p" else CellState.ANTIPARALLEL
        value = device.resistance(state, t, args.bias_v, mtj)
    elif op == "ic":
        value = device.critical_current(replace(mtj, temperature=t), t, args.ic_mode)
    elif op == "jc":
        value = device.critical_current_density(args.direction, mtj)
    elif op == "g-thermal":
        value = device.spin_efficiency_thermal(t, args.bias_v, mtj)
    else:
        value = device.spin_efficiency_angle(args.theta_rad, mtj)
    _emit(args, "device.txt", f"{value:.4e}\n")


def _need(value, flag):
    if value is None:
        raise UsageError(f"missing {flag}")
    return value


def cmd_mc(args, cfg):
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    kind = variation.ScenarioKind.WRITE_ONE if args.bit else variation.ScenarioKind.WRITE_ZERO
    scen = variation.Scenario(kind, args.level, args.full_pulse)
    summary = variation.run_monte_carlo(scen, args.trials, _seed(args, cfg), cfg.variation, cfg, workers=args.jobs)
    _emit(args, "mc_trials.csv", summary.trials_csv())
    if args.out:
        _emit(args, "mc_summary.csv", summary.summary_csv())


def cmd_trace(args, cfg):
    try:
        with open(args.input, encoding="ascii") as fh:
            records = trace.parse_trace(fh)
    except OSError as exc:
        raise UsageError(f"cannot read trace {args.input}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise UsageError(f"trace {args.input} is not ASCII") from exc
    tcfg = cfg.trace if args.default_level is None else replace(cfg.trace, default_level=args.default_level)
    write = cfg.write if args.skip_mode is None else replace(cfg.write, skip_mode=SkipMode(args.skip_mode))
    report = trace.simulate_trace(records, cfg.driver, cfg.mtj, _seed(args, cfg), write=write, trace_cfg=tcfg)
    _emit(args, "trace_report.csv", report.to_csv())
    if args.out:
        _emit(args, "trace_summary.txt", report.summary())
    if args.baselines:
        rows = trace.compare_baselines(report.energy_per_cell_write, report.latency_per_cell_write)
        _emit(args, "improvements.csv", trace.improvements_csv(rows))


def cmd_image(args, cfg):
    if args.input:
        try:
            img = quality.read_image(args.input)
        except OSError as exc:
            raise UsageError(f"cannot read image {args.input}: {exc}") from exc
    else:
        try:
            w, h = (int(v) for v in args.synthetic_px.lower().split("x"))
        except ValueError as exc:
            raise UsageError("--synthetic-px expects WxH, e.g. 256x256") from exc
        if w < 1 or h < 1:
            raise UsageError("image dimensions must be positive")
        img = quality.synthetic_image(w, h, seed=_seed(args, cfg))
    gray = quality.grayscale(img) if img.channels == 3 else img
    lines = [quality.QUALITY_CSV_HEADER]
    for level in args.levels:
        out, rep = quality.store_through_memory(gray, level, cfg.driver, cfg.mtj, _seed(args, cfg), write=cfg.write)
        lines.append(rep.csv_row())
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            quality.write_image(Path(args.out) / f"stored_{level.tag}.pgm", out)
    if args.out:
        quality.write_image(Path(args.out) / "reference.pgm", gray)
    _emit(args, "quality.csv", "\n".join(lines) + "\n")


def cmd_calibrate(args, cfg):
    targets = CalibrationTargets(
        e_write1_exact=args.e_write1_pj * 1e-12,
        t_write1_exact=args.t_write1_ns * 1e-9,
        e_basic=args.e_basic_pj * 1e-12,
        t_basic=args.t_basic_ns * 1e-9,
        asymmetry=args.asymmetry,
    )
    res = calibrate(targets, cfg.driver, cfg.mtj, cfg.write, cmos=None if args.keep_r_on else cfg.cmos)
    tuned = replace(cfg, driver=res.driver, write=res.write)
    text = "# calibration residuals\n" + "".join(f"# {line}\n" for line in res.report().splitlines())
    text += dump_section(tuned, "driver") + "\n" + dump_section(tuned, "write")
    _emit(args, "calibrated.cfg", text)
    if not res.ok:
        raise CalibrationError("residuals exceed tolerance:\n" + res.report())


def cmd_gen_trace(args, cfg):
    mix = trace.parse_mix(args.mix)
    records = trace.generate_synthetic_trace(args.writes, mix, _seed(args, cfg), level=args.level)
    _emit(args, "synthetic.trc", trace.format_trace(records))


COMMANDS = {
    "device": cmd_device,
    "mc": cmd_mc,
    "trace": cmd_trace,
    "image": cmd_image,
    "calibrate": cmd_calibrate,
    "gen-trace": cmd_gen_trace,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, args.set)
        if args.out is None and cfg.out:
            args.out = cfg.out
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"extent-sim: error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, CalibrationError) as exc:
        print(f"extent-sim: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
