"""Command-line entry points.

Exit codes: 0 completed, 1 usage or config error, 2 consent refusal,
3 numerical divergence, 4 verdict failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .agents import events_csv
from .battery import battery_csv
from .chaos import dichotomy, lyapunov_max, parameter_sweep, regime_report, sweep_csv
from .config import ConfigError, RunConfig, load_config
from .dynamics import DynamicsError, Zero, simulate, trajectory_csv
from .protocol import ConsentError, run_twin_experiment
from .report import render_bundle, write_json, write_text

log = logging.getLogger("sdlab")

EXIT_OK, EXIT_USAGE, EXIT_REFUSED, EXIT_DIVERGED, EXIT_STRICT = 0, 1, 2, 3, 4

SWEEP_PARAMETERS = ("A", "alpha", "C", "a", "k_days")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _output_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.output_dir or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(cfg: RunConfig, out: Path) -> None:
    write_text(out / "effective_config.yaml", cfg.echo_yaml())


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _output_dir(cfg, args)
    dp, sp, s0 = cfg.duffing(), cfg.suppressive(), cfg.initial()
    sim, ly = cfg.simulate, cfg.simulate.lyapunov
    inputs = {"input": cfg.input_signal(), "deprived": Zero()}
    regimes = {}
    for name, signal in inputs.items():
        traj = simulate(s0, dp, sp, signal, sim.h, sim.T)
        write_text(out / f"trajectory_{name}.csv", traj.to_csv())
        est = lyapunov_max(dp, sp, signal, s0, sim.h, ly.T, ly.renorm_interval, ly.d0,
                           sim.transient_fraction)
        write_text(out / f"lyapunov_{name}.json", est.to_json())
        regimes[name] = regime_report(traj, est, signal, sim.window, ly.threshold)
        log.info("%s: lambda_max=%.5f regime=%s", name, est.lambda_max, regimes[name].regime)

    split = dichotomy(dp, sp, inputs["input"], s0, sim.h, sim.T, sim.window, sim.transient_fraction)
    payload = {name: r.to_dict() for name, r in regimes.items()}
    payload["steady_variance_ratio"] = _nan_safe(split.variance_ratio)
    payload["deprived_exceeds_fraction"] = _nan_safe(split.exceed_fraction)
    write_json(out / "regime.json", payload)
    _echo(cfg, out)
    render_bundle(out)
    return EXIT_OK


def _nan_safe(x):
    return None if not np.isfinite(x) else float(x)


def cmd_run_protocol(cfg: RunConfig, args) -> int:
    out = _output_dir(cfg, args)
    pc = cfg.protocol_config()
    record, twin, verdict = run_twin_experiment(cfg.build_agent(), pc)
    for prefix, rec in (("", record), ("twin_", twin)):
        write_text(out / f"{prefix}battery.csv", battery_csv(rec.slots()))
        write_text(out / f"{prefix}distress.csv", events_csv(rec.events))
        rows = rec.trajectory if rec.trajectory is not None else []
        write_text(out / f"{prefix}trajectory.csv", trajectory_csv(rows))
    _echo(cfg, out)
    if verdict is None:
        failed = record if record.aborted else twin
        write_json(out / "aborted.json", {"failure": failed.failure, "config_hash": pc.config_hash()})
        log.error("run aborted: %s", failed.failure)
        return EXIT_DIVERGED
    write_text(out / "verdict.json", verdict.to_json())
    render_bundle(out)
    crit = verdict.to_dict()["criteria"]
    print(f"verdict: pass={verdict.passed} " + " ".join(f"{k}={v}" for k, v in crit.items()))
    if args.strict and not verdict.passed:
        return EXIT_STRICT
    return EXIT_OK


def _sweep_values(args) -> list[float]:
    if args.linspace is not None:
        start, stop, num = args.linspace
        return [float(x) for x in np.linspace(float(start), float(stop), int(num))]
    if args.values is None or args.values.strip() == "":
        return []
    return [float(v) for v in args.values.split(",")]


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = _output_dir(cfg, args)
    values = _sweep_values(args)
    param = args.parameter
    if param == "k_days":
        lines = ["k_days,degradation,distress_rate,trend,recovered_fraction,pass"]
        for k in values:
            sub = cfg.model_copy(deep=True)
            sub.protocol.k_days = k
            sub.protocol.follow_up_interval = None
            _, _, v = run_twin_experiment(sub.build_agent(), sub.protocol_config())
            if v is None:
                lines.append(f"{k:.17g},nan,nan,nan,nan,False")
                continue
            m = v.metrics
            rf = m["recovered_fraction"]
            lines.append(",".join([f"{k:.17g}", f"{m['degradation']:.17g}", f"{m['distress_rate']:.17g}",
                                   f"{m['trend']:.17g}", "nan" if rf is None else f"{rf:.17g}", str(v.passed)]))
        text = "\n".join(lines) + "\n"
    else:
        sw = cfg.sweep
        rows = parameter_sweep(cfg.duffing(), cfg.suppressive(), param, values, sw.h, sw.T,
                               cfg.initial(), sw.transient_fraction)
        for row in rows:
            if row.error:
                log.warning("%s=%g diverged: %s", param, row.value, row.error)
        text = sweep_csv(rows, param)
    write_text(out / "sweep.csv", text)
    _echo(cfg, out)
    render_bundle(out)
    return EXIT_OK


def cmd_report(args) -> int:
    bundle = Path(args.bundle)
    if not bundle.is_dir():
        print(f"no such bundle directory: {bundle}", file=sys.stderr)
        return EXIT_USAGE
    for name in render_bundle(bundle):
        print(bundle / name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", "-c", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override seeds.master")
        p.add_argument("--output-dir", "-o", help="override output.dir")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted config override, repeatable")

    common(sub.add_parser("simulate", help="integrate with and without input, estimate lambda_max"))
    p = sub.add_parser("run-protocol", help="run subject and twin through the protocol")
    common(p)
    p.add_argument("--strict", action="store_true", help="exit 4 when the verdict fails")
    p = sub.add_parser("sweep", help="parameter atlas")
    common(p)
    p.add_argument("--parameter", "-p", required=True, choices=SWEEP_PARAMETERS)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--values", help="comma-separated values")
    grp.add_argument("--linspace", nargs=3, metavar=("START", "STOP", "NUM"))
    p = sub.add_parser("report", help="re-render plot data from an existing bundle")
    p.add_argument("bundle")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return cmd_report(args)
    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"seeds.master={args.seed}")
        cfg = load_config(args.config, overrides)
        handler = {"simulate": cmd_simulate, "run-protocol": cmd_run_protocol, "sweep": cmd_sweep}
        return handler[args.command](cfg, args)
    except ConsentError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except DynamicsError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
