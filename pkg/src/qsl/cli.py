"""Command-line entry point: ``qsl run``, ``qsl sweep`` and ``qsl selftest``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from qsl import __version__
from qsl.config import EXAMPLE_CONFIGS, MIN_STEPS, ScenarioConfig, load_config
from qsl.errors import ConfigError, ConvergenceError, QSLError
from qsl.models.grover import GroverParams
from qsl.models.periodic import PeriodicParams
from qsl.models.twisted_lz import TwistedLZParams
from qsl.propagation import TimeGrid
from qsl import scenarios

EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_NUMERIC = 4

EPILOG = """\
exit codes:
  0  success
  1  selftest ran but at least one check failed
  2  configuration error (unreadable file, bad YAML, unknown scenario, invalid value)
  3  convergence failure (step doubling, window doubling or derivative check exhausted)
  4  internal numeric error (NaN/Inf, lost normalization, degenerate spectrum)
"""


def format_value(x) -> str:
    return "%.17g" % x


def write_csv(path: Path, header, columns, n_rows: int) -> None:
    lines = [",".join(header)]
    for i in range(n_rows):
        lines.append(",".join("" if columns.get(c) is None else format_value(columns[c][i]) for c in header))
    path.write_text("\n".join(lines) + "\n")


def _manifest_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_value(v)
    if isinstance(v, np.ndarray):
        return "[" + ", ".join(_manifest_value(x) for x in v.ravel()) + "]"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_manifest_value(x) for x in v) + "]"
    if isinstance(v, complex):
        return repr(v)
    return str(v)


def write_manifest(path: Path, sections) -> None:
    lines = [f"# qsl {__version__} run manifest"]
    for title, entries in sections:
        lines.append(f"[{title}]")
        lines.extend(f"{k} = {_manifest_value(v)}" for k, v in entries.items())
    path.write_text("\n".join(lines) + "\n")


def _model_entries(cfg: ScenarioConfig) -> dict:
    out = {}
    for k, v in cfg.model.items():
        if k in ("hamiltonian", "reference"):
            for i, (mat, coeff, omega) in enumerate(v):
                out[f"{k}[{i}]"] = f"coefficient={coeff} omega={format_value(omega)} matrix={_manifest_value(mat)}"
        else:
            out[k] = v
    return out


def execute(cfg: ScenarioConfig, steps: Optional[int] = None) -> scenarios.ScenarioResult:
    m = cfg.model
    n = steps if steps is not None else cfg.n_steps
    if cfg.scenario == "twisted_lz":
        p = TwistedLZParams(1.0, m["v_over_delta2"], m["delta_tau"], m["protocol"])
        return scenarios.run_twisted_lz(p, endpoint=m["endpoint"], steps=n)
    if cfg.scenario == "grover":
        return scenarios.run_grover(GroverParams(m["n_items"], 1.0, m["a0_tf"], m["k"], m["protocol"]), steps=n)
    if cfg.scenario == "periodic":
        p = PeriodicParams(1.0, m["h_over_delta"], m["omega_over_delta"])
        return scenarios.run_periodic(p, target=m["target"], periods=m["periods"], steps=n)
    if cfg.scenario == "periodic_optimized":
        p = PeriodicParams(1.0, m["h_over_delta"], m["omega_over_delta"])
        return scenarios.run_periodic_optimized(
            p, target=m["target"], periods=m["periods"], steps=n, substeps=m["quadrature_substeps"]
        )
    t0, t1 = cfg.horizon
    grid = TimeGrid(t0, t1, n if n is not None else 2001)
    return scenarios.run_custom(m["hamiltonian"], m["reference"], m["psi0"], m["target"], grid)


def _output_dir(out: Optional[str]) -> Path:
    path = Path(out) if out else Path.cwd()
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    res = execute(cfg, args.steps)
    out = _output_dir(args.out)
    columns = dict(res.columns)
    if cfg.columns is not None:
        columns = {k: (v if k in cfg.columns or k == "t" else None) for k, v in columns.items()}
    csv_path = out / cfg.csv
    write_csv(csv_path, scenarios.CSV_COLUMNS, columns, len(res.columns["t"]))
    write_manifest(
        csv_path.with_suffix(".manifest.txt"),
        [("config", {"source": cfg.source, "scenario": cfg.scenario, "steps_override": args.steps}),
         ("model", _model_entries(cfg)),
         ("resolved", res.manifest)],
    )
    print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg.sweep is None:
        raise ConfigError("config has no 'sweep' section")
    if args.steps is not None:
        raise ConfigError("--steps is not supported for sweeps; step counts are chosen per point")
    sw = cfg.sweep
    dts = scenarios.uniform_axis(sw["delta_tau"]["max"], sw["delta_tau"]["count"])
    vs = scenarios.uniform_axis(sw["v_over_delta2"]["max"], sw["v_over_delta2"]["count"])
    rows, manifests = scenarios.run_sweep(
        cfg.model["protocol"], dts, vs, endpoint=cfg.model["endpoint"], jobs=sw["jobs"]
    )
    out = _output_dir(args.out)
    csv_path = out / cfg.csv
    cols = {name: [r[i] for r in rows] for i, name in enumerate(scenarios.SWEEP_COLUMNS)}
    write_csv(csv_path, scenarios.SWEEP_COLUMNS, cols, len(rows))
    sections = [("config", {"source": cfg.source, "scenario": "sweep", "protocol": cfg.model["protocol"],
                            "endpoint": cfg.model["endpoint"], "jobs": sw["jobs"]}),
                ("axes", {"delta_tau": dts, "v_over_delta2": vs})]
    for i, m in enumerate(manifests):
        sections.append((f"point {i}", {k: m[k] for k in ("tau", "v", "half_window", "n_steps", "substeps_reference",
                                                         "substeps_evolved", "refinement_change_reference",
                                                         "refinement_change_evolved", "window_history")}))
    write_manifest(csv_path.with_suffix(".manifest.txt"), sections)
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from qsl.checks import run_checks

    results = run_checks(fast=True)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST_FAILED


def seed_docs(out: Optional[str]) -> int:
    path = _output_dir(out)
    for name, text in EXAMPLE_CONFIGS.items():
        (path / name).write_text(text)
        print(f"wrote {path / name}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--out", default=default, help="output directory (default: current directory)")
    parser.add_argument("--steps", type=int, default=default, help=f"override grid.n_steps (>= {MIN_STEPS})")
    parser.add_argument("--seed-docs", action="store_true", default=default or False,
                        help="write annotated example configs to --out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsl",
        description="Reference-based quantum speed limit bounds for driven systems.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"qsl {__version__}")
    _add_common(parser, None)
    # the same flags may follow the subcommand; SUPPRESS keeps the top-level values otherwise
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command")
    for name, helptext in (("run", "run one scenario and write a bounds CSV plus manifest"),
                           ("sweep", "run a twisted Landau-Zener parameter sweep")):
        p = sub.add_parser(name, help=helptext, parents=[common], epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", help="YAML config file")
    sub.add_parser("selftest", help="run the fast subset of the acceptance checks", parents=[common],
                   epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.steps is not None and args.steps < MIN_STEPS:
            raise ConfigError(f"--steps must be >= {MIN_STEPS}")
        if args.seed_docs:
            seed_docs(args.out)
            if args.command is None:
                return EXIT_OK
        if args.command is None:
            parser.print_help()
            return EXIT_CONFIG
        handler = {"run": cmd_run, "sweep": cmd_sweep, "selftest": cmd_selftest}[args.command]
        # overflow surfaces as a NaN/Inf check with a one-line diagnostic, not a warning
        with np.errstate(all="ignore"):
            return handler(args)
    except ConfigError as exc:
        print(f"qsl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"qsl: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (QSLError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"qsl: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"qsl: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
