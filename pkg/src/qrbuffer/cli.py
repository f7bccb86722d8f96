"""Command-line frontend.

Parameters are resolved in three layers: a named ``--preset``, then a flat
``key = value`` config file (``--config``), then explicit flags.  Later layers
win.  Output is CSV (default) or JSON, selected by ``--format`` or the
``QRBUFFER_FORMAT`` environment variable, and is byte-for-byte deterministic.

Exit codes: 0 success, 2 usage error, 3 domain error, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from typing import Any, Sequence

from . import __version__
from .core import DomainError, LinkParams, UsageError, distillable_entanglement
from .experiments import DEFAULT_AXES, PRESETS, Axis, SweepSpec, SWEEP_KINDS, Table, run_sweep
from .montecarlo import allowed_failures, validation_checks
from .optimize import hierarchical_optimize, optimal_n_level1
from .rates import (
    CONVENTIONS,
    LevelSchedule,
    chain_cp,
    chain_obp,
    gamma_can,
    gamma_can_level,
    gamma_opt,
    gamma_opt_level,
    rate_cp_level1,
    rate_obp_level1,
)

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VALIDATION = 0, 2, 3, 4
FORMAT_ENV = "QRBUFFER_FORMAT"
FORMATS = ("csv", "json")

LINK_KEYS = ("p", "beta", "tau_C", "tau_M", "p_S", "p_T", "f")
_DEFAULT_SPEED = 2e8
_SWEEP_BASE = {"p": 0.1, "beta": 0.9}

DEFAULTS: dict[str, Any] = {
    "speed": _DEFAULT_SPEED,
    "convention": "paper",
    "levels": 1,
    "trials": 100_000,
    "seed": 7,
    "workers": 1,
    "La": 20.0,
    "c": 2e8,
}


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting on bad input."""

    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{message}\n\n{self.format_usage().rstrip()}")


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _axis(text: str) -> tuple[str, Axis]:
    """``NAME=min:max:points[:scale]``."""
    try:
        name, spec = text.split("=", 1)
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise ValueError
        scale = parts[3] if len(parts) == 4 else "linear"
        return name.strip(), Axis(float(parts[0]), float(parts[1]), int(parts[2]), scale)
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise argparse.ArgumentTypeError(str(exc))
        raise argparse.ArgumentTypeError(
            f"expected NAME=min:max:points[:linear|log], got {text!r}"
        )


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("output")
    g.add_argument("--format", choices=FORMATS, default=None,
                   help=f"output format (default: ${FORMAT_ENV} or csv)")
    g.add_argument("--output", "-o", default=None, help="write to this file instead of stdout")
    g.add_argument("--config", default=None, help="flat 'key = value' file; flags override it")
    return parent


def _link_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("link parameters")
    g.add_argument("--preset", default=None, help="named parameter set (see 'presets')")
    g.add_argument("--p", type=float, default=None, help="per-attempt charging probability")
    g.add_argument("--beta", type=float, default=None,
                   help="per-cycle dephasing factor (excludes --tau-m)")
    g.add_argument("--tau-m", dest="tau_M", type=float, default=None,
                   help="memory dephasing time in seconds (excludes --beta)")
    g.add_argument("--tau-c", dest="tau_C", type=float, default=None,
                   help="segment signalling time in seconds")
    g.add_argument("--length", type=float, default=None,
                   help="segment length in metres; sets tau_C = length / speed")
    g.add_argument("--speed", type=float, default=None, help="signal speed in m/s (2e8)")
    g.add_argument("--p-s", dest="p_S", type=float, default=None, help="swap success probability")
    g.add_argument("--p-t", dest="p_T", type=float, default=None,
                   help="classical transmission success probability")
    g.add_argument("--f", type=float, default=None, help="initial pair fidelity factor")
    return parent


def build_parser() -> argparse.ArgumentParser:
    common, link = _common_parent(), _link_parent()
    parser = _Parser(prog="qrbuffer", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"qrbuffer {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("rate", parents=[common, link], help="level-1 OBP and CP rates")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=int, default=None, help="buffer size in attempts")
    g.add_argument("--n-opt", action="store_true", default=None,
                   help="use the rate-maximising buffer size (the default)")

    p = sub.add_parser("gamma", parents=[common, link], help="dephasing coefficients")
    p.add_argument("--n", type=int, default=None, help="level-1 buffer size")
    p.add_argument("--level", type=int, default=None, help="nesting level for level variants")
    p.add_argument("--n-in", type=int, default=None, help="input cycle count at --level")
    p.add_argument("--n-out", type=int, default=None, help="output cycle count at --level")
    p.add_argument("--p-in", type=float, default=None,
                   help="input success probability at --level (default: --p)")
    p.add_argument("--convention", choices=CONVENTIONS, default=None)

    p = sub.add_parser("optimize", parents=[common, link],
                       help="optimal buffer sizes, level by level")
    p.add_argument("--levels", type=int, default=None, help="number of nesting levels (1)")
    p.add_argument("--convention", choices=CONVENTIONS, default=None)

    p = sub.add_parser("chain", parents=[common, link], help="evaluate a given schedule")
    p.add_argument("--n-out", type=_int_list, default=None, required=False,
                   help="comma-separated output cycle counts, one per level")
    p.add_argument("--convention", choices=CONVENTIONS, default=None)

    p = sub.add_parser("sweep", parents=[common, link], help="parameter sweeps")
    p.add_argument("kind", choices=SWEEP_KINDS)
    p.add_argument("--axis", type=_axis, action="append", default=None,
                   help="override an axis: NAME=min:max:points[:linear|log]")
    p.add_argument("--levels", type=int, default=None, help="levels for the nesting sweep")
    p.add_argument("--convention", choices=CONVENTIONS, default=None)
    p.add_argument("--tau-m-list", type=_float_list, default=None,
                   help="memory times in seconds for the distance sweep")
    p.add_argument("--la", dest="La", type=float, default=None,
                   help="fibre attenuation length in km (20)")
    p.add_argument("--c", type=float, default=None, help="signal speed in m/s (2e8)")

    p = sub.add_parser("validate", parents=[common],
                       help="Monte-Carlo check of the closed forms")
    p.add_argument("--trials", type=int, default=None, help="trials per check (100000)")
    p.add_argument("--seed", type=int, default=None, help="master seed (7)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads; output does not depend on it")

    sub.add_parser("presets", parents=[common], help="list named parameter sets")
    return parser


# --------------------------------------------------------------------------
# configuration layers
# --------------------------------------------------------------------------


def read_config(path: str) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().lstrip("-")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace,
                  entries: dict[str, str]) -> set[str]:
    """Fill unset options from config entries; returns the dests it set."""
    sub = _subparser(parser, args.command)
    by_name: dict[str, argparse.Action] = {}
    for action in sub._actions:
        for opt in action.option_strings:
            by_name[opt.lstrip("-").replace("-", "_").lower()] = action
        by_name.setdefault(action.dest.lower(), action)
    touched = set()
    for key, text in entries.items():
        action = by_name.get(key.replace("-", "_").lower())
        if action is None or action.dest in ("config", "help", "kind"):
            raise UsageError(f"config key {key!r} is not an option of '{args.command}'")
        if getattr(args, action.dest) is not None:
            continue
        if action.nargs == 0:
            value: Any = text.lower() in ("1", "true", "yes", "on")
        else:
            convert = action.type or str
            try:
                value = convert(text)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
            if action.dest == "axis":
                value = [value]
        setattr(args, action.dest, value)
        touched.add(action.dest)
    return touched


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise AssertionError("parser has no subcommands")


def resolve_link(args: argparse.Namespace, config_keys: set[str],
                 fallback: dict[str, float] | None = None) -> LinkParams:
    """Merge preset, config and flags into :class:`LinkParams`.

    The memory model (``beta`` or ``tau_M``) is taken as a unit from the
    highest layer that mentions either, so a flag ``--tau-m`` replaces a
    preset's ``beta`` instead of conflicting with it.
    """
    values: dict[str, Any] = dict(fallback or {})
    if args.preset is not None:
        try:
            values.update(PRESETS[args.preset][1])
        except KeyError:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}") from None

    user = {k: getattr(args, k) for k in LINK_KEYS if getattr(args, k) is not None}
    if args.beta is not None and args.tau_M is not None:
        flag_layer = {k for k in ("beta", "tau_M") if k not in config_keys}
        if len(flag_layer) == 1:
            # one of them came from the config file; the flag wins
            user.pop(({"beta", "tau_M"} - flag_layer).pop())
        else:
            raise UsageError("--beta and --tau-m are mutually exclusive")
    if "beta" in user or "tau_M" in user:
        values.pop("beta", None)
        values.pop("tau_M", None)
    values.update(user)

    if args.length is not None:
        if args.tau_C is not None:
            raise UsageError("--length and --tau-c are mutually exclusive")
        speed = args.speed if args.speed is not None else _DEFAULT_SPEED
        if not (args.length > 0.0 and speed > 0.0):
            raise DomainError("segment length and signal speed must be positive")
        values["tau_C"] = args.length / speed
    if "p" not in values:
        raise UsageError("no charging probability: give --p or --preset")
    if "beta" not in values and "tau_M" not in values:
        raise UsageError("no memory model: give --beta or --tau-m (or --preset)")
    return LinkParams(**values)


def _resolve_format(args: argparse.Namespace) -> str:
    if args.format is not None:
        return args.format
    env = os.environ.get(FORMAT_ENV, "").strip().lower()
    if not env:
        return "csv"
    if env not in FORMATS:
        raise UsageError(f"${FORMAT_ENV}={env!r} is not one of {FORMATS}")
    return env


def _opt(args: argparse.Namespace, name: str) -> Any:
    value = getattr(args, name, None)
    return DEFAULTS[name] if value is None else value


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def _finite(x: float) -> bool:
    return math.isfinite(x)


def format_value(x: Any) -> str:
    """Text form of one cell: 12 significant digits for floats, '' for nulls."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.11e}" if _finite(x) else ""
    return str(x)


def _json_value(x: Any) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.11e}" if _finite(x) else "null"
    if isinstance(x, dict):
        inner = ", ".join(f"{_json_str(k)}: {_json_value(v)}" for k, v in x.items())
        return "{" + inner + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in x) + "]"
    return _json_str(str(x))


def _json_str(s: str) -> str:
    import json

    return json.dumps(s)


def render(table: Table, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()
    lines = ["{", f'  "meta": {_json_value(table.meta)},', '  "rows": [']
    records = [_json_value(dict(zip(table.columns, row))) for row in table.rows]
    lines.extend(f"    {r}," for r in records[:-1])
    if records:
        lines.append(f"    {records[-1]}")
    lines.extend(["  ]", "}"])
    return "\n".join(lines) + "\n"


def _link_meta(params: LinkParams) -> dict[str, Any]:
    return {"p": params.p, "beta": params.beta, "tau_C": params.tau_C, "tau_M": params.tau_M,
            "p_S": params.p_S, "p_T": params.p_T, "f": params.f}


def _meta(command: str, params: LinkParams | None, options: dict[str, Any],
          seed: int | None = None, trials: int | None = None) -> dict[str, Any]:
    return {
        "artifact": "qrbuffer",
        "version": __version__,
        "command": command,
        "params": None if params is None else _link_meta(params),
        "options": options,
        "seed": seed,
        "trials": trials,
    }


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _log10(x: float) -> float | None:
    return math.log10(x) if x > 0.0 else None


def _diff(a: float | None, b: float | None) -> float | None:
    if a is None or b is None or not (_finite(a) and _finite(b)):
        return None
    return a - b


LEVEL_COLUMNS = (
    "level", "n_in", "n_out", "n_out_argmax", "p_in", "p_out", "gamma", "cumulative_gamma",
    "fidelity", "output_period", "rate", "rate_per_cycle", "log10_rate", "rate_cp",
    "rate_cp_per_cycle", "log10_rate_cp", "log10_eta",
)


def _level_rows(params: LinkParams, obp, cp) -> list[tuple]:
    cycle = 2.0 * params.tau_C
    rows = []
    for o, c in zip(obp, cp):
        lo = o.log10_rate if _finite(o.log10_rate) else None
        lc = c.log10_rate if _finite(c.log10_rate) else None
        rows.append((o.level, o.n_in, o.n_out, o.n_out_argmax, o.p_in, o.p_out, o.gamma,
                     o.cumulative_gamma, o.fidelity, o.output_period, o.rate, o.rate * cycle,
                     lo, c.rate, c.rate * cycle, lc, _diff(lo, lc)))
    return rows


def cmd_rate(args, params: LinkParams) -> Table:
    if args.n is not None:
        opt = None
        n = args.n
    else:
        opt = optimal_n_level1(params)
        n = opt.n_opt
    r_obp = rate_obp_level1(params, n)
    r_cp = rate_cp_level1(params)
    g_o, g_c = params.f * gamma_opt(params.p, params.beta, n), params.f * gamma_can(params.p, params.beta)
    cycle = 2.0 * params.tau_C
    row = (n, opt is not None, g_o, g_c, (1.0 + g_o) / 2.0, (1.0 + g_c) / 2.0,
           distillable_entanglement((1.0 + g_o) / 2.0), distillable_entanglement((1.0 + g_c) / 2.0),
           r_obp, r_obp * cycle, r_cp, r_cp * cycle,
           None if r_obp <= 0.0 or r_cp <= 0.0 else r_obp / r_cp,
           _diff(_log10(r_obp), _log10(r_cp)))
    meta = _meta("rate", params, {"n": args.n, "n_opt": opt is not None,
                                  "search_bound": None if opt is None else opt.search_bound,
                                  "threshold_hit": None if opt is None else opt.threshold_hit})
    return Table(("n", "optimised", "gamma_opt", "gamma_can", "fidelity_obp", "fidelity_cp",
                  "ed_obp", "ed_cp", "rate_obp", "rate_obp_per_cycle", "rate_cp",
                  "rate_cp_per_cycle", "eta", "log10_eta"), [row], meta)


def cmd_gamma(args, params: LinkParams) -> Table:
    conv = _opt(args, "convention")
    rows: list[tuple] = []
    if args.level is None:
        if args.n_in is not None or args.n_out is not None or args.p_in is not None:
            raise UsageError("--n-in, --n-out and --p-in need --level")
        if args.n is not None:
            rows.append(("gamma_opt", 1, 1, args.n, None, gamma_opt(params.p, params.beta, args.n)))
        rows.append(("gamma_can", 1, None, None, None, gamma_can(params.p, params.beta)))
    else:
        if args.level < 1:
            raise DomainError(f"--level must be >= 1, got {args.level}")
        if args.n is not None:
            raise UsageError("--n is the level-1 buffer size; use --n-out with --level")
        if args.n_out is not None:
            n_in = args.n_in if args.n_in is not None else 1
            p_in = args.p_in if args.p_in is not None else params.p
            beta_i = params.level(args.level).beta
            rows.append(("gamma_opt_level", args.level, n_in, args.n_out, conv,
                         gamma_opt_level(p_in, beta_i, n_in, args.n_out, conv)))
        rows.append(("gamma_can_level", args.level, None, None, None,
                     gamma_can_level(args.level, params)))
    meta = _meta("gamma", params, {"n": args.n, "level": args.level, "n_in": args.n_in,
                                   "n_out": args.n_out, "p_in": args.p_in, "convention": conv})
    return Table(("quantity", "level", "n_in", "n_out", "convention", "value"), rows, meta)


def cmd_optimize(args, params: LinkParams) -> Table:
    levels, conv = _opt(args, "levels"), _opt(args, "convention")
    schedule, obp = hierarchical_optimize(params, levels, conv)
    cp = chain_cp(params, levels)
    meta = _meta("optimize", params, {"levels": levels, "convention": conv,
                                      "n_out": list(schedule.n_out), "n_in": list(schedule.n_in)})
    meta["n_opt"] = obp[0].n_out_argmax
    return Table(LEVEL_COLUMNS, _level_rows(params, obp, cp), meta)


def cmd_chain(args, params: LinkParams) -> Table:
    if not args.n_out:
        raise UsageError("chain needs --n-out, e.g. --n-out 2,2,1")
    conv = _opt(args, "convention")
    schedule = LevelSchedule.from_n_out(args.n_out)
    obp = chain_obp(params, schedule, conv)
    cp = chain_cp(params, schedule.N_m)
    meta = _meta("chain", params, {"convention": conv, "n_out": list(schedule.n_out),
                                   "n_in": list(schedule.n_in)})
    return Table(LEVEL_COLUMNS, _level_rows(params, obp, cp), meta)


def cmd_sweep(args, params: LinkParams) -> Table:
    axes = dict(DEFAULT_AXES[args.kind])
    for name, axis in args.axis or []:
        axes[name] = axis
    spec = SweepSpec(args.kind, axes, params, _opt(args, "convention"),
                     args.levels if args.levels is not None else 8)
    tau_M = args.tau_m_list or [1e-4, 1e-3]
    table = run_sweep(spec, tau_M=tau_M, L_a=_opt(args, "La"), c=_opt(args, "c"))
    options: dict[str, Any] = {"kind": args.kind, "convention": spec.convention,
                               "levels": spec.levels}
    options["axes"] = {k: {"min": a.min, "max": a.max, "points": a.points, "scale": a.scale}
                       for k, a in sorted(axes.items())}
    if args.kind == "distance":
        options.update(tau_M_list=tau_M, La=_opt(args, "La"), c=_opt(args, "c"))
    table.meta = _meta("sweep", params, options)
    return table


def cmd_validate(args) -> tuple[Table, int]:
    trials, seed, workers = _opt(args, "trials"), _opt(args, "seed"), _opt(args, "workers")
    if trials < 1:
        raise DomainError("--trials must be >= 1")
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    checks = validation_checks(trials=trials, seed=seed, workers=workers)
    failures = sum(not c.passed for c in checks)
    allowed = allowed_failures(len(checks))
    rows = [(c.quantity, c.point, c.analytic, c.estimate, c.stderr, c.z,
             "pass" if c.passed else "fail") for c in checks]
    meta = _meta("validate", None, {"z_limit": 3.0, "checks": len(checks),
                                    "failures": failures, "allowed_failures": allowed},
                 seed=seed, trials=trials)
    code = EXIT_VALIDATION if failures > allowed else EXIT_OK
    return Table(("quantity", "point", "analytic", "estimate", "stderr", "z", "result"),
                 rows, meta), code


def cmd_presets() -> Table:
    rows = []
    for name in sorted(PRESETS):
        text, values = PRESETS[name]
        rows.append((name, values.get("p"), values.get("beta"), values.get("p_S", 1.0),
                     values.get("p_T", 1.0), values.get("tau_C", 1.0), text))
    return Table(("name", "p", "beta", "p_S", "p_T", "tau_C", "description"), rows,
                 _meta("presets", None, {}))


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------


def _dispatch(parser: argparse.ArgumentParser, argv: Sequence[str]) -> tuple[str, str | None, int]:
    args = parser.parse_args(list(argv))
    config_keys: set[str] = set()
    if args.config is not None:
        config_keys = _apply_config(parser, args, read_config(args.config))
    fmt = _resolve_format(args)

    code = EXIT_OK
    if args.command == "presets":
        table = cmd_presets()
    elif args.command == "validate":
        table, code = cmd_validate(args)
    else:
        fallback = _SWEEP_BASE if args.command == "sweep" else None
        params = resolve_link(args, config_keys, fallback)
        handler = {"rate": cmd_rate, "gamma": cmd_gamma, "optimize": cmd_optimize,
                   "chain": cmd_chain, "sweep": cmd_sweep}[args.command]
        table = handler(args, params)
    return render(table, fmt), args.output, code


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    """Run the CLI on ``argv`` and return the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        text, path, code = _dispatch(parser, argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        stderr.write(f"qrbuffer: usage error: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        stderr.write(f"qrbuffer: domain error: {exc}\n")
        return EXIT_DOMAIN
    if path is None:
        stdout.write(text)
    else:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            stderr.write(f"qrbuffer: cannot write {path!r}: {exc.strerror}\n")
            return EXIT_USAGE
    return code


def main() -> int:
    return run()
