"""Command-line front end: ``epr <scenario> [options]``.

Configuration precedence is CLI flag > config file > built-in default. The
config file is a single JSON object whose keys mirror the echoed ``config``
section of every result document, so any emitted document can be re-run
verbatim. Unknown config keys are errors.

Exit codes: 0 success, 1 configuration error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from ._version import __version__
from .polarization import NormalizationError
from .scenarios import (
    DEFAULT_CHSH_ANGLES_DEG,
    DEFAULT_MALUS_ANGLES_DEG,
    DEFAULT_ORDER_THETA_DEG,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    MODEL_NAMES,
    ORDERING_NAMES,
    SCENARIOS,
    ConfigError,
)

FORMATS = ("table", "tsv", "json")

# Scenario parameters that may come from a config file or a CLI flag, in
# render order. "scenario", "format" and "out" are accepted on top of these.
SCENARIO_PARAMS: dict[str, tuple[str, ...]] = {
    "chsh-scan": ("model", "angles_deg", "trials", "seed", "ordering", "k_sigma", "workers"),
    "malus-check": ("angles_deg", "trials", "seed", "workers"),
    "qwp-test": ("model", "trials", "seed", "ordering", "workers"),
    "order-test": ("model", "theta_deg", "trials", "seed", "workers"),
    "model-matrix": ("trials", "seed", "k_sigma", "workers"),
}

_DEFAULTS: dict[str, dict] = {
    "chsh-scan": {
        "model": "qm",
        "angles_deg": list(DEFAULT_CHSH_ANGLES_DEG),
        "trials": DEFAULT_TRIALS,
        "seed": DEFAULT_SEED,
        "ordering": "arm1-first",
        "k_sigma": 3.0,
        "workers": None,
    },
    "malus-check": {
        "angles_deg": list(DEFAULT_MALUS_ANGLES_DEG),
        "trials": DEFAULT_TRIALS,
        "seed": DEFAULT_SEED,
        "workers": None,
    },
    "qwp-test": {
        "model": "qm",
        "trials": DEFAULT_TRIALS,
        "seed": DEFAULT_SEED,
        "ordering": "arm1-first",
        "workers": None,
    },
    "order-test": {
        "model": "qm",
        "theta_deg": DEFAULT_ORDER_THETA_DEG,
        "trials": DEFAULT_TRIALS,
        "seed": DEFAULT_SEED,
        "workers": None,
    },
    "model-matrix": {
        "trials": DEFAULT_TRIALS,
        "seed": DEFAULT_SEED,
        "k_sigma": 3.0,
        "workers": None,
    },
}


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad flags as config errors instead of exiting."""

    def error(self, message: str):  # noqa: D102 - argparse hook
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="epr",
        description=(
            "Monte Carlo workbench for two-photon polarization-correlation "
            "experiments under competing physical models."
        ),
    )
    parser.add_argument("--version", action="version", version=f"epr {__version__}")
    sub = parser.add_subparsers(dest="scenario", required=True, metavar="SCENARIO")

    def common(p: _Parser, with_model: bool, with_ordering: bool) -> None:
        if with_model:
            p.add_argument("--model", choices=MODEL_NAMES, default=None, help="hypothesis model")
        p.add_argument("--trials", type=int, default=None, help="trials per settings block")
        p.add_argument("--seed", type=int, default=None, help="64-bit run seed")
        if with_ordering:
            p.add_argument(
                "--ordering",
                choices=tuple(ORDERING_NAMES),
                default=None,
                help="which arm is booked as measured first",
            )
        p.add_argument("--workers", type=int, default=None, help="worker thread cap")
        p.add_argument("--config", default=None, metavar="PATH", help="JSON config file")
        p.add_argument("--format", choices=FORMATS, default=None, help="output format")
        p.add_argument("--out", default=None, metavar="PATH", help="output path (default stdout)")

    p = sub.add_parser("chsh-scan", help="four-pair correlation scan and the S combination")
    p.add_argument(
        "--angles", type=float, nargs=4, default=None, metavar=("A", "B", "A2", "B2"),
        help="analyzer quadruple a b a' b' in degrees",
    )
    p.add_argument("--k-sigma", type=float, default=None, help="verdict threshold in sigmas")
    common(p, with_model=True, with_ordering=True)

    p = sub.add_parser("malus-check", help="single-photon transmission vs the cos^2 law")
    p.add_argument(
        "--angles", type=float, nargs="+", default=None, metavar="DEG",
        help="polarizer angles in degrees",
    )
    common(p, with_model=False, with_ordering=False)

    p = sub.add_parser("qwp-test", help="helicity-certifying chains; reports P(B|A)")
    common(p, with_model=True, with_ordering=True)

    p = sub.add_parser("order-test", help="arm1-first vs arm2-first comparison")
    p.add_argument("--theta", type=float, default=None, help="analyzer angle gap in degrees")
    common(p, with_model=True, with_ordering=False)

    p = sub.add_parser("model-matrix", help="every model through both experiments")
    p.add_argument("--k-sigma", type=float, default=None, help="verdict threshold in sigmas")
    common(p, with_model=False, with_ordering=False)

    return parser


def _load_config_file(path: str, scenario: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config: the config file must hold a JSON object")
    allowed = set(SCENARIO_PARAMS[scenario]) | {"scenario", "format", "out"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown config field for scenario {scenario!r}")
    declared = data.get("scenario")
    if declared is not None and declared != scenario:
        raise ConfigError(
            f"scenario: config file declares {declared!r} but {scenario!r} was requested"
        )
    return data


_FLAG_TO_PARAM = {"angles": "angles_deg", "theta": "theta_deg"}


def _resolve(args: argparse.Namespace) -> tuple[str, dict, str, str | None]:
    scenario = args.scenario
    file_cfg = _load_config_file(args.config, scenario) if args.config else {}
    resolved = {}
    for param in SCENARIO_PARAMS[scenario]:
        flag_attr = {v: k for k, v in _FLAG_TO_PARAM.items()}.get(param, param)
        cli_value = getattr(args, flag_attr, None)
        if cli_value is not None:
            resolved[param] = cli_value
        elif param in file_cfg:
            resolved[param] = file_cfg[param]
        else:
            resolved[param] = _DEFAULTS[scenario][param]
    out_format = args.format or file_cfg.get("format") or "table"
    if out_format not in FORMATS:
        raise ConfigError(f"format: unknown format {out_format!r}")
    out_path = args.out if args.out is not None else file_cfg.get("out")
    return scenario, resolved, out_format, out_path


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return json.dumps(list(value))
    return str(value)


def render_json(document: dict) -> str:
    return json.dumps(document, indent=2) + "\n"


def render_tsv(document: dict) -> str:
    """Deterministic, plottable export: counts and derived columns only.

    Volatile engine metadata (wall time, backend) is deliberately left to the
    JSON format so identical configs produce byte-identical TSV.
    """
    lines = [f"# scenario: {document['scenario']}"]
    lines.append("# config: " + json.dumps(document["config"], sort_keys=True, separators=(",", ":")))
    rows = document["rows"]
    columns = list(rows[0].keys())
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(_fmt_value(row[c]) for c in columns))
    for key, value in document["summary"].items():
        lines.append(f"# {key}: {_fmt_value(value)}")
    return "\n".join(lines) + "\n"


def render_table(document: dict) -> str:
    lines = [f"scenario: {document['scenario']}"]
    cfg = document["config"]
    lines.append("config:   " + ", ".join(f"{k}={_fmt_value(v)}" for k, v in cfg.items() if k != "scenario"))
    rows = document["rows"]
    columns = list(rows[0].keys())

    def cell(value) -> str:
        if isinstance(value, float):
            return f"{value:.6g}"
        return _fmt_value(value)

    table = [columns] + [[cell(row[c]) for c in columns] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(columns))]
    lines.append("")
    for r in table:
        lines.append("  ".join(text.rjust(w) for text, w in zip(r, widths)))
    lines.append("")
    for key, value in document["summary"].items():
        lines.append(f"{key}: {cell(value)}")
    engine = document["engine"]
    lines.append(
        f"[{engine['version']} | backend {engine['kernel_backend']} | "
        f"{engine['trials_total']} trials in {engine['wall_time_s']}s]"
    )
    return "\n".join(lines) + "\n"


_RENDERERS = {"json": render_json, "tsv": render_tsv, "table": render_table}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        scenario, params, out_format, out_path = _resolve(args)
        document = SCENARIOS[scenario](**params)
        document["config"]["format"] = out_format
        document["config"]["out"] = out_path
        text = _RENDERERS[out_format](document)
        if out_path is None:
            sys.stdout.write(text)
        else:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(text)
    except ConfigError as exc:
        print(f"epr: config error: {exc}", file=sys.stderr)
        return 1
    except NormalizationError as exc:
        print(f"epr: internal invariant violation: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"epr: config error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
