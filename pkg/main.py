"""
Matrix concentration lab - command-line entry point.

Runs the verification catalog on experiment configs, Monte Carlo tail
experiments, and prints bound tables.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from checks import CHECKS, CheckContext, run_check
from checks.monte_carlo import bound_curve, mc_tail_curve, tail_rows
from errors import ConfigError, LabError, NumericError
from lab.bounds import (
    expectation_bound,
    poly_moment_bound_uniform,
    product_poly_coefficient,
    subgaussian_tail,
)
from lab.continuous import SemigroupModel, build_model
from models import ExperimentConfig, ModelKind, TailExperimentSpec, TailRow, VerificationReport
from settings import get_settings

logger = logging.getLogger("mclab")


class ExitCode(IntEnum):
    OK = 0
    VERIFICATION_FAILED = 1
    CONFIG_ERROR = 2
    NUMERIC_ERROR = 3


REPORT_COLUMNS = ["name", "status", "margin", "tolerance", "trials", "seed", "elapsed_s", "negative_control", "v"]
TAIL_COLUMNS = ["t", "empirical", "stderr", "bound", "pass", "v"]


# ══════════════════════════════════════════════════════════════════════════════
# Config loading
# ══════════════════════════════════════════════════════════════════════════════

def resolve_config_path(path: str) -> Path:
    """A file path, or the name of a bundled preset."""
    p = Path(path)
    if p.exists():
        return p
    preset = get_settings().presets_dir / (p.stem + ".json")
    if preset.exists():
        return preset
    raise ConfigError(f"Config not found: {path}")


def _format_validation_error(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        where = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def load_config(path: str, seed: Optional[int] = None) -> ExperimentConfig:
    p = resolve_config_path(path)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: the config must be a JSON object")
    if seed is not None:
        raw["seed"] = seed
    try:
        return ExperimentConfig(**raw)
    except ValidationError as e:
        raise ConfigError(f"{p}: {_format_validation_error(e)}") from e


def config_model(config: ExperimentConfig) -> Optional[SemigroupModel]:
    if config.model is None:
        return None
    return build_model(config.model, config.function, np.random.default_rng(config.seed))


# ══════════════════════════════════════════════════════════════════════════════
# Output
# ══════════════════════════════════════════════════════════════════════════════

def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def render_json_lines(rows: Iterable[Dict[str, Any]]) -> str:
    return "".join(json.dumps(row, sort_keys=False) + "\n" for row in rows)


def emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


def _output_format(args: argparse.Namespace, config: ExperimentConfig, default: str) -> str:
    if args.format:
        return args.format
    if "format" in config.output.model_fields_set:
        return config.output.format
    return default


# ══════════════════════════════════════════════════════════════════════════════
# Commands
# ══════════════════════════════════════════════════════════════════════════════

def _run_job(payload: Dict[str, Any]) -> Dict[str, Any]:
    """Run one configured check; the process-pool unit of work."""
    config = ExperimentConfig(**payload["config"])
    spec = config.checks[payload["index"]]
    negative = None if spec.gating is None else not spec.gating
    ctx = CheckContext(
        name=spec.name,
        seed=config.seed,
        params=dict(spec.params),
        model=config_model(config),
        negative_control=negative,
        spawn_key=(payload["index"],),
    )
    return run_check(ctx).model_dump(mode="json")


def cmd_verify(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    payloads = [{"config": config.model_dump(mode="json"), "index": i} for i in range(len(config.checks))]
    logger.info("Running %d checks with seed %d", len(payloads), config.seed)
    if args.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_job, payloads))
    else:
        results = [_run_job(p) for p in payloads]
    reports = [VerificationReport(**r) for r in results]

    rows = [r.model_dump(mode="json") for r in reports]
    fmt = _output_format(args, config, "json")
    text = render_csv(REPORT_COLUMNS, rows) if fmt == "csv" else render_json_lines(rows)
    emit(text, args.out or config.output.path)

    failed = [r.name for r in reports if r.gating and not r.passed]
    if failed:
        logger.error("Failed checks: %s", ", ".join(failed))
        return ExitCode.VERIFICATION_FAILED
    return ExitCode.OK


def run_experiment(config: ExperimentConfig) -> List[TailRow]:
    if config.model is None:
        raise ConfigError("experiment configs need a 'model'")
    spec = config.experiment or TailExperimentSpec()
    model = config_model(config)
    curve = mc_tail_curve(model, spec.samples, spec.t_grid, config.seed, branch=spec.branch, points=spec.points)
    return tail_rows(curve, bound_curve(model, spec.bound, spec.c, spec.v))


def cmd_experiment(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    rows = run_experiment(config)
    dumped = [r.model_dump(mode="json", by_alias=True) for r in rows]
    fmt = _output_format(args, config, "csv")
    text = render_csv(TAIL_COLUMNS, dumped) if fmt == "csv" else render_json_lines(dumped)
    emit(text, args.out or config.output.path)
    violations = [r.t for r in rows if not r.passed]
    if violations:
        logger.error("Tail bound violated at t = %s", ", ".join(f"{t:.4g}" for t in violations))
        return ExitCode.VERIFICATION_FAILED
    return ExitCode.OK


def preset_constant(preset: str, n: Optional[int], eta: float) -> float:
    """Bakry–Émery constant for the --preset shortcuts of the bounds command."""
    if preset == "product":
        return 2.0
    if preset == "gaussian":
        return 1.0 / eta
    if n is None:
        raise ConfigError(f"--preset {preset} needs --n")
    if preset == "sphere":
        if n < 2:
            raise ConfigError("--preset sphere needs --n >= 2")
        return 1.0 / (n - 1)
    if n < 2:
        raise ConfigError("--preset so needs --n >= 2 (the matrix size d)")
    return 4.0 / (n - 1)


def bounds_rows(d: int, c: float, v: float, q_grid: Sequence[float], t_grid: Sequence[float]) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    for q in q_grid:
        rows.append(
            {
                "kind": "poly-moment",
                "q": q,
                "coefficient": math.sqrt(c * (2.0 * q - 1.0)),
                "bound": poly_moment_bound_uniform(c, q, d, v),
            }
        )
    for t in t_grid:
        rows.append({"kind": "tail", "t": t, "bound": subgaussian_tail(d, c, v, t)})
    rows.append({"kind": "expectation", "bound": expectation_bound(d, c, v)})
    return rows


def cmd_bounds(args: argparse.Namespace) -> int:
    c = args.c
    if args.preset:
        c = preset_constant(args.preset, args.n, args.eta)
    if c is None:
        raise ConfigError("bounds needs --c or --preset")
    rows = bounds_rows(args.d, c, args.v, args.q, args.t_grid)
    if args.preset == "product":
        for row in rows:
            if row["kind"] == "poly-moment":
                row["coefficient"] = product_poly_coefficient(row["q"])
    for row in rows:
        row["v"] = 1

    if args.format == "json":
        emit(render_json_lines(rows), args.out)
        return ExitCode.OK
    if args.format == "csv":
        emit(render_csv(["kind", "q", "t", "coefficient", "bound", "v"], ({k: r.get(k, "") for k in ["kind", "q", "t", "coefficient", "bound", "v"]} for r in rows)), args.out)
        return ExitCode.OK

    lines = [f"Bounds for d={args.d}, c={c:.6g}, v={args.v:.6g}", ""]
    lines.append("Polynomial moments:")
    for row in rows:
        if row["kind"] == "poly-moment":
            lines.append(f"  q={row['q']:g}  coefficient={row['coefficient']:.6f}  bound={row['bound']:.6f}")
    lines.append("Tail P{λ_max(f − Ef) ≥ t}:")
    for row in rows:
        if row["kind"] == "tail":
            lines.append(f"  t={row['t']:g}  tail={row['bound']:.6g}")
    lines.append(f"Expectation: {rows[-1]['bound']:.6f}")
    emit("\n".join(lines) + "\n", args.out)
    return ExitCode.OK


def cmd_list(args: argparse.Namespace) -> int:
    lines = ["Models:"]
    lines.extend(f"  {kind.value}" for kind in ModelKind)
    lines.append("")
    lines.append(f"Checks ({len(CHECKS)}):")
    for name, entry in sorted(CHECKS.items(), key=lambda kv: (kv[1].family, kv[0])):
        marker = " [negative control]" if entry.negative_control else ""
        lines.append(f"  {name} ({entry.family}){marker}")
        lines.append(f"      {entry.anchor}")
    lines.append("")
    lines.append("Presets:")
    presets_dir = get_settings().presets_dir
    presets = sorted(p.stem for p in presets_dir.glob("*.json")) if presets_dir.is_dir() else []
    lines.extend(f"  {p}" for p in presets)
    emit("\n".join(lines) + "\n", args.out)
    return ExitCode.OK


# ══════════════════════════════════════════════════════════════════════════════
# Entry points
# ══════════════════════════════════════════════════════════════════════════════

def _floats(text: str) -> List[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mclab", description="Matrix concentration verification lab")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output path (default: config output or stdout)")
    parser.add_argument("--format", choices=["json", "csv"], default=None)
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for verify")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run the checks named in a config")
    verify.add_argument("config")
    verify.set_defaults(handler=cmd_verify)

    experiment = sub.add_parser("experiment", help="Monte Carlo tail curve against its bound")
    experiment.add_argument("config")
    experiment.set_defaults(handler=cmd_experiment)

    bounds = sub.add_parser("bounds", help="print bound tables")
    bounds.add_argument("--d", type=int, default=1)
    bounds.add_argument("--c", type=float, default=None)
    bounds.add_argument("--v", type=float, default=1.0)
    bounds.add_argument("--q", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    bounds.add_argument("--t-grid", "--t", dest="t_grid", type=_floats, default=[0.0, 1.0, 2.0, 3.0])
    bounds.add_argument("--preset", choices=["product", "gaussian", "sphere", "so"], default=None)
    bounds.add_argument("--n", type=int, default=None)
    bounds.add_argument("--eta", type=float, default=1.0)
    bounds.set_defaults(handler=cmd_bounds)

    listing = sub.add_parser("list", help="catalog of models, checks and presets")
    listing.set_defaults(handler=cmd_list)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = get_settings()
    except ConfigError as e:
        logging.basicConfig(stream=sys.stderr)
        logger.error("Error: %s", e)
        return e.exit_code
    logging.basicConfig(
        level=settings.log_level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return ExitCode.OK if e.code == 0 else ExitCode.CONFIG_ERROR
    try:
        return int(args.handler(args))
    except NumericError as e:
        logger.error("Numeric failure: %s", e)
        return ExitCode.NUMERIC_ERROR
    except LabError as e:
        logger.error("Error: %s", e)
        return e.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as e:
        logger.error("Numeric failure: %s", e)
        return ExitCode.NUMERIC_ERROR


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
