"""Command-line front end.

Usage:
    ballspectral solve --case 1 --degree 16 --out run.json
    ballspectral convergence --case 1 --degrees 4,8,12,16 --format md
    ballspectral export-field --case 1 --degree 16 --plane z=0 --grid 64 --var u
    ballspectral basis-check --degree 6

Exit status is 0 on success, 1 on a numerical or invariant failure and 2 on
invalid usage; failures also print a JSON error object on stderr.  Relative
output paths are resolved against ``$BALLSPECTRAL_OUTPUT_DIR`` when it is set.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("ballspectral")

OUTPUT_DIR_ENV = "BALLSPECTRAL_OUTPUT_DIR"
FORMATS = ("csv", "json", "md")
FIELD_FORMATS = ("csv", "json")
MAX_CHECK_DEGREE = 12


class UsageError(Exception):
    """Invalid configuration; maps to exit status 2."""


class NumericalFailure(Exception):
    """A solve or an invariant check failed; maps to exit status 1."""


@dataclass
class RunConfig:
    command: str
    case: str | None = None
    degrees: list[int] = field(default_factory=list)
    M_r: int | None = None
    L_theta: int | None = None
    L_phi: int | None = None
    out: str | None = None
    format: str = "md"
    plane: str = "z=0"
    grid: int = 64
    var: str = "u"
    threads: int | None = None
    perturb_lambda: float = 0.0

    def orders(self) -> dict:
        return {k: v for k, v in (("M_r", self.M_r), ("L_theta", self.L_theta), ("L_phi", self.L_phi)) if v}

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("perturb_lambda")
        d.pop("threads")
        return d


# ---------------------------------------------------------------- parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _degree_list(text: str) -> list[int]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise UsageError("empty degree list")
    try:
        return [int(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"invalid degree list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ballspectral", description="Mixed spectral-Galerkin biharmonic solver on the unit ball.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file with default option values")
    parser.add_argument("--threads", type=int, help="cap on worker threads")
    parser.add_argument("-v", "--verbose", action="store_true", help="log timings to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def quad(p):
        p.add_argument("--M-r", dest="M_r", type=int, help="radial quadrature nodes")
        p.add_argument("--L-theta", dest="L_theta", type=int, help="polar quadrature nodes")
        p.add_argument("--L-phi", dest="L_phi", type=int, help="azimuthal quadrature nodes")

    p = sub.add_parser("solve", help="solve one manufactured case at one degree")
    p.add_argument("--case")
    p.add_argument("--degree", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=None)
    quad(p)

    p = sub.add_parser("convergence", help="error table over several degrees")
    p.add_argument("--case")
    p.add_argument("--degrees")
    p.add_argument("--out")
    p.add_argument("--format")
    quad(p)

    p = sub.add_parser("export-field", help="point-wise solution and error on a plane")
    p.add_argument("--case")
    p.add_argument("--degree", type=int)
    p.add_argument("--plane")
    p.add_argument("--grid", type=int)
    p.add_argument("--var")
    p.add_argument("--out")
    p.add_argument("--format")
    quad(p)

    p = sub.add_parser("basis-check", help="audit the closed-form basis operators by quadrature")
    p.add_argument("--degree", type=int)
    p.add_argument("--perturb-lambda", dest="perturb_lambda", type=float, help=argparse.SUPPRESS)
    p.add_argument("--out")
    return parser


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the config file and explicit flags (flags win)."""
    if not args.command:
        raise UsageError("a command is required: solve | convergence | export-field | basis-check")
    merged: dict = {}
    file_opts = _load_config_file(args.config)
    known = set(RunConfig.__dataclass_fields__) | {"degree"}
    unknown = set(file_opts) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    merged.update(file_opts)
    for key, value in vars(args).items():
        if key in ("config", "verbose", "command") or value is None:
            continue
        merged[key] = value

    cfg = RunConfig(command=args.command)
    if "degree" in merged:
        merged["degrees"] = [int(merged.pop("degree"))]
    if isinstance(merged.get("degrees"), str):
        merged["degrees"] = _degree_list(merged["degrees"])
    for key, value in merged.items():
        setattr(cfg, key, value)
    if "format" not in merged:
        cfg.format = "csv" if cfg.command == "export-field" else "md"
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    from .solver import manufactured_case

    if cfg.command != "basis-check":
        if cfg.case is None:
            raise UsageError("--case is required")
        try:
            cfg.case = manufactured_case(cfg.case).identifier
        except ValueError as exc:
            raise UsageError(f"unknown case {cfg.case!r}") from exc
    if not cfg.degrees:
        raise UsageError("a degree is required" if cfg.command != "convergence" else "empty degree list")
    if cfg.command != "convergence" and len(cfg.degrees) != 1:
        raise UsageError(f"{cfg.command} takes a single degree")
    if any(d < 2 for d in cfg.degrees):
        raise UsageError("every degree must be at least 2 (V_N is empty below N = 2)")
    if any(b <= a for a, b in zip(cfg.degrees, cfg.degrees[1:])):
        raise UsageError("degrees must be strictly ascending")
    if cfg.command == "basis-check" and cfg.degrees[0] > MAX_CHECK_DEGREE:
        raise UsageError(f"basis-check is limited to degree <= {MAX_CHECK_DEGREE}")
    allowed = FIELD_FORMATS if cfg.command == "export-field" else FORMATS
    if cfg.format not in allowed:
        raise UsageError(f"format must be one of {allowed}, got {cfg.format!r}")
    for key in ("M_r", "L_theta", "L_phi"):
        value = getattr(cfg, key)
        if value is not None and value < 1:
            raise UsageError(f"{key} must be positive")
    if cfg.command == "export-field":
        if cfg.grid < 2:
            raise UsageError("--grid must be at least 2")
        if cfg.var not in ("u", "sigma"):
            raise UsageError("--var must be 'u' or 'sigma'")
        parse_plane(cfg.plane)
    if cfg.threads is not None and cfg.threads < 1:
        raise UsageError("--threads must be positive")


def parse_plane(spec: str) -> tuple[int, float]:
    """'z=0' -> (2, 0.0): the fixed axis and its offset."""
    m = re.fullmatch(r"\s*([xyz])\s*=\s*([-+0-9.eE]+)\s*", spec or "")
    if not m:
        raise UsageError(f"plane must look like 'z=0', got {spec!r}")
    try:
        offset = float(m.group(2))
    except ValueError as exc:
        raise UsageError(f"invalid plane offset in {spec!r}") from exc
    if not -1.0 <= offset <= 1.0:
        raise UsageError("plane offset must lie in [-1, 1]")
    return "xyz".index(m.group(1)), offset


# ---------------------------------------------------------------- output


def _output_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, path: str | None):
    target = _output_path(path)
    if target is None:
        sys.stdout.write(text)
    else:
        target.write_text(text, newline="")


def _with_config_comment(text: str, fmt: str, cfg: RunConfig) -> str:
    if fmt == "md":
        return text + f"\n<!-- config: {json.dumps(cfg.echo(), sort_keys=True)} -->\n"
    return text


def _write_sidecar(cfg: RunConfig):
    # CSV has no comment syntax, so the effective config goes next to it.
    target = _output_path(cfg.out)
    if target is not None:
        sidecar = target.with_name(target.name + ".config.json")
        sidecar.write_text(json.dumps(cfg.echo(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: RunConfig) -> int:
    from .solver import ErrorReport, compute_errors, manufactured_case, solve_biharmonic

    case = manufactured_case(cfg.case)
    N = cfg.degrees[0]
    result = solve_biharmonic(case.field("f"), N, orders=cfg.orders())
    row = compute_errors(case, result)
    log.info("timings %s", json.dumps(result.timings))
    report = ErrorReport(case.identifier, [row], config=cfg.echo())
    payload = {
        "config": cfg.echo(),
        "degree": N,
        "quadrature": result.orders,
        "sigma_hat": result.sigma_hat.to_json_obj(),
        "u_hat": result.u_hat.to_json_obj(),
        "errors": asdict(row),
    }
    if cfg.out:
        _emit(json.dumps(payload, indent=1) + "\n", cfg.out)
        sys.stdout.write(_render_report(report, cfg.format, cfg))
    else:
        sys.stdout.write(json.dumps(payload, indent=1) + "\n")
    return 0


def _render_report(report, fmt: str, cfg: RunConfig) -> str:
    if fmt == "json":
        obj = report.to_json_obj()
        obj["config"] = cfg.echo()
        return json.dumps(obj, indent=2) + "\n"
    return _with_config_comment(report.render(fmt), fmt, cfg)


def cmd_convergence(cfg: RunConfig) -> int:
    from .solver import run_convergence_study

    report = run_convergence_study(cfg.case, cfg.degrees, orders=cfg.orders(), threads=cfg.threads or os.cpu_count())
    log.info("timings %s", json.dumps(report.config.get("timings", {})))
    _emit(_render_report(report, cfg.format, cfg), cfg.out)
    if cfg.format == "csv":
        _write_sidecar(cfg)
    return 0


def field_lattice(case_id: str, N: int, plane: str, G: int, var: str, orders: dict | None = None) -> dict:
    """Exact and numerical values of ``var`` on a G x G lattice over a plane section."""
    from .solver import manufactured_case, solve_biharmonic
    from .transform import synthesize

    case = manufactured_case(case_id)
    axis, offset = parse_plane(plane)
    free = [a for a in range(3) if a != axis]
    result = solve_biharmonic(case.field("f"), N, orders=orders)
    coeffs = result.u_hat if var == "u" else result.sigma_hat
    exact_profile = case.u if var == "u" else case.sigma
    s = np.linspace(-1.0, 1.0, G)
    A, B = np.meshgrid(s, s, indexing="ij")
    inside = A * A + B * B + offset * offset <= 1.0
    pts = np.zeros((int(inside.sum()), 3))
    pts[:, free[0]] = A[inside]
    pts[:, free[1]] = B[inside]
    pts[:, axis] = offset
    numeric = np.full(A.shape, np.nan)
    exact = np.full(A.shape, np.nan)
    numeric[inside] = synthesize(coeffs, pts)
    exact[inside] = exact_profile(np.linalg.norm(pts, axis=1))
    return {
        "axes": ["xyz"[free[0]], "xyz"[free[1]]],
        "a": A,
        "b": B,
        "exact": exact,
        "numeric": numeric,
        "error": np.abs(exact - numeric),
        "inside": inside,
    }


def _lattice_csv(lat: dict, var: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    a_name, b_name = lat["axes"]
    writer.writerow([a_name, b_name, f"{var}_exact", f"{var}_N", "abs_error"])
    for i in range(lat["a"].shape[0]):
        for j in range(lat["a"].shape[1]):
            row = [repr(float(lat["a"][i, j])), repr(float(lat["b"][i, j]))]
            if lat["inside"][i, j]:
                row += [repr(float(lat[k][i, j])) for k in ("exact", "numeric", "error")]
            else:
                row += ["", "", ""]
            writer.writerow(row)
    return buf.getvalue()


def _lattice_json(lat: dict, var: str, cfg: RunConfig) -> str:
    def grid(name):
        arr = lat[name]
        return [[None if not lat["inside"][i, j] else float(arr[i, j]) for j in range(arr.shape[1])] for i in range(arr.shape[0])]

    obj = {
        "config": cfg.echo(),
        "axes": lat["axes"],
        "coordinates": [float(v) for v in lat["a"][:, 0]],
        "variable": var,
        "exact": grid("exact"),
        "numeric": grid("numeric"),
        "abs_error": grid("error"),
        "max_abs_error": float(np.nanmax(lat["error"])),
    }
    return json.dumps(obj) + "\n"


def cmd_export_field(cfg: RunConfig) -> int:
    lat = field_lattice(cfg.case, cfg.degrees[0], cfg.plane, cfg.grid, cfg.var, cfg.orders())
    if not np.all(np.isfinite(lat["numeric"][lat["inside"]])):
        raise NumericalFailure("non-finite values in the exported field")
    if cfg.format == "csv":
        _emit(_lattice_csv(lat, cfg.var), cfg.out)
        _write_sidecar(cfg)
    else:
        _emit(_lattice_json(lat, cfg.var, cfg), cfg.out)
    log.info("max abs error %.3e", float(np.nanmax(lat["error"])))
    return 0


def cmd_basis_check(cfg: RunConfig) -> int:
    from .diagnostics import basis_check

    report = basis_check(cfg.degrees[0], lambda_perturbation=cfg.perturb_lambda)
    obj = report.to_json_obj()
    lines = [
        f"degree                     {report.N}",
        f"basis functions            {report.dof}",
        f"max stiffness off-diagonal {report.stiffness_offdiag:.6e}",
        f"max stiffness diag error   {report.stiffness_diag_error:.6e}",
        f"max mass deviation         {report.mass_error:.6e}",
        f"max boundary value         {report.boundary_max:.6e}",
        "status                     " + ("ok" if report.ok else "FAILED: " + ", ".join(report.failures)),
    ]
    text = "\n".join(lines) + "\n"
    if cfg.out:
        _emit(json.dumps(obj, indent=2) + "\n", cfg.out)
    sys.stdout.write(text)
    if not report.ok:
        raise NumericalFailure(report.failures[0])
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "export-field": cmd_export_field,
    "basis-check": cmd_basis_check,
}


def _error(kind: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message, "exit_status": status}}) + "\n")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        return _error("usage", str(exc), 2)
    except NumericalFailure as exc:
        return _error("numerical", str(exc), 1)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _error("numerical", f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
