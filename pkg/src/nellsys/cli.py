"""Command-line entry point.

Commands: solve, certify-existence, certify-nonexistence, eigen, lift,
example, validate.  Problems come from a built-in id (--example) or a
JSON document (--input).  Exit codes: 0 success or PASS verdict, 2
FAIL/NOT-CERTIFIED verdicts, 3 non-convergence, 1 errors (with a
single-line machine-parsable error record on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .certify import certify_existence, certify_nonexistence
from .elliptic import validate_operator
from .errors import NellsysError, NonConvergenceError, SchemaError
from .grid import build_grid
from .presets import builtin_document, builtin_example, builtin_ids
from .problem import discretize, load_problem
from .report import ReportDocument, export_result, node_table
from .solver import SolverOptions, multi_start_solve

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT_FAILED = 2
EXIT_NO_CONVERGENCE = 3

COMMANDS = ("solve", "certify-existence", "certify-nonexistence",
            "eigen", "lift", "example", "validate")


@dataclass(frozen=True)
class CommandRequest:
    command: str
    example: str | None = None
    input_path: str | None = None
    grid: tuple[int, int] | int | None = None
    tol: float = 1e-8
    max_iter: int = 5000
    damping: float = 0.5
    accel: str = "none"
    starts: tuple[str, ...] = ("mid", "top")
    samples: int = 9
    mode: str = "auto"
    constants_path: str | None = None
    seed: int = 0
    output: str | None = None
    fmt: str = "json"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise SchemaError("command", f"unknown command {self.command!r}")
        if (self.example is None) == (self.input_path is None):
            raise SchemaError("input", "exactly one of --example/--input is required")
        if self.command == "example" and self.example is None:
            raise SchemaError("input", "the example command needs --example <id>")


def _load_spec(request: CommandRequest):
    if request.example is not None:
        return builtin_example(request.example)
    text = Path(request.input_path).read_text(encoding="utf-8")
    return load_problem(text)


def _solver_options(request: CommandRequest) -> SolverOptions:
    accel, depth = "none", 3
    if request.accel.startswith("anderson"):
        accel = "anderson"
        if ":" in request.accel:
            depth = int(request.accel.split(":", 1)[1])
    return SolverOptions(tol=request.tol, max_iter=request.max_iter,
                         damping=request.damping, acceleration=accel,
                         anderson_depth=depth, starts=request.starts,
                         seed=request.seed)


def _result_dict(res) -> dict:
    return {"start": res.start, "converged": res.converged,
            "iterations": res.iterations, "residual": res.residual,
            "sup_norms": list(res.sup_norms), "norm": res.norm,
            "nonzero": res.nonzero, "clamp_events": res.clamp_events}


def run_command(request: CommandRequest) -> tuple[int, ReportDocument]:
    """Execute one command; returns (exit_code, report)."""
    started = time.perf_counter()

    if request.command == "example":
        payload = {"id": request.example, "document": builtin_document(request.example)}
        provenance = _provenance(request, None, started)
        return EXIT_OK, ReportDocument("example", payload, provenance)

    spec = _load_spec(request)
    resolution = request.grid if request.grid is not None else spec.resolution

    if request.command == "validate":
        grid = build_grid(spec.domain, resolution)
        payload = {"n_components": spec.n, "domain": spec.domain.kind,
                   "n_nodes": grid.n_nodes, "valid": True,
                   "components": [validate_operator(c.operator, c.boundary,
                                                    grid).to_dict()
                                  for c in spec.components]}
        return EXIT_OK, ReportDocument("validate", payload,
                                       _provenance(request, grid, started))

    dp = discretize(spec, resolution)
    grid = dp.grid
    exit_code = EXIT_OK
    csv_table = None

    if request.command == "solve":
        results = multi_start_solve(dp, _solver_options(request))
        payload = {"results": [_result_dict(r) for r in results],
                   "box": list(dp.box)}
        best = results[0]
        csv_table = node_table(grid, {f"u{k + 1}": c for k, c in
                                      enumerate(best.state.components)})
        if not any(r.converged for r in results):
            exit_code = EXIT_NO_CONVERGENCE

    elif request.command == "certify-existence":
        cert = certify_existence(dp, samples=request.samples, seed=request.seed)
        payload = cert.to_dict()
        if cert.verdict != "PASS":
            exit_code = EXIT_VERDICT_FAILED

    elif request.command == "certify-nonexistence":
        constants = None
        if request.constants_path is not None:
            constants = json.loads(Path(request.constants_path)
                                   .read_text(encoding="utf-8"))
        cert = certify_nonexistence(dp, mode=request.mode, constants=constants,
                                    samples=request.samples, seed=request.seed)
        payload = cert.to_dict()
        if cert.verdict != "PASS":
            exit_code = EXIT_VERDICT_FAILED

    elif request.command == "eigen":
        pairs = [dp.eigenpair(i, tol=request.tol) for i in range(dp.n)]
        payload = {"eigenpairs": [{"mu": p.mu, "r": p.r, "residual": p.residual,
                                   "iterations": p.iterations} for p in pairs]}
        csv_table = node_table(grid, {f"phi{k + 1}": p.phi
                                      for k, p in enumerate(pairs)})

    else:  # lift
        payload = {"gamma_norms": [dp.gamma_norm(i) for i in range(dp.n)]}
        csv_table = node_table(grid, {f"gamma{k + 1}": g
                                      for k, g in enumerate(dp.gammas)})

    report = ReportDocument(request.command, payload,
                            _provenance(request, grid, started), csv_table)
    return exit_code, report


def _provenance(request: CommandRequest, grid, started: float) -> dict:
    prov = {"version": __version__,
            "example": request.example, "input": request.input_path,
            "grid": None if grid is None else
            ([grid.n_r, grid.n_theta] if hasattr(grid, "n_r")
             else [grid.nx, grid.ny]),
            "tol": request.tol, "max_iter": request.max_iter,
            "damping": request.damping, "acceleration": request.accel,
            "starts": list(request.starts), "samples": request.samples,
            "mode": request.mode, "seed": request.seed,
            "wall_time_s": time.perf_counter() - started}
    return prov


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage errors through the exit contract
        raise SchemaError("flags", message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nellsys",
        description="Solve and certify nonlocal elliptic systems with "
                    "functional boundary conditions.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--example", choices=sorted(builtin_ids()),
                         help="built-in problem id")
        src.add_argument("--input", help="path to a problem document (JSON)")
        p.add_argument("--grid", help="grid resolution n or n,m")
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=5000)
        p.add_argument("--damping", type=float, default=0.5)
        p.add_argument("--accel", default="none",
                       help="none or anderson:<depth>")
        p.add_argument("--starts", default="mid,top",
                       help="comma list of zero,mid,top,random:<k>")
        p.add_argument("--samples", type=int, default=9)
        p.add_argument("--mode", default="auto",
                       help="auto or constants:<path> (non-existence)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--format", dest="fmt", choices=("json", "csv"),
                       default="json")
    return parser


def _request_from_args(args: argparse.Namespace) -> CommandRequest:
    grid = None
    if args.grid:
        parts = tuple(int(v) for v in args.grid.split(","))
        grid = parts if len(parts) == 2 else parts[0]
    mode, constants_path = args.mode, None
    if mode.startswith("constants:"):
        mode, constants_path = "constants", mode.split(":", 1)[1]
    return CommandRequest(
        command=args.command, example=args.example, input_path=args.input,
        grid=grid, tol=args.tol, max_iter=args.max_iter, damping=args.damping,
        accel=args.accel, starts=tuple(s for s in args.starts.split(",") if s),
        samples=args.samples, mode=mode, constants_path=constants_path,
        seed=args.seed, output=args.output, fmt=args.fmt)


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        request = _request_from_args(args)
        exit_code, report = run_command(request)
    except NonConvergenceError as exc:
        _write_error(exc)
        return EXIT_NO_CONVERGENCE
    except (NellsysError, OSError, json.JSONDecodeError) as exc:
        _write_error(exc)
        return EXIT_ERROR

    data = export_result(report, request.fmt)
    if request.output:
        Path(request.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return exit_code


def _write_error(exc: Exception):
    record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(json.dumps(record) + "\n")


if __name__ == "__main__":
    sys.exit(main())
