"""Command-line interface.

The CLI is a thin layer over the pipeline functions: it loads a problem
(JSON file or preset), runs one pipeline, and writes ``report.json`` plus
any CSV tables into the output directory.  With ``--server URL`` the same
request is instead posted to a running service instance and the returned
payload is written identically.

Exit codes: 0 success, 2 validation failure (bad flags, malformed or
invalid problem), 3 numerical failure, 4 applicability failure (the
operation's preconditions do not hold for this problem).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (
    ApplicabilityError,
    BvpError,
    SearchBudgetError,
    StiffnessError,
    StructureError,
)
from .model import problem_from_json, problem_to_json
from .numcore import Tolerance
from .pipelines import (
    DEFAULT_N_SCHEDULE,
    PipelineResult,
    ValidationFailure,
    run_asymptote,
    run_classify,
    run_complete,
    run_roots,
    run_spectrum,
    run_witness,
)
from .presets import get_preset, preset_catalog

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_APPLICABILITY = 4


def _add_problem_args(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", type=Path, help="path to a problem JSON file")
    src.add_argument("--preset", help="name of a built-in preset")
    p.add_argument("--tol", type=float, default=1e-10, help="relative tolerance")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, default=7, help="sampling seed")
    p.add_argument("--json", dest="write_json", action="store_true", default=True)
    p.add_argument("--csv", dest="write_csv", action="store_true", default=True)
    p.add_argument("--no-csv", dest="write_csv", action="store_false")
    p.add_argument("--server", help="base URL of a running service to delegate to")


def _add_window_args(p: argparse.ArgumentParser):
    p.add_argument(
        "--window",
        help="search window re_min,re_max,im_min,im_max (default: heuristic)",
    )
    p.add_argument("--grid", type=int, default=2001, help="sample grid points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvpcomplete",
        description="classify boundary conditions, compute spectra and "
        "completeness diagnostics for first-order ODE systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="regularity classification")
    _add_problem_args(p)
    p.add_argument("--rule", choices=("weight", "inverse"), default="weight")

    p = sub.add_parser("spectrum", help="eigenvalue enumeration")
    _add_problem_args(p)
    _add_window_args(p)

    p = sub.add_parser("roots", help="root-function chains")
    _add_problem_args(p)
    _add_window_args(p)

    p = sub.add_parser("complete", help="completeness evidence")
    _add_problem_args(p)
    _add_window_args(p)
    p.add_argument(
        "--n-schedule", help="comma-separated truncation sizes (default 1,2,...,81)"
    )
    p.add_argument("--probe-seed", type=int, default=1234)
    p.add_argument("--with-adjoint", action="store_true")

    p = sub.add_parser("witness", help="incompleteness witness construction")
    _add_problem_args(p)
    p.add_argument("--grid", type=int, default=2001)

    p = sub.add_parser("asymptote", help="ray behaviour report")
    _add_problem_args(p)
    p.add_argument("--direction", default="1,0", help="ray direction re,im")
    p.add_argument("--t-values", default="10,20,40", help="comma-separated t values")

    p = sub.add_parser("preset", help="list built-in presets")
    p.add_argument("--out", type=Path, default=None)

    return parser


def _load_problem(args):
    if args.preset:
        return get_preset(args.preset)
    try:
        data = json.loads(Path(args.problem).read_text())
    except FileNotFoundError:
        raise ValidationFailure([f"problem file not found: {args.problem}"])
    except json.JSONDecodeError as exc:
        raise ValidationFailure([f"malformed JSON at line {exc.lineno}: {exc.msg}"])
    try:
        return problem_from_json(data)
    except (ValueError, KeyError) as exc:
        raise ValidationFailure([str(exc)])


def _parse_window(text):
    if not text:
        return None
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValidationFailure(["--window needs four numbers re0,re1,im0,im1"])
    return tuple(parts)


def _write_result(result: PipelineResult, args) -> None:
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.write_json:
        (out_dir / "report.json").write_text(
            json.dumps(result.report, indent=2, sort_keys=True) + "\n"
        )
    if args.write_csv:
        for name, rows in result.tables.items():
            (out_dir / name).write_text("\n".join(rows) + "\n")


def _delegate_to_server(args, endpoint: str, payload: dict) -> PipelineResult:
    import httpx

    url = args.server.rstrip("/") + "/" + endpoint
    resp = httpx.post(url, json=payload, timeout=600.0)
    if resp.status_code == 422:
        raise ValidationFailure([resp.json().get("detail", "validation failure")])
    if resp.status_code == 409:
        raise ApplicabilityError(resp.json().get("detail", "not applicable"))
    if resp.status_code >= 500:
        raise StiffnessError(resp.json().get("detail", "numerical failure"))
    resp.raise_for_status()
    data = resp.json()
    return PipelineResult(report=data["report"], tables=data.get("tables", {}))


def _problem_payload(args) -> dict:
    if args.preset:
        return {"preset": args.preset}
    problem = _load_problem(args)
    return {"problem": problem_to_json(problem)}


def _run_command(args) -> PipelineResult:
    if args.command == "classify":
        if args.server:
            payload = _problem_payload(args) | {"tol": args.tol, "rule": args.rule}
            return _delegate_to_server(args, "classify", payload)
        return run_classify(_load_problem(args), Tolerance(rel=args.tol), args.rule)

    if args.command == "spectrum":
        window = _parse_window(args.window)
        if args.server:
            payload = _problem_payload(args) | {
                "tol": args.tol,
                "seed": args.seed,
                "window": list(window) if window else None,
            }
            return _delegate_to_server(args, "spectrum", payload)
        return run_spectrum(
            _load_problem(args), window, Tolerance(rel=args.tol), seed=args.seed
        )

    if args.command == "roots":
        window = _parse_window(args.window)
        if args.server:
            payload = _problem_payload(args) | {
                "tol": args.tol,
                "seed": args.seed,
                "window": list(window) if window else None,
                "grid_points": args.grid,
            }
            return _delegate_to_server(args, "roots", payload)
        return run_roots(
            _load_problem(args),
            window,
            grid_points=args.grid,
            tol=Tolerance(rel=args.tol),
            seed=args.seed,
        )

    if args.command == "complete":
        window = _parse_window(args.window)
        schedule = (
            tuple(int(v) for v in args.n_schedule.split(","))
            if args.n_schedule
            else DEFAULT_N_SCHEDULE
        )
        if args.server:
            payload = _problem_payload(args) | {
                "tol": args.tol,
                "seed": args.seed,
                "window": list(window) if window else None,
                "grid_points": args.grid,
                "n_schedule": list(schedule),
                "probe_seed": args.probe_seed,
                "with_adjoint": args.with_adjoint,
            }
            return _delegate_to_server(args, "complete", payload)
        return run_complete(
            _load_problem(args),
            window,
            n_schedule=schedule,
            grid_points=args.grid,
            tol=Tolerance(rel=args.tol),
            seed=args.seed,
            probe_seed=args.probe_seed,
            with_adjoint=args.with_adjoint,
        )

    if args.command == "witness":
        if args.server:
            payload = _problem_payload(args) | {
                "tol": args.tol,
                "seed": args.seed,
                "grid_points": args.grid,
            }
            return _delegate_to_server(args, "witness", payload)
        return run_witness(
            _load_problem(args),
            grid_points=args.grid,
            tol=Tolerance(rel=args.tol),
            seed=args.seed,
        )

    if args.command == "asymptote":
        re_im = [float(v) for v in args.direction.split(",")]
        ts = tuple(float(v) for v in args.t_values.split(","))
        if args.server:
            payload = _problem_payload(args) | {
                "tol": args.tol,
                "direction": re_im,
                "ts": list(ts),
            }
            return _delegate_to_server(args, "asymptote", payload)
        return run_asymptote(
            _load_problem(args), complex(re_im[0], re_im[1]), ts, Tolerance(rel=args.tol)
        )

    raise ValueError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "preset":
        catalog = preset_catalog()
        text = json.dumps(catalog, indent=2) + "\n"
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "presets.json").write_text(text)
        sys.stdout.write(text)
        return EXIT_OK

    try:
        result = _run_command(args)
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ApplicabilityError, StructureError) as exc:
        print(f"not applicable: {exc}", file=sys.stderr)
        return EXIT_APPLICABILITY
    except SearchBudgetError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.partial is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "partial_spectrum.json").write_text(
                json.dumps(exc.partial.to_json(), indent=2) + "\n"
            )
        return EXIT_NUMERICAL
    except StiffnessError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BvpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    _write_result(result, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
