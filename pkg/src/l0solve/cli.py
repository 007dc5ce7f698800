"""Command-line front end.

Instances are JSON documents::

    {
      "A": [[1.0, 2.0], [3.0, 4.0]],          # or "A": "matrix.csv"
      "loss": {"name": "Leastsquares", "y": [1.0, 0.0]},
      "penalty": {"name": "Bigm", "M": 1.0},
      "lmbd": 0.1,                             # solve only
      "path": {"lmbd_ratio_min": 0.01, "lmbd_num": 20}   # optional, path only
    }

Relative file paths are resolved against the directory of the instance.
Exit status is 0 when the solve is optimal, 2 when a limit was reached and 1
on invalid input.
"""

import argparse
import inspect
import json
import sys
import time
from pathlib import Path

import numpy as np

from l0solve import losses, penalties
from l0solve.bnb import solve
from l0solve.path import PathSpec, bic, bic_values, fit_path, lambda_max, select_by_bic
from l0solve.problem import Exploration, Problem, SolveResult, SolverOptions, Status

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LIMIT = 2

LOSSES = dict(losses.NATIVE_LOSSES)
PENALTIES = dict(penalties.NATIVE_PENALTIES)


class InstanceError(ValueError):
    """Malformed instance file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _read_array(value, base: Path, what: str, ndim: int) -> np.ndarray:
    if isinstance(value, str):
        path = Path(value)
        if not path.is_absolute():
            path = base / path
        try:
            arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=ndim)
        except OSError as exc:
            raise InstanceError(f"cannot read {what} from {path}: {exc}") from None
        except ValueError as exc:
            raise InstanceError(f"malformed numbers in {path}: {exc}") from None
    else:
        try:
            arr = np.array(value, dtype=np.float64)
        except (TypeError, ValueError):
            raise InstanceError(f"`{what}` must be numeric") from None
    if ndim == 1:
        arr = arr.ravel()
    if arr.ndim != ndim:
        raise InstanceError(f"`{what}` must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def _build(catalogue, spec, kind, base):
    if not isinstance(spec, dict) or "name" not in spec:
        raise InstanceError(f"`{kind}` must be an object with a `name` field")
    name = spec["name"]
    if name not in catalogue:
        raise InstanceError(f"unknown {kind} {name!r}; valid names: {', '.join(sorted(catalogue))}")
    cls = catalogue[name]
    params = inspect.signature(cls.__init__).parameters
    kwargs = {}
    for key, value in spec.items():
        if key == "name":
            continue
        if key not in params:
            raise InstanceError(f"{name} takes no parameter {key!r}")
        kwargs[key] = _read_array(value, base, key, 1) if key == "y" else value
    missing = [
        p for p, par in params.items()
        if p != "self" and par.default is inspect.Parameter.empty and p not in kwargs
    ]
    if missing:
        raise InstanceError(f"{name} requires parameter(s) {', '.join(missing)}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"invalid {kind} parameters: {exc}") from None


def load_instance(path) -> dict:
    """Parse an instance file into ``A``, ``loss``, ``penalty`` and optional fields."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InstanceError("the instance must be a JSON object")
    for key in ("A", "loss", "penalty"):
        if key not in raw:
            raise InstanceError(f"missing field `{key}`")
    base = path.parent
    A = _read_array(raw["A"], base, "A", 2)
    loss = _build(LOSSES, raw["loss"], "loss", base)
    penalty = _build(PENALTIES, raw["penalty"], "penalty", base)
    if len(loss.y) != A.shape[0]:
        raise InstanceError(f"`A` has {A.shape[0]} rows but `y` has {len(loss.y)} entries")
    out = {"A": A, "loss": loss, "penalty": penalty}
    if "lmbd" in raw:
        out["lmbd"] = raw["lmbd"]
    if "path" in raw:
        out["path"] = raw["path"]
    return out


def result_to_dict(result: SolveResult) -> dict:
    idx = result.indices
    return {
        "status": result.status.value,
        "objective": float(result.objective),
        "rel_gap": float(result.rel_gap),
        "lower_bound": float(result.lower_bound),
        "node_count": int(result.node_count),
        "solve_time_seconds": float(result.solve_time),
        "solution": {
            "n": int(result.x.size),
            "indices": [int(i) for i in idx],
            "values": [float(v) for v in result.x[idx]],
        },
    }


def solution_from_dict(data: dict) -> np.ndarray:
    sol = data["solution"]
    x = np.zeros(sol["n"])
    x[sol["indices"]] = sol["values"]
    return x


def _options(args) -> SolverOptions:
    return SolverOptions(
        rel_gap_tol=args.rel_gap_tol,
        inner_tol=args.inner_tol,
        node_limit=args.node_limit,
        time_limit=args.time_limit,
        exploration=Exploration(args.exploration),
        enable_simultaneous_pruning=not args.no_simultaneous_pruning,
        enable_screening=not args.no_screening,
        workers=args.workers,
    )


def _options_echo(opts: SolverOptions) -> dict:
    return {
        "rel_gap_tol": opts.rel_gap_tol,
        "inner_tol": opts.inner_tol,
        "node_limit": opts.node_limit,
        "time_limit": opts.time_limit,
        "exploration": opts.exploration.value,
        "enable_simultaneous_pruning": opts.enable_simultaneous_pruning,
        "enable_screening": opts.enable_screening,
        "workers": opts.workers,
    }


def _progress_printer(stream):
    last = [0.0]

    def report(p):
        now = time.perf_counter()
        if now - last[0] < 0.5 and p.node_count > 1:
            return
        last[0] = now
        print(
            f"nodes {p.node_count:>8d}  lower {p.global_lower: .6e}  "
            f"upper {p.incumbent_value: .6e}  queue {p.queue_size:>6d}  "
            f"time {p.elapsed:8.2f}s",
            file=stream,
        )

    return report


def _emit(doc: dict, output) -> None:
    text = json.dumps(doc, indent=2)
    if output is None:
        sys.stdout.write(text + "\n")
    else:
        Path(output).write_text(text + "\n")


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    if "lmbd" not in inst:
        raise InstanceError("missing field `lmbd`")
    try:
        problem = Problem(inst["A"], inst["loss"], inst["penalty"], inst["lmbd"])
    except (TypeError, ValueError) as exc:
        raise InstanceError(str(exc)) from None
    opts = _options(args)
    callback = _progress_printer(sys.stderr) if args.verbose else None
    result = solve(problem, opts, callback=callback)
    doc = result_to_dict(result)
    doc["lmbd"] = problem.lmbd
    doc["options"] = _options_echo(opts)
    _emit(doc, args.output)
    return EXIT_OK if result.status is Status.OPTIMAL else EXIT_LIMIT


def cmd_path(args) -> int:
    inst = load_instance(args.instance)
    fields = dict(inst.get("path", {}))
    if args.lmbd_ratio_min is not None:
        fields["lmbd_ratio_min"] = args.lmbd_ratio_min
    if args.lmbd_num is not None:
        fields["lmbd_num"] = args.lmbd_num
    try:
        spec = PathSpec(**fields)
    except TypeError as exc:
        raise InstanceError(f"invalid path specification: {exc}") from None
    opts = _options(args)
    A, loss, pen = inst["A"], inst["loss"], inst["penalty"]

    def report(lmbd, result):
        if args.verbose:
            print(
                f"lmbd {lmbd:.6e}  status {result.status.value:<10s}  "
                f"objective {result.objective:.6e}  nnz {result.indices.size}",
                file=sys.stderr,
            )

    path = fit_path(A, loss, pen, spec, opts, callback=report)
    bics = bic_values(path, A, loss)
    entries = []
    for (lmbd, result), b in zip(path, bics):
        entry = result_to_dict(result)
        entry["lmbd"] = lmbd
        entry["bic"] = b
        entries.append(entry)
    doc = {"lmbd_max": path.lmbd_max, "lmbds": list(path.lmbds), "path": entries}
    if args.select_bic:
        lmbd, res = select_by_bic(path, A, loss)
        doc["selected"] = {"lmbd": lmbd, "bic": bic(A, loss, res.x)}
    doc["options"] = _options_echo(opts)
    _emit(doc, args.output)
    limited = any(r.status is not Status.OPTIMAL for r in path.results)
    return EXIT_LIMIT if limited else EXIT_OK


def cmd_lmax(args) -> int:
    inst = load_instance(args.instance)
    value = lambda_max(inst["A"], inst["loss"], inst["penalty"])
    text = f"{value:.17g}\n"
    if args.output is None:
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--rel-gap-tol", type=float, default=1e-8)
    p.add_argument("--inner-tol", type=float, default=1e-8)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument(
        "--exploration",
        choices=[e.value for e in Exploration],
        default=Exploration.BEST_FIRST.value,
    )
    p.add_argument("--no-screening", action="store_true")
    p.add_argument("--no-simultaneous-pruning", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--verbose", "-v", action="store_true", help="progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="l0solve", description="Exact solver for l0-regularized problems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("instance")
    p.add_argument("--output", "-o", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("path", help="solve along a grid of lmbd values")
    p.add_argument("instance")
    p.add_argument("--output", "-o", default=None)
    p.add_argument("--lmbd-ratio-min", type=float, default=None)
    p.add_argument("--lmbd-num", type=int, default=None)
    p.add_argument("--select-bic", action="store_true")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("lmax", help="print lmbd_max")
    p.add_argument("instance")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_lmax)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "workers"):
            _options(args)
        return args.func(args)
    except (InstanceError, ValueError) as exc:
        print(f"l0solve: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
