"""Command-line front end.

Exit codes: 0 ok, 1 invalid config (or failing claims / invalid grid),
2 unreadable or malformed file, 3 undetermined dynamics, 4 unknown claim.
Reports go to stdout as JSON; short summaries go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from gonodyn.analysis import (
    LimitKind,
    OmegaOptions,
    enumerate_fixed_points,
    fixed_points_n2,
    n2_branch,
    omega_limit,
)
from gonodyn.claims import REGISTRY, run_claim, suite_passed
from gonodyn.config import ConfigInvalid, ConfigParseError, Scenario, load_config
from gonodyn.errors import GonodynError, WholeIntervalFixed, ZeroSexMass
from gonodyn.model import FullState, ReducedState, lift
from gonodyn.sweep import AXES, BadGrid, parse_axis, run_sweep, worker_count

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_UNDETERMINED, EXIT_UNKNOWN_CLAIM = 0, 1, 2, 3, 4


def fmt(v) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(v), ".17g")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(path) -> tuple[Scenario | None, int]:
    try:
        return Scenario(load_config(path)), EXIT_OK
    except ConfigParseError as exc:
        _err(str(exc))
        return None, EXIT_PARSE
    except ConfigInvalid as exc:
        print(_dump({"valid": False, "errors": exc.details}))
        _err(f"invalid config: {exc}")
        return None, EXIT_INVALID


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    scen, code = _load(args.config)
    if scen is None:
        return code
    print(_dump({"valid": True, "n": scen.n, "a": scen.rate.a, "b": scen.rate.b,
                 "has_initial": scen.initial is not None}))
    _err("config ok")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _start_full(scen: Scenario) -> FullState:
    init = scen.require_initial()
    if isinstance(init, FullState):
        return init
    if isinstance(init, ReducedState):
        return FullState(init.x, scen.rate.beta * init.x)
    return lift(init, scen.rate)


def trajectory_rows(scen: Scenario, steps: int, level: str) -> tuple[list[str], list[list[float]]]:
    """Header and rows ``[t, x..., (y...)]`` for ``steps`` applications of the full operator."""
    n = scen.n
    z = _start_full(scen)
    op = scen.operator
    header = ["t"] + [f"x_{k}" for k in range(1, n + 1)]
    if level == "full":
        header += [f"y_{k}" for k in range(1, n + 1)]
    rows = []
    for t in range(steps + 1):
        if t:
            try:
                z = op.apply_full(z)
            except ZeroSexMass as exc:
                raise ZeroSexMass(str(exc), step=t) from None
        if level == "full":
            vals = list(z.x) + list(z.y)
        elif level == "reduced":
            vals = list(z.x)
        else:
            vals = list(z.x / z.x.sum())
        rows.append([t] + [float(v) for v in vals])
    return header, rows


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r[0]] + [fmt(v) for v in r[1:]])
    return buf.getvalue()


def render_json_rows(header, rows) -> str:
    return json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n"


def cmd_simulate(args) -> int:
    scen, code = _load(args.config)
    if scen is None:
        return code
    steps = args.steps if args.steps is not None else scen.config.run.steps
    try:
        header, rows = trajectory_rows(scen, steps, args.level)
    except ConfigInvalid as exc:
        print(_dump({"valid": False, "errors": exc.details}))
        return EXIT_INVALID
    except ZeroSexMass as exc:
        print(_dump({"valid": False, "errors": [{"where": "trajectory", "step": exc.step, "error": str(exc)}]}))
        return EXIT_INVALID
    text = render_csv(header, rows) if args.format == "csv" else render_json_rows(header, rows)
    if args.out:
        Path(args.out).write_bytes(text.encode("utf-8"))
        _err(f"wrote {len(rows)} rows to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fixed points


def fixed_point_report(scen: Scenario, seeds: int = 200) -> dict:
    op = scen.operator
    out = {"n": scen.n, "a": scen.rate.a}
    try:
        if scen.n == 2:
            tmap = op.quadratic_map()
            out["branch"] = n2_branch(tmap)
            recs = fixed_points_n2(tmap)
        else:
            recs = enumerate_fixed_points(op, seeds=seeds)
    except WholeIntervalFixed as exc:
        out["identity"] = True
        out["message"] = str(exc)
        out["fixed_points"] = []
        return out
    out["fixed_points"] = [dict(r.as_dict(), x=[float(v) for v in scen.rate.a * r.u.u]) for r in recs]
    return out


def cmd_fixed_points(args) -> int:
    scen, code = _load(args.config)
    if scen is None:
        return code
    rep = fixed_point_report(scen, args.seeds)
    if args.json:
        print(_dump(rep))
    elif rep.get("identity"):
        print(rep["message"])
    else:
        if "branch" in rep:
            print(f"branch: {rep['branch']}")
        for fp in rep["fixed_points"]:
            u = ", ".join(fmt(v) for v in fp["u"])
            print(f"u=({u})  residual={fp['residual']:.3g}  {fp['classification']}")
    _err(f"{len(rep['fixed_points'])} fixed point(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# omega


def _omega_opts(args, scen: Scenario) -> OmegaOptions:
    run = scen.config.run
    kw = {
        "max_steps": args.max_steps if args.max_steps is not None else run.max_steps,
        "tol": args.tol if args.tol is not None else run.tol,
        "max_period": args.max_period if args.max_period is not None else run.max_period,
        "boundary_tol": args.boundary_tol,
        "boundary_exit": args.boundary_exit,
        "polish": not args.no_polish,
    }
    kw["tail_window"] = max(1024, kw["max_period"] + 32)
    return OmegaOptions(**kw)


def cmd_omega(args) -> int:
    scen, code = _load(args.config)
    if scen is None:
        return code
    try:
        start = scen.require_initial()
    except ConfigInvalid as exc:
        print(_dump({"valid": False, "errors": exc.details}))
        return EXIT_INVALID
    rep = omega_limit(scen.operator, start, _omega_opts(args, scen))
    print(_dump(rep.as_dict()))
    _err(f"{rep.kind.value} after {rep.steps_used} steps")
    return EXIT_UNDETERMINED if rep.kind is LimitKind.UNDETERMINED else EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _run_one(cid: str, seed):
    return run_claim(cid, {} if seed is None else {"seed": seed})


def cmd_verify(args) -> int:
    ids = args.ids or list(REGISTRY)
    unknown = [i for i in ids if i not in REGISTRY]
    if unknown:
        _err(f"unknown claim id(s): {', '.join(unknown)}; known: {', '.join(REGISTRY)}")
        return EXIT_UNKNOWN_CLAIM
    jobs = args.jobs if args.jobs is not None else 1
    if jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_one, ids, [args.seed] * len(ids)))
    else:
        reports = [_run_one(i, args.seed) for i in ids]
    if args.json:
        print(_dump([r.as_dict() for r in reports]))
    else:
        for r in reports:
            tag = "PASS" if r.passed else ("FAIL (quarantined)" if r.quarantined else "FAIL")
            extra = " [evidence only]" if r.evidence_only else ""
            print(f"{tag:18s} {r.id:9s} {r.description}{extra}")
            for m in r.metrics:
                lim = "" if m.limit is None else f" {m.op} {m.limit:g}"
                print(f"    {'ok ' if m.ok else 'BAD'} {m.name} = {m.value:.6g}{lim}")
            for note in r.notes:
                print(f"    note: {note}")
    ok = suite_passed(reports)
    _err(f"{sum(r.passed for r in reports)}/{len(reports)} claims passed; suite {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_INVALID


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
        Scenario(cfg)
    except ConfigParseError as exc:
        _err(str(exc))
        return EXIT_PARSE
    except ConfigInvalid as exc:
        print(_dump({"valid": False, "errors": exc.details}))
        return EXIT_INVALID
    try:
        axes = [parse_axis(g) for g in args.grid]
        workers = args.jobs if args.jobs is not None else worker_count()
        opts = {"max_steps": args.max_steps}
        names, rows = run_sweep(cfg, axes, opts, workers)
    except BadGrid as exc:
        _err(f"bad grid: {exc}")
        return EXIT_INVALID
    n = max((len(r["limit"]) for r in rows), default=0)
    header = names + ["predicted", "predicted_attracting", "simulated", "period"] + [f"u_{k}" for k in range(1, n + 1)] + ["agree"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        lim = [fmt(v) for v in r["limit"]] + [""] * (n - len(r["limit"]))
        agree = "" if r["agree"] == "" else str(r["agree"]).lower()
        att = "" if r["attracting"] is None else str(r["attracting"]).lower()
        w.writerow([fmt(r["params"][k]) for k in names] + [r["predicted"], att, r["simulated"], r["period"]]
                   + lim + [agree])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    disagree = sum(1 for r in rows if r["agree"] is False)
    _err(f"{len(rows)} grid points, {disagree} disagreement(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gonodyn", description="Sex-linked quadratic population dynamics.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="write a trajectory")
    s.add_argument("config")
    s.add_argument("--steps", type=int)
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--level", choices=("full", "reduced", "normalized"), default="full")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fixed-points", help="list and classify fixed points")
    f.add_argument("config")
    f.add_argument("--json", action="store_true")
    f.add_argument("--seeds", type=int, default=200, help="Newton multistart seeds")
    f.set_defaults(func=cmd_fixed_points)

    o = sub.add_parser("omega", help="estimate the omega-limit set of the initial state")
    o.add_argument("config")
    o.add_argument("--max-steps", type=int)
    o.add_argument("--tol", type=float)
    o.add_argument("--max-period", type=int)
    o.add_argument("--boundary-tol", type=float)
    o.add_argument("--boundary-exit", action="store_true")
    o.add_argument("--no-polish", action="store_true")
    o.set_defaults(func=cmd_omega)

    c = sub.add_parser("verify", help="run numerical claim checks")
    c.add_argument("ids", nargs="*")
    c.add_argument("--seed", type=int)
    c.add_argument("--json", action="store_true")
    c.add_argument("--jobs", type=int)
    c.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="predicted vs simulated outcome over a parameter grid")
    w.add_argument("config")
    w.add_argument("--grid", action="append", required=True,
                   help="axis as name=start:stop:step or name=v1,v2 (repeatable); "
                        + "; ".join(f"{k}: {', '.join(v)}" for k, v in AXES.items()))
    w.add_argument("--out")
    w.add_argument("--jobs", type=int, help="worker processes (default: GONODYN_THREADS or CPU count)")
    w.add_argument("--max-steps", type=int, default=10_000)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GonodynError as exc:
        _err(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
