"""Parameter sweeps: predicted versus simulated outcome over a grid."""

from __future__ import annotations

import itertools
import os
import re
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from gonodyn.analysis import LimitKind, OmegaOptions, omega_limit, predict_limit_U, predict_limit_n2
from gonodyn.config import ConfigInvalid, Scenario, ScenarioConfig
from gonodyn.errors import GonodynError
from gonodyn.model import NormalizedState, ReducedState, normalize
from gonodyn.operators import QuadraticMap1D, build_U

AXES = {
    "N2": ("theta1", "theta2", "theta3", "a", "x0"),
    "C3": ("c", "a"),
    "U": ("a",),
}
AGREE_TOL = 1e-6
_RANGE = re.compile(r"^\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*$")


class BadGrid(GonodynError, ValueError):
    pass


def parse_axis(spec: str) -> tuple[str, list[float]]:
    """``name=start:stop:step`` (inclusive) or ``name=v1,v2,...``."""
    if "=" not in spec:
        raise BadGrid(f"grid axis {spec!r} must look like name=start:stop:step or name=v1,v2")
    name, _, body = spec.partition("=")
    name = name.strip()
    m = _RANGE.match(body)
    try:
        if m:
            start, stop, step = map(float, m.groups())
            if step <= 0 or stop < start:
                raise BadGrid(f"axis {name}: need step > 0 and stop >= start")
            count = int(round((stop - start) / step)) + 1
            values = [round(v, 12) for v in np.linspace(start, start + (count - 1) * step, count)]
        else:
            values = [float(v) for v in body.split(",") if v.strip()]
    except ValueError as exc:
        raise BadGrid(f"axis {name}: {exc}") from None
    if not values:
        raise BadGrid(f"axis {name} has no values")
    return name, values


def grid_points(axes: list[tuple[str, list[float]]]) -> list[dict]:
    names = [n for n, _ in axes]
    if len(set(names)) != len(names):
        raise BadGrid(f"repeated axis in {names}")
    return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in axes))]


def _family(cfg: ScenarioConfig) -> str:
    fam = cfg.tensor.family
    if fam in AXES:
        return fam
    if cfg.n == 2:
        return "N2"
    raise BadGrid("sweeps support the N2, C3 and U families (or any n=2 tensor)")


def _with_params(cfg: ScenarioConfig, params: dict) -> ScenarioConfig:
    data = cfg.model_dump(exclude_none=True)
    if "a" in params:
        data["rate"] = {"a": params["a"]}
    fam = _family(cfg)
    if fam == "N2":
        if cfg.tensor.family == "N2":
            t = list(cfg.tensor.theta)
        else:
            q = QuadraticMap1D.from_tensor(Scenario(cfg).tensor, 0.5)
            t = [q.theta1, q.theta2, q.theta3]
        for idx, key in enumerate(("theta1", "theta2", "theta3")):
            if key in params:
                t[idx] = params[key]
        data["tensor"] = {"family": "N2", "theta": t}
    elif fam == "C3" and "c" in params:
        data["tensor"] = {"family": "C3", "c": params["c"]}
    return ScenarioConfig.model_validate(data)


def _start(scen: Scenario, params: dict):
    a = scen.rate.a
    if "x0" in params:
        x0 = params["x0"]
        if not 0.0 <= x0 <= a:
            raise ConfigInvalid(f"x0={x0} outside [0, a={a}]")
        return ReducedState([x0, a - x0], a)
    init = scen.initial
    if init is None:
        raise ConfigInvalid("sweep needs an initial state or an x0 axis")
    if isinstance(init, NormalizedState):
        return ReducedState(a * init.u, a)
    if isinstance(init, ReducedState):
        return ReducedState(init.x / init.a * a, a)
    return ReducedState(a * init.x / init.x.sum(), a)


def evaluate_point(cfg_data: dict, params: dict, opts: dict) -> dict:
    """One grid point; top-level so it can run in a worker process."""
    base = ScenarioConfig.model_validate(cfg_data)
    fam = _family(base)
    row = {"params": params, "predicted": "", "attracting": None, "simulated": "", "period": 0,
           "limit": [], "agree": ""}
    try:
        cfg = _with_params(base, params)
        scen = Scenario(cfg)
        x0 = _start(scen, params)
    except GonodynError as exc:
        row["simulated"] = "invalid"
        row["error"] = str(exc)
        return row
    rep = omega_limit(scen.operator, normalize(x0), OmegaOptions(**opts))
    row["simulated"] = rep.kind.value
    row["period"] = rep.period
    row["limit"] = [float(v) for v in rep.points[0].u]
    a = scen.rate.a
    if fam == "N2":
        tmap = QuadraticMap1D.from_tensor(scen.tensor, a)
        pred = predict_limit_n2(tmap, float(x0.x[0]))
        row["predicted"] = pred.kind
        row["attracting"] = pred.attracting
        if pred.kind == "identity":
            agree = rep.kind is LimitKind.FIXED_POINT and abs(rep.points[0].u[0] * a - x0.x[0]) < AGREE_TOL
        elif pred.kind == "cycle":
            got = sorted(p.u[0] * a for p in rep.points)
            want = sorted(p[0] for p in pred.points)
            agree = rep.period == 2 and max(abs(g - w) for g, w in zip(got, want)) < AGREE_TOL
        else:
            agree = rep.kind is LimitKind.FIXED_POINT and \
                abs(rep.points[0].u[0] * a - pred.points[0][0]) < AGREE_TOL
        row["agree"] = bool(agree)
    elif fam == "C3":
        row["predicted"] = "cycle"
        row["agree"] = rep.kind is LimitKind.CYCLE and rep.period == 2
    else:
        t = cfg.tensor
        pred = predict_limit_U(build_U(cfg.n, t.j - 1, t.l - 1), x0)
        row["predicted"] = pred.kind
        row["agree"] = rep.kind is LimitKind.FIXED_POINT and \
            float(np.max(np.abs(a * rep.points[0].u - pred.points[0]))) < AGREE_TOL
    return row


def worker_count() -> int:
    env = os.environ.get("GONODYN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_sweep(cfg: ScenarioConfig, axes: list[tuple[str, list[float]]], opts: dict | None = None,
              workers: int | None = None) -> tuple[list[str], list[dict]]:
    """Evaluate every grid point; rows come back in grid order.

    Returns the axis names and one result dict per point.
    """
    fam = _family(cfg)
    names = [n for n, _ in axes]
    bad = [n for n in names if n not in AXES[fam]]
    if bad:
        raise BadGrid(f"axes {bad} not available for {fam}; choose from {list(AXES[fam])}")
    points = grid_points(axes)
    data = cfg.model_dump(exclude_none=True)
    opts = opts or {}
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(points) < 2:
        rows = [evaluate_point(data, p, opts) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate_point, [data] * len(points), points, [opts] * len(points),
                                 chunksize=max(1, len(points) // (4 * workers))))
    return names, rows
