"""JSON scenario files.

Indices in files are 1-based; everything returned from here is 0-based.
A minimal file::

    {"n": 3,
     "rate": {"a": 0.5},
     "tensor": {"family": "C3", "c": 0.4},
     "initial": {"level": "normalized", "u": [0.2, 0.3, 0.5]},
     "run": {"steps": 10}}

``tensor`` takes exactly one of ``dense`` (an n x n x n nested list),
``sparse`` (``[i, p, k, value]`` rows, unlisted entries zero) or
``family``.  Families and their parameters:

* ``C1``: ``entries`` as for ``sparse``; diagonal pairs default to ``theta_iii = 1``.
* ``C2``: ``m`` and ``cross`` (``[i, p, k, value]`` rows for female in
  ``2..m``, male in ``m+1..n``); optional ``mirror`` rows, otherwise the
  transpose of ``cross``.
* ``C3``: ``c``.
* ``U``: ``j`` and ``l``.
* ``N2``: ``theta = [theta1, theta2, theta3]``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from gonodyn.errors import GonodynError, IndexOutOfRange, InvalidParams
from gonodyn.model import (
    FullState,
    HeredityTensor,
    MixingRate,
    NormalizedState,
    ReducedState,
    TemperatureParams,
    TensorReport,
    derive_rates,
    validate_tensor,
)
from gonodyn.operators import (
    GonosomalOperator,
    build_C1,
    build_C2,
    build_C3,
    build_U,
    n2_tensor,
)


class ConfigParseError(GonodynError):
    """The file is not readable JSON."""


class ConfigInvalid(GonodynError):
    """The JSON document does not describe a valid scenario.

    ``details`` holds JSON-ready descriptions of every problem found.
    """

    def __init__(self, message, details=None):
        self.details = details or [{"error": message}]
        super().__init__(message)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TemperatureBlock(_Strict):
    tau: tuple[float, float, float]
    mu1: float
    mu2: float


class RateBlock(_Strict):
    a: float | None = None
    temperature: TemperatureBlock | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.a is None) == (self.temperature is None):
            raise ValueError("rate needs exactly one of 'a' or 'temperature'")
        return self


Entry = tuple[int, int, int, float]


class TensorBlock(_Strict):
    dense: list[list[list[float]]] | None = None
    sparse: list[Entry] | None = None
    family: Literal["C1", "C2", "C3", "U", "N2"] | None = None
    entries: list[Entry] | None = None
    m: int | None = None
    cross: list[Entry] | None = None
    mirror: list[Entry] | None = None
    c: float | None = None
    j: int | None = None
    l: int | None = None
    theta: tuple[float, float, float] | None = None

    @model_validator(mode="after")
    def _one_source(self):
        given = [k for k in ("dense", "sparse", "family") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"tensor needs exactly one of dense, sparse, family; got {given or 'none'}")
        need = {"C1": ["entries"], "C2": ["m", "cross"], "C3": ["c"], "U": ["j", "l"], "N2": ["theta"]}
        if self.family:
            missing = [k for k in need[self.family] if getattr(self, k) is None]
            if missing:
                raise ValueError(f"family {self.family} needs {missing}")
        return self


class InitialBlock(_Strict):
    level: Literal["full", "reduced", "normalized"]
    x: list[float] | None = None
    y: list[float] | None = None
    u: list[float] | None = None

    @model_validator(mode="after")
    def _fields_for_level(self):
        need = {"full": {"x", "y"}, "reduced": {"x"}, "normalized": {"u"}}[self.level]
        have = {k for k in ("x", "y", "u") if getattr(self, k) is not None}
        if have != need:
            raise ValueError(f"level {self.level!r} takes exactly {sorted(need)}, got {sorted(have)}")
        return self


class RunBlock(_Strict):
    steps: int = Field(100, ge=1)
    tol: float = Field(1e-9, gt=0)
    max_period: int = Field(64, ge=2)
    max_steps: int = Field(100_000, ge=1)
    seed: int = 0


class ScenarioConfig(_Strict):
    n: int = Field(ge=1)
    rate: RateBlock
    tensor: TensorBlock
    initial: InitialBlock | None = None
    run: RunBlock = RunBlock()


def _dense_from_entries(n: int, entries, label: str) -> np.ndarray:
    theta = np.zeros((n, n, n))
    for i, p, k, value in entries:
        for idx in (i, p, k):
            if not 1 <= idx <= n:
                raise IndexOutOfRange(f"{label} index {idx} outside 1..{n}")
        theta[i - 1, p - 1, k - 1] = value
    return theta


def _family_tensor(n: int, t: TensorBlock) -> HeredityTensor:
    if t.family == "C1":
        values: dict = {}
        for i, p, k, value in t.entries:
            for idx in (i, p, k):
                if not 1 <= idx <= n:
                    raise IndexOutOfRange(f"C1 index {idx} outside 1..{n}")
            values.setdefault((i - 1, p - 1), {})[k - 1] = value
        return build_C1(n, values)
    if t.family == "C2":
        m = t.m
        if not 2 <= m <= n - 1:
            raise InvalidParams(f"C2 needs 2 <= m <= n-1, got m={m}, n={n}")

        def block(entries, rows, cols, label):
            out = np.zeros((len(rows), len(cols), n))
            for i, p, k, value in entries:
                if i not in rows or p not in cols or not 1 <= k <= n:
                    raise IndexOutOfRange(f"{label} entry ({i},{p},{k}) outside its block")
                out[rows.index(i), cols.index(p), k - 1] = value
            return out

        F, M = list(range(2, m + 1)), list(range(m + 1, n + 1))
        cross = block(t.cross, F, M, "cross")
        mirror = None if t.mirror is None else block(t.mirror, M, F, "mirror")
        return build_C2(n, m, cross, mirror)
    if t.family == "C3":
        if n != 3:
            raise InvalidParams(f"C3 is a 3-type family, config says n={n}")
        return build_C3(t.c)
    if t.family == "U":
        for name, idx in (("j", t.j), ("l", t.l)):
            if not 1 <= idx <= n:
                raise IndexOutOfRange(f"U parameter {name}={idx} outside 1..{n}")
        return build_U(n, t.j - 1, t.l - 1).tensor()
    if n != 2:
        raise InvalidParams(f"N2 is a 2-type family, config says n={n}")
    return n2_tensor(*t.theta)


def _raw_tensor(cfg: ScenarioConfig) -> np.ndarray | None:
    """The tensor as an array when given literally, else ``None``."""
    n, t = cfg.n, cfg.tensor
    if t.dense is not None:
        arr = np.asarray(t.dense, dtype=float)
        if arr.shape != (n, n, n):
            raise InvalidParams(f"dense tensor must have shape {(n, n, n)}, got {arr.shape}")
        return arr
    if t.sparse is not None:
        return _dense_from_entries(n, t.sparse, "sparse")
    return None


def load_config(path) -> ScenarioConfig:
    """Parse and schema-check a scenario file.

    Raises:
        ConfigParseError: unreadable file or malformed JSON.
        ConfigInvalid: the document does not match the schema.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    return parse_config(data)


def parse_config(data) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        details = [{"where": ".".join(map(str, e["loc"])), "error": e["msg"]} for e in exc.errors()]
        raise ConfigInvalid("config does not match the schema", details) from None


class Scenario:
    """A validated config turned into library objects (0-based)."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.rate = self._rate()
        self.tensor = self._tensor()
        self.operator = GonosomalOperator(self.tensor, self.rate)
        self.initial = self._initial()

    @property
    def n(self) -> int:
        return self.config.n

    def _rate(self) -> MixingRate:
        r = self.config.rate
        try:
            if r.a is not None:
                return MixingRate(r.a)
            return derive_rates(TemperatureParams.from_mu(r.temperature.tau, r.temperature.mu1,
                                                          r.temperature.mu2))
        except GonodynError as exc:
            raise ConfigInvalid(str(exc), [{"where": "rate", "error": str(exc)}]) from None

    def _tensor(self) -> HeredityTensor:
        try:
            raw = _raw_tensor(self.config)
            if raw is not None:
                report = validate_tensor(raw)
                if not report.ok:
                    raise ConfigInvalid("heredity tensor failed validation", _tensor_details(report))
                return HeredityTensor(raw)
            return _family_tensor(self.n, self.config.tensor)
        except ConfigInvalid:
            raise
        except GonodynError as exc:
            report = getattr(exc, "report", None)
            details = _tensor_details(report) if report else [{"where": "tensor", "error": str(exc)}]
            raise ConfigInvalid(str(exc), details) from None

    def _initial(self):
        init = self.config.initial
        if init is None:
            return None
        try:
            for name in ("x", "y", "u"):
                vec = getattr(init, name)
                if vec is not None and len(vec) != self.n:
                    raise InvalidParams(f"initial.{name} has {len(vec)} entries, expected n={self.n}")
            if init.level == "full":
                return FullState(init.x, init.y)
            if init.level == "reduced":
                return ReducedState(init.x, self.rate.a)
            return NormalizedState(init.u)
        except GonodynError as exc:
            raise ConfigInvalid(str(exc), [{"where": "initial", "error": str(exc)}]) from None

    def require_initial(self):
        if self.initial is None:
            raise ConfigInvalid("this command needs an 'initial' block",
                                [{"where": "initial", "error": "missing"}])
        return self.initial


def _tensor_details(report: TensorReport) -> list[dict]:
    d = report.as_dict()
    if d["shape_error"]:
        return [{"where": "tensor", "error": d["shape_error"]}]
    return [{"where": "tensor", "error": "row not stochastic", **v} for v in d["violations"]]


def load_scenario(path) -> Scenario:
    return Scenario(load_config(path))
