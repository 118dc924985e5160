"""Problem data: units, system parameters, sampled profiles, case files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .bernstein import PiecewiseBernstein, fit_piecewise

MODES = ("cuc", "rocof-cuc", "cfcuc")


class CaseError(ValueError):
    """Raised for unreadable or invalid case data."""


@dataclass(frozen=True)
class UnitSpec:
    id: str
    p_min: float
    p_max: float
    ramp_up: float  # MW/h
    ramp_down: float  # MW/h, stored positive
    min_up: int
    min_down: int
    su_duration: int
    sd_duration: int
    inertia: float  # s
    base_power: float  # MVA
    marginal_cost: float  # EUR/MWh
    no_load_cost: float = 0.0  # EUR/h
    startup_cost: float = 0.0  # EUR
    initial_on: bool = False
    initial_hours: int = 1
    # output and slope at the start of hour 0; None leaves hour 0 unanchored
    initial_power: float | None = None
    initial_ramp: float | None = None

    @property
    def inertia_mws(self) -> float:
        return self.inertia * self.base_power

    def validate(self) -> None:
        def bad(fieldname: str, why: str):
            raise CaseError(f"unit {self.id!r}: {fieldname} {why}")

        for name in ("p_min", "p_max", "ramp_up", "ramp_down", "inertia", "base_power",
                     "marginal_cost", "no_load_cost", "startup_cost"):
            if not math.isfinite(getattr(self, name)):
                bad(name, "must be finite")
        if not 0 < self.p_min:
            bad("p_min", "must be positive")
        if self.p_min > self.p_max:
            bad("p_min", f"({self.p_min}) exceeds p_max ({self.p_max})")
        if self.ramp_up <= 0:
            bad("ramp_up", "must be positive")
        if self.ramp_down <= 0:
            bad("ramp_down", "must be positive (stored as a magnitude)")
        if self.min_up < 1:
            bad("min_up", "must be at least 1 h")
        if self.su_duration < 1:
            bad("su_duration", "must be at least 1 h")
        if self.sd_duration < 1:
            bad("sd_duration", "must be at least 1 h")
        if self.min_down < self.su_duration + self.sd_duration:
            bad("min_down", f"({self.min_down}) must cover su_duration + sd_duration "
                            f"({self.su_duration + self.sd_duration})")
        if self.inertia < 0:
            bad("inertia", "must be non-negative")
        if self.base_power <= 0:
            bad("base_power", "must be positive")
        for name in ("marginal_cost", "no_load_cost", "startup_cost"):
            if getattr(self, name) < 0:
                bad(name, "must be non-negative")
        if self.initial_hours < 1:
            bad("initial_hours", "must be at least 1")
        if self.initial_power is not None:
            if not self.initial_on and self.initial_power != 0:
                bad("initial_power", "must be 0 for a unit initially off")
            if self.initial_on and not self.p_min <= self.initial_power <= self.p_max:
                bad("initial_power", "must lie in [p_min, p_max] for a unit initially on")
        if self.initial_ramp is not None and self.initial_power is None:
            bad("initial_ramp", "needs initial_power")


@dataclass(frozen=True)
class SystemParams:
    f0: float = 50.0
    damping: float = 0.01
    t_g: float = 3.0
    rocof_limit: float = 2.0  # Hz/s
    qss_limit: float = 1.0  # Hz
    nadir_limit: float = 2.5  # Hz
    mode: str = "cuc"

    def validate(self) -> None:
        if not self.f0 > 0:
            raise CaseError("params: f0 must be positive")
        if not 0 <= self.damping <= 1:
            raise CaseError("params: damping must lie in [0, 1]")
        for name in ("t_g", "rocof_limit", "qss_limit", "nadir_limit"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise CaseError(f"params: {name} must be positive")
        if self.mode not in MODES:
            raise CaseError(f"params: mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class CaseInput:
    params: SystemParams
    units: tuple[UnitSpec, ...]
    demand_samples: tuple[float, ...]
    res_samples: tuple[float, ...]
    horizon: int
    name: str = "case"

    @property
    def samples_per_hour(self) -> int:
        return len(self.demand_samples) // self.horizon

    @property
    def unit_ids(self) -> list[str]:
        return [u.id for u in self.units]

    def unit(self, uid: str) -> UnitSpec:
        for u in self.units:
            if u.id == uid:
                return u
        raise KeyError(uid)

    def replace_params(self, **changes) -> "CaseInput":
        from dataclasses import replace

        return replace(self, params=replace(self.params, **changes))

    def validate(self) -> None:
        self.params.validate()
        if self.horizon < 1:
            raise CaseError("horizon must be at least 1 h")
        if not self.units:
            raise CaseError("case has no units")
        ids = [u.id for u in self.units]
        if len(set(ids)) != len(ids):
            raise CaseError(f"duplicate unit ids in {ids}")
        for u in self.units:
            u.validate()
        n = len(self.demand_samples)
        if n % self.horizon not in (0, 1) or n < self.horizon:
            raise CaseError(f"demand: {n} samples do not cover {self.horizon} h evenly")
        if len(self.res_samples) != n:
            raise CaseError(f"res: {len(self.res_samples)} samples, demand has {n}")
        if self.samples_per_hour < 4:
            raise CaseError(f"profiles: {self.samples_per_hour} samples per hour, need at least 4")
        d = np.asarray(self.demand_samples)
        r = np.asarray(self.res_samples)
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise CaseError("demand must be finite and positive everywhere")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise CaseError("res must be finite and non-negative everywhere")


@dataclass(frozen=True)
class ApproximatedProfiles:
    demand: PiecewiseBernstein
    res: PiecewiseBernstein

    @property
    def demand_coeffs(self) -> np.ndarray:
        return self.demand.coeff_matrix()

    @property
    def res_coeffs(self) -> np.ndarray:
        return self.res.coeff_matrix()


def approximate_profiles(case: CaseInput) -> ApproximatedProfiles:
    """Fit degree-3 hourly segments to demand and RES, c0/c1 continuous."""
    k = case.samples_per_hour
    if k < 4:
        raise CaseError(f"profiles: {k} samples per hour, need at least 4")
    demand = fit_piecewise(case.demand_samples, k, case.horizon, 3, name="demand")
    res = fit_piecewise(case.res_samples, k, case.horizon, 3, name="res")
    return ApproximatedProfiles(demand, res)


# ---------------------------------------------------------------------------
# case files

_UNIT_FIELDS = {f for f in UnitSpec.__dataclass_fields__}
_PARAM_FIELDS = {f for f in SystemParams.__dataclass_fields__}


def _read_profile(spec: Any, base: Path, what: str) -> tuple[float, ...]:
    if isinstance(spec, list):
        return tuple(float(x) for x in spec)
    if isinstance(spec, str):
        path = (base / spec) if not Path(spec).is_absolute() else Path(spec)
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise CaseError(f"{what}: cannot read {path}: {exc}") from exc
        if not rows or [h.strip() for h in rows[0]] != ["minute", "value_mw"]:
            raise CaseError(f"{what}: {path} must start with header 'minute,value_mw'")
        out = []
        for lineno, row in enumerate(rows[1:], start=2):
            try:
                out.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise CaseError(f"{what}: {path}:{lineno}: bad row {row!r}") from exc
        return tuple(out)
    raise CaseError(f"{what}: expected an inline array or a CSV path")


def case_from_dict(doc: dict, base: Path | str = ".") -> CaseInput:
    base = Path(base)
    try:
        params_doc = doc.get("params", {})
        unknown = set(params_doc) - _PARAM_FIELDS
        if unknown:
            raise CaseError(f"params: unknown fields {sorted(unknown)}")
        params = SystemParams(**params_doc)
        units = []
        for k, ud in enumerate(doc["units"]):
            unknown = set(ud) - _UNIT_FIELDS
            if unknown:
                raise CaseError(f"unit #{k} ({ud.get('id')!r}): unknown fields {sorted(unknown)}")
            try:
                units.append(UnitSpec(**ud))
            except TypeError as exc:
                raise CaseError(f"unit #{k} ({ud.get('id')!r}): {exc}") from exc
        demand = _read_profile(doc["demand"], base, "demand")
        res = _read_profile(doc["res"], base, "res") if "res" in doc else (0.0,) * len(demand)
        case = CaseInput(
            params=params,
            units=tuple(units),
            demand_samples=demand,
            res_samples=res,
            horizon=int(doc["horizon"]),
            name=str(doc.get("name", "case")),
        )
    except KeyError as exc:
        raise CaseError(f"case file misses required field {exc}") from exc
    case.validate()
    return case


def load_case(path: str | Path) -> CaseInput:
    """Read and validate a JSON case file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CaseError(f"cannot read case file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise CaseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}: {line.strip()!r}") from exc
    return case_from_dict(doc, path.parent)


def case_to_dict(case: CaseInput) -> dict:
    return {
        "name": case.name,
        "horizon": case.horizon,
        "params": asdict(case.params),
        "units": [asdict(u) for u in case.units],
        "demand": list(case.demand_samples),
        "res": list(case.res_samples),
    }


def dump_case(case: CaseInput, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=1) + "\n")
