"""Continuous-time unit commitment over hourly Bernstein coefficients.

Every unit's power is one cubic segment per hour.  The segment is the sum of
three coefficient blocks that are never non-zero together: the online
dispatch ``p`` (u = 1), the start-up trajectory ``su`` and the shut-down
trajectory ``sd`` (both while u = 0).  Continuity, ramping and the power
balance act on that merged sum.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bernstein import BernsteinSegment, PiecewiseBernstein
from .milp import EQ, GE, LE, Model, Solution, VarHandle
from .sysmodel import MODES, ApproximatedProfiles, CaseInput, UnitSpec

NB = 4  # coefficients per cubic segment
DEGREE = NB - 1


class ScheduleError(ValueError):
    """A solved schedule breaks one of its invariants."""


@dataclass
class BuildOptions:
    # cap reserve at what the unit can ramp within t_g; turns the headroom
    # equality into an inequality
    reserve_deliverability: bool = False
    curtailment_penalty: float = 0.0  # EUR/MWh


@dataclass
class UcVariables:
    units: list[str]
    horizon: int
    u: np.ndarray  # (T, I) VarHandle
    v: np.ndarray
    w: np.ndarray
    p: np.ndarray  # (NB, T, I) VarHandle
    r: np.ndarray
    su: np.ndarray  # (NB, T, I) VarHandle or None
    sd: np.ndarray
    curt: np.ndarray  # (NB, T)

    def power_terms(self, b: int, t: int, i: int, coef: float = 1.0) -> list[tuple[VarHandle, float]]:
        """Terms of the merged trajectory coefficient ``P[b, t, i]``."""
        out = [(self.p[b, t, i], coef)]
        if self.su[b, t, i] is not None:
            out.append((self.su[b, t, i], coef))
        if self.sd[b, t, i] is not None:
            out.append((self.sd[b, t, i], coef))
        return out


def _uid(unit: UnitSpec) -> str:
    return unit.id


def create_variables(model: Model, case: CaseInput, profiles: ApproximatedProfiles) -> UcVariables:
    T, units = case.horizon, case.units
    I = len(units)
    u = np.empty((T, I), dtype=object)
    v = np.empty((T, I), dtype=object)
    w = np.empty((T, I), dtype=object)
    p = np.empty((NB, T, I), dtype=object)
    r = np.empty((NB, T, I), dtype=object)
    su = np.full((NB, T, I), None, dtype=object)
    sd = np.full((NB, T, I), None, dtype=object)
    curt = np.empty((NB, T), dtype=object)
    res = profiles.res_coeffs
    for t in range(T):
        for i, unit in enumerate(units):
            lo_u, hi_u = _commitment_bounds(unit, t)
            u[t, i] = model.add_var(f"u_{unit.id}_t{t}", "binary", lo_u, hi_u)
            # no start-up whose synchronisation window would precede hour 0
            v[t, i] = model.add_var(f"v_{unit.id}_t{t}", "binary", 0.0, 1.0 if t >= unit.su_duration else 0.0)
            w[t, i] = model.add_var(f"w_{unit.id}_t{t}", "binary")
        for b in range(NB):
            for i, unit in enumerate(units):
                p[b, t, i] = model.add_var(f"p_{unit.id}_t{t}_b{b}", lo=0.0, hi=unit.p_max)
                r[b, t, i] = model.add_var(f"r_{unit.id}_t{t}_b{b}", lo=0.0, hi=unit.p_max)
                if _su_window_possible(unit, t, T):
                    su[b, t, i] = model.add_var(f"su_{unit.id}_t{t}_b{b}", lo=0.0, hi=unit.p_min)
                sd[b, t, i] = model.add_var(f"sd_{unit.id}_t{t}_b{b}", lo=0.0, hi=unit.p_min)
            curt[b, t] = model.add_var(f"curt_t{t}_b{b}", lo=0.0, hi=max(0.0, float(res[t, b])))
    return UcVariables([x.id for x in units], T, u, v, w, p, r, su, sd, curt)


def _commitment_bounds(unit: UnitSpec, t: int) -> tuple[float, float]:
    if unit.initial_on and t < unit.min_up - unit.initial_hours:
        return 1.0, 1.0
    if not unit.initial_on and t < unit.min_down - unit.initial_hours:
        return 0.0, 0.0
    return 0.0, 1.0


def _su_window_possible(unit: UnitSpec, s: int, T: int) -> bool:
    # hour s belongs to the window of a start-up at k in [s+1, s+SU], k >= SU, k < T
    return any(unit.su_duration <= k < T for k in range(s + 1, s + unit.su_duration + 1))


# ---------------------------------------------------------------------------
# constraint builders

def build_commitment_logic(model: Model, vars: UcVariables, case: CaseInput) -> None:
    for i, unit in enumerate(case.units):
        prev = 1.0 if unit.initial_on else 0.0
        for t in range(case.horizon):
            terms = [(vars.u[t, i], 1.0), (vars.v[t, i], -1.0), (vars.w[t, i], 1.0)]
            if t == 0:
                model.add_constraint(terms, EQ, prev, f"logic_{unit.id}_t{t}")
            else:
                model.add_constraint(terms + [(vars.u[t - 1, i], -1.0)], EQ, 0.0, f"logic_{unit.id}_t{t}")
            model.add_constraint([(vars.v[t, i], 1.0), (vars.w[t, i], 1.0)], LE, 1.0, f"vw_{unit.id}_t{t}")


def build_min_up_down(model: Model, vars: UcVariables, case: CaseInput) -> None:
    """Window form of minimum up and down times; initial carry-over is in the u bounds."""
    for i, unit in enumerate(case.units):
        for t in range(case.horizon):
            ups = [(vars.v[s, i], 1.0) for s in range(max(0, t - unit.min_up + 1), t + 1)]
            if len(ups) > 1:
                model.add_constraint(ups + [(vars.u[t, i], -1.0)], LE, 0.0, f"minup_{unit.id}_t{t}")
            dns = [(vars.w[s, i], 1.0) for s in range(max(0, t - unit.min_down + 1), t + 1)]
            model.add_constraint(dns + [(vars.u[t, i], 1.0)], LE, 1.0, f"mindn_{unit.id}_t{t}")


def build_continuity(model: Model, vars: UcVariables, case: CaseInput) -> None:
    """Zero- and first-order continuity of each merged trajectory."""
    for i, unit in enumerate(case.units):
        if unit.initial_power is not None:
            model.add_constraint(vars.power_terms(0, 0, i), EQ, unit.initial_power, f"init0_{unit.id}")
        if unit.initial_ramp is not None:
            model.add_constraint(vars.power_terms(1, 0, i, 3.0) + vars.power_terms(0, 0, i, -3.0),
                                 EQ, unit.initial_ramp, f"init1_{unit.id}")
        for t in range(1, case.horizon):
            model.add_constraint(
                vars.power_terms(0, t, i) + vars.power_terms(3, t - 1, i, -1.0), EQ, 0.0, f"c0_{unit.id}_t{t}"
            )
            model.add_constraint(
                vars.power_terms(1, t, i) + vars.power_terms(0, t, i, -1.0)
                + vars.power_terms(3, t - 1, i, -1.0) + vars.power_terms(2, t - 1, i),
                EQ, 0.0, f"c1_{unit.id}_t{t}",
            )


def build_su_sd_trajectories(model: Model, vars: UcVariables, case: CaseInput) -> None:
    T = case.horizon
    for i, unit in enumerate(case.units):
        pm, SU, SD = unit.p_min, unit.su_duration, unit.sd_duration
        for s in range(T):
            starts = [(vars.v[k, i], -pm) for k in range(s + 1, min(s + SU, T - 1) + 1)]
            stops = [(vars.w[k, i], -pm) for k in range(max(0, s - SD + 1), s + 1)]
            for b in range(NB):
                if vars.su[b, s, i] is not None:
                    model.add_constraint([(vars.su[b, s, i], 1.0)] + starts, LE, 0.0, f"suwin_{unit.id}_t{s}_b{b}")
                model.add_constraint([(vars.sd[b, s, i], 1.0)] + stops, LE, 0.0, f"sdwin_{unit.id}_t{s}_b{b}")
        for k in range(SU, T):
            model.add_constraint([(vars.su[0, k - SU, i], 1.0), (vars.v[k, i], pm)], LE, pm, f"sufirst_{unit.id}_t{k}")
            model.add_constraint([(vars.su[3, k - 1, i], 1.0), (vars.v[k, i], -pm)], GE, 0.0, f"sulast_{unit.id}_t{k}")
        for k in range(T):
            model.add_constraint([(vars.sd[0, k, i], 1.0), (vars.w[k, i], -pm)], GE, 0.0, f"sdfirst_{unit.id}_t{k}")
            if k + SD - 1 < T:
                model.add_constraint([(vars.sd[3, k + SD - 1, i], 1.0), (vars.w[k, i], pm)], LE, pm,
                                     f"sdlast_{unit.id}_t{k}")


def build_capacity_reserve(model: Model, vars: UcVariables, case: CaseInput, options: BuildOptions | None = None) -> None:
    """Output within [p_min, p_max] while on; reserve is the remaining headroom.

    Reserve carries no cost, so it is pinned to the headroom ``p_max*u - p``
    unless the deliverability cap is switched on.
    """
    options = options or BuildOptions()
    for t in range(case.horizon):
        for i, unit in enumerate(case.units):
            u = vars.u[t, i]
            for b in range(NB):
                p, r = vars.p[b, t, i], vars.r[b, t, i]
                model.add_constraint([(p, 1.0), (u, -unit.p_min)], GE, 0.0, f"pmin_{unit.id}_t{t}_b{b}")
                if options.reserve_deliverability:
                    model.add_constraint([(p, 1.0), (r, 1.0), (u, -unit.p_max)], LE, 0.0, f"pmax_{unit.id}_t{t}_b{b}")
                    cap = unit.ramp_up * case.params.t_g / 3600.0
                    model.add_constraint([(r, 1.0), (u, -cap)], LE, 0.0, f"rcap_{unit.id}_t{t}_b{b}")
                else:
                    model.add_constraint([(p, 1.0), (r, 1.0), (u, -unit.p_max)], EQ, 0.0, f"pmax_{unit.id}_t{t}_b{b}")


def build_ramping(model: Model, vars: UcVariables, case: CaseInput) -> None:
    """Degree-2 derivative coefficients ``3*(P[b] - P[b-1])`` within the ramp limits."""
    for t in range(case.horizon):
        for i, unit in enumerate(case.units):
            for b in range(1, NB):
                d = vars.power_terms(b, t, i, 3.0) + vars.power_terms(b - 1, t, i, -3.0)
                model.add_constraint(d, LE, unit.ramp_up, f"rup_{unit.id}_t{t}_b{b}")
                model.add_constraint(d, GE, -unit.ramp_down, f"rdn_{unit.id}_t{t}_b{b}")


def build_power_balance(model: Model, vars: UcVariables, case: CaseInput, profiles: ApproximatedProfiles) -> None:
    dem, res = profiles.demand_coeffs, profiles.res_coeffs
    for t in range(case.horizon):
        for b in range(NB):
            terms = []
            for i in range(len(case.units)):
                terms += vars.power_terms(b, t, i)
            terms.append((vars.curt[b, t], -1.0))
            model.add_constraint(terms, EQ, float(dem[t, b] - res[t, b]), f"bal_t{t}_b{b}")


def objective_terms(vars: UcVariables, case: CaseInput, options: BuildOptions | None = None):
    options = options or BuildOptions()
    terms = []
    for t in range(case.horizon):
        for i, unit in enumerate(case.units):
            terms.append((vars.v[t, i], unit.startup_cost))
            terms.append((vars.u[t, i], unit.no_load_cost))
            for b in range(NB):
                # exact hourly energy of a cubic is the coefficient mean
                terms += vars.power_terms(b, t, i, unit.marginal_cost / NB)
        if options.curtailment_penalty:
            for b in range(NB):
                terms.append((vars.curt[b, t], options.curtailment_penalty / NB))
    return terms


def build_objective(model: Model, vars: UcVariables, case: CaseInput, options: BuildOptions | None = None) -> None:
    model.set_objective(objective_terms(vars, case, options))


def assemble(
    case: CaseInput,
    profiles: ApproximatedProfiles,
    mode: str | None = None,
    nadir_model=None,
    options: BuildOptions | None = None,
) -> tuple[Model, UcVariables]:
    """Build the full model for ``mode`` (defaults to ``case.params.mode``)."""
    from . import freq

    mode = mode or case.params.mode
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    if mode == "cfcuc" and nadir_model is None:
        raise ValueError("mode cfcuc needs a trained NadirModel")
    model = Model(case.name[:8].upper() or "CUC")
    vars = create_variables(model, case, profiles)
    build_commitment_logic(model, vars, case)
    build_min_up_down(model, vars, case)
    build_su_sd_trajectories(model, vars, case)
    build_continuity(model, vars, case)
    build_capacity_reserve(model, vars, case, options)
    build_ramping(model, vars, case)
    build_power_balance(model, vars, case, profiles)
    if mode in ("rocof-cuc", "cfcuc"):
        freq.build_rocof_constraints(model, vars, case)
        freq.build_qss_constraints(model, vars, case, profiles)
    if mode == "cfcuc":
        freq.build_nadir_constraints(model, vars, case, nadir_model)
    build_objective(model, vars, case, options)
    return model.freeze(), vars


# ---------------------------------------------------------------------------
# schedules

@dataclass
class Schedule:
    units: list[str]
    u: np.ndarray  # (T, I) int
    v: np.ndarray
    w: np.ndarray
    power: list[PiecewiseBernstein]  # merged trajectory per unit
    reserve: list[PiecewiseBernstein]
    curtailment: PiecewiseBernstein
    objective: float
    breakdown: dict = field(default_factory=dict)
    status: str = "optimal"

    @property
    def horizon(self) -> int:
        return self.u.shape[0]

    def power_coeffs(self) -> np.ndarray:
        """(I, T, NB) merged power coefficients."""
        return np.stack([pw.coeff_matrix() for pw in self.power]) if self.power else np.zeros((0, 0, NB))

    def reserve_coeffs(self) -> np.ndarray:
        return np.stack([pw.coeff_matrix() for pw in self.reserve]) if self.reserve else np.zeros((0, 0, NB))


def cost_breakdown(case: CaseInput, u, v, power_coeffs) -> dict:
    energy = no_load = startup = 0.0
    for i, unit in enumerate(case.units):
        energy += unit.marginal_cost * float(power_coeffs[i].sum()) / NB
        no_load += unit.no_load_cost * float(np.sum(u[:, i]))
        startup += unit.startup_cost * float(np.sum(v[:, i]))
    return {"energy": energy, "no_load": no_load, "startup": startup, "total": energy + no_load + startup}


def _clean(x: float) -> float:
    return 0.0 if abs(x) < 1e-9 else x


def extract_schedule(solution: Solution, vars: UcVariables, case: CaseInput, tol: float = 1e-6) -> Schedule:
    if not solution.ok:
        raise ScheduleError(f"no schedule in a {solution.status} solution")
    val = solution.values
    T, I = vars.horizon, len(vars.units)
    u = np.array([[round(val[vars.u[t, i].id]) for i in range(I)] for t in range(T)], dtype=int)
    v = np.array([[round(val[vars.v[t, i].id]) for i in range(I)] for t in range(T)], dtype=int)
    w = np.array([[round(val[vars.w[t, i].id]) for i in range(I)] for t in range(T)], dtype=int)
    P = np.zeros((I, T, NB))
    R = np.zeros((I, T, NB))
    for i in range(I):
        for t in range(T):
            for b in range(NB):
                P[i, t, b] = _clean(sum(val[h.id] * c for h, c in vars.power_terms(b, t, i)))
                R[i, t, b] = _clean(val[vars.r[b, t, i].id])
    C = np.array([[_clean(val[vars.curt[b, t].id]) for b in range(NB)] for t in range(T)])
    sched = Schedule(
        units=list(vars.units),
        u=u, v=v, w=w,
        power=[_piecewise(P[i]) for i in range(I)],
        reserve=[_piecewise(R[i]) for i in range(I)],
        curtailment=_piecewise(C),
        objective=float(solution.objective),
        breakdown=cost_breakdown(case, u, v, P),
        status=solution.status,
    )
    verify_schedule(sched, case, tol)
    return sched


def _piecewise(coeffs: np.ndarray) -> PiecewiseBernstein:
    return PiecewiseBernstein(tuple(BernsteinSegment(coeffs[t], t) for t in range(len(coeffs))))


def verify_schedule(sched: Schedule, case: CaseInput, tol: float = 1e-6) -> None:
    """Raise ``ScheduleError`` naming unit, hour and constraint on the first violation.

    Bounds that scale with a binary are checked at ``tol * max(1, p_max)``
    since the solver accepts binaries within its integrality tolerance.
    """
    for i, unit in enumerate(case.units):
        pw = sched.power[i]
        btol = tol * max(1.0, unit.p_max)
        c0, c1 = pw.continuity_residuals()
        for k in range(len(c0)):
            if abs(c0[k]) > tol:
                raise ScheduleError(f"unit {unit.id} hour {k + 1}: zero-order continuity off by {c0[k]:.3g} MW")
            if abs(c1[k]) > tol:
                raise ScheduleError(f"unit {unit.id} hour {k + 1}: first-order continuity off by {c1[k]:.3g} MW")
        P = pw.coeff_matrix()
        R = sched.reserve[i].coeff_matrix()
        for t in range(sched.horizon):
            if P[t].min() < -btol or P[t].max() > unit.p_max + btol:
                raise ScheduleError(f"unit {unit.id} hour {t}: power outside [0, p_max]")
            if sched.u[t, i] and P[t].min() < unit.p_min - btol:
                raise ScheduleError(f"unit {unit.id} hour {t}: online power below p_min")
            if R[t].min() < -btol:
                raise ScheduleError(f"unit {unit.id} hour {t}: negative reserve")
            slope = 3 * np.diff(P[t])
            if slope.max() > unit.ramp_up + tol or slope.min() < -unit.ramp_down - tol:
                raise ScheduleError(f"unit {unit.id} hour {t}: ramp limit exceeded")


SCHEDULE_CSV = "schedule.csv"
SCHEDULE_JSON = "schedule.json"


def write_schedule(sched: Schedule, out_dir: str | Path, extra: dict | None = None) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    P, R = sched.power_coeffs(), sched.reserve_coeffs()
    csv_path = out / SCHEDULE_CSV
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["unit", "hour", "b", "coeff_mw", "reserve_mw"])
        for i, uid in enumerate(sched.units):
            for t in range(sched.horizon):
                for b in range(NB):
                    wr.writerow([uid, t, b, repr(float(P[i, t, b])), repr(float(R[i, t, b]))])
    summary = {
        "status": sched.status,
        "objective": sched.objective,
        "breakdown": sched.breakdown,
        "units": sched.units,
        "commitment": sched.u.tolist(),
        "startup": sched.v.tolist(),
        "shutdown": sched.w.tolist(),
        "curtailment": sched.curtailment.coeff_matrix().tolist(),
    }
    if extra:
        summary.update(extra)
    json_path = out / SCHEDULE_JSON
    json_path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return csv_path, json_path


def read_schedule(csv_path: str | Path, json_path: str | Path | None = None) -> Schedule:
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_name(SCHEDULE_JSON)
    summary = json.loads(json_path.read_text())
    units = list(summary["units"])
    u = np.array(summary["commitment"], dtype=int).reshape(-1, len(units))
    T = u.shape[0]
    P = np.zeros((len(units), T, NB))
    R = np.zeros((len(units), T, NB))
    index = {uid: i for i, uid in enumerate(units)}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["unit"] not in index:
                raise ScheduleError(f"{csv_path}: unit {row['unit']!r} not in summary")
            i, t, b = index[row["unit"]], int(row["hour"]), int(row["b"])
            P[i, t, b] = float(row["coeff_mw"])
            R[i, t, b] = float(row["reserve_mw"])
    curt = np.array(summary.get("curtailment") or np.zeros((T, NB)), dtype=float).reshape(T, NB)
    return Schedule(
        units=units,
        u=u,
        v=np.array(summary.get("startup", np.zeros_like(u)), dtype=int).reshape(u.shape),
        w=np.array(summary.get("shutdown", np.zeros_like(u)), dtype=int).reshape(u.shape),
        power=[_piecewise(P[i]) for i in range(len(units))],
        reserve=[_piecewise(R[i]) for i in range(len(units))],
        curtailment=_piecewise(curt),
        objective=float(summary.get("objective", math.nan)),
        breakdown=summary.get("breakdown", {}),
        status=summary.get("status", "optimal"),
    )
